#include "tja/optimizer.hpp"

#include "tja/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

namespace tja {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Vec2 incenter(const TargetTriangle& tri) {
  // Weights are the lengths of the opposite sides.
  const double a = tri.side_length(Side::s23);
  const double b = tri.side_length(Side::s31);
  const double c = tri.side_length(Side::s12);
  return (a * tri.vertex(0) + b * tri.vertex(1) + c * tri.vertex(2)) / (a + b + c);
}

double inradius(const TargetTriangle& tri) {
  const double per = tri.side_length(Side::s12) + tri.side_length(Side::s23) + tri.side_length(Side::s31);
  return 2.0 * tri.area() / per;
}

bool admissible(const TargetTriangle& tri, Vec2 p, double margin) {
  for (Side s : kSides)
    if (project_to_side(tri, p, s).height < margin) return false;
  return tri.admits_triple_point(p);
}

int wide_vertex(const TargetTriangle& tri) {
  int w = 0;
  for (int i = 1; i < 3; ++i)
    if (tri.angle(i) > tri.angle(w)) w = i;
  return w;
}

// Point on the interior bisector at vertex i, a fraction of the way to the
// opposite side. Its direction makes an angle below pi/2 with both sides.
Vec2 bisector_point(const TargetTriangle& tri, int i, double fraction) {
  const Vec2 u = tri.direction(i, (i + 1) % 3) + tri.direction(i, (i + 2) % 3);
  const Vec2 d = u / norm(u);
  // Distance along d to the opposite side.
  const Side opposite = side_starting_at((i + 1) % 3);
  const SideFrame& f = tri.frame(opposite);
  const double h = dot(tri.vertex(i) - f.origin, f.normal);
  const double reach = h / -dot(d, f.normal);
  return tri.vertex(i) + fraction * reach * d;
}

std::vector<double> connection_params(const Connection& c, int knots) {
  std::vector<double> x{c.p.x, c.p.y};
  x.resize(2 + 3 * static_cast<std::size_t>(knots), 0.0);
  return x;
}

// Branch i: knots at chord fractions m / (k + 1) shifted along the chord
// normal by offset * |alpha_i - p|.
Connection build_connection(const TargetTriangle& tri, const std::vector<double>& x, int knots,
                            double scale) {
  Connection c;
  c.p = {x[0], x[1]};
  for (int i = 0; i < 3; ++i) {
    const Vec2 a = tri.vertex(i);
    const Vec2 chord = c.p - a;
    const double len = norm(chord);
    const Vec2 n = len > 0 ? perp(chord) / len : Vec2{0, 0};
    auto& b = c.branches[static_cast<std::size_t>(i)];
    b.push_back(a);
    for (int m = 1; m <= knots; ++m) {
      const double t = static_cast<double>(m) / (knots + 1);
      const double o = x[2 + static_cast<std::size_t>(i * knots + m - 1)];
      b.push_back(a + t * chord + (scale * o * len) * n);
    }
    b.push_back(c.p);
  }
  return c;
}

}  // namespace

void OptimizationSpec::validate() const {
  if (knots_per_branch < 0) throw ValidationError("knots_per_branch must be >= 0");
  if (grid_resolution < 1) throw ValidationError("grid_resolution must be >= 1");
  if (multistarts < 0) throw ValidationError("multistarts must be >= 0");
  if (!(local_tolerance > 0.0)) throw ValidationError("local_tolerance must be positive");
  if (max_evaluations < 1) throw ValidationError("max_evaluations must be >= 1");
  if (!(boundary_margin >= 0.0)) throw ValidationError("boundary_margin must be >= 0");
  evaluation.solver.validate();
}

Connection steiner_initial(const TargetTriangle& tri) {
  const double margin = 1e-6 * tri.diameter();
  const int w = wide_vertex(tri);
  Vec2 p;
  if (tri.angle(w) < 2.0 * std::numbers::pi / 3.0) {
    // Barycentric weights a / sin(A + pi/3), a the side opposite vertex A.
    std::array<double, 3> wt{};
    for (int i = 0; i < 3; ++i) {
      const double opposite = tri.side_length(side_starting_at((i + 1) % 3));
      wt[static_cast<std::size_t>(i)] = opposite / std::sin(tri.angle(i) + std::numbers::pi / 3.0);
    }
    const double sum = wt[0] + wt[1] + wt[2];
    p = (wt[0] * tri.vertex(0) + wt[1] * tri.vertex(1) + wt[2] * tri.vertex(2)) / sum;
  } else {
    p = bisector_point(tri, w, 0.1);
  }
  if (!admissible(tri, p, margin)) {
    // Pull towards a point of the admissible region until p enters it.
    const Vec2 safe = bisector_point(tri, w, 0.1);
    double lo = 0.0;
    double hi = 1.0;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      (admissible(tri, safe + mid * (p - safe), margin) ? lo : hi) = mid;
    }
    p = safe + lo * (p - safe);
  }
  return Connection::straight(tri, p);
}

bool better_candidate(double g_a, const Connection& a, double g_b, const Connection& b) {
  if (std::abs(g_a - g_b) > 1e-9 || !std::isfinite(g_a) || !std::isfinite(g_b)) return g_a < g_b;
  const double la = connection_length(a);
  const double lb = connection_length(b);
  if (la != lb) return la < lb;
  if (a.p.x != b.p.x) return a.p.x < b.p.x;
  return a.p.y < b.p.y;
}

std::vector<Vec2> barycentric_lattice(const TargetTriangle& tri, int resolution, double margin) {
  if (resolution < 1) throw ValidationError("lattice resolution must be >= 1");
  const double m = margin * tri.diameter();
  const Vec2 c = incenter(tri);
  // The homothety about the incenter with this ratio moves every side
  // inwards by exactly m.
  const double ratio = 1.0 - m / inradius(tri);
  std::vector<Vec2> out;
  for (int i = resolution; i >= 0; --i)
    for (int j = resolution - i; j >= 0; --j) {
      const int k = resolution - i - j;
      const Vec2 q = (i * tri.vertex(0) + j * tri.vertex(1) + k * tri.vertex(2)) / resolution;
      const Vec2 p = c + ratio * (q - c);
      if (tri.admits_triple_point(p)) out.push_back(p);
    }
  return out;
}

GridSearchResult brute_force_p_grid(int resolution, const SourceJunction& source,
                                    const TargetTriangle& triangle, const EvaluationConfig& config) {
  if (resolution < 5) throw ValidationError("brute_force_p_grid needs resolution >= 5");
  EvaluationConfig cfg = config;
  cfg.keep_fields = false;
  GridSearchResult out;
  out.best_total = kInf;
  bool found = false;
  for (const Vec2& p : barycentric_lattice(triangle, resolution)) {
    const Connection c = Connection::straight(triangle, p);
    double g = kInf;
    try {
      g = evaluate(c, source, triangle, cfg).total;
    } catch (const Error&) {
      ++out.skipped;
      continue;
    }
    ++out.evaluated;
    if (!found || better_candidate(g, c, out.best_total, out.best)) {
      found = true;
      out.best_total = g;
      out.best = c;
      out.best_p = p;
    }
  }
  if (!found) throw NonConvergence("brute_force_p_grid: no lattice point could be evaluated");
  return out;
}

SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                          std::vector<double> x0, const std::vector<double>& steps, double x_tol,
                          int max_evaluations) {
  const std::size_t n = x0.size();
  std::vector<std::vector<double>> pts(n + 1, x0);
  std::vector<double> val(n + 1);
  SimplexResult res;
  auto eval = [&](const std::vector<double>& x) {
    ++res.evaluations;
    return f(x);
  };
  val[0] = eval(pts[0]);
  for (std::size_t k = 0; k < n; ++k) {
    pts[k + 1][k] += steps[k];
    val[k + 1] = eval(pts[k + 1]);
  }
  std::vector<std::size_t> order(n + 1);
  auto combine = [&](const std::vector<double>& c, const std::vector<double>& w, double t) {
    std::vector<double> out(n);
    for (std::size_t k = 0; k < n; ++k) out[k] = c[k] + t * (w[k] - c[k]);
    return out;
  };
  for (;;) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return val[a] < val[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second = order[n - 1];
    double spread = 0.0;
    for (std::size_t v = 0; v <= n; ++v)
      for (std::size_t k = 0; k < n; ++k) spread = std::max(spread, std::abs(pts[v][k] - pts[best][k]));
    if (spread <= x_tol) {
      res.converged = true;
      break;
    }
    if (res.evaluations >= max_evaluations) break;

    std::vector<double> centroid(n, 0.0);
    for (std::size_t v = 0; v <= n; ++v)
      if (v != worst)
        for (std::size_t k = 0; k < n; ++k) centroid[k] += pts[v][k] / static_cast<double>(n);
    const auto xr = combine(centroid, pts[worst], -1.0);
    const double fr = eval(xr);
    if (fr < val[best]) {
      const auto xe = combine(centroid, pts[worst], -2.0);
      const double fe = eval(xe);
      if (fe < fr) {
        pts[worst] = xe;
        val[worst] = fe;
      } else {
        pts[worst] = xr;
        val[worst] = fr;
      }
      continue;
    }
    if (fr < val[second]) {
      pts[worst] = xr;
      val[worst] = fr;
      continue;
    }
    // Contract towards the better of the reflected and worst points.
    const bool outside = fr < val[worst];
    const auto xc = combine(centroid, outside ? xr : pts[worst], 0.5);
    const double fc = eval(xc);
    if (fc < (outside ? fr : val[worst])) {
      pts[worst] = xc;
      val[worst] = fc;
      continue;
    }
    for (std::size_t v = 0; v <= n; ++v) {
      if (v == best) continue;
      pts[v] = combine(pts[best], pts[v], 0.5);
      val[v] = eval(pts[v]);
    }
  }
  const auto it = std::min_element(val.begin(), val.end());
  res.x = pts[static_cast<std::size_t>(it - val.begin())];
  res.value = *it;
  return res;
}

OptimizationResult minimize(const OptimizationSpec& spec, const SourceJunction& source,
                            const TargetTriangle& triangle) {
  spec.validate();
  source.validate();
  EvaluationConfig cfg = spec.evaluation;
  cfg.keep_fields = false;
  Evaluator evaluator(triangle, source, cfg);
  evaluator.set_warm_start(spec.warm_start);
  const double diam = triangle.diameter();
  const double margin = spec.boundary_margin * diam;
  std::mt19937_64 rng(spec.seed);

  OptimizationResult out;
  double best_total = kInf;
  bool budget_hit = false;

  // Evaluates a connection, records it, and keeps the best.
  auto consider = [&](const Connection& c) -> double {
    if (out.candidates >= static_cast<std::size_t>(spec.max_evaluations)) {
      budget_hit = true;
      return kInf;
    }
    ++out.candidates;
    TraceEntry entry{static_cast<int>(out.candidates), c.p, kInf, false};
    try {
      const GEvaluation e = evaluator(c);
      entry.total = e.total;
      if (out.history.empty() || better_candidate(e.total, c, best_total, out.best)) {
        entry.improved = true;
        best_total = e.total;
        out.best = c;
        out.evaluation = e;
        out.history.push_back(std::min(e.total, out.history.empty() ? kInf : out.history.back()));
      }
    } catch (const Error&) {
      ++out.failures;
    }
    out.trace.push_back(entry);
    return entry.total;
  };

  const int k = spec.knots_per_branch;
  // Largest fraction of the requested offsets that keeps the connection
  // valid; p itself must already be admissible.
  auto objective = [&](const std::vector<double>& x) -> double {
    const Vec2 p{x[0], x[1]};
    if (!admissible(triangle, p, margin)) return kInf;
    Connection c = build_connection(triangle, x, k, 1.0);
    if (k > 0 && !validate_connection(c, triangle).ok()) {
      double lo = 0.0;
      double hi = 1.0;
      for (int it = 0; it < 30; ++it) {
        const double mid = 0.5 * (lo + hi);
        (validate_connection(build_connection(triangle, x, k, mid), triangle).ok() ? lo : hi) = mid;
      }
      c = build_connection(triangle, x, k, lo);
    }
    if (!validate_connection(c, triangle).ok()) return kInf;
    return consider(c);
  };

  // (a) Coarse straight-branch search plus the Steiner start.
  const Connection steiner = steiner_initial(triangle);
  consider(steiner);
  for (const Vec2& p : barycentric_lattice(triangle, spec.grid_resolution, spec.boundary_margin))
    if (admissible(triangle, p, margin)) consider(Connection::straight(triangle, p));
  std::vector<Vec2> starts{out.history.empty() ? steiner.p : out.best.p};

  // (b) Local refinement. Straight branches first, then the knot offsets
  // from the straight optimum.
  auto random_start = [&]() {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int attempt = 0; attempt < 10000; ++attempt) {
      double a = u(rng);
      double b = u(rng);
      if (a + b > 1.0) {
        a = 1.0 - a;
        b = 1.0 - b;
      }
      const Vec2 p = triangle.vertex(0) + a * (triangle.vertex(1) - triangle.vertex(0)) +
                     b * (triangle.vertex(2) - triangle.vertex(0));
      if (admissible(triangle, p, margin)) return p;
    }
    return steiner.p;
  };
  for (int m = 1; m < spec.multistarts; ++m) starts.push_back(random_start());

  bool all_converged = true;
  const int straight_knots = 0;
  for (std::size_t m = 0; m < starts.size() && static_cast<int>(m) < spec.multistarts; ++m) {
    auto straight = [&](const std::vector<double>& x) {
      if (!admissible(triangle, {x[0], x[1]}, margin)) return kInf;
      return consider(build_connection(triangle, x, straight_knots, 0.0));
    };
    const double step = 0.05 * diam;
    const auto r = nelder_mead(straight, {starts[m].x, starts[m].y}, {step, step},
                               spec.local_tolerance * diam,
                               spec.max_evaluations - static_cast<int>(out.candidates));
    all_converged = all_converged && r.converged;
    if (budget_hit) break;
  }
  if (k > 0 && !budget_hit && !out.history.empty()) {
    std::vector<double> x0 = connection_params(out.best, k);
    std::vector<double> steps(x0.size(), 0.05);
    steps[0] = steps[1] = 0.02 * diam;
    const auto r = nelder_mead(objective, x0, steps, spec.local_tolerance,
                               spec.max_evaluations - static_cast<int>(out.candidates));
    all_converged = all_converged && r.converged;
  }

  if (out.history.empty())
    throw NonConvergence("minimize: every candidate failed (" + std::to_string(out.failures) + " failures)");
  out.termination = budget_hit ? "evaluation budget exhausted"
                    : all_converged ? "converged"
                                    : "local search stopped before reaching the tolerance";
  return out;
}

}  // namespace tja
