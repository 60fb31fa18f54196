#include "tja/plateau.hpp"

#include "tja/error.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <utility>

namespace tja {

void SolverConfig::validate() const {
  if (!(tolerance > 0.0)) throw ValidationError("solver tolerance must be positive");
  if (max_iterations < 1) throw ValidationError("solver max_iterations must be >= 1");
  if (max_backtracks < 0) throw ValidationError("solver max_backtracks must be >= 0");
  if (continuation_steps < 1) throw ValidationError("solver continuation_steps must be >= 1");
  if (!(stage_tolerance > 0.0)) throw ValidationError("solver stage_tolerance must be positive");
}

void PlateauProblem::validate() const {
  if (!(width > 0.0) || !(height > 0.0))
    throw ValidationError("rectangle width and height must be positive");
  if (grid.ns < 8 || grid.nt < 8) throw ValidationError("grid must have at least 8 x 8 cells");
  if (data.pieces() == 0) throw ValidationError("plateau problem has no boundary data");
  if (std::abs(data.length() - width) > 1e-9 * width)
    throw ValidationError("boundary data length does not match the rectangle width");
  const double tol = 1e-12 * std::max(1.0, data.max_value());
  if (std::abs(data.values().front()) > tol || std::abs(data.values().back()) > tol)
    throw ValidationError("boundary data must vanish at both ends of the side");
}

SurfaceField::SurfaceField(GridSize grid, double width, double height)
    : grid_(grid),
      width_(width),
      height_(height),
      values_(static_cast<std::size_t>(grid.ns + 1) * static_cast<std::size_t>(grid.nt + 1), 0.0) {}

namespace {

using SpMat = Eigen::SparseMatrix<double>;

// Unknowns are the interior nodes plus, for the Neumann problem, the top row
// (minus its two corners, which sit on the zero side walls).
struct Lattice {
  int ns = 0;
  int nt = 0;
  double hs = 0.0;
  double ht = 0.0;
  bool free_top = true;
  std::vector<int> unknown;  // node -> unknown index, -1 for Dirichlet nodes
  std::vector<std::size_t> nodes;  // unknown index -> node
  std::vector<double> scale;       // residual normalisation per unknown

  std::size_t node(int a, int b) const {
    return static_cast<std::size_t>(a) + static_cast<std::size_t>(ns + 1) * static_cast<std::size_t>(b);
  }
};

// Appends the nodes of the box [a0, a1] x [b0, b1] in nested-dissection
// order: both halves first, then the separating line. Couplings reach only
// the eight neighbours, so one grid line separates the halves.
void dissect(int a0, int a1, int b0, int b1, std::vector<std::pair<int, int>>& out) {
  if (a0 > a1 || b0 > b1) return;
  const int wa = a1 - a0 + 1;
  const int wb = b1 - b0 + 1;
  if (wa * wb <= 16) {
    for (int b = b0; b <= b1; ++b)
      for (int a = a0; a <= a1; ++a) out.emplace_back(a, b);
    return;
  }
  if (wa >= wb) {
    const int m = a0 + wa / 2;
    dissect(a0, m - 1, b0, b1, out);
    dissect(m + 1, a1, b0, b1, out);
    for (int b = b0; b <= b1; ++b) out.emplace_back(m, b);
  } else {
    const int m = b0 + wb / 2;
    dissect(a0, a1, b0, m - 1, out);
    dissect(a0, a1, m + 1, b1, out);
    for (int a = a0; a <= a1; ++a) out.emplace_back(a, m);
  }
}

Lattice make_lattice(GridSize grid, double width, double height, bool free_top) {
  Lattice L;
  L.ns = grid.ns;
  L.nt = grid.nt;
  L.hs = width / grid.ns;
  L.ht = height / grid.nt;
  L.free_top = free_top;
  L.unknown.assign(static_cast<std::size_t>(grid.ns + 1) * static_cast<std::size_t>(grid.nt + 1), -1);
  std::vector<std::pair<int, int>> order;
  dissect(1, grid.ns - 1, 1, free_top ? grid.nt : grid.nt - 1, order);
  for (const auto& [a, b] : order) {
    L.unknown[L.node(a, b)] = static_cast<int>(L.nodes.size());
    L.nodes.push_back(L.node(a, b));
    const double control = (b == grid.nt) ? 0.5 * L.hs * L.ht : L.hs * L.ht;
    L.scale.push_back(1.0 / control);
  }
  return L;
}

// Area minus the flat area, summed in cancellation-free form.
double lattice_excess(const Lattice& L, const std::vector<double>& f) {
  const double cell = 0.25 * L.hs * L.ht;
  double total = 0.0;
  for (int b = 0; b < L.nt; ++b) {
    for (int a = 0; a < L.ns; ++a) {
      const std::size_t n00 = L.node(a, b);
      const std::size_t n10 = n00 + 1;
      const std::size_t n01 = n00 + static_cast<std::size_t>(L.ns + 1);
      const std::size_t n11 = n01 + 1;
      const double gs0 = (f[n10] - f[n00]) / L.hs;
      const double gs1 = (f[n11] - f[n01]) / L.hs;
      const double gt0 = (f[n01] - f[n00]) / L.ht;
      const double gt1 = (f[n11] - f[n10]) / L.ht;
      total += cell * (area_excess(gs0, gt0) + area_excess(gs0, gt1) + area_excess(gs1, gt0) +
                       area_excess(gs1, gt1));
    }
  }
  return total;
}

// Calls visit(s0, s1, t0, t1, gs, gt) for the four corner terms of every
// cell, where (s0, s1) is the edge used for the s-difference and (t0, t1)
// the edge used for the t-difference.
template <class Visit>
void for_each_corner(const Lattice& L, const std::vector<double>& f, Visit&& visit) {
  for (int b = 0; b < L.nt; ++b) {
    for (int a = 0; a < L.ns; ++a) {
      const std::size_t n00 = L.node(a, b);
      const std::size_t n10 = n00 + 1;
      const std::size_t n01 = n00 + static_cast<std::size_t>(L.ns + 1);
      const std::size_t n11 = n01 + 1;
      const std::array<std::array<std::size_t, 2>, 2> sedge = {{{n00, n10}, {n01, n11}}};
      const std::array<std::array<std::size_t, 2>, 2> tedge = {{{n00, n01}, {n10, n11}}};
      for (const auto& se : sedge) {
        const double gs = (f[se[1]] - f[se[0]]) / L.hs;
        for (const auto& te : tedge) {
          const double gt = (f[te[1]] - f[te[0]]) / L.ht;
          visit(se, te, gs, gt);
        }
      }
    }
  }
}

Eigen::VectorXd lattice_gradient(const Lattice& L, const std::vector<double>& f) {
  const double w = 0.25 * L.hs * L.ht;
  Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(L.nodes.size()));
  auto add = [&](std::size_t node, double v) {
    const int u = L.unknown[node];
    if (u >= 0) g[u] += v;
  };
  for_each_corner(L, f, [&](const auto& se, const auto& te, double gs, double gt) {
    const double q = std::sqrt(1.0 + gs * gs + gt * gt);
    const double cs = w * gs / (q * L.hs);
    const double ct = w * gt / (q * L.ht);
    add(se[1], cs);
    add(se[0], -cs);
    add(te[1], ct);
    add(te[0], -ct);
  });
  return g;
}

double scaled_sup(const Lattice& L, const Eigen::VectorXd& g) {
  double r = 0.0;
  for (Eigen::Index u = 0; u < g.size(); ++u)
    r = std::max(r, std::abs(g[u]) * L.scale[static_cast<std::size_t>(u)]);
  return r;
}

// Hessian with a fixed sparsity pattern; `slots` maps every (corner term,
// local row, local column) to a position in the value array.
class HessianAssembler {
public:
  explicit HessianAssembler(const Lattice& L) : L_(L) {
    const auto n = static_cast<Eigen::Index>(L.nodes.size());
    std::vector<Eigen::Triplet<double>> trip;
    std::vector<double> zero(L.unknown.size(), 0.0);
    for_each_corner(L, zero, [&](const auto& se, const auto& te, double, double) {
      const std::array<std::size_t, 4> loc = {se[0], se[1], te[0], te[1]};
      for (std::size_t x : loc)
        for (std::size_t y : loc) {
          const int ux = L.unknown[x];
          const int uy = L.unknown[y];
          if (ux >= 0 && uy >= 0) trip.emplace_back(ux, uy, 0.0);
        }
    });
    H_.resize(n, n);
    H_.setFromTriplets(trip.begin(), trip.end());
    H_.makeCompressed();
    for_each_corner(L, zero, [&](const auto& se, const auto& te, double, double) {
      const std::array<std::size_t, 4> loc = {se[0], se[1], te[0], te[1]};
      for (std::size_t x : loc)
        for (std::size_t y : loc) {
          const int ux = L.unknown[x];
          const int uy = L.unknown[y];
          slots_.push_back(ux >= 0 && uy >= 0 ? slot(ux, uy) : -1);
        }
    });
  }

  const SpMat& assemble(const std::vector<double>& f) {
    std::fill(H_.valuePtr(), H_.valuePtr() + H_.nonZeros(), 0.0);
    double* val = H_.valuePtr();
    const double w = 0.25 * L_.hs * L_.ht;
    const std::array<double, 4> cs = {-1.0 / L_.hs, 1.0 / L_.hs, 0.0, 0.0};
    const std::array<double, 4> ct = {0.0, 0.0, -1.0 / L_.ht, 1.0 / L_.ht};
    std::size_t k = 0;
    for_each_corner(L_, f, [&](const auto&, const auto&, double gs, double gt) {
      const double q2 = 1.0 + gs * gs + gt * gt;
      const double q = std::sqrt(q2);
      const double hss = w / q * (1.0 - gs * gs / q2);
      const double htt = w / q * (1.0 - gt * gt / q2);
      const double hst = -w / q * gs * gt / q2;
      for (std::size_t x = 0; x < 4; ++x)
        for (std::size_t y = 0; y < 4; ++y, ++k) {
          const int sl = slots_[k];
          if (sl < 0) continue;
          val[sl] += hss * cs[x] * cs[y] + hst * (cs[x] * ct[y] + ct[x] * cs[y]) + htt * ct[x] * ct[y];
        }
    });
    return H_;
  }

  const SpMat& matrix() const { return H_; }

private:
  int slot(int row, int col) const {
    const int* inner = H_.innerIndexPtr();
    const int* outer = H_.outerIndexPtr();
    const int* begin = inner + outer[col];
    const int* end = inner + outer[col + 1];
    const int* it = std::lower_bound(begin, end, row);
    return static_cast<int>(it - inner);
  }

  const Lattice& L_;
  SpMat H_;
  std::vector<int> slots_;
};

struct BoundaryData {
  std::vector<double> bottom;  // values along t = 0, one per s-node
  std::vector<double> top;     // used only when the top row is Dirichlet
};

void apply_boundary(const Lattice& L, const BoundaryData& bd, double lambda, std::vector<double>& f) {
  for (int a = 0; a <= L.ns; ++a) f[L.node(a, 0)] = lambda * bd.bottom[static_cast<std::size_t>(a)];
  const int top = L.free_top ? L.nt : L.nt - 1;
  for (int b = 1; b <= top; ++b) {
    f[L.node(0, b)] = lambda * bd.bottom.front();
    f[L.node(L.ns, b)] = lambda * bd.bottom.back();
  }
  if (!L.free_top)
    for (int a = 0; a <= L.ns; ++a) f[L.node(a, L.nt)] = lambda * bd.top[static_cast<std::size_t>(a)];
}

// Node values are hat-weighted averages of phi: exact wherever phi is
// linear over the two adjacent cells, and the discrete data keeps the
// integral of phi, so a kink between nodes is not clipped.
std::vector<double> sample_nodes(const SideFunction& phi, int ns, double width) {
  const double h = width / ns;
  const auto& knots = phi.abscissae();
  std::vector<double> v(static_cast<std::size_t>(ns) + 1, 0.0);
  for (int a = 1; a < ns; ++a) {
    const double c = width * a / ns;
    std::vector<double> cuts{c - h, c, c + h};
    for (double k : knots)
      if (k > c - h && k < c + h) cuts.push_back(k);
    std::sort(cuts.begin(), cuts.end());
    double sum = 0.0;
    // phi * hat is quadratic on every piece, so Simpson's rule is exact.
    for (std::size_t m = 0; m + 1 < cuts.size(); ++m) {
      const double l = cuts[m];
      const double r = cuts[m + 1];
      if (r <= l) continue;
      auto g = [&](double x) { return phi(x) * (1.0 - std::abs(x - c) / h); };
      sum += (r - l) / 6.0 * (g(l) + 4.0 * g(0.5 * (l + r)) + g(r));
    }
    v[static_cast<std::size_t>(a)] = sum / h;
  }
  return v;
}

SurfaceField newton_solve(const Lattice& L, const BoundaryData& bd, const SolverConfig& config,
                          GridSize grid, double width, double height, const SurfaceField* warm) {
  config.validate();
  SurfaceField field(grid, width, height);
  std::vector<double>& f = field.values();
  const bool warm_ok = warm != nullptr && warm->grid() == grid &&
                       std::abs(warm->width() - width) <= 1e-12 * width &&
                       std::abs(warm->height() - height) <= 1e-12 * height;
  const int stages = warm_ok ? 1 : config.continuation_steps;

  if (warm_ok) {
    f = warm->values();
  } else {
    // Cylinder start: phi extended constantly in t, already admissible.
    for (int b = 0; b <= L.nt; ++b)
      for (int a = 0; a <= L.ns; ++a)
        f[L.node(a, b)] = bd.bottom[static_cast<std::size_t>(a)] / stages;
  }

  HessianAssembler hess(L);
  // Unknowns are already in nested-dissection order.
  Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::NaturalOrdering<int>> ldlt;
  ldlt.analyzePattern(hess.matrix());

  std::vector<double> trial(f.size());
  int total_iterations = 0;
  double residual = std::numeric_limits<double>::infinity();
  for (int stage = 1; stage <= stages; ++stage) {
    const double lambda = static_cast<double>(stage) / stages;
    const double target = stage == stages ? config.tolerance : config.stage_tolerance;
    if (stage > 1) {
      // Rescale the previous stage's surface as the next initial guess.
      const double k = lambda / (static_cast<double>(stage - 1) / stages);
      for (double& v : f) v *= k;
    }
    apply_boundary(L, bd, lambda, f);
    Eigen::VectorXd g = lattice_gradient(L, f);
    residual = scaled_sup(L, g);
    int it = 0;
    // The factor is kept while it still contracts the residual tenfold.
    bool have_factor = false;
    while (residual > target) {
      if (it++ >= config.max_iterations) {
        std::ostringstream msg;
        msg << "Newton did not converge: residual " << residual << " after " << config.max_iterations
            << " iterations (tolerance " << target << ")";
        throw NonConvergence(msg.str());
      }
      const bool fresh = !have_factor;
      if (fresh) {
        ldlt.factorize(hess.assemble(f));
        if (ldlt.info() != Eigen::Success) throw NonConvergence("Hessian factorization failed");
        have_factor = true;
      }
      const Eigen::VectorXd d = ldlt.solve(-g);
      const double slope = g.dot(d);
      const double e0 = lattice_excess(L, f);
      double step = 1.0;
      bool accepted = false;
      for (int bt = 0; bt <= config.max_backtracks; ++bt, step *= 0.5) {
        trial = f;
        for (std::size_t u = 0; u < L.nodes.size(); ++u)
          trial[L.nodes[u]] += step * d[static_cast<Eigen::Index>(u)];
        const double e1 = lattice_excess(L, trial);
        if (e1 <= e0 + 1e-4 * step * slope) {
          accepted = true;
          break;
        }
        // Energy differences below rounding: fall back to the residual.
        if (std::abs(e1 - e0) <= 1e-13 * std::abs(e0)) {
          const double r1 = scaled_sup(L, lattice_gradient(L, trial));
          if (r1 < residual) {
            accepted = true;
            break;
          }
        }
        if (!fresh) break;
      }
      if (!accepted) {
        if (!fresh) {
          have_factor = false;
          continue;
        }
        std::ostringstream msg;
        msg << "line search failed at residual " << residual;
        throw NonConvergence(msg.str());
      }
      f.swap(trial);
      g = lattice_gradient(L, f);
      const double previous = residual;
      residual = scaled_sup(L, g);
      have_factor = step == 1.0 && residual <= 0.1 * previous;
      ++total_iterations;
    }
  }
  field.residual = residual;
  field.iterations = total_iterations;
  field.area = area(field);
  return field;
}

}  // namespace

SurfaceField solve(const PlateauProblem& problem, const SolverConfig& config,
                   const SurfaceField* warm_start) {
  problem.validate();
  const Lattice L = make_lattice(problem.grid, problem.width, problem.height, true);
  BoundaryData bd{sample_nodes(problem.data, problem.grid.ns, problem.width), {}};
  return newton_solve(L, bd, config, problem.grid, problem.width, problem.height, warm_start);
}

SurfaceField solve_doubled(const PlateauProblem& problem, const SolverConfig& config) {
  problem.validate();
  const GridSize grid{problem.grid.ns, 2 * problem.grid.nt};
  const double height = 2.0 * problem.height;
  const Lattice L = make_lattice(grid, problem.width, height, false);
  BoundaryData bd;
  bd.bottom = sample_nodes(problem.data, problem.grid.ns, problem.width);
  bd.top = bd.bottom;
  return newton_solve(L, bd, config, grid, problem.width, height, nullptr);
}

SurfaceField restrict_to_lower_half(const SurfaceField& doubled) {
  const GridSize g = doubled.grid();
  if (g.nt % 2 != 0) throw GridMismatch("doubled field must have an even number of t-cells");
  SurfaceField half({g.ns, g.nt / 2}, doubled.width(), doubled.height() / 2.0);
  for (int b = 0; b <= g.nt / 2; ++b)
    for (int a = 0; a <= g.ns; ++a) half.at(a, b) = doubled.at(a, b);
  half.residual = doubled.residual;
  half.iterations = doubled.iterations;
  half.area = area(half);
  return half;
}

double area(const SurfaceField& field) {
  return field.width() * field.height() +
         corner_quadrature(field, area_excess, [](int, int) { return 1.0; });
}

double cylinder_area(const PlateauProblem& problem) {
  return problem.height * problem.data.graph_length();
}

Extrapolation refine_and_extrapolate(const PlateauProblem& problem, const SolverConfig& config,
                                     int levels) {
  if (levels < 3) throw ValidationError("refine_and_extrapolate needs at least 3 levels");
  Extrapolation out;
  PlateauProblem level = problem;
  for (int k = 0; k < levels; ++k) {
    out.ns.push_back(level.grid.ns);
    out.areas.push_back(solve(level, config).area);
    level.grid.ns *= 2;
    level.grid.nt *= 2;
  }
  const std::size_t n = out.areas.size();
  const double d1 = out.areas[n - 2] - out.areas[n - 3];
  const double d2 = out.areas[n - 1] - out.areas[n - 2];
  const double scale = std::max(1.0, std::abs(out.areas.back()));
  if (std::abs(d2) <= 1e-13 * scale) {
    out.exact = true;
    out.order = std::numeric_limits<double>::infinity();
    out.area_estimate = out.areas.back();
    return out;
  }
  out.order = std::log2(std::abs(d1 / d2));
  const double factor = std::pow(2.0, out.order) - 1.0;
  out.area_estimate = factor > 0.0 ? out.areas.back() + d2 / factor : out.areas.back();
  return out;
}

namespace {

// Mollification of the zero extension of phi restricted to [lo, hi], with
// a C-infinity bump supported in (-sigma/2, sigma/2).
class Mollifier {
public:
  explicit Mollifier(double sigma) : sigma_(sigma) {
    // Composite 5-point Gauss-Legendre on 8 panels.
    static constexpr std::array<double, 5> x = {-0.9061798459386640, -0.5384693101056831, 0.0,
                                                0.5384693101056831, 0.9061798459386640};
    static constexpr std::array<double, 5> w = {0.2369268850561891, 0.4786286704993665,
                                                0.5688888888888889, 0.4786286704993665,
                                                0.2369268850561891};
    constexpr int panels = 8;
    const double half = 0.5 * sigma_;
    const double width = 2.0 * half / panels;
    double total = 0.0;
    for (int p = 0; p < panels; ++p) {
      const double mid = -half + (p + 0.5) * width;
      for (std::size_t q = 0; q < x.size(); ++q) {
        const double y = mid + 0.5 * width * x[q];
        const double z = y / half;
        const double bump = std::abs(z) < 1.0 ? std::exp(-1.0 / (1.0 - z * z)) : 0.0;
        nodes_.push_back(y);
        weights_.push_back(0.5 * width * w[q] * bump);
        total += weights_.back();
      }
    }
    for (double& v : weights_) v /= total;
  }

  double operator()(const SideFunction& phi, double lo, double hi, double x) const {
    double acc = 0.0;
    for (std::size_t q = 0; q < nodes_.size(); ++q) {
      const double y = x - nodes_[q];
      if (y >= lo && y <= hi) acc += weights_[q] * phi(y);
    }
    return acc;
  }

private:
  double sigma_;
  std::vector<double> nodes_;
  std::vector<double> weights_;
};

// Smooth version of phi on [lo, hi] that vanishes near both ends: the
// mollified function evaluated through the affine stretch that maps
// [lo, hi] onto [lo - sigma, hi + sigma].
double stretched(const Mollifier& m, const SideFunction& phi, double lo, double hi, double sigma,
                 double s) {
  const double len = hi - lo;
  const double x = lo + (len + 2.0 * sigma) / len * (s - lo) - sigma;
  return m(phi, lo, hi, x);
}

}  // namespace

SideFunction mollify_pinned(const SideFunction& phi, double sigma, int samples) {
  if (!(sigma > 0.0)) return phi;
  if (samples < 2) throw ValidationError("mollify_pinned needs at least 2 samples");
  const double len = phi.length();
  const double w = std::clamp(phi.apex(), 0.0, len);
  const double peak = phi(w);
  const Mollifier moll(sigma);

  std::vector<double> s;
  s.reserve(static_cast<std::size_t>(samples) + 2);
  for (int m = 0; m <= samples; ++m) s.push_back(len * m / samples);
  if (w > 0.0 && w < len) {
    s.push_back(w);
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
  }
  std::vector<double> v(s.size(), 0.0);

  if (peak != 0.0) {
    const double at_apex = stretched(moll, phi, 0.0, len, sigma, w);
    const double k = at_apex != 0.0 ? peak / at_apex : 1.0;
    for (std::size_t m = 0; m < s.size(); ++m) v[m] = k * stretched(moll, phi, 0.0, len, sigma, s[m]);
  } else {
    // Smooth each side of the apex separately; both vanish near w.
    for (std::size_t m = 0; m < s.size(); ++m) {
      if (s[m] < w && w > 0.0) v[m] = stretched(moll, phi, 0.0, w, sigma, s[m]);
      else if (s[m] > w && w < len) v[m] = stretched(moll, phi, w, len, sigma, s[m]);
    }
  }
  v.front() = 0.0;
  v.back() = 0.0;
  for (std::size_t m = 0; m < s.size(); ++m)
    if (s[m] == w) v[m] = peak;
  return SideFunction(phi.side(), std::move(s), std::move(v), w);
}

}  // namespace tja
