#pragma once

// Generators and independent reference computations shared by the unit
// tests and the acceptance binary.

#include "tja/geometry.hpp"
#include "tja/plateau.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

namespace tja::testing {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Vec2 rotate(Vec2 v, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

// Random counterclockwise triangle with every angle at least min_angle.
inline TargetTriangle random_triangle(Rng& rng, double min_angle = 0.3) {
  for (;;) {
    const Vec2 a{uniform(rng, -1, 1), uniform(rng, -1, 1)};
    const Vec2 b{uniform(rng, -1, 1), uniform(rng, -1, 1)};
    const Vec2 c{uniform(rng, -1, 1), uniform(rng, -1, 1)};
    if (cross(b - a, c - a) <= 0.05) continue;
    const TargetTriangle tri(a, b, c);
    if (std::min({tri.angle(0), tri.angle(1), tri.angle(2)}) >= min_angle) return tri;
  }
}

inline Vec2 random_point_in(Rng& rng, const TargetTriangle& tri) {
  double u = uniform(rng, 0, 1);
  double v = uniform(rng, 0, 1);
  if (u + v > 1) {
    u = 1 - u;
    v = 1 - v;
  }
  return tri.vertex(0) + u * (tri.vertex(1) - tri.vertex(0)) + v * (tri.vertex(2) - tri.vertex(0));
}

// Triple point admissible for the triangle, away from the boundary.
inline Vec2 random_triple_point(Rng& rng, const TargetTriangle& tri) {
  for (;;) {
    const Vec2 p = random_point_in(rng, tri);
    bool inside = true;
    for (Side s : kSides) {
      const auto c = project_to_side(tri, p, s);
      const double len = tri.side_length(s);
      if (c.height < 0.02 * len || c.abscissa < 0.02 * len || c.abscissa > 0.98 * len)
        inside = false;
    }
    if (inside && tri.admits_triple_point(p)) return p;
  }
}

// Branch i with `knots` interior knots at equally spaced chord fractions and
// random normal offsets; retried until the connection validates.
inline Connection random_valid_connection(Rng& rng, const TargetTriangle& tri, int knots,
                                          double amplitude = 0.3) {
  for (int attempt = 0;; ++attempt) {
    Connection c;
    c.p = random_triple_point(rng, tri);
    const double amp = attempt < 50 ? amplitude : amplitude / (1 + attempt);
    for (int i = 0; i < 3; ++i) {
      const Vec2 a = tri.vertex(i);
      const Vec2 chord = c.p - a;
      const Vec2 n = perp(chord) / norm(chord);
      auto& b = c.branches[static_cast<std::size_t>(i)];
      b.push_back(a);
      for (int m = 1; m <= knots; ++m) {
        const double t = static_cast<double>(m) / (knots + 1);
        b.push_back(a + t * chord + uniform(rng, -amp, amp) * norm(chord) * n);
      }
      b.push_back(c.p);
    }
    if (validate_connection(c, tri).ok()) return c;
  }
}

// Nonnegative profile on [0, len] vanishing at both ends, with `pieces`
// random pieces and a kink at a random apex.
inline SideFunction random_profile(Rng& rng, double len, int pieces, double height = 0.5) {
  std::vector<double> s{0.0};
  const double w = uniform(rng, 0.1, 0.9) * len;
  std::vector<double> cuts;
  for (int m = 0; m < pieces - 2; ++m) cuts.push_back(uniform(rng, 0, len));
  cuts.push_back(w);
  std::sort(cuts.begin(), cuts.end());
  for (double x : cuts)
    if (x > s.back() + 1e-9 * len && x < len - 1e-9 * len) s.push_back(x);
  s.push_back(len);
  std::vector<double> v(s.size(), 0.0);
  for (std::size_t m = 1; m + 1 < s.size(); ++m) v[m] = uniform(rng, 0, height);
  return SideFunction(Side::s12, s, v, w);
}

// Lipschitz tent-like data: heights at apex and a few extra knots.
inline SideFunction random_tent(Rng& rng, double len, double max_height = 0.8) {
  const double w = uniform(rng, 0.15, 0.85) * len;
  return SideFunction::tent(Side::s12, len, w, uniform(rng, 0.05, max_height));
}

// Orthogonal projection computed from scratch: dot and cross with the side
// vector, no frame objects involved.
inline std::array<double, 2> projection_oracle(Vec2 a, Vec2 b, Vec2 q, double orientation) {
  const Vec2 d = b - a;
  const double len = std::hypot(d.x, d.y);
  const double s = ((q.x - a.x) * d.x + (q.y - a.y) * d.y) / len;
  const double h = orientation * (d.x * (q.y - a.y) - d.y * (q.x - a.x)) / len;
  return {s, h};
}

// Fermat point by Weiszfeld's fixed-point iteration.
inline Vec2 weiszfeld(const TargetTriangle& tri, int iterations = 20000) {
  Vec2 x = tri.barycenter();
  for (int it = 0; it < iterations; ++it) {
    Vec2 num{0, 0};
    double den = 0;
    for (int i = 0; i < 3; ++i) {
      const double d = norm(tri.vertex(i) - x);
      if (d < 1e-15) return x;
      num = num + tri.vertex(i) / d;
      den += 1.0 / d;
    }
    const Vec2 next = num / den;
    if (norm(next - x) < 1e-16) return next;
    x = next;
  }
  return x;
}

// Discrete energy written as half the total 3D area of the two diagonal
// triangulations of each cell, with the analytic gradient of a triangle's
// area with respect to its vertex heights.
struct TriangulatedEnergy {
  int ns;
  int nt;
  double hs;
  double ht;

  std::size_t node(int a, int b) const {
    return static_cast<std::size_t>(a) + static_cast<std::size_t>(ns + 1) * static_cast<std::size_t>(b);
  }

  struct P3 {
    double x, y, z;
  };

  static P3 sub(P3 a, P3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  static P3 crs(P3 a, P3 b) { return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x}; }

  P3 point(const std::vector<double>& f, int a, int b) const { return {a * hs, b * ht, f[node(a, b)]}; }

  // Adds 0.5 * area and its height gradient for triangle (i, j, k).
  double triangle(const std::vector<double>& f, std::array<std::pair<int, int>, 3> v,
                  std::vector<double>* grad) const {
    std::array<P3, 3> p;
    for (int k = 0; k < 3; ++k) p[static_cast<std::size_t>(k)] = point(f, v[static_cast<std::size_t>(k)].first, v[static_cast<std::size_t>(k)].second);
    const P3 n = crs(sub(p[1], p[0]), sub(p[2], p[0]));
    const double len = std::sqrt(n.x * n.x + n.y * n.y + n.z * n.z);
    if (grad) {
      const P3 u{n.x / len, n.y / len, n.z / len};
      for (int k = 0; k < 3; ++k) {
        const P3 e = sub(p[static_cast<std::size_t>((k + 1) % 3)], p[static_cast<std::size_t>((k + 2) % 3)]);
        const P3 g = crs(e, u);
        const auto& [a, b] = v[static_cast<std::size_t>(k)];
        (*grad)[node(a, b)] += 0.5 * 0.5 * g.z;
      }
    }
    return 0.5 * 0.5 * len;
  }

  double value(const std::vector<double>& f, std::vector<double>* grad) const {
    if (grad) std::fill(grad->begin(), grad->end(), 0.0);
    double e = 0.0;
    for (int b = 0; b < nt; ++b)
      for (int a = 0; a < ns; ++a) {
        const std::pair<int, int> p00{a, b}, p10{a + 1, b}, p01{a, b + 1}, p11{a + 1, b + 1};
        e += triangle(f, {p00, p10, p01}, grad);
        e += triangle(f, {p11, p01, p10}, grad);
        e += triangle(f, {p00, p10, p11}, grad);
        e += triangle(f, {p00, p11, p01}, grad);
      }
    return e;
  }
};

// (1/h) * integral of phi against the hat of half-width h centred at c, by a
// fine midpoint rule; independent of the solver's exact piecewise sums.
inline double hat_average_oracle(const SideFunction& phi, double c, double h, int samples = 20000) {
  double sum = 0.0;
  for (int k = 0; k < samples; ++k) {
    const double x = c - h + (2.0 * h) * (k + 0.5) / samples;
    sum += phi(x) * (1.0 - std::abs(x - c) / h);
  }
  return sum * (2.0 * h / samples) / h;
}

// Minimizes the triangulated energy for the Dirichlet-Neumann problem with
// FISTA and gradient restarts. The step is 1 / L with L a Gershgorin bound
// on the Hessian: every node sits in at most 16 corner terms, each bounded by
// the flat-surface quadratic form. Stops once |grad|^2 / cell, which bounds
// the energy gap up to the strong-convexity constant, drops below gap_tol.
// Returns the final area.
inline double descent_oracle_area(const PlateauProblem& pb, int max_iterations = 500000,
                                  double gap_tol = 1e-14) {
  const int ns = pb.grid.ns;
  const int nt = pb.grid.nt;
  TriangulatedEnergy energy{ns, nt, pb.width / ns, pb.height / nt};
  std::vector<double> x(static_cast<std::size_t>(ns + 1) * static_cast<std::size_t>(nt + 1), 0.0);
  std::vector<char> is_free(x.size(), 0);
  for (int b = 0; b <= nt; ++b)
    for (int a = 0; a <= ns; ++a) {
      const double s = pb.width * a / ns;
      x[energy.node(a, b)] = (a == 0 || a == ns) ? 0.0 : hat_average_oracle(pb.data, s, pb.width / ns);
      if (b > 0 && a > 0 && a < ns) is_free[energy.node(a, b)] = 1;
    }
  std::vector<double> y = x, x_prev = x, g(x.size());
  const double lip = 8.0 * (energy.ht / energy.hs + energy.hs / energy.ht);
  const double cell = energy.hs * energy.ht;
  double tk = 1.0;
  for (int it = 0; it < max_iterations; ++it) {
    const double fy = energy.value(y, &g);
    double g2 = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      if (!is_free[k]) g[k] = 0.0;
      g2 += g[k] * g[k];
    }
    if (g2 / cell < gap_tol) return fy;
    x_prev.swap(x);
    for (std::size_t k = 0; k < x.size(); ++k) x[k] = y[k] - g[k] / lip;
    double uphill = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) uphill += g[k] * (x[k] - x_prev[k]);
    if (uphill > 0.0) {
      tk = 1.0;
      y = x;
      continue;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
    const double beta = (tk - 1.0) / t_next;
    for (std::size_t k = 0; k < x.size(); ++k) y[k] = x[k] + beta * (x[k] - x_prev[k]);
    tk = t_next;
  }
  return energy.value(x, nullptr);
}

}  // namespace tja::testing
