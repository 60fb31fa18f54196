#pragma once

#include "tja/functional.hpp"
#include "tja/geometry.hpp"
#include "tja/plateau.hpp"

#include <array>
#include <cmath>
#include <vector>

namespace tja {

// Area of the intersection of the disk |z - center| <= radius with a simple
// polygon given in either orientation.
double disk_polygon_area(Vec2 center, double radius, const std::vector<Vec2>& polygon);

// Strip along the jump segment of one side, in its own frame: y runs along
// the segment, x from zeta^i to zeta^j across it. The strip is the rectangle
// [x_begin, x_end] x [y_begin, y_end] intersected with the disk.
struct StripGeometry {
  Side side = Side::s12;
  Vec2 x_axis;
  Vec2 y_axis;
  double x_begin = 0.0;
  double x_end = 0.0;
  double y_begin = 0.0;  // delta
  double y_end = 0.0;    // r_ij
  double c_eps = 0.0;
  double kappa = 1.0;
  double area = 0.0;

  double width() const { return x_end - x_begin; }  // eps_ij
  Vec2 point(double x, double y) const { return x * x_axis + y * y_axis; }
  std::vector<Vec2> rectangle() const;
  // Inside the rectangle; disk membership is checked separately.
  bool in_rectangle(Vec2 q) const;
};

// Source disk centred at the junction, jump segments of lengths r_ij from
// the centre. Sector i, of opening sector_angles[i], is where u = alpha_i;
// counterclockwise the order is segment 12, sector 1, segment 31, sector 3,
// segment 23, sector 2.
struct EpsilonGeometry {
  double epsilon = 0.0;
  double delta = 0.0;
  double disk_radius = 1.0;
  std::array<double, 3> sector_angles{};
  std::array<Vec2, 3> directions;  // unit jump directions, by index(Side)
  std::array<Vec2, 3> zeta;        // vertices of T^eps
  std::array<StripGeometry, 3> strips;
  std::array<double, 3> region_areas{};
  double triangle_area = 0.0;

  const StripGeometry& strip(Side s) const { return strips[static_cast<std::size_t>(index(s))]; }
  double disk_area() const;
  // |sum of region, strip and triangle areas - |D||.
  double partition_error() const;
  bool in_disk(Vec2 q) const;
  bool in_triangle(Vec2 q) const;
  bool in_strip(Side s, Vec2 q) const;
  bool in_region(int i, Vec2 q) const;
};

// delta = delta_ratio * epsilon. Throws Case2NotSupported if an opening is
// >= pi, EpsilonTooLarge if T^eps leaves the disk or delta reaches some
// r_ij, ValidationError for bad angles or r_ij > disk radius.
EpsilonGeometry build_geometry(const SourceJunction& source, const std::array<double, 3>& sector_angles,
                               double epsilon, double delta_ratio = 1.0);

// (1/kappa) * integral over the rectangle of
// sqrt(1 + e^2 + m_s^2 + kappa^2 (1 + e^2) m_t^2), split like area() into a
// flat part and a corner-quadrature excess. `coverage(a, b)` is the covered
// fraction of cell (a, b). With kappa = 1, e = 0 and full coverage this is
// area(field) bit for bit.
template <class Coverage>
double strip_integral(const SurfaceField& field, double kappa, double e, Coverage&& coverage) {
  const double a = 1.0 + e * e;
  const double k2 = kappa * kappa * a;
  const double root_a = std::sqrt(a);
  const auto integrand = [&](double gs, double gt) {
    const double q = gs * gs + k2 * (gt * gt);
    return q / (root_a + std::sqrt(a + q));
  };
  double missing = 0.0;
  for (int b = 0; b < field.grid().nt; ++b)
    for (int c = 0; c < field.grid().ns; ++c) missing += 1.0 - coverage(c, b);
  missing *= field.hs() * field.ht();
  const double flat = root_a * (field.width() * field.height() - missing);
  return (1.0 / kappa) * (flat + corner_quadrature(field, integrand, coverage));
}

double strip_integral(const SurfaceField& field, double kappa, double e);

// Area of u^eps over the strip of `side`, by the change of variables onto
// the solved rectangle. Throws GridMismatch if the field's rectangle is not
// [0, l_ij] x [0, r_ij].
double strip_area(const EpsilonGeometry& geom, Side side, const SurfaceField& field);

struct TotalArea {
  double value = 0.0;           // regions + strips + |T^eps|
  double triangle_bound = 0.0;  // extra area u^eps can carry on T^eps
  double regions = 0.0;
  std::array<double, 3> strips{};
  double triangle = 0.0;
  std::array<double, 3> theta0{};     // leaf angle lower bound per vertex
  std::array<double, 3> lipschitz{};  // Lipschitz bound on T_i^eps
};

// The evaluation must keep its fields. The strips use its surfaces, whose
// bottom edges carry the (possibly mollified) data. The T^eps bound is the
// leaf construction over the unmollified branches; with sigma > 0 the strip
// edges and the leaves disagree by O(sigma), which the bound ignores.
TotalArea total_area(const EpsilonGeometry& geom, const GEvaluation& eval, const TargetTriangle& triangle);

struct VerifierLevel {
  double epsilon = 0.0;
  double value = 0.0;
  double error = 0.0;  // value - (|D| + G)
  double triangle_bound = 0.0;
  std::array<double, 3> strip_errors{};  // strip area - A_ij
  double partition_error = 0.0;
};

struct ConvergenceStudy {
  double reference = 0.0;  // |D| + G of the unmollified connection
  std::vector<VerifierLevel> levels;
  double slope = 0.0;  // least-squares slope of log|error| against log eps
};

// One geometry and one mollified evaluation (sigma = sigma_ratio * eps) per
// level, all on config.grid.
ConvergenceStudy verify_convergence(const SourceJunction& source, const TargetTriangle& triangle,
                                    const Connection& connection, const std::array<double, 3>& sector_angles,
                                    const std::vector<double>& epsilons, const EvaluationConfig& config,
                                    double sigma_ratio = 1.0, double delta_ratio = 1.0);

// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace tja
