#pragma once

#include "tja/geometry.hpp"

#include <cmath>
#include <cstddef>
#include <vector>

namespace tja {

struct SolverConfig {
  // Sup-norm target for the scaled Euler-Lagrange residual.
  double tolerance = 1e-10;
  // Newton iterations allowed per continuation stage. Data with slopes near
  // 100 over sub-cell pieces take about 60 damped steps.
  int max_iterations = 200;
  // Step halvings tried by the line search before giving up.
  int max_backtracks = 40;
  // Boundary data is ramped from 0 to phi in this many stages.
  int continuation_steps = 1;
  // Residual target for the intermediate stages.
  double stage_tolerance = 1e-6;

  void validate() const;
};

// Number of cells along s and t.
struct GridSize {
  int ns = 128;
  int nt = 128;

  bool operator==(const GridSize&) const = default;
};

// Minimize the area of a graph over [0, width] x [0, height] with Dirichlet
// data phi(s) on t = 0, zero on s = 0 and s = width, free on t = height.
// Bottom nodes carry hat-weighted averages of phi: nodal sampling clips a
// kink that falls between nodes, which makes the discrete area jump as the
// kink moves across the grid.
struct PlateauProblem {
  double width = 1.0;
  double height = 1.0;
  SideFunction data;
  GridSize grid;

  void validate() const;
};

// Nodal values on the (ns + 1) x (nt + 1) lattice, s-index fastest.
class SurfaceField {
public:
  SurfaceField() = default;
  SurfaceField(GridSize grid, double width, double height);

  GridSize grid() const { return grid_; }
  double width() const { return width_; }
  double height() const { return height_; }
  double hs() const { return width_ / grid_.ns; }
  double ht() const { return height_ / grid_.nt; }
  double s(int a) const { return width_ * a / grid_.ns; }
  double t(int b) const { return height_ * b / grid_.nt; }

  std::size_t node(int a, int b) const {
    return static_cast<std::size_t>(a) + static_cast<std::size_t>(grid_.ns + 1) * static_cast<std::size_t>(b);
  }
  double& at(int a, int b) { return values_[node(a, b)]; }
  double at(int a, int b) const { return values_[node(a, b)]; }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  // Filled in by the solver.
  double residual = 0.0;
  double area = 0.0;
  int iterations = 0;

private:
  GridSize grid_{};
  double width_ = 0.0;
  double height_ = 0.0;
  std::vector<double> values_;
};

SurfaceField solve(const PlateauProblem& problem, const SolverConfig& config,
                   const SurfaceField* warm_start = nullptr);

// Dirichlet problem on the doubled rectangle [0, width] x [0, 2 height]
// with phi on both horizontal edges; the grid has 2 nt cells along t.
SurfaceField solve_doubled(const PlateauProblem& problem, const SolverConfig& config);
SurfaceField restrict_to_lower_half(const SurfaceField& doubled);

// sqrt(1 + gs^2 + gt^2) - 1 without cancellation for small gradients.
inline double area_excess(double gs, double gt) {
  const double g2 = gs * gs + gt * gt;
  return g2 / (1.0 + std::sqrt(1.0 + g2));
}

// Each cell contributes the mean of integrand(f_s, f_t) over its four
// corners, with one-sided differences along the two edges meeting at the
// corner. `weight(a, b)` scales cell (a, b).
template <class Integrand, class Weight>
double corner_quadrature(const SurfaceField& f, Integrand&& integrand, Weight&& weight) {
  const int ns = f.grid().ns;
  const int nt = f.grid().nt;
  const double hs = f.hs();
  const double ht = f.ht();
  const double cell = 0.25 * hs * ht;
  double total = 0.0;
  for (int b = 0; b < nt; ++b) {
    for (int a = 0; a < ns; ++a) {
      const double w = weight(a, b);
      if (w == 0.0) continue;
      const double f00 = f.at(a, b);
      const double f10 = f.at(a + 1, b);
      const double f01 = f.at(a, b + 1);
      const double f11 = f.at(a + 1, b + 1);
      const double gs0 = (f10 - f00) / hs;
      const double gs1 = (f11 - f01) / hs;
      const double gt0 = (f01 - f00) / ht;
      const double gt1 = (f11 - f10) / ht;
      const double sum = integrand(gs0, gt0) + integrand(gs0, gt1) + integrand(gs1, gt0) +
                         integrand(gs1, gt1);
      total += w * cell * sum;
    }
  }
  return total;
}

// width * height plus the corner quadrature of area_excess; exact for flat
// and affine fields up to rounding.
double area(const SurfaceField& field);

// height * graph length of phi: the area of the t-constant extension. The
// discrete minimum stays below it since the discrete data slopes are kernel
// averages of phi'.
double cylinder_area(const PlateauProblem& problem);

struct Extrapolation {
  std::vector<int> ns;         // cells along s at each level
  std::vector<double> areas;
  double area_estimate = 0.0;  // Richardson-extrapolated
  double order = 0.0;          // observed, from the last three levels
  bool exact = false;          // successive areas agree to rounding
};

Extrapolation refine_and_extrapolate(const PlateauProblem& problem, const SolverConfig& config,
                                     int levels);

// Smooth profile with the same values at 0, apex and length: mollify the
// zero extension with a bump of width sigma, stretch so the support fits in
// [0, length] and rescale so the apex value is kept. Sampled at `samples`
// uniform cells plus the apex.
SideFunction mollify_pinned(const SideFunction& phi, double sigma, int samples = 1024);

}  // namespace tja
