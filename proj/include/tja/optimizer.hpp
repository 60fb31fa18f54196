#pragma once

#include "tja/functional.hpp"
#include "tja/geometry.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace tja {

struct OptimizationSpec {
  // Interior knots per branch; 0 means straight branches.
  int knots_per_branch = 0;
  // Barycentric lattice resolution of the coarse straight-branch search.
  int grid_resolution = 4;
  // Local Nelder-Mead runs; the first starts from the best coarse candidate,
  // the rest from seeded random triple points.
  int multistarts = 2;
  // Simplex diameter, in units of diam T, at which a local run stops.
  double local_tolerance = 1e-3;
  int max_evaluations = 400;
  std::uint64_t seed = 1;
  // Triple points stay this far (times diam T) from the triangle boundary.
  double boundary_margin = 1e-6;
  // Reuse the previous candidate's surfaces as Newton initial guesses.
  bool warm_start = true;
  EvaluationConfig evaluation;

  void validate() const;
};

struct TraceEntry {
  int iteration = 0;
  Vec2 p;
  double total = 0.0;  // +inf for rejected or failed candidates
  bool improved = false;
};

struct OptimizationResult {
  Connection best;
  GEvaluation evaluation;
  std::vector<TraceEntry> trace;
  // Best value after each improvement; non-increasing.
  std::vector<double> history;
  std::size_t candidates = 0;
  std::size_t failures = 0;
  std::string termination;
};

// Straight branches through the Fermat point when every angle is below
// 2 pi / 3; otherwise through a point on the interior bisector of the wide
// vertex. The result always lies in the admissible region.
Connection steiner_initial(const TargetTriangle& triangle);

// Total order used for every comparison: G first (ties within 1e-9), then
// connection length, then p lexicographically.
bool better_candidate(double g_a, const Connection& a, double g_b, const Connection& b);

OptimizationResult minimize(const OptimizationSpec& spec, const SourceJunction& source,
                            const TargetTriangle& triangle);

struct GridSearchResult {
  Vec2 best_p;
  double best_total = 0.0;
  Connection best;
  std::size_t evaluated = 0;
  std::size_t skipped = 0;
};

// Lattice points (i, j, k) / resolution shrunk towards the incenter so they
// keep the boundary margin; inadmissible points are dropped.
std::vector<Vec2> barycentric_lattice(const TargetTriangle& triangle, int resolution,
                                      double margin = 1e-6);

// Straight-branch connections over the lattice; deterministic.
GridSearchResult brute_force_p_grid(int resolution, const SourceJunction& source,
                                    const TargetTriangle& triangle,
                                    const EvaluationConfig& config = {});

struct SimplexResult {
  std::vector<double> x;
  double value = 0.0;
  int evaluations = 0;
  bool converged = false;
};

// Nelder-Mead with the standard coefficients (1, 2, 1/2, 1/2). Stops when
// every vertex lies within x_tol of the best one (max norm) or after
// max_evaluations.
SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                          std::vector<double> x0, const std::vector<double>& steps, double x_tol,
                          int max_evaluations);

}  // namespace tja
