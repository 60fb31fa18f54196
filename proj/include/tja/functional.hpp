#pragma once

#include "tja/geometry.hpp"
#include "tja/plateau.hpp"

#include <array>
#include <cstddef>
#include <map>
#include <mutex>
#include <optional>
#include <vector>

namespace tja {

struct EvaluationConfig {
  SolverConfig solver;
  GridSize grid;
  // Solve the three rectangles on separate threads.
  bool parallel = false;
  // Width of the pinned mollification applied to each side function; 0
  // keeps the piecewise-linear data.
  double mollify_sigma = 0.0;
  // Keep the three surfaces in the result.
  bool keep_fields = true;
};

// Areas of the three minimal surfaces for one connection. Arrays are
// indexed by index(Side).
struct GEvaluation {
  Connection connection;
  std::array<SideFunction, 3> data;
  std::array<double, 3> widths{};
  std::array<double, 3> heights{};
  std::array<double, 3> areas{};
  std::array<double, 3> residuals{};
  std::array<int, 3> iterations{};
  std::array<SurfaceField, 3> fields;  // empty unless kept
  GridSize grid;
  double total = 0.0;

  double area(Side s) const { return areas[static_cast<std::size_t>(index(s))]; }
};

// Throws NotAGraph, InvalidConnection or NonConvergence; messages name the
// offending side. `warm_start` supplies initial surfaces on the same grid.
GEvaluation evaluate(const Connection& conn, const SourceJunction& source,
                     const TargetTriangle& triangle, const EvaluationConfig& config,
                     const GEvaluation* warm_start = nullptr);

// |D| + G.
double upper_bound(const GEvaluation& eval, const SourceJunction& source);

struct ContinuityGap {
  Side side = Side::s12;  // side with the largest lhs - rhs
  double lhs = 0.0;
  double rhs = 0.0;
  std::array<double, 3> lhs_per_side{};
  std::array<double, 3> rhs_per_side{};
};

// Per side, lhs = |2 A_a - 2 A_b| with 2 A the area over the doubled
// rectangle and rhs = the L1 distance of the data over its boundary, where
// the data sits on both horizontal edges. Throws GridMismatch when the two
// evaluations use different grids or rectangles.
ContinuityGap continuity_gap(const GEvaluation& a, const GEvaluation& b);

// Memoizing front end for repeated evaluations on one triangle and source.
// Thread-safe; identical knot lists are solved once.
class Evaluator {
public:
  Evaluator(TargetTriangle triangle, SourceJunction source, EvaluationConfig config);

  GEvaluation operator()(const Connection& conn);

  const TargetTriangle& triangle() const { return triangle_; }
  const SourceJunction& source() const { return source_; }
  const EvaluationConfig& config() const { return config_; }
  std::size_t solves() const;
  std::size_t hits() const;

  // Surfaces of the most recent solve are reused as initial guesses.
  void set_warm_start(bool on) { warm_ = on; }

private:
  TargetTriangle triangle_;
  SourceJunction source_;
  EvaluationConfig config_;
  bool warm_ = false;
  mutable std::mutex mutex_;
  std::map<std::vector<double>, GEvaluation> cache_;
  std::optional<GEvaluation> last_;
  std::size_t solves_ = 0;
  std::size_t hits_ = 0;
};

}  // namespace tja
