#include "tja/functional.hpp"

#include "tja/error.hpp"

#include <cmath>
#include <exception>
#include <future>
#include <limits>
#include <sstream>

namespace tja {

namespace {

struct SideOutcome {
  SideFunction data;
  SurfaceField field;
};

SideOutcome solve_side(const Connection& conn, const SourceJunction& source,
                       const TargetTriangle& triangle, const EvaluationConfig& config, Side side,
                       const SurfaceField* warm) {
  const std::string label = "side " + side_name(side) + ": ";
  SideOutcome out;
  try {
    out.data = build_side_function(triangle, conn, side);
    if (config.mollify_sigma > 0.0) out.data = mollify_pinned(out.data, config.mollify_sigma);
    const PlateauProblem problem{triangle.side_length(side), source.r(side), out.data, config.grid};
    out.field = solve(problem, config.solver, warm);
  } catch (const NonConvergence& e) {
    throw NonConvergence(label + e.what());
  } catch (const NotAGraph& e) {
    const std::string what = e.what();
    throw NotAGraph(what.rfind("side ", 0) == 0 ? what : label + what);
  } catch (const ValidationError& e) {
    throw ValidationError(label + e.what());
  }
  return out;
}

std::vector<double> cache_key(const Connection& conn) {
  std::vector<double> key{conn.p.x, conn.p.y};
  for (const auto& b : conn.branches) {
    key.push_back(static_cast<double>(b.size()));
    for (const Vec2& q : b) {
      key.push_back(q.x);
      key.push_back(q.y);
    }
  }
  return key;
}

}  // namespace

GEvaluation evaluate(const Connection& conn, const SourceJunction& source,
                     const TargetTriangle& triangle, const EvaluationConfig& config,
                     const GEvaluation* warm_start) {
  source.validate();
  const ValidationReport report = validate_connection(conn, triangle);
  if (!report.ok()) {
    std::ostringstream msg;
    for (std::size_t k = 0; k < report.messages.size(); ++k)
      msg << (k ? "; " : "") << report.messages[k];
    if (const auto side = report.violated_side())
      throw NotAGraph("side " + side_name(*side) + ": " + msg.str());
    throw InvalidConnection(msg.str());
  }

  GEvaluation eval;
  eval.connection = conn;
  eval.grid = config.grid;
  std::array<SideOutcome, 3> outcome;
  auto warm_for = [&](Side s) -> const SurfaceField* {
    if (warm_start == nullptr) return nullptr;
    const auto& f = warm_start->fields[static_cast<std::size_t>(index(s))];
    return f.values().empty() ? nullptr : &f;
  };
  if (config.parallel) {
    std::array<std::future<SideOutcome>, 3> jobs;
    for (Side s : kSides)
      jobs[static_cast<std::size_t>(index(s))] =
          std::async(std::launch::async, solve_side, std::cref(conn), std::cref(source),
                     std::cref(triangle), std::cref(config), s, warm_for(s));
    // Report the first failing side in label order.
    std::exception_ptr failure;
    for (auto& job : jobs) {
      try {
        outcome[static_cast<std::size_t>(&job - jobs.data())] = job.get();
      } catch (...) {
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);
  } else {
    for (Side s : kSides)
      outcome[static_cast<std::size_t>(index(s))] = solve_side(conn, source, triangle, config, s, warm_for(s));
  }

  for (Side s : kSides) {
    const auto k = static_cast<std::size_t>(index(s));
    eval.widths[k] = triangle.side_length(s);
    eval.heights[k] = source.r(s);
    eval.areas[k] = outcome[k].field.area;
    eval.residuals[k] = outcome[k].field.residual;
    eval.iterations[k] = outcome[k].field.iterations;
    eval.data[k] = std::move(outcome[k].data);
    if (config.keep_fields) eval.fields[k] = std::move(outcome[k].field);
  }
  eval.total = eval.areas[0] + eval.areas[1] + eval.areas[2];
  return eval;
}

double upper_bound(const GEvaluation& eval, const SourceJunction& source) {
  return source.disk_area() + eval.total;
}

ContinuityGap continuity_gap(const GEvaluation& a, const GEvaluation& b) {
  if (!(a.grid == b.grid)) throw GridMismatch("continuity_gap: evaluations use different grids");
  ContinuityGap gap;
  double worst = -std::numeric_limits<double>::infinity();
  for (Side s : kSides) {
    const auto k = static_cast<std::size_t>(index(s));
    const double tol = 1e-12 * std::max(1.0, a.widths[k]);
    if (std::abs(a.widths[k] - b.widths[k]) > tol || std::abs(a.heights[k] - b.heights[k]) > tol)
      throw GridMismatch("continuity_gap: side " + side_name(s) + " rectangles differ");
    // The doubled surface is the mirror image of the Neumann one, so its
    // area is exactly twice the rectangle area.
    gap.lhs_per_side[k] = std::abs(2.0 * a.areas[k] - 2.0 * b.areas[k]);
    gap.rhs_per_side[k] = 2.0 * l1_distance(a.data[k], b.data[k]);
    const double excess = gap.lhs_per_side[k] - gap.rhs_per_side[k];
    if (excess > worst) {
      worst = excess;
      gap.side = s;
      gap.lhs = gap.lhs_per_side[k];
      gap.rhs = gap.rhs_per_side[k];
    }
  }
  return gap;
}

Evaluator::Evaluator(TargetTriangle triangle, SourceJunction source, EvaluationConfig config)
    : triangle_(std::move(triangle)), source_(source), config_(config) {
  source_.validate();
}

GEvaluation Evaluator::operator()(const Connection& conn) {
  const auto key = cache_key(conn);
  std::optional<GEvaluation> warm;
  {
    std::lock_guard lock(mutex_);
    if (const auto it = cache_.find(key); it != cache_.end()) {
      ++hits_;
      return it->second;
    }
    if (warm_) warm = last_;
  }
  EvaluationConfig cfg = config_;
  cfg.keep_fields = config_.keep_fields || warm_;
  GEvaluation eval = evaluate(conn, source_, triangle_, cfg, warm ? &*warm : nullptr);
  std::lock_guard lock(mutex_);
  ++solves_;
  if (warm_) last_ = eval;
  if (!config_.keep_fields)
    for (auto& f : eval.fields) f = SurfaceField();
  cache_.emplace(key, eval);
  return eval;
}

std::size_t Evaluator::solves() const {
  std::lock_guard lock(mutex_);
  return solves_;
}

std::size_t Evaluator::hits() const {
  std::lock_guard lock(mutex_);
  return hits_;
}

}  // namespace tja
