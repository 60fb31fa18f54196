#pragma once

#include "tja/functional.hpp"
#include "tja/geometry.hpp"
#include "tja/optimizer.hpp"
#include "tja/plateau.hpp"
#include "tja/verifier.hpp"

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace tja {

inline constexpr int kSchemaVersion = 1;

// Explicit connection from the config. Without branches the connection is
// made of straight segments from the vertices to p.
struct ConnectionConfig {
  Vec2 p;
  std::optional<std::array<std::vector<Vec2>, 3>> branches;

  Connection build(const TargetTriangle& triangle) const;
};

struct VerifyConfig {
  // Openings of the sectors where u = alpha_1, alpha_2, alpha_3.
  std::array<double, 3> sector_angles_deg{120.0, 120.0, 120.0};
  // Dyadic ladder epsilon_max, epsilon_max / 2, ...
  double epsilon_max = 0.1;
  int levels = 4;
  double sigma_ratio = 1.0;
  double delta_ratio = 1.0;
  double min_slope = 0.9;

  // Throws ConfigError for fewer than three levels.
  std::vector<double> epsilons() const;
};

struct RunConfig {
  int schema_version = kSchemaVersion;
  std::array<Vec2, 3> triangle;
  SourceJunction source;
  // solver, grid and parallel; shared by every command.
  EvaluationConfig evaluation;
  std::optional<ConnectionConfig> connection;
  // Its evaluation member is overwritten by `evaluation` when run.
  OptimizationSpec optimize;
  VerifyConfig verify;
  std::string output_dir = "tja_out";
  bool export_surfaces = true;

  TargetTriangle target() const;
};

// Throws ConfigError naming the line for malformed text and the dotted
// field path for missing, unknown or ill-typed entries.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

struct SideReport {
  double width = 0.0;
  double height = 0.0;
  double area = 0.0;
  double residual = 0.0;
  int iterations = 0;
};

struct SolveReport {
  std::array<Vec2, 3> triangle;
  SourceJunction source;
  GridSize grid;
  Connection connection;
  std::array<SideReport, 3> sides;
  double g = 0.0;
  double disk_area = 0.0;
  double upper_bound = 0.0;  // |D| + G
};

struct OptimizeReport {
  std::array<Vec2, 3> triangle;
  SourceJunction source;
  GridSize grid;
  std::uint64_t seed = 0;
  int knots_per_branch = 0;
  Connection best;
  std::array<SideReport, 3> sides;
  double g = 0.0;
  double upper_bound = 0.0;
  std::size_t candidates = 0;
  std::size_t failures = 0;
  std::string termination;
};

struct VerifyReport {
  std::array<double, 3> sector_angles_deg{};
  GridSize grid;
  double reference = 0.0;
  double slope = 0.0;
  double min_slope = 0.0;
  bool passed = false;
  std::vector<VerifierLevel> levels;
};

// JSON text whose numbers reload to the same doubles.
std::string to_json(const SolveReport& report);
std::string to_json(const OptimizeReport& report);
std::string to_json(const VerifyReport& report);
SolveReport solve_report_from_json(const std::string& text);
OptimizeReport optimize_report_from_json(const std::string& text);
VerifyReport verify_report_from_json(const std::string& text);

// One "s,t,u" row per node, s fastest.
void write_surface_csv(const std::filesystem::path& path, const SurfaceField& field);

// Vertices (s, t, u) and counterclockwise quads over the (s, t) grid.
struct QuadMesh {
  std::vector<std::array<double, 3>> vertices;
  std::vector<std::array<int, 4>> quads;
};

QuadMesh quad_mesh(const SurfaceField& field);
void write_quad_mesh(const std::filesystem::path& path, const QuadMesh& mesh);
QuadMesh read_quad_mesh(const std::filesystem::path& path);

void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceEntry>& trace);
void write_convergence_csv(const std::filesystem::path& path, const ConvergenceStudy& study);

// Each command creates `output_dir` and writes report.json there, plus the
// per-side surfaces (solve, optimize), trace.csv (optimize) or
// convergence.csv (verify).
SolveReport cmd_solve(const RunConfig& config, const std::filesystem::path& output_dir);
OptimizeReport cmd_optimize(const RunConfig& config, const std::filesystem::path& output_dir);
// A failed slope check is reported through `passed`, not thrown.
VerifyReport cmd_verify(const RunConfig& config, const std::filesystem::path& output_dir);

// 0 success, 1 slope check failed, 2 invalid input, 3 solver failure,
// 4 unsupported geometry.
enum class ExitStatus : int { ok = 0, check_failed = 1, invalid = 2, solver = 3, unsupported = 4 };

// Exit status and one-line message for an exception thrown by a command.
ExitStatus classify(const std::exception& e, std::string& message);

}  // namespace tja
