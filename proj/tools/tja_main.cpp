// tja: solve, optimize and verify triple-junction upper bounds from a JSON
// config. Exit statuses: 0 ok, 1 slope check failed, 2 invalid input,
// 3 solver failure, 4 unsupported geometry.

#include "tja/io.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <string>

namespace {

using tja::ExitStatus;

// --output wins over TJA_OUTPUT_DIR, which wins over the config.
std::filesystem::path output_dir(const std::string& flag, const tja::RunConfig& config) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("TJA_OUTPUT_DIR"); env != nullptr && *env != '\0') return env;
  return config.output_dir;
}

void print_sides(const std::array<tja::SideReport, 3>& sides) {
  for (tja::Side s : tja::kSides) {
    const auto& r = sides[static_cast<std::size_t>(tja::index(s))];
    std::cout << "  A_" << tja::side_name(s) << " = " << r.area << "  (residual " << r.residual << ", "
              << r.iterations << " Newton steps)\n";
  }
}

int run_solve(const tja::RunConfig& config, const std::filesystem::path& out) {
  const auto r = tja::cmd_solve(config, out);
  print_sides(r.sides);
  std::cout << "  G = " << r.g << "\n  |D| + G = " << r.upper_bound << "\n";
  return 0;
}

int run_optimize(const tja::RunConfig& config, const std::filesystem::path& out) {
  const auto r = tja::cmd_optimize(config, out);
  std::cout << "  best p = (" << r.best.p.x << ", " << r.best.p.y << ")\n";
  print_sides(r.sides);
  std::cout << "  G = " << r.g << "\n  |D| + G = " << r.upper_bound << "\n  candidates = " << r.candidates
            << " (" << r.failures << " failed)\n  " << r.termination << "\n";
  return 0;
}

int run_verify(const tja::RunConfig& config, const std::filesystem::path& out) {
  const auto r = tja::cmd_verify(config, out);
  std::cout << "  reference |D| + G = " << r.reference << "\n";
  std::cout << "  " << std::setw(10) << "epsilon" << std::setw(16) << "error" << std::setw(16) << "T bound" << "\n";
  for (const auto& l : r.levels)
    std::cout << "  " << std::setw(10) << l.epsilon << std::setw(16) << l.error << std::setw(16) << l.triangle_bound
              << "\n";
  std::cout << "  slope = " << r.slope << " (need >= " << r.min_slope << ")\n";
  if (!r.passed) {
    std::cerr << "tja: convergence slope " << r.slope << " below " << r.min_slope << "\n";
    return static_cast<int>(ExitStatus::check_failed);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Upper bounds for the relaxed area of triple-junction maps"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output_flag;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", config_path, "JSON run config")->required()->check(CLI::ExistingFile);
    sub->add_option("-o,--output", output_flag, "Output directory (overrides TJA_OUTPUT_DIR and the config)");
  };
  auto* solve = app.add_subcommand("solve", "Evaluate G for the config's connection");
  auto* optimize = app.add_subcommand("optimize", "Minimize G over connections");
  auto* verify = app.add_subcommand("verify", "Convergence study of the approximating maps");
  add_common(solve);
  add_common(optimize);
  add_common(verify);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitStatus::invalid);
  }

  const auto start = std::chrono::steady_clock::now();
  int status = 0;
  try {
    const tja::RunConfig config = tja::load_config(config_path);
    const auto out = output_dir(output_flag, config);
    std::cout << std::setprecision(12);
    if (solve->parsed()) status = run_solve(config, out);
    if (optimize->parsed()) status = run_optimize(config, out);
    if (verify->parsed()) status = run_verify(config, out);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << "  output: " << out.string() << "  (" << std::setprecision(3) << secs << " s)\n";
  } catch (const std::exception& e) {
    std::string message;
    const ExitStatus code = tja::classify(e, message);
    std::cerr << "tja: " << message << "\n";
    return static_cast<int>(code);
  }
  return status;
}
