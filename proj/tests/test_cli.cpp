// Runs the tja binary as a subprocess and checks exit statuses, messages
// and output files.

#include "doctest.h"

#include "tja/io.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

namespace fs = std::filesystem;

namespace {

const char* kSymmetric = R"({
  "schema_version": 1,
  "triangle": [[0, 0], [1, 0], [0.5, 0.8660254037844386]],
  "source": {"r12": 1, "r23": 1, "r31": 1, "disk_radius": 1},
  "solver": {"grid": [16, 16]},
  "connection": {"p": [0.5, 0.28867513459481287]},
  "export_surfaces": false,
  OUTPUT
})";

struct Run {
  int status = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

class Workspace {
public:
  Workspace() : dir_(fs::temp_directory_path() / ("tja_cli_" + std::to_string(::getpid()))) {
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  ~Workspace() { fs::remove_all(dir_); }

  const fs::path& dir() const { return dir_; }

  // The config template's OUTPUT line becomes the given JSON members.
  fs::path config(const std::string& name, std::string members, const std::string& text = kSymmetric) {
    std::string body = text;
    if (members.empty()) members = R"("output_dir": ")" + (dir_ / "from_config").string() + "\"";
    body.replace(body.find("OUTPUT"), 6, members);
    const fs::path path = dir_ / (name + ".json");
    std::ofstream(path) << body;
    return path;
  }

  Run run(const std::string& args, const std::string& env = "") const {
    const fs::path out = dir_ / "stdout.txt";
    const fs::path err = dir_ / "stderr.txt";
    const std::string cmd = env + (env.empty() ? "" : " ") + std::string(TJA_CLI_PATH) + " " + args + " > " +
                            out.string() + " 2> " + err.string();
    const int raw = std::system(cmd.c_str());
    Run r;
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
  }

private:
  fs::path dir_;
};

}  // namespace

TEST_CASE("solve: symmetric config writes a report with equal side areas") {
  Workspace ws;
  const auto cfg = ws.config("sym", "");
  const Run r = ws.run("solve " + cfg.string());
  REQUIRE(r.status == 0);
  const auto report = tja::solve_report_from_json(slurp(ws.dir() / "from_config" / "report.json"));
  CHECK(report.sides[0].area == doctest::Approx(report.sides[1].area).epsilon(1e-10));
  CHECK(report.sides[1].area == doctest::Approx(report.sides[2].area).epsilon(1e-10));
  CHECK(contains(r.out, "G = "));
}

TEST_CASE("solve: double-valued branch exits 2 naming the side") {
  Workspace ws;
  const auto cfg = ws.config("bad", R"("output_dir": "unused")",
                             R"({"schema_version": 1,
    "triangle": [[0, 0], [1, 0], [0.5, 0.8660254037844386]],
    "source": {"r12": 1, "r23": 1, "r31": 1, "disk_radius": 1},
    "solver": {"grid": [16, 16]},
    "connection": {"p": [0.5, 0.3], "branches": [[[0, 0], [0.5, 0.3]], [[1, 0], [0.2, 0.2], [0.5, 0.3]],
                                                 [[0.5, 0.8660254037844386], [0.5, 0.3]]]},
    OUTPUT})");
  const Run r = ws.run("solve " + cfg.string() + " -o " + (ws.dir() / "o").string());
  CHECK(r.status == 2);
  CHECK(contains(r.err, "invalid connection: side 12"));
}

TEST_CASE("solve: missing disk radius names the field") {
  Workspace ws;
  const auto cfg = ws.config("nodisk", R"("output_dir": "unused")",
                             R"({"schema_version": 1,
    "triangle": [[0, 0], [1, 0], [0.5, 0.8660254037844386]],
    "source": {"r12": 1, "r23": 1, "r31": 1},
    OUTPUT})");
  const Run r = ws.run("solve " + cfg.string());
  CHECK(r.status == 2);
  CHECK(contains(r.err, "source.disk_radius"));
}

TEST_CASE("solve: Newton failure exits 3") {
  Workspace ws;
  const auto cfg = ws.config("nc", R"("output_dir": "unused")",
                             R"({"schema_version": 1,
    "triangle": [[0, 0], [1, 0], [0.5, 0.8660254037844386]],
    "source": {"r12": 1, "r23": 1, "r31": 1, "disk_radius": 1},
    "solver": {"grid": [16, 16], "max_iterations": 1},
    "connection": {"p": [0.5, 0.28867513459481287]},
    OUTPUT})");
  const Run r = ws.run("solve " + cfg.string() + " -o " + (ws.dir() / "o").string());
  CHECK(r.status == 3);
  CHECK(contains(r.err, "solver failure"));
}

TEST_CASE("output directory precedence") {
  Workspace ws;
  const auto cfg = ws.config("sym", "");
  const fs::path env_dir = ws.dir() / "from_env";
  const fs::path flag_dir = ws.dir() / "from_flag";
  const std::string env = "TJA_OUTPUT_DIR=" + env_dir.string();

  REQUIRE(ws.run("solve " + cfg.string() + " --output " + flag_dir.string(), env).status == 0);
  CHECK(fs::exists(flag_dir / "report.json"));
  CHECK_FALSE(fs::exists(env_dir));
  REQUIRE(ws.run("solve " + cfg.string(), env).status == 0);
  CHECK(fs::exists(env_dir / "report.json"));
  CHECK_FALSE(fs::exists(ws.dir() / "from_config"));
  REQUIRE(ws.run("solve " + cfg.string()).status == 0);
  CHECK(fs::exists(ws.dir() / "from_config" / "report.json"));
}

TEST_CASE("optimize: seeds 1 and 2 agree on the symmetric config") {
  Workspace ws;
  double g[2] = {0, 0};
  for (int seed : {1, 2}) {
    const fs::path out = ws.dir() / ("seed" + std::to_string(seed));
    const auto cfg = ws.config("opt" + std::to_string(seed),
                               R"("optimize": {"seed": )" + std::to_string(seed) + R"(}, "output_dir": ")" +
                                   out.string() + "\"");
    REQUIRE(ws.run("optimize " + cfg.string()).status == 0);
    const auto report = tja::optimize_report_from_json(slurp(out / "report.json"));
    CHECK(report.seed == static_cast<std::uint64_t>(seed));
    CHECK(fs::exists(out / "trace.csv"));
    g[seed - 1] = report.g;
  }
  CHECK(std::abs(g[0] - g[1]) <= 1e-6);
}

TEST_CASE("verify: exit statuses") {
  Workspace ws;
  const fs::path out = ws.dir() / "verify";
  const std::string dest = R"("output_dir": ")" + out.string() + "\"";

  auto cfg = ws.config("v", R"("verify": {"levels": 4}, )" + dest);
  // The 16-cell grid of the template is enough for the symmetric slope.
  Run r = ws.run("verify " + cfg.string());
  CHECK(r.status == 0);
  CHECK(contains(r.out, "slope = "));
  const auto report = tja::verify_report_from_json(slurp(out / "report.json"));
  CHECK(report.slope >= 0.9);
  CHECK(report.passed);
  CHECK(fs::exists(out / "convergence.csv"));

  cfg = ws.config("strict", R"("verify": {"min_slope": 5}, )" + dest);
  CHECK(ws.run("verify " + cfg.string()).status == 1);

  cfg = ws.config("short", R"("verify": {"levels": 1}, )" + dest);
  r = ws.run("verify " + cfg.string());
  CHECK(r.status == 2);
  CHECK(contains(r.err, "need >= 3 levels"));

  cfg = ws.config("wide", R"("verify": {"sector_angles_deg": [190, 85, 85]}, )" + dest);
  r = ws.run("verify " + cfg.string());
  CHECK(r.status == 4);
  CHECK(contains(r.err, "unsupported case"));
}

TEST_CASE("command line errors exit 2") {
  Workspace ws;
  CHECK(ws.run("").status == 2);
  CHECK(ws.run("solve").status == 2);
  CHECK(ws.run("solve " + (ws.dir() / "missing.json").string()).status == 2);
  CHECK(ws.run("frobnicate x").status == 2);
  CHECK(ws.run("--help").status == 0);
}
