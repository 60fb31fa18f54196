#include "tja/io.hpp"

#include "tja/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

namespace tja {

// Keeps report keys in the order written.
using json = nlohmann::ordered_json;

namespace {

// ---------------------------------------------------------------------------
// Config reading
// ---------------------------------------------------------------------------

[[noreturn]] void field_error(const std::string& path, const std::string& what) {
  throw ConfigError("config field '" + path + "': " + what);
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

std::string indexed(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

double as_double(const json& v, const std::string& path) {
  if (!v.is_number()) field_error(path, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) field_error(path, "expected a finite number");
  return x;
}

double as_positive(const json& v, const std::string& path) {
  const double x = as_double(v, path);
  if (!(x > 0.0)) field_error(path, "must be positive");
  return x;
}

long long as_integer(const json& v, const std::string& path) {
  if (!v.is_number_integer()) field_error(path, "expected an integer");
  if (v.is_number_unsigned() && v.get<std::uint64_t>() > static_cast<std::uint64_t>(std::numeric_limits<long long>::max()))
    field_error(path, "integer out of range");
  return v.get<long long>();
}

int as_int(const json& v, const std::string& path, long long lo) {
  const long long x = as_integer(v, path);
  if (x < lo) field_error(path, "must be at least " + std::to_string(lo));
  if (x > std::numeric_limits<int>::max()) field_error(path, "integer out of range");
  return static_cast<int>(x);
}

bool as_bool(const json& v, const std::string& path) {
  if (!v.is_boolean()) field_error(path, "expected true or false");
  return v.get<bool>();
}

std::string as_string(const json& v, const std::string& path) {
  if (!v.is_string()) field_error(path, "expected a string");
  return v.get<std::string>();
}

const json& as_array(const json& v, const std::string& path, std::size_t size = 0) {
  if (!v.is_array()) field_error(path, "expected an array");
  if (size != 0 && v.size() != size) field_error(path, "expected " + std::to_string(size) + " entries");
  return v;
}

Vec2 as_point(const json& v, const std::string& path) {
  const json& a = as_array(v, path, 2);
  return {as_double(a[0], indexed(path, 0)), as_double(a[1], indexed(path, 1))};
}

std::vector<Vec2> as_polyline(const json& v, const std::string& path) {
  const json& a = as_array(v, path);
  if (a.size() < 2) field_error(path, "a branch needs at least two points");
  std::vector<Vec2> out;
  for (std::size_t i = 0; i < a.size(); ++i) out.push_back(as_point(a[i], indexed(path, i)));
  return out;
}

// Object view that records which keys were read; finish() rejects the rest.
class Section {
public:
  Section(const json& object, std::string path) : obj_(object), path_(std::move(path)) {
    if (!obj_.is_object()) field_error(path_.empty() ? "<root>" : path_, "expected an object");
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    const auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  const json& require(const std::string& key) {
    const json* v = find(key);
    if (v == nullptr) throw ConfigError("config: missing field '" + join(path_, key) + "'");
    return *v;
  }

  std::string path(const std::string& key) const { return join(path_, key); }

  void finish() const {
    for (const auto& [key, value] : obj_.items())
      if (!seen_.count(key)) throw ConfigError("config: unknown field '" + join(path_, key) + "'");
  }

private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

std::size_t line_of(const std::string& text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

void read_solver(Section& sec, EvaluationConfig& ev) {
  if (const json* v = sec.find("grid")) {
    const json& a = as_array(*v, sec.path("grid"), 2);
    ev.grid.ns = as_int(a[0], indexed(sec.path("grid"), 0), 2);
    ev.grid.nt = as_int(a[1], indexed(sec.path("grid"), 1), 2);
  }
  SolverConfig& s = ev.solver;
  if (const json* v = sec.find("tolerance")) s.tolerance = as_positive(*v, sec.path("tolerance"));
  if (const json* v = sec.find("stage_tolerance")) s.stage_tolerance = as_positive(*v, sec.path("stage_tolerance"));
  if (const json* v = sec.find("max_iterations")) s.max_iterations = as_int(*v, sec.path("max_iterations"), 1);
  if (const json* v = sec.find("max_backtracks")) s.max_backtracks = as_int(*v, sec.path("max_backtracks"), 0);
  if (const json* v = sec.find("continuation_steps"))
    s.continuation_steps = as_int(*v, sec.path("continuation_steps"), 1);
  if (const json* v = sec.find("parallel")) ev.parallel = as_bool(*v, sec.path("parallel"));
  sec.finish();
}

void read_optimize(Section& sec, OptimizationSpec& o) {
  if (const json* v = sec.find("knots_per_branch")) o.knots_per_branch = as_int(*v, sec.path("knots_per_branch"), 0);
  if (const json* v = sec.find("grid_resolution")) o.grid_resolution = as_int(*v, sec.path("grid_resolution"), 1);
  if (const json* v = sec.find("multistarts")) o.multistarts = as_int(*v, sec.path("multistarts"), 1);
  if (const json* v = sec.find("local_tolerance")) o.local_tolerance = as_positive(*v, sec.path("local_tolerance"));
  if (const json* v = sec.find("max_evaluations")) o.max_evaluations = as_int(*v, sec.path("max_evaluations"), 1);
  if (const json* v = sec.find("seed")) {
    if (!v->is_number_unsigned()) field_error(sec.path("seed"), "expected a non-negative integer");
    o.seed = v->get<std::uint64_t>();
  }
  if (const json* v = sec.find("boundary_margin")) o.boundary_margin = as_positive(*v, sec.path("boundary_margin"));
  if (const json* v = sec.find("warm_start")) o.warm_start = as_bool(*v, sec.path("warm_start"));
  sec.finish();
}

void read_verify(Section& sec, VerifyConfig& vc) {
  if (const json* v = sec.find("sector_angles_deg")) {
    const json& a = as_array(*v, sec.path("sector_angles_deg"), 3);
    for (std::size_t i = 0; i < 3; ++i) vc.sector_angles_deg[i] = as_double(a[i], indexed(sec.path("sector_angles_deg"), i));
  }
  if (const json* v = sec.find("epsilon_max")) vc.epsilon_max = as_positive(*v, sec.path("epsilon_max"));
  if (const json* v = sec.find("levels")) vc.levels = as_int(*v, sec.path("levels"), 0);
  if (const json* v = sec.find("sigma_ratio")) {
    vc.sigma_ratio = as_double(*v, sec.path("sigma_ratio"));
    if (vc.sigma_ratio < 0.0) field_error(sec.path("sigma_ratio"), "must be non-negative");
  }
  if (const json* v = sec.find("delta_ratio")) vc.delta_ratio = as_positive(*v, sec.path("delta_ratio"));
  if (const json* v = sec.find("min_slope")) vc.min_slope = as_double(*v, sec.path("min_slope"));
  sec.finish();
}

// ---------------------------------------------------------------------------
// Report writing
// ---------------------------------------------------------------------------

// Non-finite values have no JSON number form.
json num(double x) {
  if (std::isfinite(x)) return x;
  if (std::isnan(x)) return "nan";
  return x > 0 ? "inf" : "-inf";
}

double to_num(const json& v) {
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    throw ValidationError("report: unexpected string '" + s + "' for a number");
  }
  return v.get<double>();
}

json point(Vec2 p) { return json::array({num(p.x), num(p.y)}); }
Vec2 to_point(const json& v) { return {to_num(v.at(0)), to_num(v.at(1))}; }

json triangle_json(const std::array<Vec2, 3>& t) { return json::array({point(t[0]), point(t[1]), point(t[2])}); }
std::array<Vec2, 3> to_triangle(const json& v) { return {to_point(v.at(0)), to_point(v.at(1)), to_point(v.at(2))}; }

json source_json(const SourceJunction& s) {
  return {{"r12", num(s.r12)}, {"r23", num(s.r23)}, {"r31", num(s.r31)}, {"disk_radius", num(s.disk_radius)}};
}
SourceJunction to_source(const json& v) {
  return {to_num(v.at("r12")), to_num(v.at("r23")), to_num(v.at("r31")), to_num(v.at("disk_radius"))};
}

json grid_json(GridSize g) { return json::array({g.ns, g.nt}); }
GridSize to_grid(const json& v) { return {v.at(0).get<int>(), v.at(1).get<int>()}; }

json connection_json(const Connection& c) {
  json branches = json::array();
  for (const auto& b : c.branches) {
    json pts = json::array();
    for (Vec2 q : b) pts.push_back(point(q));
    branches.push_back(std::move(pts));
  }
  return {{"p", point(c.p)}, {"branches", std::move(branches)}};
}
Connection to_connection(const json& v) {
  Connection c;
  c.p = to_point(v.at("p"));
  for (std::size_t i = 0; i < 3; ++i)
    for (const auto& q : v.at("branches").at(i)) c.branches[i].push_back(to_point(q));
  return c;
}

json sides_json(const std::array<SideReport, 3>& sides) {
  json out = json::object();
  for (Side s : kSides) {
    const auto& r = sides[static_cast<std::size_t>(index(s))];
    out[side_name(s)] = {{"width", num(r.width)},       {"height", num(r.height)}, {"area", num(r.area)},
                         {"residual", num(r.residual)}, {"iterations", r.iterations}};
  }
  return out;
}
std::array<SideReport, 3> to_sides(const json& v) {
  std::array<SideReport, 3> out{};
  for (Side s : kSides) {
    const json& r = v.at(side_name(s));
    out[static_cast<std::size_t>(index(s))] = {to_num(r.at("width")), to_num(r.at("height")), to_num(r.at("area")),
                                               to_num(r.at("residual")), r.at("iterations").get<int>()};
  }
  return out;
}

std::array<SideReport, 3> side_reports(const GEvaluation& e) {
  std::array<SideReport, 3> out{};
  for (std::size_t k = 0; k < 3; ++k) out[k] = {e.widths[k], e.heights[k], e.areas[k], e.residuals[k], e.iterations[k]};
  return out;
}

json parse_report(const std::string& text, const char* kind) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("report: ") + e.what());
  }
  if (j.value("kind", std::string()) != kind) throw ValidationError(std::string("report: expected kind '") + kind + "'");
  if (j.value("schema_version", 0) != kSchemaVersion) throw ValidationError("report: unsupported schema_version");
  return j;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

// 17 significant digits read back to the same double.
std::string g17(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void export_surfaces(const GEvaluation& eval, const std::filesystem::path& dir) {
  for (Side s : kSides) {
    const auto& f = eval.fields[static_cast<std::size_t>(index(s))];
    if (f.values().empty()) continue;
    write_surface_csv(dir / ("surface_" + side_name(s) + ".csv"), f);
    write_quad_mesh(dir / ("surface_" + side_name(s) + ".mesh"), quad_mesh(f));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

Connection ConnectionConfig::build(const TargetTriangle& triangle) const {
  if (!branches) return Connection::straight(triangle, p);
  Connection c;
  c.p = p;
  c.branches = *branches;
  return c;
}

std::vector<double> VerifyConfig::epsilons() const {
  if (levels < 3)
    throw ConfigError("config field 'verify.levels': need >= 3 levels for a slope, got " + std::to_string(levels));
  std::vector<double> out;
  for (int k = 0; k < levels; ++k) out.push_back(std::ldexp(epsilon_max, -k));
  return out;
}

TargetTriangle RunConfig::target() const { return TargetTriangle(triangle[0], triangle[1], triangle[2]); }

RunConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    // e.byte is one past the offending character.
    const std::size_t byte = e.byte > 0 ? e.byte - 1 : 0;
    std::string what = e.what();
    // Drop nlohmann's "[json.exception.parse_error.101] parse error at line L, column C: ".
    if (const auto pos = what.find(": "); pos != std::string::npos) what = what.substr(pos + 2);
    throw ConfigError("config line " + std::to_string(line_of(text, byte)) + ": " + what);
  }

  RunConfig cfg;
  Section top(root, "");
  cfg.schema_version = as_int(top.require("schema_version"), "schema_version", 0);
  if (cfg.schema_version != kSchemaVersion)
    field_error("schema_version", "unsupported version " + std::to_string(cfg.schema_version));

  {
    const json& t = as_array(top.require("triangle"), "triangle", 3);
    for (std::size_t i = 0; i < 3; ++i) cfg.triangle[i] = as_point(t[i], indexed("triangle", i));
  }
  {
    Section s(top.require("source"), "source");
    cfg.source.r12 = as_positive(s.require("r12"), "source.r12");
    cfg.source.r23 = as_positive(s.require("r23"), "source.r23");
    cfg.source.r31 = as_positive(s.require("r31"), "source.r31");
    cfg.source.disk_radius = as_positive(s.require("disk_radius"), "source.disk_radius");
    s.finish();
  }
  if (const json* v = top.find("solver")) {
    Section s(*v, "solver");
    read_solver(s, cfg.evaluation);
  }
  if (const json* v = top.find("connection")) {
    Section s(*v, "connection");
    ConnectionConfig cc;
    cc.p = as_point(s.require("p"), "connection.p");
    if (const json* b = s.find("branches")) {
      const json& a = as_array(*b, "connection.branches", 3);
      std::array<std::vector<Vec2>, 3> branches;
      for (std::size_t i = 0; i < 3; ++i) branches[i] = as_polyline(a[i], indexed("connection.branches", i));
      cc.branches = std::move(branches);
    }
    s.finish();
    cfg.connection = std::move(cc);
  }
  if (const json* v = top.find("optimize")) {
    Section s(*v, "optimize");
    read_optimize(s, cfg.optimize);
  }
  if (const json* v = top.find("verify")) {
    Section s(*v, "verify");
    read_verify(s, cfg.verify);
  }
  if (const json* v = top.find("output_dir")) cfg.output_dir = as_string(*v, "output_dir");
  if (const json* v = top.find("export_surfaces")) cfg.export_surfaces = as_bool(*v, "export_surfaces");
  top.finish();

  // Domain checks, re-raised with the field that carries the bad value.
  const auto check = [](const char* field, auto&& fn) {
    try {
      fn();
    } catch (const ConfigError&) {
      throw;
    } catch (const ValidationError& e) {
      field_error(field, e.what());
    }
  };
  check("triangle", [&] { (void)cfg.target(); });
  check("source", [&] { cfg.source.validate(); });
  check("solver", [&] { cfg.evaluation.solver.validate(); });
  cfg.optimize.evaluation = cfg.evaluation;
  check("optimize", [&] { cfg.optimize.validate(); });
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

std::string to_json(const SolveReport& r) {
  const json j = {{"kind", "solve"},
                  {"schema_version", kSchemaVersion},
                  {"triangle", triangle_json(r.triangle)},
                  {"source", source_json(r.source)},
                  {"grid", grid_json(r.grid)},
                  {"connection", connection_json(r.connection)},
                  {"sides", sides_json(r.sides)},
                  {"G", num(r.g)},
                  {"disk_area", num(r.disk_area)},
                  {"upper_bound", num(r.upper_bound)}};
  return j.dump(2) + "\n";
}

SolveReport solve_report_from_json(const std::string& text) {
  const json j = parse_report(text, "solve");
  try {
    SolveReport r;
    r.triangle = to_triangle(j.at("triangle"));
    r.source = to_source(j.at("source"));
    r.grid = to_grid(j.at("grid"));
    r.connection = to_connection(j.at("connection"));
    r.sides = to_sides(j.at("sides"));
    r.g = to_num(j.at("G"));
    r.disk_area = to_num(j.at("disk_area"));
    r.upper_bound = to_num(j.at("upper_bound"));
    return r;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("report: ") + e.what());
  }
}

std::string to_json(const OptimizeReport& r) {
  const json j = {{"kind", "optimize"},
                  {"schema_version", kSchemaVersion},
                  {"triangle", triangle_json(r.triangle)},
                  {"source", source_json(r.source)},
                  {"grid", grid_json(r.grid)},
                  {"seed", r.seed},
                  {"knots_per_branch", r.knots_per_branch},
                  {"best", connection_json(r.best)},
                  {"sides", sides_json(r.sides)},
                  {"G", num(r.g)},
                  {"upper_bound", num(r.upper_bound)},
                  {"candidates", r.candidates},
                  {"failures", r.failures},
                  {"termination", r.termination}};
  return j.dump(2) + "\n";
}

OptimizeReport optimize_report_from_json(const std::string& text) {
  const json j = parse_report(text, "optimize");
  try {
    OptimizeReport r;
    r.triangle = to_triangle(j.at("triangle"));
    r.source = to_source(j.at("source"));
    r.grid = to_grid(j.at("grid"));
    r.seed = j.at("seed").get<std::uint64_t>();
    r.knots_per_branch = j.at("knots_per_branch").get<int>();
    r.best = to_connection(j.at("best"));
    r.sides = to_sides(j.at("sides"));
    r.g = to_num(j.at("G"));
    r.upper_bound = to_num(j.at("upper_bound"));
    r.candidates = j.at("candidates").get<std::size_t>();
    r.failures = j.at("failures").get<std::size_t>();
    r.termination = j.at("termination").get<std::string>();
    return r;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("report: ") + e.what());
  }
}

std::string to_json(const VerifyReport& r) {
  json levels = json::array();
  for (const auto& l : r.levels)
    levels.push_back({{"epsilon", num(l.epsilon)},
                      {"value", num(l.value)},
                      {"error", num(l.error)},
                      {"triangle_bound", num(l.triangle_bound)},
                      {"strip_errors", json::array({num(l.strip_errors[0]), num(l.strip_errors[1]), num(l.strip_errors[2])})},
                      {"partition_error", num(l.partition_error)}});
  const json j = {{"kind", "verify"},
                  {"schema_version", kSchemaVersion},
                  {"sector_angles_deg",
                   json::array({num(r.sector_angles_deg[0]), num(r.sector_angles_deg[1]), num(r.sector_angles_deg[2])})},
                  {"grid", grid_json(r.grid)},
                  {"reference", num(r.reference)},
                  {"slope", num(r.slope)},
                  {"min_slope", num(r.min_slope)},
                  {"passed", r.passed},
                  {"levels", std::move(levels)}};
  return j.dump(2) + "\n";
}

VerifyReport verify_report_from_json(const std::string& text) {
  const json j = parse_report(text, "verify");
  try {
    VerifyReport r;
    for (std::size_t i = 0; i < 3; ++i) r.sector_angles_deg[i] = to_num(j.at("sector_angles_deg").at(i));
    r.grid = to_grid(j.at("grid"));
    r.reference = to_num(j.at("reference"));
    r.slope = to_num(j.at("slope"));
    r.min_slope = to_num(j.at("min_slope"));
    r.passed = j.at("passed").get<bool>();
    for (const auto& l : j.at("levels")) {
      VerifierLevel v;
      v.epsilon = to_num(l.at("epsilon"));
      v.value = to_num(l.at("value"));
      v.error = to_num(l.at("error"));
      v.triangle_bound = to_num(l.at("triangle_bound"));
      for (std::size_t i = 0; i < 3; ++i) v.strip_errors[i] = to_num(l.at("strip_errors").at(i));
      v.partition_error = to_num(l.at("partition_error"));
      r.levels.push_back(v);
    }
    return r;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("report: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Exports
// ---------------------------------------------------------------------------

void write_surface_csv(const std::filesystem::path& path, const SurfaceField& f) {
  std::ostringstream out;
  out << "s,t,u\n";
  for (int b = 0; b <= f.grid().nt; ++b)
    for (int a = 0; a <= f.grid().ns; ++a) out << g17(f.s(a)) << ',' << g17(f.t(b)) << ',' << g17(f.at(a, b)) << '\n';
  write_text(path, out.str());
}

QuadMesh quad_mesh(const SurfaceField& f) {
  QuadMesh m;
  const int ns = f.grid().ns;
  const int nt = f.grid().nt;
  m.vertices.reserve(f.values().size());
  for (int b = 0; b <= nt; ++b)
    for (int a = 0; a <= ns; ++a) m.vertices.push_back({f.s(a), f.t(b), f.at(a, b)});
  const auto id = [&](int a, int b) { return static_cast<int>(f.node(a, b)); };
  for (int b = 0; b < nt; ++b)
    for (int a = 0; a < ns; ++a) m.quads.push_back({id(a, b), id(a + 1, b), id(a + 1, b + 1), id(a, b + 1)});
  return m;
}

void write_quad_mesh(const std::filesystem::path& path, const QuadMesh& m) {
  std::ostringstream out;
  out << "tja-quadmesh 1\n";
  out << "vertices " << m.vertices.size() << '\n';
  for (const auto& v : m.vertices) out << g17(v[0]) << ' ' << g17(v[1]) << ' ' << g17(v[2]) << '\n';
  out << "quads " << m.quads.size() << '\n';
  for (const auto& q : m.quads) out << q[0] << ' ' << q[1] << ' ' << q[2] << ' ' << q[3] << '\n';
  write_text(path, out.str());
}

QuadMesh read_quad_mesh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("mesh: cannot open " + path.string());
  const auto fail = [&](const std::string& what) -> ValidationError {
    return ValidationError("mesh " + path.string() + ": " + what);
  };
  std::string word;
  int version = 0;
  if (!(in >> word >> version) || word != "tja-quadmesh" || version != 1) throw fail("bad header");
  std::size_t n = 0;
  if (!(in >> word >> n) || word != "vertices") throw fail("expected 'vertices'");
  QuadMesh m;
  m.vertices.resize(n);
  for (auto& v : m.vertices)
    if (!(in >> v[0] >> v[1] >> v[2])) throw fail("truncated vertex list");
  if (!(in >> word >> n) || word != "quads") throw fail("expected 'quads'");
  m.quads.resize(n);
  for (auto& q : m.quads) {
    if (!(in >> q[0] >> q[1] >> q[2] >> q[3])) throw fail("truncated quad list");
    for (int k : q)
      if (k < 0 || static_cast<std::size_t>(k) >= m.vertices.size()) throw fail("quad index out of range");
  }
  return m;
}

void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceEntry>& trace) {
  std::ostringstream out;
  out << "iteration,px,py,total,improved\n";
  for (const auto& t : trace)
    out << t.iteration << ',' << g17(t.p.x) << ',' << g17(t.p.y) << ',' << g17(t.total) << ',' << (t.improved ? 1 : 0)
        << '\n';
  write_text(path, out.str());
}

void write_convergence_csv(const std::filesystem::path& path, const ConvergenceStudy& study) {
  std::ostringstream out;
  out << "epsilon,value,error,bound\n";
  for (const auto& l : study.levels)
    out << g17(l.epsilon) << ',' << g17(l.value) << ',' << g17(l.error) << ',' << g17(l.triangle_bound) << '\n';
  write_text(path, out.str());
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

SolveReport cmd_solve(const RunConfig& config, const std::filesystem::path& output_dir) {
  if (!config.connection) throw ConfigError("config: missing field 'connection' (required by solve)");
  const TargetTriangle tri = config.target();
  const Connection conn = config.connection->build(tri);
  EvaluationConfig ev = config.evaluation;
  ev.keep_fields = config.export_surfaces;
  const GEvaluation eval = evaluate(conn, config.source, tri, ev);

  SolveReport r;
  r.triangle = config.triangle;
  r.source = config.source;
  r.grid = eval.grid;
  r.connection = eval.connection;
  r.sides = side_reports(eval);
  r.g = eval.total;
  r.disk_area = config.source.disk_area();
  r.upper_bound = upper_bound(eval, config.source);

  std::filesystem::create_directories(output_dir);
  write_text(output_dir / "report.json", to_json(r));
  if (config.export_surfaces) export_surfaces(eval, output_dir);
  return r;
}

OptimizeReport cmd_optimize(const RunConfig& config, const std::filesystem::path& output_dir) {
  const TargetTriangle tri = config.target();
  OptimizationSpec spec = config.optimize;
  spec.evaluation = config.evaluation;
  const OptimizationResult res = minimize(spec, config.source, tri);

  OptimizeReport r;
  r.triangle = config.triangle;
  r.source = config.source;
  r.grid = res.evaluation.grid;
  r.seed = spec.seed;
  r.knots_per_branch = spec.knots_per_branch;
  r.best = res.best;
  r.sides = side_reports(res.evaluation);
  r.g = res.evaluation.total;
  r.upper_bound = upper_bound(res.evaluation, config.source);
  r.candidates = res.candidates;
  r.failures = res.failures;
  r.termination = res.termination;

  std::filesystem::create_directories(output_dir);
  write_text(output_dir / "report.json", to_json(r));
  write_trace_csv(output_dir / "trace.csv", res.trace);
  if (config.export_surfaces) {
    // The optimizer drops surfaces; one more solve recovers the winner's.
    EvaluationConfig ev = config.evaluation;
    ev.keep_fields = true;
    export_surfaces(evaluate(res.best, config.source, tri, ev), output_dir);
  }
  return r;
}

VerifyReport cmd_verify(const RunConfig& config, const std::filesystem::path& output_dir) {
  const std::vector<double> eps = config.verify.epsilons();
  const TargetTriangle tri = config.target();
  const Connection conn = config.connection ? config.connection->build(tri) : steiner_initial(tri);
  std::array<double, 3> angles{};
  for (std::size_t i = 0; i < 3; ++i) angles[i] = config.verify.sector_angles_deg[i] * std::numbers::pi / 180.0;
  // Unsupported openings are rejected before any solve.
  (void)build_geometry(config.source, angles, eps.front(), config.verify.delta_ratio);

  const ConvergenceStudy study = verify_convergence(config.source, tri, conn, angles, eps, config.evaluation,
                                                    config.verify.sigma_ratio, config.verify.delta_ratio);
  VerifyReport r;
  r.sector_angles_deg = config.verify.sector_angles_deg;
  r.grid = config.evaluation.grid;
  r.reference = study.reference;
  r.slope = study.slope;
  r.min_slope = config.verify.min_slope;
  r.passed = study.slope >= config.verify.min_slope;
  r.levels = study.levels;

  std::filesystem::create_directories(output_dir);
  write_text(output_dir / "report.json", to_json(r));
  write_convergence_csv(output_dir / "convergence.csv", study);
  return r;
}

ExitStatus classify(const std::exception& e, std::string& message) {
  if (dynamic_cast<const NotAGraph*>(&e) || dynamic_cast<const InvalidConnection*>(&e)) {
    message = std::string("invalid connection: ") + e.what();
    return ExitStatus::invalid;
  }
  if (dynamic_cast<const ConfigError*>(&e)) {
    message = e.what();
    return ExitStatus::invalid;
  }
  if (dynamic_cast<const ValidationError*>(&e)) {
    message = std::string("invalid input: ") + e.what();
    return ExitStatus::invalid;
  }
  if (dynamic_cast<const NonConvergence*>(&e)) {
    message = std::string("solver failure: ") + e.what();
    return ExitStatus::solver;
  }
  if (dynamic_cast<const Case2NotSupported*>(&e)) {
    message = std::string("unsupported case: ") + e.what();
    return ExitStatus::unsupported;
  }
  message = std::string("error: ") + e.what();
  return ExitStatus::solver;
}

}  // namespace tja
