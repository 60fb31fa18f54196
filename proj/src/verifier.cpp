#include "tja/verifier.hpp"

#include "tja/error.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <numbers>
#include <sstream>

namespace tja {

namespace {

constexpr double kPi = std::numbers::pi;

Vec2 rotate(Vec2 v, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

// Signed area of triangle (0, a, b) intersected with the disk |z| <= r.
double triangle_disk_area(Vec2 a, Vec2 b, double r) {
  const Vec2 d = b - a;
  const double qa = dot(d, d);
  if (qa == 0.0) return 0.0;
  const double qb = 2.0 * dot(a, d);
  const double qc = dot(a, a) - r * r;
  double cuts[4] = {0.0, 1.0, 1.0, 1.0};
  int n = 1;
  const double disc = qb * qb - 4.0 * qa * qc;
  if (disc > 0.0) {
    const double root = std::sqrt(disc);
    // Stable pair of roots.
    const double q = -0.5 * (qb + std::copysign(root, qb));
    double t1 = q / qa;
    double t2 = q != 0.0 ? qc / q : t1;
    if (t1 > t2) std::swap(t1, t2);
    if (t1 > 0.0 && t1 < 1.0) cuts[n++] = t1;
    if (t2 > 0.0 && t2 < 1.0) cuts[n++] = t2;
  }
  cuts[n++] = 1.0;
  double area = 0.0;
  for (int k = 0; k + 1 < n; ++k) {
    const Vec2 p = a + cuts[k] * d;
    const Vec2 q = a + cuts[k + 1] * d;
    // No crossing lies inside a piece, so it is inside iff both ends are;
    // a midpoint test would misfile a segment tangent to the circle.
    if (std::max(dot(p, p), dot(q, q)) <= r * r * (1.0 + 1e-12))
      area += 0.5 * cross(p, q);
    else
      area += 0.5 * r * r * std::atan2(cross(p, q), dot(p, q));
  }
  return area;
}

double polygon_area(const std::vector<Vec2>& poly) {
  double a = 0.0;
  for (std::size_t k = 0; k < poly.size(); ++k) a += cross(poly[k], poly[(k + 1) % poly.size()]);
  return std::abs(0.5 * a);
}

Vec2 line_meet(Vec2 n1, Vec2 n2, double c) {
  // z . n1 = c and z . n2 = c.
  const double det = cross(n1, n2);
  return {c * (n2.y - n1.y) / det, c * (n1.x - n2.x) / det};
}

int start_vertex(Side s) { return index(s); }
int end_vertex(Side s) { return (index(s) + 1) % 3; }

// Wedge of region i: apex zeta^i, edges along the jump directions of the
// two sides meeting there.
std::array<Vec2, 2> wedge_edges(const EpsilonGeometry& g, int i) {
  return {g.directions[static_cast<std::size_t>(index(side_starting_at(i)))],
          g.directions[static_cast<std::size_t>(index(side_ending_at(i)))]};
}

bool in_wedge(const EpsilonGeometry& g, int i, Vec2 q) {
  const auto [da, db] = wedge_edges(g, i);
  const Vec2 v = q - g.zeta[static_cast<std::size_t>(i)];
  const double det = cross(da, db);
  return cross(v, db) / det > 0.0 && cross(da, v) / det > 0.0;
}

// Part of the strip rectangle of `s` beyond its cap, on the side of region
// i; empty unless r_ij < R.
std::vector<Vec2> beyond_cap(const StripGeometry& st, double radius, bool start_side) {
  const double x0 = std::clamp(0.0, st.x_begin, st.x_end);
  const double xa = start_side ? st.x_begin : x0;
  const double xb = start_side ? x0 : st.x_end;
  const double top = radius + 1.0;
  return {st.point(xa, st.y_end), st.point(xb, st.y_end), st.point(xb, top), st.point(xa, top)};
}

bool in_beyond_cap(const StripGeometry& st, Vec2 q, bool start_side) {
  const double x = dot(q, st.x_axis);
  const double y = dot(q, st.y_axis);
  const double x0 = std::clamp(0.0, st.x_begin, st.x_end);
  if (y <= st.y_end) return false;
  return start_side ? (x > st.x_begin && x < x0) : (x > x0 && x < st.x_end);
}

}  // namespace

double disk_polygon_area(Vec2 center, double radius, const std::vector<Vec2>& polygon) {
  double a = 0.0;
  for (std::size_t k = 0; k < polygon.size(); ++k)
    a += triangle_disk_area(polygon[k] - center, polygon[(k + 1) % polygon.size()] - center, radius);
  return std::abs(a);
}

std::vector<Vec2> StripGeometry::rectangle() const {
  return {point(x_begin, y_begin), point(x_end, y_begin), point(x_end, y_end), point(x_begin, y_end)};
}

bool StripGeometry::in_rectangle(Vec2 q) const {
  const double x = dot(q, x_axis);
  const double y = dot(q, y_axis);
  return x > x_begin && x < x_end && y > y_begin && y < y_end;
}

double EpsilonGeometry::disk_area() const { return kPi * disk_radius * disk_radius; }

double EpsilonGeometry::partition_error() const {
  double sum = triangle_area;
  for (int k = 0; k < 3; ++k)
    sum += region_areas[static_cast<std::size_t>(k)] + strips[static_cast<std::size_t>(k)].area;
  return std::abs(sum - disk_area());
}

bool EpsilonGeometry::in_disk(Vec2 q) const { return dot(q, q) < disk_radius * disk_radius; }

bool EpsilonGeometry::in_triangle(Vec2 q) const {
  for (const Vec2& d : directions)
    if (!(dot(q, d) < delta)) return false;
  return true;
}

bool EpsilonGeometry::in_strip(Side s, Vec2 q) const { return in_disk(q) && strip(s).in_rectangle(q); }

bool EpsilonGeometry::in_region(int i, Vec2 q) const {
  if (!in_disk(q)) return false;
  if (in_wedge(*this, i, q)) return true;
  return in_beyond_cap(strip(side_starting_at(i)), q, true) || in_beyond_cap(strip(side_ending_at(i)), q, false);
}

EpsilonGeometry build_geometry(const SourceJunction& source, const std::array<double, 3>& sector_angles,
                               double epsilon, double delta_ratio) {
  source.validate();
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ValidationError("epsilon must be positive");
  if (!(delta_ratio > 0.0)) throw ValidationError("delta_ratio must be positive");
  double total = 0.0;
  for (double w : sector_angles) {
    if (!(w > 0.0)) throw ValidationError("sector angles must be positive");
    total += w;
  }
  if (std::abs(total - 2.0 * kPi) > 1e-9) throw ValidationError("sector angles must sum to 2 pi");
  for (int i = 0; i < 3; ++i)
    if (sector_angles[static_cast<std::size_t>(i)] >= kPi) {
      std::ostringstream msg;
      msg << "sector " << i + 1 << " opens " << sector_angles[static_cast<std::size_t>(i)]
          << " rad >= pi; only the case of three angles below pi is handled";
      throw Case2NotSupported(msg.str());
    }
  for (Side s : kSides)
    if (source.r(s) > source.disk_radius * (1.0 + 1e-12))
      throw ValidationError("r_" + side_name(s) + " exceeds the disk radius");

  EpsilonGeometry g;
  g.epsilon = epsilon;
  g.delta = delta_ratio * epsilon;
  g.disk_radius = source.disk_radius;
  g.sector_angles = sector_angles;
  const Vec2 d12{0.0, 1.0};
  const Vec2 d31 = rotate(d12, sector_angles[0]);
  const Vec2 d23 = rotate(d31, sector_angles[2]);
  g.directions = {d12, d23, d31};
  for (int i = 0; i < 3; ++i) {
    const Vec2 na = g.directions[static_cast<std::size_t>(index(side_starting_at(i)))];
    const Vec2 nb = g.directions[static_cast<std::size_t>(index(side_ending_at(i)))];
    g.zeta[static_cast<std::size_t>(i)] = line_meet(na, nb, g.delta);
  }
  for (const Vec2& z : g.zeta)
    if (!(norm(z) < g.disk_radius))
      throw EpsilonTooLarge("T^eps is not inside the disk (epsilon = " + std::to_string(epsilon) + ")");
  for (Side s : kSides)
    if (!(g.delta < source.r(s)))
      throw EpsilonTooLarge("delta reaches r_" + side_name(s) + " (epsilon = " + std::to_string(epsilon) + ")");

  for (Side s : kSides) {
    StripGeometry& st = g.strips[static_cast<std::size_t>(index(s))];
    const Vec2 zi = g.zeta[static_cast<std::size_t>(start_vertex(s))];
    const Vec2 zj = g.zeta[static_cast<std::size_t>(end_vertex(s))];
    st.side = s;
    st.y_axis = g.directions[static_cast<std::size_t>(index(s))];
    st.x_axis = (zj - zi) / norm(zj - zi);
    st.x_begin = dot(zi, st.x_axis);
    st.x_end = dot(zj, st.x_axis);
    st.y_begin = g.delta;
    st.y_end = source.r(s);
    // The disk is centred at the junction, so no strip point lies beyond
    // y = r_ij and the rectangle needs no extra height.
    st.c_eps = 0.0;
    st.kappa = source.r(s) / (source.r(s) + st.c_eps - g.delta);
    st.area = disk_polygon_area({0, 0}, g.disk_radius, st.rectangle());
  }
  g.triangle_area = 0.5 * std::abs(cross(g.zeta[1] - g.zeta[0], g.zeta[2] - g.zeta[0]));

  for (int i = 0; i < 3; ++i) {
    const auto [da, db] = wedge_edges(g, i);
    const Vec2 z = g.zeta[static_cast<std::size_t>(i)];
    // Long enough to cover the disk inside the wedge.
    const double reach = 4.0 * g.disk_radius / std::sin(sector_angles[static_cast<std::size_t>(i)]);
    double a = disk_polygon_area({0, 0}, g.disk_radius, {z, z + reach * da, z + reach * (da + db), z + reach * db});
    a += disk_polygon_area({0, 0}, g.disk_radius, beyond_cap(g.strip(side_starting_at(i)), g.disk_radius, true));
    a += disk_polygon_area({0, 0}, g.disk_radius, beyond_cap(g.strip(side_ending_at(i)), g.disk_radius, false));
    g.region_areas[static_cast<std::size_t>(i)] = a;
  }
  return g;
}

double strip_integral(const SurfaceField& field, double kappa, double e) {
  return strip_integral(field, kappa, e, [](int, int) { return 1.0; });
}

double strip_area(const EpsilonGeometry& geom, Side side, const SurfaceField& field) {
  const StripGeometry& st = geom.strip(side);
  if (field.values().empty()) throw GridMismatch("strip_area: empty surface for side " + side_name(side));
  if (std::abs(field.height() - st.y_end) > 1e-12 * std::max(1.0, st.y_end))
    throw GridMismatch("strip_area: surface height differs from r_" + side_name(side));
  const double e = st.width() / field.width();
  const int ns = field.grid().ns;
  const int nt = field.grid().nt;
  const double r2 = geom.disk_radius * geom.disk_radius;
  std::vector<double> cover(static_cast<std::size_t>(ns) * static_cast<std::size_t>(nt), 1.0);
  auto x_of = [&](int a) { return st.x_begin + e * field.s(a); };
  auto y_of = [&](int b) { return st.y_begin + field.t(b) / st.kappa; };
  for (int b = 0; b < nt; ++b)
    for (int a = 0; a < ns; ++a) {
      const std::vector<Vec2> cell{st.point(x_of(a), y_of(b)), st.point(x_of(a + 1), y_of(b)),
                                   st.point(x_of(a + 1), y_of(b + 1)), st.point(x_of(a), y_of(b + 1))};
      bool inside = true;
      for (const Vec2& c : cell) inside = inside && dot(c, c) <= r2;
      if (inside) continue;
      const double frac = disk_polygon_area({0, 0}, geom.disk_radius, cell) / polygon_area(cell);
      cover[static_cast<std::size_t>(b) * static_cast<std::size_t>(ns) + static_cast<std::size_t>(a)] =
          std::clamp(frac, 0.0, 1.0);
    }
  return strip_integral(field, st.kappa, e, [&](int a, int b) {
    return cover[static_cast<std::size_t>(b) * static_cast<std::size_t>(ns) + static_cast<std::size_t>(a)];
  });
}

TotalArea total_area(const EpsilonGeometry& geom, const GEvaluation& eval, const TargetTriangle& triangle) {
  TotalArea out;
  for (double a : geom.region_areas) out.regions += a;
  for (Side s : kSides) {
    const auto k = static_cast<std::size_t>(index(s));
    if (eval.fields[k].values().empty())
      throw ValidationError("total_area needs the evaluation's surfaces (keep_fields)");
    out.strips[k] = strip_area(geom, s, eval.fields[k]);
  }
  out.triangle = geom.triangle_area;
  out.value = out.regions + out.strips[0] + out.strips[1] + out.strips[2] + out.triangle;

  // T^eps: u^eps is constant on the leaves QQ' of each corner triangle T_i,
  // so its Jacobian vanishes and the area element is at most
  // sqrt(1 + Lip^2); the floor |T^eps| is already in `value`.
  const Connection& conn = eval.connection;
  for (int i = 0; i < 3; ++i) {
    const Side sa = side_starting_at(i);  // edge zeta^i w^a
    const Side sb = side_ending_at(i);    // edge zeta^i w^c
    const auto ka = static_cast<std::size_t>(index(sa));
    const auto kb = static_cast<std::size_t>(index(sb));
    const SideFunction fa = build_side_function(triangle, conn, sa);
    const SideFunction fb = build_side_function(triangle, conn, sb);
    const double la = triangle.side_length(sa);
    const double lb = triangle.side_length(sb);
    const double ea = geom.strips[ka].width();
    const double eb = geom.strips[kb].width();
    const Vec2 zi = geom.zeta[static_cast<std::size_t>(i)];
    const Vec2 ua = geom.zeta[static_cast<std::size_t>((i + 1) % 3)] - zi;
    const Vec2 ub = geom.zeta[static_cast<std::size_t>((i + 2) % 3)] - zi;
    const double corner = std::atan2(std::abs(cross(ua, ub)), dot(ua, ub));

    // Psi sends Q at distance q from zeta^i to Q' at q'; along each branch
    // piece q'/q is monotone, so its range is attained at the knots.
    double rho_min = std::numeric_limits<double>::infinity();
    double rho_max = 0.0;
    for (const Vec2& knot : conn.branches[static_cast<std::size_t>(i)]) {
      const double s = project_to_side(triangle, knot, sa).abscissa;
      if (!(s > 1e-14 * la)) continue;
      const double d = lb - project_to_side(triangle, knot, sb).abscissa;
      const double rho = (d * eb / lb) / (s * ea / la);
      rho_min = std::min(rho_min, rho);
      rho_max = std::max(rho_max, rho);
    }
    // Law of sines in (zeta^i, Q, Q'): cot theta = (1/rho - cos corner) / sin corner
    // and cot theta' = (rho - cos corner) / sin corner.
    const double theta = std::atan2(std::sin(corner), 1.0 / rho_min - std::cos(corner));
    const double theta_p = std::atan2(std::sin(corner), rho_max - std::cos(corner));
    const double theta0 = std::min(theta, theta_p);
    const double edge_a = la / ea * std::sqrt(1.0 + fa.lipschitz() * fa.lipschitz());
    const double edge_b = lb / eb * std::sqrt(1.0 + fb.lipschitz() * fb.lipschitz());
    const double lip = std::max(edge_a, edge_b) / std::sin(theta0);
    const double qa = ea * fa.apex() / la;
    const double qb = eb * (lb - fb.apex()) / lb;
    const double t_i = 0.5 * qa * qb * std::sin(corner);
    out.theta0[static_cast<std::size_t>(i)] = theta0;
    out.lipschitz[static_cast<std::size_t>(i)] = lip;
    out.triangle_bound += t_i * (std::sqrt(1.0 + lip * lip) - 1.0);
  }
  return out;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ValidationError("loglog_slope needs two or more points");
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    mx += std::log(x[k]);
    my += std::log(y[k]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double dx = std::log(x[k]) - mx;
    sxy += dx * (std::log(y[k]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

ConvergenceStudy verify_convergence(const SourceJunction& source, const TargetTriangle& triangle,
                                    const Connection& connection, const std::array<double, 3>& sector_angles,
                                    const std::vector<double>& epsilons, const EvaluationConfig& config,
                                    double sigma_ratio, double delta_ratio) {
  if (epsilons.empty()) throw ValidationError("verify_convergence needs at least one epsilon");
  EvaluationConfig base_cfg = config;
  base_cfg.mollify_sigma = 0.0;
  base_cfg.keep_fields = false;
  const GEvaluation base = evaluate(connection, source, triangle, base_cfg);
  ConvergenceStudy out;
  out.reference = source.disk_area() + base.total;
  for (double eps : epsilons) {
    const EpsilonGeometry geom = build_geometry(source, sector_angles, eps, delta_ratio);
    EvaluationConfig cfg = config;
    cfg.mollify_sigma = sigma_ratio * eps;
    cfg.keep_fields = true;
    const GEvaluation e = evaluate(connection, source, triangle, cfg);
    const TotalArea t = total_area(geom, e, triangle);
    VerifierLevel level;
    level.epsilon = eps;
    level.value = t.value;
    level.error = t.value - out.reference;
    level.triangle_bound = t.triangle_bound;
    level.partition_error = geom.partition_error();
    for (std::size_t k = 0; k < 3; ++k) level.strip_errors[k] = t.strips[k] - base.areas[k];
    out.levels.push_back(level);
  }
  if (out.levels.size() >= 2) {
    std::vector<double> x;
    std::vector<double> y;
    for (const auto& l : out.levels) {
      x.push_back(l.epsilon);
      y.push_back(std::abs(l.error));
    }
    out.slope = loglog_slope(x, y);
  }
  return out;
}

}  // namespace tja
