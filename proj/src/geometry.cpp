#include "tja/geometry.hpp"

#include "tja/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace tja {

namespace {

// Relative position tolerance, scaled by the triangle diameter.
constexpr double kPositionTol = 1e-12;
// A branch piece must make a strictly positive angle with both incident
// sides; exactly vertical pieces are not Lipschitz graphs.
constexpr double kGraphicalTol = 1e-12;

double point_segment_distance(Vec2 q, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = dot(ab, ab);
  if (len2 == 0.0) return norm(q - a);
  const double t = std::clamp(dot(q - a, ab) / len2, 0.0, 1.0);
  return norm(q - (a + t * ab));
}

double segment_distance(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  const double o1 = cross(b - a, c - a);
  const double o2 = cross(b - a, d - a);
  const double o3 = cross(d - c, a - c);
  const double o4 = cross(d - c, b - c);
  if (((o1 > 0 && o2 < 0) || (o1 < 0 && o2 > 0)) && ((o3 > 0 && o4 < 0) || (o3 < 0 && o4 > 0)))
    return 0.0;
  return std::min({point_segment_distance(a, c, d), point_segment_distance(b, c, d),
                   point_segment_distance(c, a, b), point_segment_distance(d, a, b)});
}

// Side-frame coordinates of branch i followed by branch j reversed, with the
// shared point p appearing once and coincident consecutive knots merged.
std::vector<SideCoords> concatenated_coords(const TargetTriangle& tri, const Connection& conn,
                                            Side side) {
  const double tol = kPositionTol * tri.diameter();
  const auto& bi = conn.branches[static_cast<std::size_t>(first_vertex(side))];
  const auto& bj = conn.branches[static_cast<std::size_t>(second_vertex(side))];
  std::vector<Vec2> pts;
  pts.reserve(bi.size() + bj.size());
  auto push = [&](Vec2 q) {
    if (pts.empty() || norm(q - pts.back()) > tol) pts.push_back(q);
  };
  for (const Vec2& q : bi) push(q);
  push(conn.p);
  for (auto it = bj.rbegin(); it != bj.rend(); ++it) push(*it);
  std::vector<SideCoords> out;
  out.reserve(pts.size());
  for (const Vec2& q : pts) out.push_back(project_to_side(tri, q, side));
  return out;
}

}  // namespace

std::string side_name(Side s) {
  switch (s) {
    case Side::s12: return "12";
    case Side::s23: return "23";
    case Side::s31: return "31";
  }
  return "?";
}

TargetTriangle::TargetTriangle(Vec2 a1, Vec2 a2, Vec2 a3) : vertices_{a1, a2, a3} {
  signed_area2_ = cross(a2 - a1, a3 - a1);
  for (Side s : kSides) {
    const auto k = static_cast<std::size_t>(index(s));
    lengths_[k] = norm(vertex(second_vertex(s)) - vertex(first_vertex(s)));
  }
  const double diam = diameter();
  if (!(diam > 0.0) || !std::isfinite(signed_area2_) ||
      std::abs(signed_area2_) <= 1e-12 * diam * diam)
    throw ValidationError("target triangle is degenerate");
  const double orient = orientation();
  for (Side s : kSides) {
    const auto k = static_cast<std::size_t>(index(s));
    const Vec2 t = (vertex(second_vertex(s)) - vertex(first_vertex(s))) / lengths_[k];
    frames_[k] = {vertex(first_vertex(s)), t, perp(t) * orient};
  }
  for (int i = 0; i < 3; ++i) {
    const double c = dot(direction(i, (i + 1) % 3), direction(i, (i + 2) % 3));
    angles_[static_cast<std::size_t>(i)] = std::acos(std::clamp(c, -1.0, 1.0));
  }
}

double TargetTriangle::diameter() const {
  return std::max({lengths_[0], lengths_[1], lengths_[2]});
}

Vec2 TargetTriangle::barycenter() const {
  return (vertices_[0] + vertices_[1] + vertices_[2]) / 3.0;
}

Vec2 TargetTriangle::direction(int i, int j) const {
  const Vec2 d = vertex(j) - vertex(i);
  return d / norm(d);
}

bool TargetTriangle::contains(Vec2 q, double tol) const {
  for (Side s : kSides)
    if (project_to_side(*this, q, s).height < -tol) return false;
  return true;
}

bool TargetTriangle::admits_triple_point(Vec2 p, double tol) const {
  for (Side s : kSides) {
    const double a = project_to_side(*this, p, s).abscissa;
    if (a < -tol || a > side_length(s) + tol) return false;
  }
  return true;
}

std::optional<int> TargetTriangle::obtuse_vertex() const {
  for (int i = 0; i < 3; ++i)
    if (angle(i) > std::numbers::pi / 2 + 1e-12) return i;
  return std::nullopt;
}

SideCoords project_to_side(const TargetTriangle& tri, Vec2 q, Side side) {
  const SideFrame& f = tri.frame(side);
  const Vec2 d = q - f.origin;
  return {dot(d, f.tangent), dot(d, f.normal)};
}

Vec2 from_side_coords(const TargetTriangle& tri, SideCoords c, Side side) {
  const SideFrame& f = tri.frame(side);
  return f.origin + c.abscissa * f.tangent + c.height * f.normal;
}

double SourceJunction::r(Side s) const {
  switch (s) {
    case Side::s12: return r12;
    case Side::s23: return r23;
    case Side::s31: return r31;
  }
  return 0.0;
}

double SourceJunction::disk_area() const { return std::numbers::pi * disk_radius * disk_radius; }

void SourceJunction::validate() const {
  if (!(disk_radius > 0.0) || !std::isfinite(disk_radius))
    throw ValidationError("disk_radius must be positive");
  for (Side s : kSides) {
    const double v = r(s);
    if (!(v > 0.0) || !std::isfinite(v))
      throw ValidationError("jump length r" + side_name(s) + " must be positive");
    if (v > 2.0 * disk_radius)
      throw ValidationError("jump length r" + side_name(s) + " exceeds the disk diameter");
  }
}

Connection Connection::straight(const TargetTriangle& tri, Vec2 p) {
  Connection c;
  c.p = p;
  for (int i = 0; i < 3; ++i) c.branches[static_cast<std::size_t>(i)] = {tri.vertex(i), p};
  return c;
}

double Connection::apex(const TargetTriangle& tri, Side s) const {
  return project_to_side(tri, p, s).abscissa;
}

SideFunction::SideFunction(Side side, std::vector<double> abscissae, std::vector<double> values,
                           double apex)
    : side_(side), s_(std::move(abscissae)), v_(std::move(values)), apex_(apex) {
  if (s_.size() < 2 || s_.size() != v_.size())
    throw ValidationError("side function needs at least two knots and one value per knot");
  if (s_.front() != 0.0) throw ValidationError("side function must start at abscissa 0");
  for (std::size_t m = 1; m < s_.size(); ++m)
    if (!(s_[m] > s_[m - 1]))
      throw NotAGraph("side " + side_name(side) + ": abscissae are not strictly increasing");
}

double SideFunction::operator()(double s) const {
  if (s_.empty() || s < 0.0 || s > s_.back()) return 0.0;
  const auto it = std::upper_bound(s_.begin(), s_.end(), s);
  if (it == s_.end()) return v_.back();
  const auto m = static_cast<std::size_t>(it - s_.begin());
  const double t = (s - s_[m - 1]) / (s_[m] - s_[m - 1]);
  return v_[m - 1] + t * (v_[m] - v_[m - 1]);
}

double SideFunction::lipschitz() const {
  double l = 0.0;
  for (std::size_t m = 1; m < s_.size(); ++m)
    l = std::max(l, std::abs(v_[m] - v_[m - 1]) / (s_[m] - s_[m - 1]));
  return l;
}

double SideFunction::graph_length() const {
  double len = 0.0;
  for (std::size_t m = 1; m < s_.size(); ++m) len += std::hypot(s_[m] - s_[m - 1], v_[m] - v_[m - 1]);
  return len;
}

double SideFunction::max_value() const {
  return v_.empty() ? 0.0 : *std::max_element(v_.begin(), v_.end());
}

SideFunction SideFunction::zero(Side side, double length) {
  return SideFunction(side, {0.0, length}, {0.0, 0.0}, 0.5 * length);
}

SideFunction SideFunction::tent(Side side, double length, double apex, double height) {
  if (apex <= 0.0) return SideFunction(side, {0.0, length}, {height, 0.0}, 0.0);
  if (apex >= length) return SideFunction(side, {0.0, length}, {0.0, height}, length);
  return SideFunction(side, {0.0, apex, length}, {0.0, height, 0.0}, apex);
}

double l1_distance(const SideFunction& f, const SideFunction& g) {
  std::vector<double> knots = f.abscissae();
  knots.insert(knots.end(), g.abscissae().begin(), g.abscissae().end());
  std::sort(knots.begin(), knots.end());
  knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
  double total = 0.0;
  for (std::size_t m = 1; m < knots.size(); ++m) {
    const double a = knots[m - 1];
    const double b = knots[m];
    const double d0 = f(a) - g(a);
    const double d1 = f(b) - g(b);
    const double h = b - a;
    if ((d0 >= 0 && d1 >= 0) || (d0 <= 0 && d1 <= 0)) {
      total += 0.5 * h * std::abs(d0 + d1);
    } else {
      total += 0.5 * h * (d0 * d0 + d1 * d1) / (std::abs(d0) + std::abs(d1));
    }
  }
  return total;
}

SideFunction build_side_function(const TargetTriangle& tri, const Connection& conn, Side side) {
  const auto coords = concatenated_coords(tri, conn, side);
  const double len = tri.side_length(side);
  if (coords.size() < 2) throw NotAGraph("side " + side_name(side) + ": degenerate connection");
  std::vector<double> s;
  std::vector<double> v;
  s.reserve(coords.size());
  v.reserve(coords.size());
  for (const SideCoords& c : coords) {
    if (!s.empty() && !(c.abscissa > s.back())) {
      std::ostringstream msg;
      msg << "side " << side_name(side) << ": branches are not a graph (abscissa " << c.abscissa
          << " after " << s.back() << ")";
      throw NotAGraph(msg.str());
    }
    s.push_back(c.abscissa);
    v.push_back(c.height);
  }
  // The endpoints are the vertices themselves; remove rounding noise.
  const double tol = 1e-9 * tri.diameter();
  if (std::abs(s.front()) > tol || std::abs(s.back() - len) > tol)
    throw NotAGraph("side " + side_name(side) + ": branches do not start at the side vertices");
  s.front() = 0.0;
  s.back() = len;
  v.front() = 0.0;
  v.back() = 0.0;
  if (s.size() > 2 && !(s[1] > 0.0)) throw NotAGraph("side " + side_name(side) + ": vertical part");
  if (s.size() > 2 && !(s[s.size() - 2] < len))
    throw NotAGraph("side " + side_name(side) + ": vertical part");
  for (double& h : v)
    if (h < 0.0 && h > -tol) h = 0.0;
  return SideFunction(side, std::move(s), std::move(v), conn.apex(tri, side));
}

bool ValidationReport::ok() const {
  if (!(p_in_triangle && p_admissible && p_not_vertex && knots_in_triangle &&
        branches_well_formed && meet_only_at_p))
    return false;
  for (int k = 0; k < 3; ++k)
    if (!side_single_valued[static_cast<std::size_t>(k)] ||
        !branch_graphical[static_cast<std::size_t>(k)])
      return false;
  return true;
}

std::optional<Side> ValidationReport::violated_side() const {
  for (Side s : kSides)
    if (!side_single_valued[static_cast<std::size_t>(index(s))]) return s;
  return std::nullopt;
}

ValidationReport validate_connection(const Connection& conn, const TargetTriangle& tri) {
  ValidationReport rep;
  const double tol = kPositionTol * tri.diameter();
  auto fail = [&rep](bool& flag, std::string msg) {
    flag = false;
    rep.messages.push_back(std::move(msg));
  };

  if (!tri.contains(conn.p, tol)) fail(rep.p_in_triangle, "triple point lies outside the triangle");
  if (!tri.admits_triple_point(conn.p, tol))
    fail(rep.p_admissible, "triple point does not project onto every side (outside T_int)");
  for (int i = 0; i < 3; ++i)
    if (norm(conn.p - tri.vertex(i)) <= tol)
      fail(rep.p_not_vertex, "triple point coincides with vertex " + std::to_string(i + 1));

  for (int i = 0; i < 3; ++i) {
    const auto& b = conn.branches[static_cast<std::size_t>(i)];
    const std::string name = "branch " + std::to_string(i + 1);
    if (b.size() < 2 || norm(b.front() - tri.vertex(i)) > tol || norm(b.back() - conn.p) > tol) {
      fail(rep.branches_well_formed, name + " must run from its vertex to the triple point");
      continue;
    }
    for (const Vec2& q : b)
      if (!tri.contains(q, tol)) {
        fail(rep.knots_in_triangle, name + " has a knot outside the triangle");
        break;
      }
    const Vec2 u_next = tri.direction(i, (i + 1) % 3);
    const Vec2 u_prev = tri.direction(i, (i + 2) % 3);
    for (std::size_t m = 1; m < b.size(); ++m) {
      const Vec2 d = b[m] - b[m - 1];
      const double len = norm(d);
      if (len <= tol) continue;
      if (dot(d, u_next) / len <= kGraphicalTol || dot(d, u_prev) / len <= kGraphicalTol) {
        fail(rep.branch_graphical[static_cast<std::size_t>(i)],
             name + " is not a graph over both of its sides (piece " + std::to_string(m) + ")");
        break;
      }
    }
  }

  for (Side s : kSides) {
    const auto coords = concatenated_coords(tri, conn, s);
    for (std::size_t m = 1; m < coords.size(); ++m)
      if (!(coords[m].abscissa > coords[m - 1].abscissa)) {
        fail(rep.side_single_valued[static_cast<std::size_t>(index(s))],
             "side " + side_name(s) + ": concatenated branches are not single-valued");
        break;
      }
  }

  // Distinct branches may only touch at p, and only at the end of their
  // last pieces.
  if (rep.branches_well_formed && rep.p_not_vertex) {
    for (int i = 0; i < 3 && rep.meet_only_at_p; ++i) {
      for (int j = i + 1; j < 3 && rep.meet_only_at_p; ++j) {
        const auto& bi = conn.branches[static_cast<std::size_t>(i)];
        const auto& bj = conn.branches[static_cast<std::size_t>(j)];
        for (std::size_t a = 1; a < bi.size() && rep.meet_only_at_p; ++a) {
          for (std::size_t c = 1; c < bj.size(); ++c) {
            const bool last_i = a + 1 == bi.size();
            const bool last_j = c + 1 == bj.size();
            bool touching = false;
            if (last_i && last_j) {
              const Vec2 di = bi[a - 1] - conn.p;
              const Vec2 dj = bj[c - 1] - conn.p;
              const double ni = norm(di);
              const double nj = norm(dj);
              touching = ni <= tol || nj <= tol || dot(di, dj) / (ni * nj) > 1.0 - 1e-12;
            } else {
              touching = segment_distance(bi[a - 1], bi[a], bj[c - 1], bj[c]) <= tol;
            }
            if (touching) {
              fail(rep.meet_only_at_p, "branches " + std::to_string(i + 1) + " and " +
                                           std::to_string(j + 1) +
                                           " share a point other than the triple point");
              break;
            }
          }
        }
      }
    }
  } else if (!rep.p_not_vertex) {
    fail(rep.meet_only_at_p, "branches share more than the triple point");
  }
  return rep;
}

SideFunction piecewise_linear_approximate(const SideFunction& profile, int n) {
  if (n < 2) throw KnotBudgetTooSmall("piecewise-linear approximation needs n >= 2");
  if (profile.pieces() <= static_cast<std::size_t>(n)) return profile;
  const double len = profile.length();
  const double w = std::clamp(profile.apex(), 0.0, len);
  int left = static_cast<int>(std::lround(n * w / len));
  if (w > 0.0 && w < len) left = std::clamp(left, 1, n - 1);
  const int right = n - left;
  std::vector<double> s;
  s.reserve(static_cast<std::size_t>(n) + 1);
  for (int m = 0; m < left; ++m) s.push_back(w * m / left);
  for (int m = 0; m < right; ++m) s.push_back(w + (len - w) * m / right);
  s.push_back(len);
  s.front() = 0.0;
  std::vector<double> v;
  v.reserve(s.size());
  for (double x : s) v.push_back(profile(x));
  return SideFunction(profile.side(), std::move(s), std::move(v), profile.apex());
}

double branch_length(const std::vector<Vec2>& branch) {
  double len = 0.0;
  for (std::size_t m = 1; m < branch.size(); ++m) len += norm(branch[m] - branch[m - 1]);
  return len;
}

double connection_length(const Connection& conn) {
  double len = 0.0;
  for (const auto& b : conn.branches) len += branch_length(b);
  return len;
}

namespace {

// Tangents of a graphical branch at alpha_i lie in a cone of opening
// pi - theta_i; the slope relative to the chord alpha_i p is bounded on one
// side by cot(theta_i / 2), and the total variation argument gives
// H1 <= |alpha_i - p| (1 + 2 cot(theta_i / 2)).
LengthBound bound_from_distances(const TargetTriangle& tri, const std::array<double, 3>& dist) {
  LengthBound b;
  for (int i = 0; i < 3; ++i) {
    const double slope = 1.0 / std::tan(0.5 * tri.angle(i));
    const auto k = static_cast<std::size_t>(i);
    b.per_branch[k] = dist[k] * (1.0 + 2.0 * slope);
    b.total += b.per_branch[k];
  }
  return b;
}

}  // namespace

LengthBound length_bound(const TargetTriangle& tri) {
  std::array<double, 3> dist{};
  for (int i = 0; i < 3; ++i)
    dist[static_cast<std::size_t>(i)] =
        std::max(tri.side_length(side_starting_at(i)), tri.side_length(side_ending_at(i)));
  return bound_from_distances(tri, dist);
}

LengthBound length_bound(const TargetTriangle& tri, Vec2 p) {
  std::array<double, 3> dist{};
  for (int i = 0; i < 3; ++i) dist[static_cast<std::size_t>(i)] = norm(p - tri.vertex(i));
  return bound_from_distances(tri, dist);
}

}  // namespace tja
