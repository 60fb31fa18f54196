#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace tja {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator*(double k) const { return {x * k, y * k}; }
  constexpr Vec2 operator/(double k) const { return {x / k, y / k}; }
  constexpr bool operator==(const Vec2&) const = default;
};

constexpr Vec2 operator*(double k, Vec2 v) { return v * k; }
constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
// Counterclockwise rotation by pi/2.
constexpr Vec2 perp(Vec2 a) { return {-a.y, a.x}; }

// Sides of the target triangle. Side k joins vertex k to vertex (k+1)%3, so
// Side::s12 runs from alpha_1 to alpha_2 and Side::s31 from alpha_3 to alpha_1.
enum class Side : int { s12 = 0, s23 = 1, s31 = 2 };

inline constexpr std::array<Side, 3> kSides = {Side::s12, Side::s23, Side::s31};

constexpr int index(Side s) { return static_cast<int>(s); }
constexpr int first_vertex(Side s) { return index(s); }
constexpr int second_vertex(Side s) { return (index(s) + 1) % 3; }
// The two sides incident to vertex i: the one where it is the first vertex
// and the one where it is the second.
constexpr Side side_starting_at(int i) { return static_cast<Side>(i); }
constexpr Side side_ending_at(int i) { return static_cast<Side>((i + 2) % 3); }
std::string side_name(Side s);

// Orthonormal frame attached to a side: origin at its first vertex, tangent
// pointing to the second vertex, normal pointing into the triangle.
struct SideFrame {
  Vec2 origin;
  Vec2 tangent;
  Vec2 normal;
};

// Coordinates of a point in a side frame: abscissa along the tangent,
// height along the inward normal.
struct SideCoords {
  double abscissa = 0.0;
  double height = 0.0;
};

class TargetTriangle {
public:
  // Throws ValidationError when the three vertices are collinear.
  TargetTriangle(Vec2 a1, Vec2 a2, Vec2 a3);

  const Vec2& vertex(int i) const { return vertices_[static_cast<std::size_t>(i)]; }
  double side_length(Side s) const { return lengths_[static_cast<std::size_t>(index(s))]; }
  const SideFrame& frame(Side s) const { return frames_[static_cast<std::size_t>(index(s))]; }
  // Interior angle at vertex i, in radians.
  double angle(int i) const { return angles_[static_cast<std::size_t>(i)]; }
  double diameter() const;
  double area() const { return std::abs(signed_area2_) / 2.0; }
  // +1 for counterclockwise vertex order, -1 for clockwise.
  double orientation() const { return signed_area2_ > 0 ? 1.0 : -1.0; }
  Vec2 barycenter() const;

  // Unit vector from vertex i towards vertex j.
  Vec2 direction(int i, int j) const;

  bool contains(Vec2 q, double tol = 0.0) const;
  // p projects orthogonally onto the closed segment of every side. For an
  // obtuse triangle this is the region between the two perpendiculars at the
  // obtuse vertex; for a non-obtuse triangle it is the whole triangle.
  bool admits_triple_point(Vec2 p, double tol = 0.0) const;
  std::optional<int> obtuse_vertex() const;

private:
  std::array<Vec2, 3> vertices_;
  std::array<double, 3> lengths_{};
  std::array<SideFrame, 3> frames_{};
  std::array<double, 3> angles_{};
  double signed_area2_ = 0.0;
};

SideCoords project_to_side(const TargetTriangle& tri, Vec2 q, Side side);
Vec2 from_side_coords(const TargetTriangle& tri, SideCoords c, Side side);

// Lengths of the three straight jump segments in the source disk and the
// radius of that disk.
struct SourceJunction {
  double r12 = 1.0;
  double r23 = 1.0;
  double r31 = 1.0;
  double disk_radius = 1.0;

  double r(Side s) const;
  double disk_area() const;
  // Throws ValidationError unless all lengths are positive and r <= 2 R.
  void validate() const;
};

// A graph-type connection: a target triple point p and three polylines,
// branch i running from alpha_i to p (both endpoints included).
struct Connection {
  Vec2 p;
  std::array<std::vector<Vec2>, 3> branches;

  static Connection straight(const TargetTriangle& tri, Vec2 p);
  // Abscissa of the orthogonal projection of p on a side.
  double apex(const TargetTriangle& tri, Side s) const;
};

// Piecewise-linear profile over one side: the abscissae are strictly
// increasing from 0 to the side length, heights are measured along the
// inward normal. `apex` is the abscissa where the profile reaches p.
class SideFunction {
public:
  SideFunction() = default;
  SideFunction(Side side, std::vector<double> abscissae, std::vector<double> values,
               double apex);

  Side side() const { return side_; }
  double length() const { return s_.empty() ? 0.0 : s_.back(); }
  double apex() const { return apex_; }
  const std::vector<double>& abscissae() const { return s_; }
  const std::vector<double>& values() const { return v_; }
  std::size_t pieces() const { return s_.empty() ? 0 : s_.size() - 1; }

  double operator()(double s) const;
  double lipschitz() const;
  // Length of the graph {(s, phi(s))}.
  double graph_length() const;
  double max_value() const;

  static SideFunction zero(Side side, double length);
  static SideFunction tent(Side side, double length, double apex, double height);

private:
  Side side_ = Side::s12;
  std::vector<double> s_;
  std::vector<double> v_;
  double apex_ = 0.0;
};

// Integral of |f - g| over the common domain; both are piecewise linear so
// the value is exact up to rounding.
double l1_distance(const SideFunction& f, const SideFunction& g);

SideFunction build_side_function(const TargetTriangle& tri, const Connection& conn, Side side);

struct ValidationReport {
  bool p_in_triangle = true;
  bool p_admissible = true;      // projections of p land on every side
  bool p_not_vertex = true;
  bool knots_in_triangle = true;
  bool branches_well_formed = true;  // start at alpha_i, end at p
  bool meet_only_at_p = true;
  std::array<bool, 3> side_single_valued{true, true, true};
  std::array<bool, 3> branch_graphical{true, true, true};
  std::vector<std::string> messages;

  bool ok() const;
  // First side whose concatenated graph fails, if any.
  std::optional<Side> violated_side() const;
};

ValidationReport validate_connection(const Connection& conn, const TargetTriangle& tri);

// Interpolates the profile at n + 1 abscissae that include 0, the apex and
// the side length. Profiles with at most n pieces are returned unchanged.
SideFunction piecewise_linear_approximate(const SideFunction& profile, int n);

double branch_length(const std::vector<Vec2>& branch);
double connection_length(const Connection& conn);

// Per-vertex constants c_i with H1(Gamma_i) <= c_i for every admissible
// connection, and their sum.
struct LengthBound {
  std::array<double, 3> per_branch{};
  double total = 0.0;
};

// Uniform over all connections in the triangle.
LengthBound length_bound(const TargetTriangle& tri);
// Same estimate with |alpha_i - p| in place of its worst case.
LengthBound length_bound(const TargetTriangle& tri, Vec2 p);

}  // namespace tja
