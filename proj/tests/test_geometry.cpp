#include "doctest.h"

#include "support.hpp"
#include "tja/error.hpp"
#include "tja/geometry.hpp"

#include <cmath>
#include <numbers>

using namespace tja;
using namespace tja::testing;

namespace {

const double kSqrt3 = std::sqrt(3.0);

TargetTriangle equilateral() { return TargetTriangle({0, 0}, {1, 0}, {0.5, kSqrt3 / 2}); }

// Densely samples a polyline and checks that its projections onto a side
// increase strictly.
bool projections_increase(const std::vector<Vec2>& pts, Vec2 a, Vec2 b, double orientation) {
  double last = -1e300;
  for (std::size_t m = 1; m < pts.size(); ++m)
    for (int k = (m == 1 ? 0 : 1); k <= 64; ++k) {
      const Vec2 q = pts[m - 1] + (k / 64.0) * (pts[m] - pts[m - 1]);
      const double s = projection_oracle(a, b, q, orientation)[0];
      if (!(s > last)) return false;
      last = s;
    }
  return true;
}

}  // namespace

TEST_CASE("triangle frames are orthonormal with inward normals") {
  const auto tri = equilateral();
  for (Side s : kSides) {
    const auto& f = tri.frame(s);
    CHECK(dot(f.tangent, f.normal) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(norm(f.tangent) == doctest::Approx(1.0));
    CHECK(norm(f.normal) == doctest::Approx(1.0));
    CHECK(cross(f.tangent, f.normal) == doctest::Approx(1.0));
    const Vec2 opposite = tri.vertex((second_vertex(s) + 1) % 3);
    CHECK(dot(opposite - f.origin, f.normal) > 0.0);
  }
  CHECK(tri.side_length(Side::s12) == doctest::Approx(1.0));
  CHECK(tri.angle(0) == doctest::Approx(std::numbers::pi / 3));

  // Clockwise input keeps the normals inward, so the frame is left-handed.
  const TargetTriangle cw({0, 0}, {0.5, kSqrt3 / 2}, {1, 0});
  for (Side s : kSides) CHECK(cross(cw.frame(s).tangent, cw.frame(s).normal) == doctest::Approx(-1.0));
}

TEST_CASE("degenerate triangle is rejected") {
  CHECK_THROWS_AS(TargetTriangle({0, 0}, {1, 1}, {2, 2}), ValidationError);
}

TEST_CASE("project_to_side examples") {
  const auto tri = equilateral();
  auto c = project_to_side(tri, {0.5, kSqrt3 / 6}, Side::s12);
  CHECK(c.abscissa == doctest::Approx(0.5));
  CHECK(c.height == doctest::Approx(kSqrt3 / 6));
  c = project_to_side(tri, tri.vertex(0), Side::s12);
  CHECK(c.abscissa == 0.0);
  CHECK(c.height == 0.0);
  c = project_to_side(tri, tri.vertex(2), Side::s12);
  CHECK(c.abscissa == doctest::Approx(0.5));
  CHECK(c.height == doctest::Approx(kSqrt3 / 2));
}

TEST_CASE("frame consistency on random points") {
  Rng rng(11);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto tri = random_triangle(rng, 0.05);
    const Vec2 q = random_point_in(rng, tri);
    for (Side s : kSides) {
      const auto c = project_to_side(tri, q, s);
      const Vec2 back = from_side_coords(tri, c, s);
      CHECK(std::abs(back.x - q.x) <= 1e-12 * std::max(1.0, std::abs(q.x)));
      CHECK(std::abs(back.y - q.y) <= 1e-12 * std::max(1.0, std::abs(q.y)));
      const auto o = projection_oracle(tri.vertex(first_vertex(s)), tri.vertex(second_vertex(s)), q,
                                       tri.orientation());
      CHECK(c.abscissa == doctest::Approx(o[0]).epsilon(1e-12));
      CHECK(c.height == doctest::Approx(o[1]).epsilon(1e-12));
    }
  }
}

TEST_CASE("source junction validation") {
  SourceJunction src{1, 1, 1, 1};
  CHECK_NOTHROW(src.validate());
  CHECK(src.disk_area() == doctest::Approx(std::numbers::pi));
  src.r23 = 2.5;
  CHECK_THROWS_AS(src.validate(), ValidationError);
  src.r23 = 0.0;
  CHECK_THROWS_AS(src.validate(), ValidationError);
}

TEST_CASE("build_side_function: straight branches through the barycenter give a tent") {
  const auto tri = equilateral();
  const auto conn = Connection::straight(tri, tri.barycenter());
  const auto phi = build_side_function(tri, conn, Side::s12);
  REQUIRE(phi.abscissae().size() == 3);
  CHECK(phi.abscissae()[1] == doctest::Approx(0.5));
  CHECK(phi.values()[1] == doctest::Approx(kSqrt3 / 6));
  CHECK(phi.apex() == doctest::Approx(0.5));
  CHECK(phi(phi.apex()) == doctest::Approx(kSqrt3 / 6));
  CHECK(phi.lipschitz() == doctest::Approx(kSqrt3 / 3));
  for (Side s : kSides) {
    const auto f = build_side_function(tri, conn, s);
    CHECK(f.max_value() == doctest::Approx(kSqrt3 / 6));
    CHECK(f.values().front() == 0.0);
    CHECK(f.values().back() == 0.0);
  }
}

TEST_CASE("build_side_function: p at the midpoint of side 12 gives zero data") {
  const auto tri = equilateral();
  const auto conn = Connection::straight(tri, {0.5, 0.0});
  CHECK(validate_connection(conn, tri).ok());
  const auto phi = build_side_function(tri, conn, Side::s12);
  CHECK(phi.max_value() == 0.0);
  CHECK(phi.lipschitz() == 0.0);
}

TEST_CASE("build_side_function: three-knot branch matches the projection oracle") {
  const auto tri = equilateral();
  Connection conn = Connection::straight(tri, tri.barycenter());
  const Vec2 q{0.3, 0.08};
  conn.branches[0] = {tri.vertex(0), q, conn.p};
  REQUIRE(validate_connection(conn, tri).ok());
  const auto phi = build_side_function(tri, conn, Side::s12);
  REQUIRE(phi.abscissae().size() == 4);
  const std::vector<Vec2> expected = {tri.vertex(0), q, conn.p, tri.vertex(1)};
  for (std::size_t m = 0; m < expected.size(); ++m) {
    const auto o = projection_oracle(tri.vertex(0), tri.vertex(1), expected[m], 1.0);
    CHECK(phi.abscissae()[m] == doctest::Approx(o[0]).epsilon(1e-12));
    CHECK(phi.values()[m] == doctest::Approx(o[1]).epsilon(1e-12));
  }
  // The graph mapped back to the plane reproduces the branches.
  for (std::size_t m = 0; m < expected.size(); ++m) {
    const Vec2 back = from_side_coords(tri, {phi.abscissae()[m], phi.values()[m]}, Side::s12);
    CHECK(norm(back - expected[m]) <= 1e-10);
  }
}

TEST_CASE("validate_connection examples") {
  const auto tri = equilateral();
  CHECK(validate_connection(Connection::straight(tri, tri.barycenter()), tri).ok());

  // Middle knot behind p as seen from side 31.
  Connection swing = Connection::straight(tri, tri.barycenter());
  const Vec2 q = swing.p + Vec2{-0.05, 0.1};
  swing.branches[0] = {tri.vertex(0), q, swing.p};
  const auto rep = validate_connection(swing, tri);
  CHECK_FALSE(rep.ok());
  REQUIRE(rep.violated_side().has_value());
  CHECK(*rep.violated_side() == Side::s31);
  CHECK(rep.side_single_valued[0]);
  CHECK(rep.side_single_valued[1]);
  // The projection oracle agrees: the concatenated polyline doubles back.
  std::vector<Vec2> concat = {tri.vertex(2), swing.p, q, tri.vertex(0)};
  CHECK_FALSE(projections_increase(concat, tri.vertex(2), tri.vertex(0), 1.0));
  CHECK_THROWS_AS(build_side_function(tri, swing, Side::s31), NotAGraph);

  const auto at_vertex = validate_connection(Connection::straight(tri, tri.vertex(0)), tri);
  CHECK_FALSE(at_vertex.ok());
  CHECK_FALSE(at_vertex.p_not_vertex);
  CHECK_FALSE(at_vertex.meet_only_at_p);
}

TEST_CASE("validate_connection: obtuse triangle restricts p to T_int") {
  const TargetTriangle tri({0, 0}, {4, 0}, {1, 0.8});
  REQUIRE(tri.obtuse_vertex().has_value());
  CHECK(*tri.obtuse_vertex() == 2);
  // Inside the triangle but projecting outside side 31.
  const Vec2 outside{3.0, 0.1};
  CHECK(tri.contains(outside));
  CHECK_FALSE(validate_connection(Connection::straight(tri, outside), tri).p_admissible);
  const Vec2 inside{1.0, 0.3};
  CHECK(validate_connection(Connection::straight(tri, inside), tri).ok());
}

TEST_CASE("graphicality agrees with dense projection sampling") {
  Rng rng(5);
  int accepted = 0;
  int rejected = 0;
  for (int trial = 0; trial < 3000; ++trial) {
    const auto tri = random_triangle(rng);
    Connection c;
    c.p = random_triple_point(rng, tri);
    for (int i = 0; i < 3; ++i) c.branches[static_cast<std::size_t>(i)] = {tri.vertex(i), c.p};
    // Perturb branch 0 with two knots.
    const Vec2 a = tri.vertex(0);
    const Vec2 chord = c.p - a;
    const Vec2 n = perp(chord) / norm(chord);
    std::vector<Vec2> b{a};
    for (int m = 1; m <= 2; ++m) b.push_back(a + (m / 3.0) * chord + uniform(rng, -0.6, 0.6) * norm(chord) * n);
    b.push_back(c.p);
    c.branches[0] = b;
    const auto rep = validate_connection(c, tri);
    const double o = tri.orientation();
    const bool over12 = projections_increase(b, tri.vertex(0), tri.vertex(1), o);
    // Branch 0 read from alpha_1 towards p runs backwards along side 31.
    const bool over31 = projections_increase(b, tri.vertex(0), tri.vertex(2), o);
    CHECK(rep.branch_graphical[0] == (over12 && over31));
    (rep.branch_graphical[0] ? accepted : rejected)++;
  }
  CHECK(accepted > 100);
  CHECK(rejected > 100);
}

TEST_CASE("piecewise_linear_approximate examples") {
  const auto tri = equilateral();
  const auto tent = build_side_function(tri, Connection::straight(tri, tri.barycenter()), Side::s12);
  const auto same = piecewise_linear_approximate(tent, 4);
  CHECK(same.abscissae() == tent.abscissae());
  CHECK(same.values() == tent.values());
  CHECK(same.graph_length() == tent.graph_length());
  CHECK_THROWS_AS(piecewise_linear_approximate(tent, 1), KnotBudgetTooSmall);

  // Densely sampled tent, two pieces recover it exactly.
  std::vector<double> s;
  std::vector<double> v;
  for (int m = 0; m <= 1000; ++m) {
    s.push_back(m / 1000.0);
    v.push_back(tent(m / 1000.0));
  }
  const SideFunction dense(Side::s12, s, v, 0.5);
  const auto two = piecewise_linear_approximate(dense, 2);
  REQUIRE(two.abscissae().size() == 3);
  CHECK(two.abscissae()[1] == 0.5);
  CHECK(l1_distance(two, tent) == doctest::Approx(0.0).epsilon(1e-15));

  // Semicircular bump of radius 0.5: arc length pi / 2.
  s.clear();
  v.clear();
  for (int m = 0; m <= 4000; ++m) {
    const double x = m / 4000.0;
    s.push_back(x);
    v.push_back(std::sqrt(std::max(0.0, 0.25 - (x - 0.5) * (x - 0.5))));
  }
  const SideFunction bump(Side::s12, s, v, 0.5);
  // Arc length by fine quadrature in the angle parameter.
  double arc = 0.0;
  const int n_quad = 200000;
  for (int k = 0; k < n_quad; ++k) {
    const double t0 = std::numbers::pi * k / n_quad;
    const double t1 = std::numbers::pi * (k + 1) / n_quad;
    arc += std::hypot(0.5 * (std::cos(t1) - std::cos(t0)), 0.5 * (std::sin(t1) - std::sin(t0)));
  }
  CHECK(arc == doctest::Approx(std::numbers::pi / 2).epsilon(1e-9));
  double last_err = 1e300;
  for (int n : {4, 8, 16}) {
    const auto approx = piecewise_linear_approximate(bump, n);
    CHECK(approx.abscissae().size() == static_cast<std::size_t>(n + 1));
    CHECK(std::find(approx.abscissae().begin(), approx.abscissae().end(), 0.5) != approx.abscissae().end());
    const double err = l1_distance(approx, bump);
    CHECK(err < last_err);
    last_err = err;
    CHECK(approx.graph_length() <= arc);
    CHECK(approx.graph_length() <= bump.graph_length());
  }
}

TEST_CASE("piecewise_linear_approximate never increases length") {
  Rng rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    const double len = uniform(rng, 0.5, 3.0);
    const auto profile = random_profile(rng, len, 20 + static_cast<int>(rng() % 200));
    const int n = 2 + static_cast<int>(rng() % 40);
    const auto approx = piecewise_linear_approximate(profile, n);
    CHECK(approx.graph_length() <= profile.graph_length() * (1 + 1e-14));
    CHECK(approx.values().front() == 0.0);
    CHECK(approx(profile.apex()) == doctest::Approx(profile(profile.apex())));
  }
}

TEST_CASE("connection_length examples") {
  const auto tri = equilateral();
  CHECK(connection_length(Connection::straight(tri, tri.barycenter())) == doctest::Approx(kSqrt3));
  CHECK(connection_length(Connection::straight(tri, {0.5, 0.0})) == doctest::Approx(1.0 + kSqrt3 / 2));
}

TEST_CASE("uniform length bound on random valid connections") {
  Rng rng(2024);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto tri = random_triangle(rng, 0.2);
    const auto c = random_valid_connection(rng, tri, 3);
    const auto uniform_bound = length_bound(tri);
    const auto p_bound = length_bound(tri, c.p);
    for (int i = 0; i < 3; ++i) {
      const double h = branch_length(c.branches[static_cast<std::size_t>(i)]);
      CHECK(h <= p_bound.per_branch[static_cast<std::size_t>(i)] * (1 + 1e-12));
      CHECK(p_bound.per_branch[static_cast<std::size_t>(i)] <=
            uniform_bound.per_branch[static_cast<std::size_t>(i)] * (1 + 1e-12));
    }
    CHECK(connection_length(c) <= uniform_bound.total);
  }
}

TEST_CASE("relabelling vertices permutes side functions") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const auto tri = random_triangle(rng);
    const auto c = random_valid_connection(rng, tri, 2);
    // Cyclic relabelling: new side k is old side k + 1, same orientation.
    const TargetTriangle cyc(tri.vertex(1), tri.vertex(2), tri.vertex(0));
    Connection cc{c.p, {c.branches[1], c.branches[2], c.branches[0]}};
    REQUIRE(validate_connection(cc, cyc).ok());
    CHECK(connection_length(cc) == doctest::Approx(connection_length(c)));
    for (int k = 0; k < 3; ++k) {
      const auto a = build_side_function(cyc, cc, static_cast<Side>(k));
      const auto b = build_side_function(tri, c, static_cast<Side>((k + 1) % 3));
      CHECK(l1_distance(a, b) <= 1e-12);
    }
    // Transposition of vertices 1 and 2: side 12 is traversed backwards.
    const TargetTriangle sw(tri.vertex(1), tri.vertex(0), tri.vertex(2));
    Connection cs{c.p, {c.branches[1], c.branches[0], c.branches[2]}};
    REQUIRE(validate_connection(cs, sw).ok());
    const auto a = build_side_function(sw, cs, Side::s12);
    const auto b = build_side_function(tri, c, Side::s12);
    const double len = tri.side_length(Side::s12);
    for (int m = 0; m <= 50; ++m) {
      const double s = len * m / 50;
      CHECK(a(s) == doctest::Approx(b(len - s)).epsilon(1e-10));
    }
    CHECK(a.apex() == doctest::Approx(len - b.apex()));
  }
}
