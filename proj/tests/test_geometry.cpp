#include "conslaw/geometry.hpp"

#include "doctest.h"

#include <cmath>

using namespace conslaw;

TEST_CASE("unit square mesh") {
  const PolygonDomain d = PolygonDomain::rectangle(0, 1, 0, 1, "b", "r", "t", "l");
  const SimplicialMesh m = triangulate(d, 0.5);
  CHECK(m.num_triangles() >= 8);
  for (auto& e : m.boundary()) {
    CHECK_FALSE(e.tag.empty());
    CHECK(e.nu.norm() == doctest::Approx(1.0));
    const Point mid = 0.5 * (m.nodes()[e.v[0]] + m.nodes()[e.v[1]]);
    CHECK(e.nu.dot(mid - Point(0.5, 0.5)) > 0);
  }
  CHECK(m.is_conforming());
  CHECK(m.min_angle_deg() >= 20.0);
}

TEST_CASE("strip node count") {
  const PolygonDomain d = PolygonDomain::rectangle(0, 1, -1, 1, "bottom", "outflow", "top", "inflow");
  const SimplicialMesh m = triangulate(d, 0.25);
  CHECK(m.num_nodes() >= 45 / 2);
  CHECK(m.num_nodes() <= 45 * 2);
  for (int t = 0; t < m.num_triangles(); ++t) CHECK(m.area(t) > 0);
}

TEST_CASE("general polygon is triangulated conformingly") {
  PolygonDomain d;
  d.vertices = {Point(0, 0), Point(2, 0), Point(2, 1), Point(1, 1.5), Point(0, 1)};
  d.edge_tags = {"a", "b", "c", "d", "e"};
  d.validate();
  const SimplicialMesh m = triangulate(d, 0.25, 3);
  CHECK(m.is_conforming());
  CHECK(m.min_angle_deg() >= 20.0);
  double area = 0;
  for (int t = 0; t < m.num_triangles(); ++t) area += m.area(t);
  CHECK(area == doctest::Approx(d.signed_area()).epsilon(1e-10));
  CHECK(triangulate(d, 0.25, 3).id() == m.id());
}

TEST_CASE("degenerate polygons are rejected") {
  PolygonDomain bow;
  bow.vertices = {Point(0, 0), Point(1, 1), Point(1, 0), Point(0, 1)};
  bow.edge_tags = {"a", "b", "c", "d"};
  CHECK_THROWS_AS(bow.validate(), Error);
}

TEST_CASE("gamma chains from polylines") {
  const GammaChain v = gamma_from_polyline({Point(0, 0), Point(0, 1)}, Point(1, 0));
  CHECK(v.mu[0].x() == doctest::Approx(1.0));
  CHECK(v.alpha.front() == doctest::Approx(0.0));
  CHECK(v.alpha.back() == doctest::Approx(1.0));
  const GammaChain d = gamma_from_polyline({Point(0, 0), Point(1, 1)}, Point(1, -1));
  CHECK(d.mu[0].norm() == doctest::Approx(1.0));
  CHECK(d.mu[0].x() == doctest::Approx(1 / std::sqrt(2.0)));
  const GammaChain t = gamma_from_polyline({Point(0, 0), Point(1, 0), Point(1, 2)}, Point(0, 1));
  CHECK(std::abs(t.length() - 3.0) < 1e-12);
  CHECK_THROWS_AS(gamma_from_polyline({Point(0, 0)}, Point(0, 1)), Error);
}

TEST_CASE("gamma distance") {
  DiscontinuitySet a, b, e;
  a.chains.push_back(gamma_from_polyline({Point(0, 0), Point(0, 1)}, Point(1, 0)));
  b.chains.push_back(gamma_from_polyline({Point(0.1, 0), Point(0.1, 1)}, Point(1, 0)));
  CHECK(gamma_distance(a, a) == doctest::Approx(0.0));
  CHECK(std::abs(gamma_distance(a, b) - 0.1) < 1e-9);
  CHECK(std::isinf(gamma_distance(a, e)));
  CHECK(gamma_distance(e, e) == 0.0);
}

TEST_CASE("projection field") {
  ProjectionField pf(1);
  pf.set("inflow", {Mat::Zero(1, 1), {}, {}});
  pf.set("outflow", {Mat::Identity(1, 1), {}, {{Point(1, 0.5), Point(1, 1), Mat::Zero(1, 1)}}});
  pf.validate();
  const Vec v = Vec::Constant(1, 2.5);
  CHECK(projection_apply(pf, "inflow", v).norm() == 0.0);
  CHECK(projection_apply(pf, "outflow", v, Point(1, 0))[0] == 2.5);
  CHECK(projection_apply(pf, "outflow", v, Point(1, 0.7))[0] == 0.0);
  const Vec once = projection_apply(pf, "outflow", v, Point(1, 0));
  CHECK(std::abs(projection_apply(pf, "outflow", once, Point(1, 0))[0] - once[0]) < 1e-14);
  ProjectionField bad(1);
  bad.set("x", {Mat::Constant(1, 1, 0.5), {}, {}});
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("locate finds containing triangles") {
  const PolygonDomain d = PolygonDomain::rectangle(0, 1, 0, 1, "b", "r", "t", "l");
  const SimplicialMesh m = triangulate(d, 0.2);
  std::array<double, 3> bary{};
  const int t = m.locate(Point(0.31, 0.77), &bary);
  REQUIRE(t >= 0);
  CHECK(bary[0] + bary[1] + bary[2] == doctest::Approx(1.0));
  CHECK(m.locate(Point(2, 2)) < 0);
}

TEST_CASE("nonconvex and skewed polygons") {
  PolygonDomain l;
  l.vertices = {Point(0, 0), Point(2, 0), Point(2, 1), Point(1, 1), Point(1, 2), Point(0, 2)};
  l.edge_tags = {"a", "b", "c", "d", "e", "f"};
  PolygonDomain tri;
  tri.vertices = {Point(0, 0), Point(1, 0), Point(0.3, 0.8)};
  tri.edge_tags = {"a", "b", "c"};
  for (const PolygonDomain* d : {&l, &tri}) {
    for (double h : {0.2, 0.1}) {
      const SimplicialMesh m = triangulate(*d, h, 1);
      CHECK(m.is_conforming());
      CHECK(m.min_angle_deg() >= 20.0);
      double area = 0;
      for (int t = 0; t < m.num_triangles(); ++t) area += m.area(t);
      CHECK(area == doctest::Approx(d->signed_area()).epsilon(1e-10));
    }
  }
}
