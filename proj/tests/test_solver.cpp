#include "conslaw/common.hpp"
#include "conslaw/oracles.hpp"
#include "conslaw/solver.hpp"

#include "doctest.h"

#include <cmath>
#include <memory>

using namespace conslaw;

namespace {
Vec s1(double v) { return Vec::Constant(1, v); }

struct StripCase {
  PolygonDomain domain = PolygonDomain::rectangle(0, 1, -1, 1, "bottom", "outflow", "top", "inflow");
  ProjectionField pf{1};
  BoundaryData bd;
  explicit StripCase(double state) {
    pf.set("inflow", {Mat::Zero(1, 1), {}, {}});
    for (auto t : {"outflow", "top", "bottom"}) pf.set(t, {Mat::Identity(1, 1), {}, {}});
    bd.tags["inflow"] = {TagData::State, Vec(), {{Point(-5, -5), Point(5, 5), s1(state)}}};
  }
};
}  // namespace

TEST_CASE("parameter validation and eps schedule") {
  SchemeParams p;
  p.eps0 = 0.1;
  p.eps_min = 0.5;
  p.h_levels = {0.1};
  CHECK_THROWS_AS(p.validate(), Error);
  p.eps_min = 0.01;
  CHECK_NOTHROW(p.validate());
  const auto s = p.eps_schedule(0.1, 0.1);
  REQUIRE(!s.empty());
  for (size_t k = 0; k + 1 < s.size(); ++k) CHECK(s[k + 1] < s[k]);
  CHECK(s.back() == doctest::Approx(p.eps_floor(0.1)));
  SchemeParams q;
  q.h_levels = {};
  CHECK_THROWS_AS(q.validate(), Error);
}

TEST_CASE("constant data is reproduced in at most one Newton step") {
  const StripCase sc(0.5);
  const SimplicialMesh m = triangulate(sc.domain, 0.125);
  SchemeParams p;
  p.h_levels = {0.125};
  for (const Vec& init : {Vec(Vec::Constant(m.num_nodes(), 0.5)), Vec(Vec::Constant(m.num_nodes(), 0.3))}) {
    const ViscousResult r = solve_viscous(SymmetricSystem::burgers(), m, sc.pf, sc.bd, 0.1,
                                          DissipationSpec::identity(1), init, p);
    CHECK(r.newton.converged);
    CHECK(r.newton.iterations <= 1);
    CHECK((r.coeffs.array() - 0.5).abs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("continuation is deterministic under warm starts") {
  const BurgersStrip s = burgers_strip();
  SchemeParams p;
  p.eps0 = 0.5;
  p.eps_min_h_factor = 4;
  p.h_levels = {0.125, 0.0625};
  std::vector<std::shared_ptr<const SimplicialMesh>> meshes;
  for (double h : p.h_levels) meshes.push_back(std::make_shared<SimplicialMesh>(triangulate(s.domain, h)));
  const auto a = continuation_solve(SymmetricSystem::burgers(), meshes, s.pf, s.bd, p,
                                    DissipationSpec::identity(1), Vec::Zero(1));
  const auto b = continuation_solve(SymmetricSystem::burgers(), meshes, s.pf, s.bd, p,
                                    DissipationSpec::identity(1), Vec::Zero(1));
  REQUIRE(a.size() == 2);
  for (size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].ok);
    CHECK(a[k].eps == doctest::Approx(4 * p.h_levels[k]));
    CHECK((a[k].coeffs - b[k].coeffs).cwiseAbs().maxCoeff() == 0.0);
    for (size_t i = 0; i + 1 < a[k].eps_path.size(); ++i) CHECK(a[k].eps_path[i + 1] < a[k].eps_path[i]);
  }
}

TEST_CASE("shock fitting on a standing compressive shock") {
  const PolygonDomain d = PolygonDomain::rectangle(0, 1, -1, 1, "b", "r", "t", "l");
  const double h = 1.0 / 32;
  const SimplicialMesh m = triangulate(d, h);
  const AnalyticField z(1, [](const Point& x) { return s1(x.y() < 0 ? 1.0 : -1.0); });
  FitParams fp;
  const DiscontinuitySet g = fit_shocks(SymmetricSystem::burgers(), m, interpolate(z, m), fp);
  REQUIRE(g.chains.size() == 1);
  for (auto& p : g.chains[0].points) CHECK(std::abs(p.y()) < 2 * h);
  CHECK(g.chains[0].zminus.front()[0] == doctest::Approx(1.0).epsilon(0.05));
  CHECK(g.chains[0].zplus.front()[0] == doctest::Approx(-1.0).epsilon(0.05));

  const DiscontinuitySet none = fit_shocks(SymmetricSystem::burgers(), m, Vec::Constant(m.num_nodes(), 0.2), fp);
  CHECK(none.chains.empty());
}

TEST_CASE("shock fitting recovers the exact discontinuity of the expansive solution") {
  const BurgersStrip s = burgers_strip();
  const double h = 1.0 / 32;
  const SimplicialMesh m = triangulate(s.domain, h);
  const DiscontinuitySet g = fit_shocks(SymmetricSystem::burgers(), m, interpolate(burgers_field(0.5), m), FitParams{});
  REQUIRE(g.chains.size() == 1);
  // The ridge may continue into the fan vertex; the exact segment must be covered.
  const GammaChain& c = g.chains[0];
  int on_segment = 0;
  for (size_t i = 0; i < c.points.size(); ++i) {
    if (c.points[i].x() > 0.5 - 2 * h || c.points[i].x() < 2 * h) continue;
    ++on_segment;
    CHECK(std::abs(c.points[i].y()) < 2 * h);
    CHECK(std::abs(c.zminus[i][0] + 1) < 1e-6);
    CHECK(std::abs(c.zplus[i][0] - 1) < 1e-6);
  }
  CHECK(on_segment >= 10);
  CHECK(c.points.front().x() < 2 * h);
  CHECK(c.points.back().x() > 0.5);
}

TEST_CASE("limit check on prescribed sequences") {
  const LimitReport z = limit_check_values({0, 0, 0}, 0.2);
  CHECK(z.converged);
  const LimitReport dec = limit_check_values({0.4, 0.2, 0.1}, 0.2);
  CHECK(dec.converged);
  REQUIRE(dec.rates.size() == 2);
  CHECK(dec.rates[0] == doctest::Approx(1.0));
  CHECK_FALSE(limit_check_values({0.1, 0.3, 0.1}, 0.2).converged);
  CHECK_FALSE(limit_check_values({0.9, 0.5, 0.3}, 0.2).converged);
}

TEST_CASE("l1 distance") {
  const PolygonDomain d = PolygonDomain::rectangle(0, 2, 0, 1, "b", "r", "t", "l");
  const SimplicialMesh m = triangulate(d, 0.25);
  const AnalyticField a(1, [](const Point&) { return s1(1.0); });
  const AnalyticField b(1, [](const Point& x) { return s1(x.x()); });
  CHECK(l1_distance(a, a, m) == 0.0);
  // int_0^2 |1 - x| dx = 1
  CHECK(l1_distance(a, b, m) == doctest::Approx(1.0).epsilon(1e-2));
}

TEST_CASE("viscous structure check of a smooth field") {
  const BurgersStrip s = burgers_strip();
  const SimplicialMesh m = triangulate(s.domain, 0.125);
  const TestSpace ts = make_test_space(m, s.pf, Constraint::ZeroTrace);
  const AnalyticField c(1, [](const Point&) { return s1(0.3); });
  const StructureReport r = viscous_structure_check(SymmetricSystem::burgers(), c, DiscontinuitySet{},
                                                    {0.2, 0.1, 0.05}, DissipationSpec::identity(1), ts);
  REQUIRE(r.value.size() == 3);
  for (double v : r.value) CHECK(v < 1e-12);
}
