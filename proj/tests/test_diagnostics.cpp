#include "conslaw/diagnostics.hpp"
#include "conslaw/oracles.hpp"

#include "doctest.h"

#include <cmath>
#include <random>

using namespace conslaw;

namespace {
Vec s1(double v) { return Vec::Constant(1, v); }

DiscontinuitySet horizontal(double a, double zm, double zp) {
  DiscontinuitySet g;
  GammaChain c = gamma_from_polyline({Point(0, 0), Point(a, 0)}, Point(0, 1));
  c.zminus.assign(c.points.size(), s1(zm));
  c.zplus.assign(c.points.size(), s1(zp));
  g.chains.push_back(c);
  return g;
}

struct Fixture {
  SymmetricSystem sys = SymmetricSystem::burgers();
  BurgersStrip strip = burgers_strip();
  SimplicialMesh mesh = triangulate(strip.domain, 1.0 / 16);
  TestSpace ts = make_test_space(mesh, strip.pf, Constraint::KerP, true);
  NodalField base{mesh, 1, interpolate(burgers_field(0.5), mesh)};
  DiscontinuitySet gamma = burgers_gamma(0.5);
  FittedField z{base, gamma, mesh.h()};
  LinearizedProblem lp = LinearizedProblem::build(sys, mesh, z, gamma, 6, 4.0, 1e300);
};
}  // namespace

TEST_CASE("entropy production on expansive and compressive jumps") {
  const SymmetricSystem b = SymmetricSystem::burgers();
  const SimplicialMesh m = triangulate(PolygonDomain::rectangle(0, 1, -1, 1, "b", "r", "t", "l"), 0.25);
  const AnalyticField z(1, [](const Point&) { return s1(0); });
  const EntropyReport ex = entropy_production(b, z, horizontal(0.5, -1, 1), m);
  REQUIRE(ex.chains.size() == 1);
  CHECK(ex.chains[0].max_pointwise == doctest::Approx(2.0 / 3));
  CHECK(ex.chains[0].integrated == doctest::Approx(1.0 / 3));
  const EntropyReport co = entropy_production(b, z, horizontal(0.5, 1, -1), m);
  CHECK(co.chains[0].max_pointwise == doctest::Approx(-2.0 / 3));
  CHECK(co.chains[0].max_jump == doctest::Approx(2.0));
}

TEST_CASE("phi basis vanishes at chain ends") {
  const DiscontinuitySet g = burgers_gamma(0.5);
  const PhiBasis phi = PhiBasis::make(g, 8, 1);
  CHECK(phi.size() == 7);
  const Vec c = Vec::Ones(phi.size());
  CHECK(phi.value(c, 0, 0.0)[0] == doctest::Approx(0.0));
  CHECK(std::abs(phi.value(c, 0, 0.5)[0]) < 1e-12);
  CHECK(phi.value(c, 0, 0.25)[0] == doctest::Approx(1.0));
  const Mat G = phi.gram2();
  CHECK((G - G.transpose()).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(c.dot(G * c) == doctest::Approx(std::pow(phi.norm(c, 2), 2)));
  CHECK_THROWS_AS(PhiBasis::make(g, 1, 1), Error);
}

TEST_CASE("Riesz solve with zero data is zero") {
  Fixture f;
  const GramSolver gs(f.ts, f.lp.gram.total());
  REQUIRE_FALSE(gs.singular());
  const RieszResult r = riesz_solve(f.lp, f.ts, gs, f.z, Vec::Zero(f.mesh.num_nodes()), Vec::Zero(f.lp.phi.size()));
  CHECK(r.zeta_full.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("M0 is symmetric, PSD and quadratic") {
  Fixture f;
  const GramSolver gs(f.ts, f.lp.gram.total());
  const Mat M = m0_form(f.lp, f.ts, gs);
  CHECK((M - M.transpose()).cwiseAbs().maxCoeff() < 1e-10 * (1 + M.cwiseAbs().maxCoeff()));
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (M + M.transpose()));
  CHECK(es.eigenvalues().minCoeff() > -1e-10);
  std::mt19937_64 rng(9);
  std::normal_distribution<double> N(0, 1);
  Vec v(f.lp.phi.size());
  for (auto& x : v) x = N(rng);
  const double m1 = m0_value(f.lp, f.ts, gs, v), m3 = m0_value(f.lp, f.ts, gs, 3 * v);
  CHECK(m3 == doctest::Approx(9 * m1).epsilon(1e-9));
  CHECK(m1 == doctest::Approx(v.dot(M * v)).epsilon(1e-9));
}

TEST_CASE("Q estimates: single chain and zero regularization") {
  Fixture f;
  const GramSolver gs(f.ts, f.lp.gram.total());
  const QResult q = q0_estimate(f.lp, f.ts, gs);
  CHECK(q.value > 0);
  CHECK(f.lp.phi.norm(q.phi) == doctest::Approx(1.0));
  const QkResult qk = qk_per_component(f.lp, f.ts, gs);
  REQUIRE(qk.qk.size() == 1);
  CHECK(qk.qk[0] == doctest::Approx(qk.q0).epsilon(1e-8));
  CHECK(qk.holds);
  const QResult q_reg = q_regularized(f.lp, f.ts, 0.0, {});
  CHECK(q_reg.value == doctest::Approx(q.value).epsilon(1e-8));
}

TEST_CASE("q0 vanishes on the admissible fan") {
  const SymmetricSystem sys = SymmetricSystem::burgers();
  const BurgersStrip strip = burgers_strip();
  const SimplicialMesh mesh = triangulate(strip.domain, 1.0 / 16);
  const TestSpace ts = make_test_space(mesh, strip.pf, Constraint::KerP, true);
  const NodalField z(mesh, 1, interpolate(burgers_field(0), mesh));
  const LinearizedProblem lp = LinearizedProblem::build(sys, mesh, z, DiscontinuitySet{}, 6, 4.0, 1e300);
  const GramSolver gs(ts, lp.gram.total());
  CHECK(q0_estimate(lp, ts, gs).value == 0.0);
}

TEST_CASE("stability constant is zero when every boundary is constrained") {
  const SymmetricSystem sys = SymmetricSystem::burgers();
  const BurgersStrip strip = burgers_strip();
  ProjectionField all_i(1);
  for (auto t : {"inflow", "outflow", "top", "bottom"}) all_i.set(t, {Mat::Identity(1, 1), {}, {}});
  const SimplicialMesh mesh = triangulate(strip.domain, 0.125);
  const AnalyticField z = burgers_field(0);
  CHECK(stability_c1(sys, mesh, z, DiscontinuitySet{}, all_i) == 0.0);
  const double c1 = stability_c1(sys, mesh, z, DiscontinuitySet{}, strip.pf);
  CHECK(std::isfinite(c1));
  CHECK(c1 > 0);
}

TEST_CASE("kernel sigma_min is positive and mesh-consistent") {
  const SymmetricSystem sys = SymmetricSystem::burgers();
  const BurgersStrip strip = burgers_strip();
  const AnalyticField z = burgers_field(0);
  const SimplicialMesh m1 = triangulate(strip.domain, 0.125), m2 = triangulate(strip.domain, 0.0625);
  const double s1v = kernel_sigma_min(sys, m1, z, DiscontinuitySet{});
  const double s2v = kernel_sigma_min(sys, m2, z, DiscontinuitySet{});
  CHECK(s1v > 1);
  CHECK(s2v > 1);
  CHECK(s2v == doctest::Approx(s1v).epsilon(0.3));
}

TEST_CASE("smallest generalized eigenvalue of a diagonal pencil") {
  SpMat A(4, 4), B(4, 4);
  for (int i = 0; i < 4; ++i) {
    A.insert(i, i) = 1.0 + i;
    B.insert(i, i) = 2.0;
  }
  CHECK(smallest_generalized_eigenvalue(A, B) == doctest::Approx(0.5));
}

TEST_CASE("run_diagnostics on a constant state") {
  const SymmetricSystem sys = SymmetricSystem::burgers();
  const BurgersStrip strip = burgers_strip();
  const SimplicialMesh mesh = triangulate(strip.domain, 0.125);
  const AnalyticField z(1, [](const Point&) { return s1(0.3); });
  DiagnosticsOptions opt;
  opt.phi_per_chain = 4;
  const DiagnosticsReport r = run_diagnostics(sys, mesh, z, DiscontinuitySet{}, strip.domain, strip.pf, opt);
  CHECK(r.exit_code == 0);
  CHECK(r.q0.value == 0.0);
  CHECK(r.entropy.chains.empty());
  CHECK_FALSE(r.singular_gram);
  CHECK(r.stability.bounded);
  CHECK(r.sigma_min.size() == r.stability.h.size());
}
