#include "conslaw/oracles.hpp"
#include "conslaw/weakform.hpp"

#include "doctest.h"

#include <cmath>
#include <random>

using namespace conslaw;

namespace {
Vec s1(double v) { return Vec::Constant(1, v); }
}  // namespace

TEST_CASE("rankine-hugoniot residual examples") {
  const SymmetricSystem b = SymmetricSystem::burgers();
  CHECK(rh_residual(b, Point(0, 1), s1(-1), s1(1)) < 1e-15);
  CHECK(rh_residual(b, Point(1, -1) / std::sqrt(2.0), s1(0), s1(2)) < 1e-15);
  CHECK(rh_residual(b, Point(0, 1), s1(0), s1(1)) == doctest::Approx(0.5));
}

TEST_CASE("boundary flux orientation and projection") {
  const SymmetricSystem b = SymmetricSystem::burgers();
  const Mat Z = Mat::Zero(1, 1), I = Mat::Identity(1, 1);
  CHECK(boundary_flux(b, Z, Point(-1, 0), s1(0.7))[0] == doctest::Approx(-0.7));
  CHECK(boundary_flux(b, I, Point(1, 0), s1(0.7))[0] == doctest::Approx(0.0));
}

TEST_CASE("boundary pairing") {
  const PolygonDomain d = PolygonDomain::rectangle(0, 1, 0, 1, "b", "r", "t", "l");
  const SimplicialMesh m = triangulate(d, 1.0);
  EdgeField zero, one;
  for (size_t e = 0; e < m.boundary().size(); ++e) {
    zero.vals.push_back({s1(0), s1(0)});
    one.vals.push_back({s1(m.boundary()[e].tag == "b" ? 1 : 0), s1(m.boundary()[e].tag == "b" ? 1 : 0)});
  }
  const Vec theta = Vec::Ones(m.num_nodes());
  CHECK(boundary_pairing(m, zero, theta, 1) == 0.0);
  CHECK(boundary_pairing(m, one, theta, 1) == doctest::Approx(1.0));
  // Linear data against a linear test on one edge: Simpson is exact.
  EdgeField lin;
  Vec th(m.num_nodes());
  for (int v = 0; v < m.num_nodes(); ++v) th[v] = 1 + m.nodes()[v].x();
  for (auto& e : m.boundary()) {
    const bool on = e.tag == "b";
    lin.vals.push_back({s1(on ? 2 * m.nodes()[e.v[0]].x() : 0), s1(on ? 2 * m.nodes()[e.v[1]].x() : 0)});
  }
  // int_0^1 2x (1 + x) dx = 1 + 2/3
  CHECK(std::abs(boundary_pairing(m, lin, th, 1) - 5.0 / 3) < 1e-14);
}

TEST_CASE("constant state solves the discrete system") {
  const SymmetricSystem b = SymmetricSystem::burgers();
  const PolygonDomain d = PolygonDomain::rectangle(0, 1, -1, 1, "bottom", "outflow", "top", "inflow");
  const SimplicialMesh m = triangulate(d, 0.25);
  ProjectionField pf(1);
  pf.set("inflow", {Mat::Zero(1, 1), {}, {}});
  for (auto t : {"outflow", "top", "bottom"}) pf.set(t, {Mat::Identity(1, 1), {}, {}});
  BoundaryData bd;
  bd.tags["inflow"] = {TagData::State, Vec(), {{Point(-5, -5), Point(5, 5), s1(0.4)}}};
  const Vec c = Vec::Constant(m.num_nodes(), 0.4);
  const ResidualSystem rs = assemble_residual(b, m, pf, bd, c, 0.0, DissipationSpec::identity(1), true);
  CHECK(rs.r.cwiseAbs().maxCoeff() < 1e-12);
  CHECK(rs.J.rows() == m.num_nodes());
}

TEST_CASE("dissipation term of a single hat") {
  const SymmetricSystem b = SymmetricSystem::burgers();
  const SimplicialMesh m({Point(0, 0), Point(1, 0), Point(0, 1)}, {{0, 1, 2}},
                         {{{0, 1}, "s", Point(0, -1)}, {{1, 2}, "s", Point(1, 1) / std::sqrt(2.0)},
                          {{2, 0}, "s", Point(-1, 0)}});
  ProjectionField pf(1);
  pf.set("s", {Mat::Identity(1, 1), {}, {}});
  BoundaryData bd;
  const Vec hat1 = (Vec(3) << 0, 1, 0).finished();
  const double eps = 0.3;
  AssemblyOptions opt;
  opt.closed = false;
  const ResidualSystem r0 = assemble_residual(b, m, pf, bd, hat1, 0.0, DissipationSpec::identity(1), false, opt);
  const ResidualSystem r1 = assemble_residual(b, m, pf, bd, hat1, eps, DissipationSpec::identity(1), false, opt);
  // grad hat1 = (1, 0) on the unit right triangle of area 1/2.
  CHECK(std::abs((r1.r - r0.r)[1] - eps * 0.5) < 1e-12);
}

TEST_CASE("interpolated exact fan has a residual that shrinks with h") {
  const SymmetricSystem b = SymmetricSystem::burgers();
  const BurgersStrip s = burgers_strip();
  double prev = INFINITY;
  for (double h : {1.0 / 8, 1.0 / 16, 1.0 / 32}) {
    const SimplicialMesh m = triangulate(s.domain, h);
    const Vec c = interpolate(burgers_field(0), m);
    AssemblyOptions opt;
    opt.closed = false;
    const ResidualSystem rs = assemble_residual(b, m, s.pf, s.bd, c, 0.0, DissipationSpec::identity(1), false, opt);
    const double r = rs.r.lpNorm<1>();
    CHECK(r < prev);
    prev = r;
  }
}

TEST_CASE("volume operator R") {
  const SymmetricSystem b = SymmetricSystem::burgers();
  const PolygonDomain d = PolygonDomain::rectangle(0, 1, 0, 1, "b", "r", "t", "l");
  const SimplicialMesh m = triangulate(d, 0.5);
  const AnalyticField za(1, [](const Point&) { return s1(0.6); });
  Vec th(m.num_nodes()), th2(m.num_nodes());
  for (int v = 0; v < m.num_nodes(); ++v) {
    th[v] = 2 * m.nodes()[v].x() - 3 * m.nodes()[v].y();
    th2[v] = std::sin(v);
  }
  for (auto& r : apply_R(b, m, za, th)) CHECK(std::abs(r[0] - (2 + 0.6 * -3)) < 1e-12);
  for (auto& r : apply_R(b, m, za, Vec::Constant(m.num_nodes(), 4.0))) CHECK(std::abs(r[0]) < 1e-12);
  const auto a1 = apply_R(b, m, za, th), a2 = apply_R(b, m, za, th2), a12 = apply_R(b, m, za, th + th2);
  for (size_t q = 0; q < a1.size(); ++q) CHECK(std::abs(a1[q][0] + a2[q][0] - a12[q][0]) < 1e-12);
}

TEST_CASE("jump operator S") {
  const SymmetricSystem b = SymmetricSystem::burgers();
  const PolygonDomain d = PolygonDomain::rectangle(0, 1, 0, 1, "b", "r", "t", "l");
  const SimplicialMesh m = triangulate(d, 0.25);
  DiscontinuitySet g;
  GammaChain c = gamma_from_polyline({Point(0.1, 0.1), Point(0.9, 0.9)}, Point(1, -1));
  c.zminus = {s1(0), s1(0)};
  c.zplus = {s1(2), s1(2)};
  g.chains.push_back(c);
  const GammaQuadrature gq = build_gamma_quadrature(b, m, g);
  Vec th(m.num_nodes()), one = Vec::Ones(m.num_nodes());
  for (int v = 0; v < m.num_nodes(); ++v) th[v] = (m.nodes()[v].x() + m.nodes()[v].y()) / std::sqrt(2.0);
  for (double s : apply_S(m, gq, one, 1)) CHECK(std::abs(s) < 1e-12);
  for (double s : apply_S(m, gq, th, 1)) CHECK(std::abs(std::abs(s) - 2 * std::sqrt(2.0)) < 1e-10);

  DiscontinuitySet v;
  GammaChain cv = gamma_from_polyline({Point(0.2, 0.4), Point(0.8, 0.4)}, Point(0, 1));
  cv.zminus = {s1(-1), s1(-1)};
  cv.zplus = {s1(1), s1(1)};
  v.chains.push_back(cv);
  const GammaQuadrature gv = build_gamma_quadrature(b, m, v);
  // Flux jump is (2, 0): a test function depending on x2 only sees nothing.
  Vec ty(m.num_nodes());
  for (int k = 0; k < m.num_nodes(); ++k) ty[k] = m.nodes()[k].y();
  for (double s : apply_S(m, gv, ty, 1)) CHECK(std::abs(s) < 1e-12);
  for (double s : apply_S(m, gv, th, 1)) CHECK(std::abs(std::abs(s) - std::sqrt(2.0)) < 1e-10);
}

TEST_CASE("H Gram is symmetric, PSD and matches direct quadrature") {
  const SymmetricSystem b = SymmetricSystem::burgers();
  const BurgersStrip s = burgers_strip();
  const SimplicialMesh m = triangulate(s.domain, 0.25);
  const AnalyticField z05 = burgers_field(0.5);
  const DiscontinuitySet g = burgers_gamma(0.5);
  const GammaQuadrature gq = build_gamma_quadrature(b, m, g);
  const HGram hg = assemble_h_gram(b, m, z05, gq);
  const SpMat G = hg.total();
  CHECK((Mat(G) - Mat(G).transpose()).cwiseAbs().maxCoeff() < 1e-12);
  Eigen::SelfAdjointEigenSolver<Mat> es(Mat(G), Eigen::EigenvaluesOnly);
  CHECK(es.eigenvalues().minCoeff() > -1e-10);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> N(0, 1);
  Vec th(m.num_nodes());
  for (auto& x : th) x = N(rng);
  const auto R = apply_R(b, m, z05, th);
  const auto S = apply_S(m, gq, th, 1);
  const TriRule& rule = tri_rule(2);
  double direct = 0;
  size_t q = 0;
  for (int t = 0; t < m.num_triangles(); ++t)
    for (double w : rule.w) direct += w * m.area(t) * R[q++].squaredNorm();
  for (size_t k = 0; k < S.size(); ++k) direct += gq.pts[k].w * S[k] * S[k];
  const double form = th.dot(G * th);
  CHECK(std::abs(form - direct) < 1e-10 * (1 + direct));
  CHECK(std::abs((2 * th).dot(G * (2 * th)) - 4 * form) < 1e-10 * (1 + form));
}

TEST_CASE("test spaces respect the boundary constraint") {
  const BurgersStrip s = burgers_strip();
  const SimplicialMesh m = triangulate(s.domain, 0.25);
  const TestSpace kp = make_test_space(m, s.pf, Constraint::KerP);
  const TestSpace zt = make_test_space(m, s.pf, Constraint::ZeroTrace);
  int free_kp = 0, interior = 0;
  for (int v = 0; v < m.num_nodes(); ++v) {
    if (!m.is_boundary_node(v)) ++interior;
    bool free = true;
    for (auto& t : m.node_tags(v))
      if (t != "inflow") free = false;
    if (free) ++free_kp;
  }
  CHECK(zt.dim() == interior);
  CHECK(kp.dim() == free_kp);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> N(0, 1);
  Vec c(kp.dim());
  for (auto& x : c) x = N(rng);
  const Vec full = kp.expand(c);
  for (int v = 0; v < m.num_nodes(); ++v)
    for (auto& t : m.node_tags(v))
      if (t != "inflow") CHECK(full[v] == 0.0);
}
