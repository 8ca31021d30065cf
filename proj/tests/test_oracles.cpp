#include "conslaw/oracles.hpp"

#include "doctest.h"

#include <cmath>

using namespace conslaw;

TEST_CASE("burgers family values") {
  CHECK(burgers_z_lambda(0, 0.5, 0) == doctest::Approx(0.0));
  CHECK(burgers_z_lambda(0.25, 0.5, 0.5) == doctest::Approx(1.0));
  CHECK(burgers_z_lambda(0.5, 0.25, -0.1) == doctest::Approx(-1.0));
  CHECK(burgers_z_lambda(0, 0.5, 0.25) == doctest::Approx(0.5));
  CHECK_THROWS_AS(burgers_z_lambda(0, 1.5, 0), Error);
}

TEST_CASE("burgers family solves the PDE off the fan edges") {
  for (double lambda : {0.0, 0.3}) {
    for (auto p : {Point(0.6, 0.1), Point(0.8, -0.3), Point(0.5, 0.9), Point(0.9, -0.95)}) {
      const double d = 1e-6;
      const double zx = (burgers_z_lambda(lambda, p.x() + d, p.y()) - burgers_z_lambda(lambda, p.x() - d, p.y())) / (2 * d);
      const double zy = (burgers_z_lambda(lambda, p.x(), p.y() + d) - burgers_z_lambda(lambda, p.x(), p.y() - d)) / (2 * d);
      CHECK(std::abs(zx + burgers_z_lambda(lambda, p.x(), p.y()) * zy) < 1e-5);
    }
  }
}

TEST_CASE("limiting projection pattern") {
  CHECK(burgers_projection(0.5, Point(1, 0.2)) == 1.0);
  CHECK(burgers_projection(0.5, Point(1, 0.7)) == 0.0);
  CHECK(burgers_projection(0.3, Point(0, 0.1)) == 0.0);
  CHECK_THROWS_AS(burgers_projection(0.5, Point(0.5, 0.1)), Error);
}

TEST_CASE("closed-form entropy fluxes") {
  auto [a, b] = burgers_entropy_fluxes(2);
  CHECK(a == doctest::Approx(2.0));
  CHECK(b == doctest::Approx(8.0 / 3));
  auto [c, d] = burgers_entropy_fluxes(-1);
  CHECK(c == doctest::Approx(0.5));
  CHECK(d == doctest::Approx(-1.0 / 3));
  const SymmetricSystem s = SymmetricSystem::burgers();
  for (double z : {-1.7, 0.0, 0.4, 1.9}) {
    const Vec q = s.entropy_flux(Vec::Constant(1, z));
    auto [q1, q2] = burgers_entropy_fluxes(z);
    CHECK(std::abs(q[0] - q1) < 1e-12);
    CHECK(std::abs(q[1] - q2) < 1e-12);
  }
}

TEST_CASE("standing jump gamma") {
  CHECK(burgers_gamma(0).empty());
  const DiscontinuitySet g = burgers_gamma(0.5);
  REQUIRE(g.chains.size() == 1);
  CHECK(g.chains[0].length() == doctest::Approx(0.5));
  CHECK(g.chains[0].has_traces());
  const SymmetricSystem s = SymmetricSystem::burgers();
  CHECK(rh_residual(s, g.chains[0].mu[0], g.chains[0].zminus[0], g.chains[0].zplus[0]) < 1e-14);
}

TEST_CASE("hugoniot oracle") {
  const SymmetricSystem e = SymmetricSystem::euler(SystemKind::EulerStationary);
  const Vec zl = (Vec(3) << 1.5, 0.2, 0.6).finished();
  const Point mu(1, 0);
  const HugoniotPair id = euler_hugoniot_state(e, zl, mu, 0.0);
  CHECK((id.z_right - id.z_left).norm() < 1e-12);
  CHECK(id.residual < 1e-12);
  const HugoniotPair p = euler_hugoniot_state(e, zl, mu, -0.3);
  CHECK(p.residual < 1e-10);
  CHECK(rh_residual(e, mu, p.z_left, p.z_right) < 1e-10);
  CHECK((p.supersonic_left || p.supersonic_right));
  const HugoniotPair q = euler_hugoniot_state(e, zl, mu, -0.301);
  CHECK((q.z_right - p.z_right).norm() < 1e-2);
  CHECK_THROWS_AS(euler_hugoniot_state(SymmetricSystem::burgers(), Vec::Constant(1, 0), mu, 0.1), Error);
}
