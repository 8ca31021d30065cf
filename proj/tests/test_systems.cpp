#include "conslaw/systems.hpp"

#include "doctest.h"

#include <cmath>
#include <random>

using namespace conslaw;

namespace {
Vec s1(double v) { return Vec::Constant(1, v); }
Vec euler_state(double u1, double u2, double z3) { return (Vec(3) << u1, u2, z3).finished(); }
}  // namespace

TEST_CASE("burgers potentials and derivatives") {
  const SymmetricSystem b = SymmetricSystem::burgers();
  CHECK(b.m() == 2);
  CHECK(b.n() == 1);
  CHECK(b.potential(0, s1(2)) == doctest::Approx(2.0));
  CHECK(b.potential(1, s1(0)) == doctest::Approx(0.0));
  CHECK(b.gradient(0, s1(3))[0] == doctest::Approx(3.0));
  CHECK(b.gradient(1, s1(-1))[0] == doctest::Approx(0.5));
  CHECK(b.hessian(1, s1(2))(0, 0) == doctest::Approx(2.0));
  CHECK(b.hessian(0, s1(-7))(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("burgers entropy flux closed form") {
  const SymmetricSystem b = SymmetricSystem::burgers();
  const Vec q2 = b.entropy_flux(s1(2));
  CHECK(q2[0] == doctest::Approx(2.0));
  CHECK(q2[1] == doctest::Approx(8.0 / 3));
  const Vec q0 = b.entropy_flux(s1(0));
  CHECK(q0.norm() == doctest::Approx(0.0));
}

TEST_CASE("euler potential value and entropy flux") {
  const SymmetricSystem e = SymmetricSystem::euler(SystemKind::EulerStationary);
  const Vec y = euler_state(1, 0, 1);
  CHECK(e.potential(0, y) == doctest::Approx(std::pow(1.5, 3.5)).epsilon(1e-12));
  const double H = 1.5;
  const Vec q = e.entropy_flux(y);
  CHECK(std::abs(q[0] - 1 * (1 + 1) * e.eos().d1(H)) < 1e-10);
}

TEST_CASE("gradients match finite differences and Hessians are symmetric") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-0.8, 0.8), UH(0.5, 2.0);
  for (SystemKind k : {SystemKind::EulerStationary, SystemKind::EulerSelfSimilar}) {
    const SymmetricSystem e = SymmetricSystem::euler(k);
    for (int t = 0; t < 100; ++t) {
      const double u1 = U(rng), u2 = U(rng);
      const Vec y = euler_state(u1, u2, UH(rng) - 0.5 * (u1 * u1 + u2 * u2));
      for (int i = 0; i < e.m(); ++i) {
        const Vec g = e.gradient(i, y);
        const Mat A = e.hessian(i, y);
        CHECK((A - A.transpose()).cwiseAbs().maxCoeff() < 1e-12 * (1 + A.cwiseAbs().maxCoeff()));
        for (int j = 0; j < 3; ++j) {
          Vec yp = y, ym = y;
          const double d = 1e-6;
          yp[j] += d;
          ym[j] -= d;
          CHECK(std::abs((e.potential(i, yp) - e.potential(i, ym)) / (2 * d) - g[j]) < 1e-6 * (1 + std::abs(g[j])));
        }
      }
    }
  }
}

TEST_CASE("normal gradient is linear in nu") {
  const SymmetricSystem b = SymmetricSystem::burgers();
  CHECK(b.normal_gradient(Point(1, 0), s1(0.7))[0] == doctest::Approx(0.7));
  CHECK(b.normal_gradient(Point(0, 1), s1(0))[0] == doctest::Approx(0.0));
  const Point n1(0.3, 0.4), n2(-0.2, 0.9);
  const double lhs = b.normal_gradient(n1 + n2, s1(1.3))[0];
  const double rhs = b.normal_gradient(n1, s1(1.3))[0] + b.normal_gradient(n2, s1(1.3))[0];
  CHECK(std::abs(lhs - rhs) < 1e-12);
}

TEST_CASE("sound speed of the power law") {
  EosParams p2;
  p2.C = 1;
  p2.kappa = 2;
  const SymmetricSystem e2 = SymmetricSystem::euler(SystemKind::EulerStationary, p2);
  CHECK(e2.sound_speed(euler_state(0, 0, 1)) == doctest::Approx(1.0));
  const SymmetricSystem e35 = SymmetricSystem::euler(SystemKind::EulerStationary);
  CHECK(e35.sound_speed(euler_state(0, 0, 1)) == doctest::Approx(std::sqrt(3.5 / (3.5 * 2.5))));
}

TEST_CASE("reduced forms and domain checks") {
  CHECK(SymmetricSystem::burgers().reduced_form() == ReducedForm::Stationary);
  CHECK(SymmetricSystem::euler(SystemKind::EulerStationary).reduced_form() == ReducedForm::Stationary);
  CHECK(SymmetricSystem::euler(SystemKind::EulerSelfSimilar).reduced_form() == ReducedForm::SelfSimilar);
  const SymmetricSystem e = SymmetricSystem::euler(SystemKind::EulerStationary);
  CHECK_FALSE(e.in_domain(euler_state(0, 0, -1)));
  CHECK_THROWS_AS(e.require(euler_state(0, 0, -1)), Error);
  CHECK(kind_from_name("EulerSelfSimilar") == SystemKind::EulerSelfSimilar);
}
