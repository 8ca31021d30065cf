#include "conslaw/systems.hpp"

#include <cmath>
#include <sstream>

namespace conslaw {

const char* kind_name(SystemKind k) {
  switch (k) {
    case SystemKind::Burgers2D: return "Burgers2D";
    case SystemKind::EulerStationary: return "EulerStationary";
    case SystemKind::EulerSelfSimilar: return "EulerSelfSimilar";
    case SystemKind::Custom: return "Custom";
  }
  return "Custom";
}

SystemKind kind_from_name(const std::string& s) {
  if (s == "Burgers2D") return SystemKind::Burgers2D;
  if (s == "EulerStationary") return SystemKind::EulerStationary;
  if (s == "EulerSelfSimilar") return SystemKind::EulerSelfSimilar;
  throw Error(ErrorCode::Config, "unknown system kind '" + s + "'");
}

double EosParams::psi(double H) const { return C * std::pow(H, kappa); }
double EosParams::d1(double H) const { return C * kappa * std::pow(H, kappa - 1.0); }
double EosParams::d2(double H) const {
  return C * kappa * (kappa - 1.0) * std::pow(H, kappa - 2.0);
}
double EosParams::d3(double H) const {
  return C * kappa * (kappa - 1.0) * (kappa - 2.0) * std::pow(H, kappa - 3.0);
}

SymmetricSystem SymmetricSystem::burgers() {
  SymmetricSystem s;
  s.kind_ = SystemKind::Burgers2D;
  s.m_ = 2;
  s.n_ = 1;
  s.bounds_ = {{-10.0, 10.0}};
  return s;
}

SymmetricSystem SymmetricSystem::euler(SystemKind kind, EosParams eos) {
  if (kind != SystemKind::EulerStationary && kind != SystemKind::EulerSelfSimilar)
    throw Error(ErrorCode::NonEulerSystem, "euler() needs an Euler kind");
  if (!(eos.C > 0.0) || !(eos.kappa > 1.0))
    throw Error(ErrorCode::Config, "EOS requires C > 0 and kappa > 1");
  SymmetricSystem s;
  s.kind_ = kind;
  s.m_ = 3;
  s.n_ = 3;
  s.eos_ = eos;
  s.bounds_ = {{-1e6, 1e6}, {-1e6, 1e6}, {-1e6, 1e6}};
  s.h_floor_ = 1e-6;
  return s;
}

SymmetricSystem SymmetricSystem::custom(int m, int n, CustomPotentials p,
                                        std::vector<std::pair<double, double>> bounds) {
  SymmetricSystem s;
  s.kind_ = SystemKind::Custom;
  s.m_ = m;
  s.n_ = n;
  s.custom_ = std::move(p);
  s.set_bounds(std::move(bounds));
  return s;
}

void SymmetricSystem::set_bounds(std::vector<std::pair<double, double>> b) {
  if (static_cast<int>(b.size()) != n_) throw Error(ErrorCode::Config, "d_bounds size != n");
  for (auto& [lo, hi] : b)
    if (!(lo < hi)) throw Error(ErrorCode::Config, "d_bounds need lo < hi");
  bounds_ = std::move(b);
}

bool SymmetricSystem::is_euler() const {
  return kind_ == SystemKind::EulerStationary || kind_ == SystemKind::EulerSelfSimilar;
}

bool SymmetricSystem::in_domain(const Vec& y) const {
  if (y.size() != n_) return false;
  for (int k = 0; k < n_; ++k) {
    if (!std::isfinite(y[k]) || !(y[k] > bounds_[k].first) || !(y[k] < bounds_[k].second))
      return false;
  }
  if (is_euler() && !(enthalpy(y) > h_floor_)) return false;
  return true;
}

void SymmetricSystem::require(const Vec& y) const {
  if (in_domain(y)) return;
  std::ostringstream os;
  os << "state (";
  for (int k = 0; k < y.size(); ++k) os << (k ? ", " : "") << y[k];
  os << ") outside D";
  throw Error(ErrorCode::OutOfDomain, os.str());
}

void SymmetricSystem::check_axis(int i) const {
  if (i < 0 || i >= m_) throw Error(ErrorCode::BadAxis, "axis " + std::to_string(i));
}

double SymmetricSystem::enthalpy(const Vec& y) const {
  return y[2] + 0.5 * (y[0] * y[0] + y[1] * y[1]);
}

double SymmetricSystem::potential(int i, const Vec& y) const {
  check_axis(i);
  require(y);
  switch (kind_) {
    case SystemKind::Burgers2D:
      return i == 0 ? 0.5 * y[0] * y[0] : y[0] * y[0] * y[0] / 6.0;
    case SystemKind::Custom:
      return custom_.value(i, y);
    default: {
      const double p = eos_.psi(enthalpy(y));
      return i < 2 ? y[i] * p : p;
    }
  }
}

Vec SymmetricSystem::gradient(int i, const Vec& y) const {
  check_axis(i);
  require(y);
  Vec g(n_);
  switch (kind_) {
    case SystemKind::Burgers2D:
      g[0] = i == 0 ? y[0] : 0.5 * y[0] * y[0];
      return g;
    case SystemKind::Custom:
      return custom_.gradient(i, y);
    default: {
      const double H = enthalpy(y);
      const double d1 = eos_.d1(H);
      const Vec w = (Vec(3) << y[0], y[1], 1.0).finished();
      if (i == 2) return d1 * w;
      g = y[i] * d1 * w;
      g[i] += eos_.psi(H);
      return g;
    }
  }
}

Mat SymmetricSystem::hessian(int i, const Vec& y) const {
  check_axis(i);
  require(y);
  switch (kind_) {
    case SystemKind::Burgers2D:
      return Mat::Constant(1, 1, i == 0 ? 1.0 : y[0]);
    case SystemKind::Custom:
      return custom_.hessian(i, y);
    default: {
      const double H = enthalpy(y);
      const double d1 = eos_.d1(H), d2 = eos_.d2(H);
      const Vec w = (Vec(3) << y[0], y[1], 1.0).finished();
      Mat base = d2 * w * w.transpose();
      base(0, 0) += d1;
      base(1, 1) += d1;
      if (i == 2) return base;
      Mat h = y[i] * base;
      h.row(i) += d1 * w.transpose();
      h.col(i) += d1 * w;
      return h;
    }
  }
}

Vec SymmetricSystem::entropy_flux(const Vec& y) const {
  Vec q(m_);
  for (int i = 0; i < m_; ++i) q[i] = y.dot(gradient(i, y)) - potential(i, y);
  return q;
}

Vec SymmetricSystem::normal_gradient(const Point& nu, const Vec& y) const {
  return nu[0] * gradient(0, y) + nu[1] * gradient(1, y);
}

Mat SymmetricSystem::normal_hessian(const Point& nu, const Vec& y) const {
  return nu[0] * hessian(0, y) + nu[1] * hessian(1, y);
}

double SymmetricSystem::sound_speed(const Vec& y) const {
  if (!is_euler()) throw Error(ErrorCode::NonEulerSystem, "sound speed needs an Euler kind");
  require(y);
  const double H = enthalpy(y);
  return std::sqrt(eos_.d1(H) / eos_.d2(H));
}

ReducedForm SymmetricSystem::reduced_form() const {
  return kind_ == SystemKind::EulerSelfSimilar ? ReducedForm::SelfSimilar
                                               : ReducedForm::Stationary;
}

double potential_value(const SymmetricSystem& sys, int i, const Vec& y) {
  return sys.potential(i, y);
}
Vec flux_gradient(const SymmetricSystem& sys, int i, const Vec& y) { return sys.gradient(i, y); }
Mat flux_hessian(const SymmetricSystem& sys, int i, const Vec& y) { return sys.hessian(i, y); }
Vec entropy_flux(const SymmetricSystem& sys, const Vec& y) { return sys.entropy_flux(y); }
Vec normal_potential_gradient(const SymmetricSystem& sys, const Point& nu, const Vec& y) {
  return sys.normal_gradient(nu, y);
}
double sound_speed(const SymmetricSystem& sys, const Vec& y) { return sys.sound_speed(y); }
ReducedForm reduced_form(const SymmetricSystem& sys) { return sys.reduced_form(); }

}  // namespace conslaw
