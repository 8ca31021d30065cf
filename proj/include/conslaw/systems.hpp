#pragma once

#include "conslaw/common.hpp"

#include <array>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace conslaw {

enum class SystemKind { Burgers2D, EulerStationary, EulerSelfSimilar, Custom };
enum class ReducedForm { Stationary, SelfSimilar };

const char* kind_name(SystemKind k);
SystemKind kind_from_name(const std::string& s);

/// Power-law pressure potential psi_m(H) = C * H^kappa.
struct EosParams {
  double C = 1.0;
  double kappa = 3.5;

  double psi(double H) const;
  double d1(double H) const;
  double d2(double H) const;
  double d3(double H) const;
};

/// Callbacks for a user-defined system; axis index runs over 0..m-1.
struct CustomPotentials {
  std::function<double(int, const Vec&)> value;
  std::function<Vec(int, const Vec&)> gradient;
  std::function<Mat(int, const Vec&)> hessian;
};

/// Conservation system written through potentials psi_i, i = 0..m-1:
/// sum_i d/dx_i (grad_z psi_i(z)) = 0.
///
/// Euler kinds carry three potentials (two spatial, one for the time-like
/// variable); the planar reductions only ever use two reduced coordinates.
class SymmetricSystem {
 public:
  static SymmetricSystem burgers();
  static SymmetricSystem euler(SystemKind kind, EosParams eos = {});
  static SymmetricSystem custom(int m, int n, CustomPotentials p,
                                std::vector<std::pair<double, double>> bounds);

  SystemKind kind() const { return kind_; }
  int m() const { return m_; }
  int n() const { return n_; }
  const EosParams& eos() const { return eos_; }
  const std::vector<std::pair<double, double>>& bounds() const { return bounds_; }
  void set_bounds(std::vector<std::pair<double, double>> b);
  double enthalpy_floor() const { return h_floor_; }
  bool is_euler() const;

  bool in_domain(const Vec& y) const;
  /// Throws OutOfDomain when y is not in D.
  void require(const Vec& y) const;

  double potential(int i, const Vec& y) const;
  Vec gradient(int i, const Vec& y) const;
  Mat hessian(int i, const Vec& y) const;

  /// Legendre dual q_i = y . grad psi_i - psi_i for every axis.
  Vec entropy_flux(const Vec& y) const;

  /// sum over the two reduced axes of nu_i grad psi_i(y).
  Vec normal_gradient(const Point& nu, const Vec& y) const;
  Mat normal_hessian(const Point& nu, const Vec& y) const;

  /// Enthalpy H = z_n + |u|^2 / 2 (Euler kinds only).
  double enthalpy(const Vec& y) const;
  double sound_speed(const Vec& y) const;

  ReducedForm reduced_form() const;

 private:
  void check_axis(int i) const;
  SystemKind kind_ = SystemKind::Burgers2D;
  int m_ = 2;
  int n_ = 1;
  EosParams eos_;
  std::vector<std::pair<double, double>> bounds_;
  double h_floor_ = 0.0;
  CustomPotentials custom_;
};

double potential_value(const SymmetricSystem& sys, int i, const Vec& y);
Vec flux_gradient(const SymmetricSystem& sys, int i, const Vec& y);
Mat flux_hessian(const SymmetricSystem& sys, int i, const Vec& y);
Vec entropy_flux(const SymmetricSystem& sys, const Vec& y);
Vec normal_potential_gradient(const SymmetricSystem& sys, const Point& nu, const Vec& y);
double sound_speed(const SymmetricSystem& sys, const Vec& y);
ReducedForm reduced_form(const SymmetricSystem& sys);

}  // namespace conslaw
