#include "conslaw/oracles.hpp"

#include <algorithm>
#include <cmath>

namespace conslaw {

double burgers_z_lambda(double lambda, double x1, double x2) {
  if (!(x1 >= 0.0 && x1 <= 1.0)) throw Error(ErrorCode::OutOfStrip, "x1 outside [0,1]");
  if (x1 <= lambda) return x2 > 0 ? 1.0 : (x2 < 0 ? -1.0 : 0.0);
  const double w = x1 - lambda;
  if (x2 <= -w) return -1.0;
  if (x2 >= w) return 1.0;
  return x2 / w;
}

AnalyticField burgers_field(double lambda) {
  return AnalyticField(1, [lambda](const Point& x) {
    return Vec::Constant(1, burgers_z_lambda(lambda, std::clamp(x[0], 0.0, 1.0), x[1]));
  });
}

double burgers_projection(double lambda, const Point& x) {
  const double tol = 1e-12;
  const bool on = std::abs(x[0]) < tol || std::abs(x[0] - 1) < tol || std::abs(std::abs(x[1]) - 1) < tol;
  if (!on || x[0] < -tol || x[0] > 1 + tol || std::abs(x[1]) > 1 + tol)
    throw Error(ErrorCode::NotOnBoundary, "point not on the strip boundary");
  if (std::abs(x[0]) < tol) return 0.0;
  if (std::abs(x[0] - 1) < tol) {
    const double a = std::abs(x[1]);
    if (a < 1 - lambda) return 1.0;
    if (a < 1) return 0.0;
    return 1.0;
  }
  return 1.0;
}

std::pair<double, double> burgers_entropy_fluxes(double z) { return {0.5 * z * z, z * z * z / 3.0}; }

DiscontinuitySet burgers_gamma(double lambda) {
  DiscontinuitySet g;
  if (lambda <= 0) return g;
  GammaChain c = gamma_from_polyline({Point(0, 0), Point(lambda, 0)}, Point(0, 1));
  c.zminus.assign(c.points.size(), Vec::Constant(1, -1.0));
  c.zplus.assign(c.points.size(), Vec::Constant(1, 1.0));
  g.chains.push_back(c);
  return g;
}

BurgersStrip burgers_strip(double outflow_data_lambda) {
  BurgersStrip s;
  s.domain = PolygonDomain::rectangle(0, 1, -1, 1, "bottom", "outflow", "top", "inflow");
  const Mat Z = Mat::Zero(1, 1), I = Mat::Identity(1, 1);
  s.pf.set("inflow", {Z, {}, {}});
  s.pf.set("bottom", {I, {}, {}});
  s.pf.set("top", {I, {}, {}});
  TagProjection out{I, {}, {}};
  if (outflow_data_lambda > 0) {
    const double a = 1 - outflow_data_lambda;
    out.windows.push_back({Point(1, a), Point(1, 1), Z});
    out.windows.push_back({Point(1, -1), Point(1, -a), Z});
  }
  s.pf.set("outflow", out);
  TagData in;
  in.kind = TagData::State;
  in.pieces.push_back({Point(-1, -2), Point(2, 0), Vec::Constant(1, -1.0)});
  in.pieces.push_back({Point(-1, 0), Point(2, 2), Vec::Constant(1, 1.0)});
  s.bd.tags["inflow"] = in;
  if (outflow_data_lambda > 0) {
    TagData o;
    o.kind = TagData::State;
    o.pieces.push_back({Point(-1, -2), Point(2, 0), Vec::Constant(1, -1.0)});
    o.pieces.push_back({Point(-1, 0), Point(2, 2), Vec::Constant(1, 1.0)});
    s.bd.tags["outflow"] = o;
  }
  return s;
}

HugoniotPair euler_hugoniot_state(const SymmetricSystem& sys, const Vec& z_left, const Point& mu, double s) {
  if (!sys.is_euler()) throw Error(ErrorCode::NonEulerSystem, "Hugoniot oracle needs an Euler kind");
  sys.require(z_left);
  const EosParams& eos = sys.eos();
  const Point tau(-mu[1], mu[0]);
  const Point u(z_left[0], z_left[1]);
  const double ut = u.dot(tau), un0 = u.dot(mu);
  const double Hm = sys.enthalpy(z_left);
  HugoniotPair out;
  auto state = [&](double un, double H) {
    const Point v = un * mu + ut * tau;
    return (Vec(3) << v[0], v[1], H - 0.5 * v.squaredNorm()).finished();
  };
  const double rm = eos.d1(Hm), pm = eos.psi(Hm);
  const double dir = un0 < 0 ? -1.0 : 1.0;
  auto flux = [&](double Hp) {
    const double rp = eos.d1(Hp), pp = eos.psi(Hp);
    return dir * std::sqrt((pp - pm) / (1.0 / rm - 1.0 / rp));
  };
  auto jump = [&](double Hp) { return flux(Hp) * (1.0 / eos.d1(Hp) - 1.0 / rm); };
  double Hp = Hm, j = 0;
  if (s == 0) {
    out.z_left = z_left;
    out.z_right = z_left;
  } else {
    // s(Hp) is monotone with s(Hm) = 0; pick the side whose sign matches.
    const bool above = s * dir < 0;
    double lo = above ? Hm : std::max(sys.enthalpy_floor(), 1e-12 * Hm);
    double hi = above ? Hm : Hm;
    if (above) {
      hi = 2 * Hm;
      while (std::abs(jump(hi)) < std::abs(s)) {
        hi *= 2;
        if (hi > 1e6) throw Error(ErrorCode::NoRoot, "normal-velocity jump too large");
      }
    } else if (std::abs(jump(lo)) < std::abs(s)) {
      throw Error(ErrorCode::NoRoot, "normal-velocity jump unreachable above the enthalpy floor");
    }
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid == lo || mid == hi) break;
      const bool past = std::abs(jump(mid)) > std::abs(s);
      if (above == past) hi = mid; else lo = mid;
    }
    Hp = 0.5 * (lo + hi);
    j = flux(Hp);
    out.z_left = state(j / rm, Hm);
    out.z_right = state(j / eos.d1(Hp), Hp);
  }
  if (!sys.in_domain(out.z_left) || !sys.in_domain(out.z_right))
    throw Error(ErrorCode::OutOfDomain, "Hugoniot pair leaves D");
  out.residual = rh_residual(sys, mu, out.z_left, out.z_right);
  const double cl = sys.sound_speed(out.z_left), cr = sys.sound_speed(out.z_right);
  out.mach_left = std::abs(Point(out.z_left[0], out.z_left[1]).dot(mu)) / cl;
  out.mach_right = std::abs(Point(out.z_right[0], out.z_right[1]).dot(mu)) / cr;
  out.supersonic_left = out.mach_left > 1;
  out.supersonic_right = out.mach_right > 1;
  return out;
}

}  // namespace conslaw
