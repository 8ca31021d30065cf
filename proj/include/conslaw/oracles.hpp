#pragma once

#include "conslaw/weakform.hpp"

#include <utility>

namespace conslaw {

/// Exact member of the Burgers family on the strip 0 <= x1 <= 1: a fan
/// centred at (lambda, 0), preceded for x1 <= lambda by the standing jump
/// sign(x2).
double burgers_z_lambda(double lambda, double x1, double x2);
AnalyticField burgers_field(double lambda);

/// Limiting projector of the family at a boundary point of
/// [0,1] x [-1,1]: 0 or 1.
double burgers_projection(double lambda, const Point& x);

/// (z^2/2, z^3/3).
std::pair<double, double> burgers_entropy_fluxes(double z);

/// The standing jump of z_lambda as a chain with traces (empty for lambda = 0).
DiscontinuitySet burgers_gamma(double lambda);

/// Strip [0,1] x [-1,1] with tags inflow/outflow/bottom/top, inflow state
/// sign(x2), Cauchy projector (P = 0 on inflow, I elsewhere). When
/// outflow_data_lambda > 0 the outflow edge also prescribes data on
/// 1 - lambda < |x2| < 1, the projection pattern of z_lambda.
struct BurgersStrip {
  PolygonDomain domain;
  ProjectionField pf{1};
  BoundaryData bd;
};
BurgersStrip burgers_strip(double outflow_data_lambda = 0.0);

struct HugoniotPair {
  Vec z_left;   // input state with its normal velocity set on the Hugoniot locus
  Vec z_right;
  double residual = 0;
  bool supersonic_left = false;
  bool supersonic_right = false;
  double mach_left = 0, mach_right = 0;
};

/// Shock pair across a stationary front with unit normal mu and normal
/// velocity jump s. Enthalpy and tangential velocity of z_left are kept;
/// the upstream normal velocity and the downstream enthalpy follow from
/// mass and normal-momentum balance (bisection on the downstream enthalpy).
HugoniotPair euler_hugoniot_state(const SymmetricSystem& sys, const Vec& z_left, const Point& mu, double s);

}  // namespace conslaw
