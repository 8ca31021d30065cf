#pragma once

#include "conslaw/weakform.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace conslaw {

struct SchemeParams {
  double eps0 = 0.5;
  double eps_factor = 0.5;
  double eps_min = 0.0;
  /// Per-level floor eps >= eps_min_h_factor * h.
  double eps_min_h_factor = 0.0;
  std::vector<double> h_levels;
  double newton_tol = 1e-10;
  int newton_max_iter = 40;
  double tau_s = 5.0;
  std::uint64_t seed = 0;
  int quad_order = 2;

  /// Throws InvalidSchedule.
  void validate() const;
  double eps_floor(double h) const;
  /// Geometric schedule from start down to the floor of level h.
  std::vector<double> eps_schedule(double start, double h) const;
};

struct NewtonReport {
  int iterations = 0;
  bool converged = false;
  double residual = 0;
  double tolerance = 0;
  std::vector<double> history;
};

struct ViscousResult {
  Vec coeffs;
  NewtonReport newton;
};

/// Damped Newton on the closed discrete viscous system.
ViscousResult solve_viscous(const SymmetricSystem& sys, const SimplicialMesh& mesh, const ProjectionField& pf,
                            const BoundaryData& bd, double eps, const DissipationSpec& diss, const Vec& init,
                            const SchemeParams& params);

struct DiscreteSolution {
  std::shared_ptr<const SimplicialMesh> mesh;
  Vec coeffs;
  DiscontinuitySet gamma;
  double eps = 0;
  double h = 0;
  double residual = 0;
  int newton_iterations = 0;
  bool ok = false;
  std::string status;
  std::vector<double> eps_path;
  std::vector<int> iterations_path;
};

std::vector<DiscreteSolution> continuation_solve(const SymmetricSystem& sys,
                                                 const std::vector<std::shared_ptr<const SimplicialMesh>>& meshes,
                                                 const ProjectionField& pf, const BoundaryData& bd,
                                                 const SchemeParams& params, const DissipationSpec& diss,
                                                 const Vec& init_state);

struct FitParams {
  double tau_s = 5.0;
  double eps = 0.0;
  double tol_rh = 1e-2;
  /// Smallest accepted ridge jump relative to the field's range.
  double jump_fraction = 0.1;
  /// Peak-to-window slope ratio marking a resolved jump.
  double peak_ratio = 1.5;
  double min_length_h = 3.0;
  /// Smallest gradient-weighted mean |cos| between slopes and ridge normal.
  double min_alignment = 0.7;
};

/// Ridge detection and thinning. For viscous fields (eps > 0) ridges whose
/// traces produce entropy are unresolved expansion fans and are discarded.
DiscontinuitySet fit_shocks(const SymmetricSystem& sys, const SimplicialMesh& mesh, const Vec& coeffs,
                            const FitParams& fp);

/// L1 distance of two fields over a mesh (order-4 quadrature).
double l1_distance(const StateField& a, const StateField& b, const SimplicialMesh& mesh);

struct LimitReport {
  std::vector<double> d;
  std::vector<double> rates;
  bool converged = false;
};
/// d_k = ||z_k - z_{k+1}||_L1 + gamma_distance on successive levels.
LimitReport limit_check(const std::vector<DiscreteSolution>& sols, double tol_limit = 0.2);
LimitReport limit_check_values(const std::vector<double>& d, double tol_limit);

struct StructureReport {
  std::vector<double> eps;
  std::vector<double> value;
  bool decreasing = false;
  std::string warning;
};

/// Tanh-smoothed candidate across each chain compared with z through the
/// weak residual, maximized over the hats of tspace normalized by
/// sup + W^{1,1} norms.
StructureReport viscous_structure_check(const SymmetricSystem& sys, const StateField& z,
                                        const DiscontinuitySet& gamma, const std::vector<double>& eps_list,
                                        const DissipationSpec& diss, const TestSpace& tspace);

}  // namespace conslaw
