#pragma once

#include "conslaw/weakform.hpp"

#include <Eigen/SparseCholesky>

#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace conslaw {

// ------------------------------------------------------------- PhiBasis

/// Hats in arc length on each chain, vanishing at the chain ends, one per
/// interior breakpoint and state component.
struct PhiBasis {
  struct Fn {
    int chain, node, comp;
  };
  int n = 1;
  double p = 4.0;
  std::vector<std::vector<double>> breaks;  // per chain, per_chain + 1 values
  std::vector<Fn> fns;

  static PhiBasis make(const DiscontinuitySet& gamma, int per_chain, int n, double p = 4.0);
  int size() const { return static_cast<int>(fns.size()); }
  /// phi and d phi / d alpha at arc length a on a chain.
  Vec value(const Vec& c, int chain, double a) const;
  Vec slope(const Vec& c, int chain, double a) const;
  /// W^{1,q}(Gamma) norm by 3-point Gauss per breakpoint interval.
  double norm(const Vec& c, double q) const;
  double norm(const Vec& c) const { return norm(c, p); }
  /// Exact W^{1,2} Gram of the basis.
  Mat gram2() const;
  /// Indices of basis functions on the given chains.
  std::vector<int> on_chains(const std::set<int>& chains) const;
};

// ------------------------------------------------------------- entropy

struct ChainEntropy {
  double max_pointwise = 0;
  double integrated = 0;
  double per_length = 0;
  double length = 0;
  double max_jump = 0;
};

struct EntropyReport {
  std::vector<ChainEntropy> chains;
  double weak_max = 0;
};

/// Production (Q(z+) - Q(z-)) . mu on every chain, and the weak-form max
/// over nonnegative hats on mesh.
EntropyReport entropy_production(const SymmetricSystem& sys, const StateField& z, const DiscontinuitySet& gamma,
                                 const SimplicialMesh& mesh);

// -------------------------------------------------- linearized problem

/// Gram solve on a test space, with dense bordering for extra columns.
class GramSolver {
 public:
  GramSolver(const TestSpace& ts, const SpMat& G_full);
  bool singular() const { return singular_; }
  double pivot_ratio() const { return pivot_ratio_; }
  /// Solves in test-space coordinates; throws SingularGram.
  Vec solve(const Vec& rhs) const;
  Mat solve(const Mat& rhs) const;
  const Mat& dense_border() const { return C_; }

 private:
  const TestSpace* ts_;
  Eigen::SimplicialLDLT<SpMat> ldlt_;
  Mat B_, C_;      // T^T G E and E^T G E
  Mat KinvB_;
  Eigen::LDLT<Mat> schur_;
  bool singular_ = false;
  double pivot_ratio_ = 0;
};

/// Everything needed for the Riesz, M0 and Q computations at a fixed (z, Gamma, mesh).
struct LinearizedProblem {
  const SymmetricSystem* sys = nullptr;
  const SimplicialMesh* mesh = nullptr;
  int n = 1;
  GammaQuadrature gq;
  HGram gram;
  SpMat S;       // jump rows (gamma points x full dofs)
  Vec w;         // gamma weights
  PhiBasis phi;
  Mat Sphi;      // gamma points x phi basis

  static LinearizedProblem build(const SymmetricSystem& sys, const SimplicialMesh& mesh, const StateField& z,
                                 const DiscontinuitySet& gamma, int phi_per_chain, double p, double tol_rh = 1e-8,
                                 int quad_order = 2);
  /// Full-space functional theta -> int_Gamma (S phi)(S theta) per phi column.
  Mat phi_load() const;
  /// Gamma H1 Gram used in the Z-norm surrogate.
  SpMat gamma_h1_gram() const;
};

struct RieszResult {
  Vec zeta;        // test coordinates
  Vec zeta_full;   // full nodal
  std::vector<Vec> zdot;    // R zeta at the volume quadrature points
  Vec sigma;       // S (zeta - phi) at the gamma points
};

/// G zeta = int bdot . theta + int (S phi)(S theta).
RieszResult riesz_solve(const LinearizedProblem& lp, const TestSpace& ts, const GramSolver& gs, const StateField& z,
                        const Vec& bdot_load_full, const Vec& phi);

/// Quadratic form of M0 on the phi basis: C - B^T G^-1 B.
Mat m0_form(const LinearizedProblem& lp, const TestSpace& ts, const GramSolver& gs);
double m0_value(const LinearizedProblem& lp, const TestSpace& ts, const GramSolver& gs, const Vec& phi);

struct QResult {
  double value = 0;
  Vec phi;  // maximizer, full phi-basis coordinates, unit W^{1,p} norm
  int basis_size = 0;
  double p = 4;
};

/// Lower bound of sup phi^T M phi / ||phi||^2_{W^{1,p}} over the phi
/// functions with indices idx (all when empty): generalized eigenproblem for
/// the W^{1,2} Gram, then coordinate ascent when p > 2.
QResult q_from_form(const Mat& M, const PhiBasis& phi, const std::vector<int>& idx, double p);

QResult q0_estimate(const LinearizedProblem& lp, const TestSpace& ts, const GramSolver& gs);

struct QkResult {
  std::vector<double> qk;
  double q0 = 0;
  double bound = 0;  // K^{(p-2)/p} sum Q_k
  bool holds = false;
};
QkResult qk_per_component(const LinearizedProblem& lp, const TestSpace& ts, const GramSolver& gs);

/// Regularized Q: Gram augmented by eps_reg times the Z surrogate and phi
/// restricted to the chains in gamma_subset (all when empty).
QResult q_regularized(const LinearizedProblem& lp, const TestSpace& ts, double eps_reg,
                      const std::set<int>& gamma_subset);

// ------------------------------------------------- stability and kernel

struct StabilityReport {
  std::vector<double> h;
  std::vector<double> c1;
  std::vector<double> ratios;
  bool bounded = false;
};

/// c1 on one mesh: sqrt of the largest eigenvalue of the boundary mass
/// against the Gram, through the Schur complement on boundary dofs.
/// +inf when the Gram is singular.
double stability_c1(const SymmetricSystem& sys, const SimplicialMesh& mesh, const StateField& z,
                    const DiscontinuitySet& gamma, const ProjectionField& pf, double tol_rh = 1e-8);

StabilityReport stability_constant(const SymmetricSystem& sys, const StateField& z, const DiscontinuitySet& gamma,
                                   const ProjectionField& pf, const std::vector<const SimplicialMesh*>& meshes,
                                   double growth_limit = 1.5);

/// Smallest generalized eigenvalue of the Gram on zero-trace tests against
/// the L2 mass (shift-invert Lanczos).
double kernel_sigma_min(const SymmetricSystem& sys, const SimplicialMesh& mesh, const StateField& z,
                        const DiscontinuitySet& gamma, double tol_rh = 1e-8);

/// Smallest generalized eigenvalue of (A, B) for SPD B, A symmetric PSD.
double smallest_generalized_eigenvalue(const SpMat& A, const SpMat& B);

// ---------------------------------------------------------- enrichment

struct EnrichResult {
  Vec xi_full;
  Vec zeta_prime_full;
  double q0_before = 0;
  double q0_after = 0;
  /// Boundary L2 mass of xi per tag.
  std::map<std::string, double> xi_mass;
  TestSpace enlarged;
};

/// One enrichment step: zeta' in the P-constrained space, xi in the
/// complementary space, ker P extended by xi and q0 recomputed.
EnrichResult enrich_projection(const LinearizedProblem& lp, const ProjectionField& pf, const TestSpace& ts);

/// Default entropy tolerance per unit length.
inline double entropy_tolerance(double max_jump) { return 1e-2 * max_jump * max_jump * max_jump; }

// ------------------------------------------------------------- report

struct DiagnosticsOptions {
  double p = 4.0;
  int phi_per_chain = 8;
  double tol_rh = 1e-6;
  double rh_fraction = 0.2;
  double entropy_factor = 1e-2;
  std::vector<double> stability_h;  // empty: solution h times {4, 2, 1}
  double growth_limit = 1.5;
  bool enrichment = false;
  double sigma_floor = 1e-10;
};

struct DiagnosticsReport {
  std::vector<double> rh_max;
  std::vector<double> rh_bad_fraction;
  EntropyReport entropy;
  double tol_entropy = 0;
  QResult q0;
  QkResult qk;
  StabilityReport stability;
  std::vector<double> sigma_min;
  std::optional<EnrichResult> enrichment;
  std::vector<std::string> warnings;
  bool singular_gram = false;
  int exit_code = 0;
};

/// Runs every diagnostic on (z, Gamma) and sets the gating exit code
/// (3 RH, 2 entropy, 5 singular Gram, 4 stability, else 0).
DiagnosticsReport run_diagnostics(const SymmetricSystem& sys, const SimplicialMesh& mesh, const StateField& z,
                                  const DiscontinuitySet& gamma, const PolygonDomain& domain,
                                  const ProjectionField& pf, const DiagnosticsOptions& opt, std::uint64_t seed = 0);

}  // namespace conslaw
