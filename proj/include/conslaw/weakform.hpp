#pragma once

#include "conslaw/geometry.hpp"
#include "conslaw/systems.hpp"

#include <Eigen/Sparse>

#include <array>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace conslaw {

using SpMat = Eigen::SparseMatrix<double>;

// ----------------------------------------------------------------- fields

struct EvalHint {
  const SimplicialMesh* mesh = nullptr;
  int tri = -1;
  std::array<double, 3> bary{};
};

/// A state field z(x) on the reduced domain.
class StateField {
 public:
  virtual ~StateField() = default;
  virtual int n() const = 0;
  virtual Vec eval(const Point& x, const EvalHint& hint = {}) const = 0;
};

/// Continuous piecewise linear field; coefficients node-major (node*n + j).
class NodalField : public StateField {
 public:
  NodalField(const SimplicialMesh& mesh, int n, Vec coeffs);
  int n() const override { return n_; }
  Vec eval(const Point& x, const EvalHint& hint = {}) const override;
  Vec node_value(int v) const { return coeffs_.segment(static_cast<Eigen::Index>(v) * n_, n_); }
  /// Element gradient as an n x 2 matrix.
  Mat gradient(int tri) const;
  const SimplicialMesh& mesh() const { return *mesh_; }
  const Vec& coeffs() const { return coeffs_; }

 private:
  const SimplicialMesh* mesh_;
  int n_;
  Vec coeffs_;
};

class AnalyticField : public StateField {
 public:
  AnalyticField(int n, std::function<Vec(const Point&)> f) : n_(n), f_(std::move(f)) {}
  int n() const override { return n_; }
  Vec eval(const Point& x, const EvalHint& = {}) const override { return f_(x); }

 private:
  int n_;
  std::function<Vec(const Point&)> f_;
};

/// Nodal field plus a discontinuity set: inside a band around each chain
/// the one-sided traces replace the smeared nodal values.
class FittedField : public StateField {
 public:
  FittedField(const NodalField& base, DiscontinuitySet gamma, double band);
  int n() const override { return base_.n(); }
  Vec eval(const Point& x, const EvalHint& hint = {}) const override;
  const DiscontinuitySet& gamma() const { return gamma_; }

 private:
  const NodalField& base_;
  DiscontinuitySet gamma_;
  double band_;
};

/// Nodal interpolant of a field onto a mesh.
Vec interpolate(const StateField& f, const SimplicialMesh& mesh);

// ------------------------------------------------------------ quadrature

struct TriRule {
  std::vector<std::array<double, 3>> bary;
  std::vector<double> w;  // weights sum to 1 (multiply by area)
};
const TriRule& tri_rule(int order);

struct LineRule {
  std::vector<double> t;  // on [0,1]
  std::vector<double> w;  // sum to 1
};
const LineRule& gauss3();

// ------------------------------------------------------------ fluxes

/// Reduced fluxes of the planar weak form: volume integrand
/// sum_l A_l . theta_{x_l} + A0 . theta, with J_l = dA_l/dz.
struct ReducedFlux {
  std::array<Vec, 2> A;
  Vec A0;
  std::array<Mat, 2> J;
  Mat J0;
  bool has_zero_order = false;
};
void reduced_flux(const SymmetricSystem& sys, const Vec& z, const Point& x, bool jacobian,
                  ReducedFlux& out);
/// Normal (or tangential) reduced flux sum_l d_l A_l(z, x).
Vec reduced_directional(const SymmetricSystem& sys, const Point& d, const Vec& z, const Point& x);
Mat reduced_directional_jac(const SymmetricSystem& sys, const Point& d, const Vec& z, const Point& x);
/// Entropy flux in the same reduction as the fluxes (two components).
Point reduced_entropy_flux(const SymmetricSystem& sys, const Vec& z, const Point& x);

// ---------------------------------------------------------------- spaces

/// Vector P1 space whose nodal values lie in per-node subspaces, plus
/// optional global columns. Coefficients map to full nodal vectors via T.
struct TestSpace {
  const SimplicialMesh* mesh = nullptr;
  int n = 1;
  SpMat T;    // (N*n) x (local dim)
  Mat extra;  // (N*n) x k, may have zero columns
  std::vector<int> col_node;
  std::vector<Vec> col_dir;

  int dim() const { return static_cast<int>(T.cols() + extra.cols()); }
  int local_dim() const { return static_cast<int>(T.cols()); }
  /// Full nodal vector of the test coefficients c.
  Vec expand(const Vec& c) const;
  /// Coefficients in test-space coordinates of the full-space functional r.
  Vec restrict_functional(const Vec& r) const;
  /// T^T G T including the extra columns.
  Mat project_dense(const SpMat& G) const;
  SpMat project_sparse(const SpMat& G) const;
};

enum class Constraint { None, KerP, KerIminusP, ZeroTrace };

/// Builds the test space: KerP keeps nodal values in ker P and orthogonal
/// to e0 (the prescribable-data test space); KerIminusP the complementary
/// space; ZeroTrace vanishes on the boundary.
TestSpace make_test_space(const SimplicialMesh& mesh, const ProjectionField& pf, Constraint c,
                          bool with_e0 = true);

// --------------------------------------------------------- boundary data

/// Data per tag: a state g (b = (I-P) psi_nu,z(g)), a given flux vector, or
/// zero. State pieces are selected by box containment.
struct StatePiece {
  Point lo, hi;
  Vec state;
};
struct TagData {
  enum Kind { Zero, Flux, State } kind = Zero;
  Vec flux;
  std::vector<StatePiece> pieces;
};
struct BoundaryData {
  std::map<std::string, TagData> tags;
  /// b at boundary point x with outward normal nu.
  Vec eval(const SymmetricSystem& sys, const ProjectionField& pf, const std::string& tag,
           const Point& x, const Point& nu) const;
  bool has(const std::string& tag) const { return tags.count(tag) > 0; }
};

/// b(z, P) = (I - P) psi_nu,z(z) at one boundary point.
Vec boundary_flux(const SymmetricSystem& sys, const Mat& P, const Point& nu, const Vec& z,
                  const Point& x = Point::Zero());

/// Boundary field linear on each boundary edge: values at the edge's two
/// end nodes, indexed like mesh.boundary().
struct EdgeField {
  std::vector<std::array<Vec, 2>> vals;
};
double boundary_pairing(const SimplicialMesh& mesh, const EdgeField& bdot, const Vec& theta_full, int n);
/// Linear functional theta -> int bdot . theta over full nodal dofs.
Vec boundary_load(const SimplicialMesh& mesh, const EdgeField& bdot, int n);

// ------------------------------------------------------------ dissipation

struct DissipationSpec {
  std::array<Mat, 2> M;
  static DissipationSpec identity(int n);
  /// Identity with the last component row zeroed.
  static DissipationSpec mild(int n);
};

// -------------------------------------------------------------- residual

struct AssemblyOptions {
  int quad_order = 2;
  /// Test every nodal direction except e0 and close the range-P directions
  /// with the natural outflow flux P psi_nu,z(z); e0 rows become the strong
  /// constraint e0 . psi_nu,z(z) = 0.
  bool closed = true;
};

struct ResidualSystem {
  Vec r;        // full nodal rows
  SpMat J;      // d r / d coeffs (empty when not requested)
  double bnorm = 0;
};

ResidualSystem assemble_residual(const SymmetricSystem& sys, const SimplicialMesh& mesh,
                                 const ProjectionField& pf, const BoundaryData& bd,
                                 const Vec& coeffs, double eps, const DissipationSpec& diss,
                                 bool jacobian, const AssemblyOptions& opt = {});

/// Nodal rows replaced by the strong e0 constraints (closed systems only).
void apply_e0_rows(const SymmetricSystem& sys, const SimplicialMesh& mesh, const ProjectionField& pf,
                   const Vec& coeffs, ResidualSystem& rs, bool jacobian);

/// Residual components against the basis of tspace (no closure term).
Vec weak_residual(const SymmetricSystem& sys, const SimplicialMesh& mesh, const ProjectionField& pf,
                  const BoundaryData& bd, const Vec& coeffs, const TestSpace& tspace, double eps,
                  const DissipationSpec& diss, int quad_order = 2);

// --------------------------------------------------------------- gamma

struct GammaPoint {
  int chain, seg, tri;
  double alpha;
  double w;
  Point x;
  Point tangent;
  Vec jump;  // [sum_l tangent_l A_l,z] (plus minus minus)
};

struct GammaQuadrature {
  std::vector<GammaPoint> pts;
  std::vector<std::string> warnings;
  double max_rh = 0;
};

/// Splits every chain at mesh-edge crossings and the given arc-length
/// breakpoints (per chain) and places 3 Gauss points per piece.
GammaQuadrature build_gamma_quadrature(const SymmetricSystem& sys, const SimplicialMesh& mesh,
                                       const DiscontinuitySet& gamma,
                                       const std::vector<std::vector<double>>& breaks = {},
                                       double tol_rh = 1e-8);

double rh_residual(const SymmetricSystem& sys, const Point& mu, const Vec& zm, const Vec& zp,
                   const Point& x = Point::Zero());

// ------------------------------------------------------ linear operators

/// R(z)theta at the quadrature points of each triangle (tri-major).
std::vector<Vec> apply_R(const SymmetricSystem& sys, const SimplicialMesh& mesh, const StateField& z,
                         const Vec& theta_full, int quad_order = 2);
/// S(z)theta at the gamma quadrature points.
std::vector<double> apply_S(const SimplicialMesh& mesh, const GammaQuadrature& gq, const Vec& theta_full,
                            int n);

/// Full nodal H Gram: volume block and jump block separately.
struct HGram {
  SpMat volume;
  SpMat jump;
  SpMat total() const { return volume + jump; }
};
HGram assemble_h_gram(const SymmetricSystem& sys, const SimplicialMesh& mesh, const StateField& z,
                      const GammaQuadrature& gq, int quad_order = 2);

/// Full nodal P1 mass and stiffness (scalar matrices tensored with I_n).
SpMat mass_matrix(const SimplicialMesh& mesh, int n);
SpMat stiffness_matrix(const SimplicialMesh& mesh, int n);
/// Boundary mass of |(I - P) theta|^2.
SpMat boundary_mass(const SimplicialMesh& mesh, const ProjectionField& pf, int n);

/// Jump-block rows: for each gamma point, the vector s with S theta = s . theta_full.
SpMat jump_operator(const SimplicialMesh& mesh, const GammaQuadrature& gq, int n);

}  // namespace conslaw
