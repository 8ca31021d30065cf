#include "conslaw/weakform.hpp"

#include "conslaw/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

namespace conslaw {

using Trip = Eigen::Triplet<double>;

// ----------------------------------------------------------------- fields

NodalField::NodalField(const SimplicialMesh& mesh, int n, Vec coeffs)
    : mesh_(&mesh), n_(n), coeffs_(std::move(coeffs)) {
  if (coeffs_.size() != static_cast<Eigen::Index>(mesh.num_nodes()) * n)
    throw Error(ErrorCode::MeshMismatch, "coefficient count does not match the mesh");
}

Vec NodalField::eval(const Point& x, const EvalHint& hint) const {
  int t = hint.tri;
  std::array<double, 3> l = hint.bary;
  if (hint.mesh != mesh_ || t < 0) {
    t = mesh_->locate(x, &l, 1e-10);
    if (t < 0) t = mesh_->locate(x, &l, 1e-6);
    if (t < 0) throw Error(ErrorCode::OutOfDomain, "evaluation point outside the mesh");
  }
  const auto& v = mesh_->triangles()[t];
  Vec z = Vec::Zero(n_);
  for (int k = 0; k < 3; ++k) z += l[k] * node_value(v[k]);
  return z;
}

Mat NodalField::gradient(int tri) const {
  const auto g = mesh_->hat_gradients(tri);
  const auto& v = mesh_->triangles()[tri];
  Mat G = Mat::Zero(n_, 2);
  for (int k = 0; k < 3; ++k) G += node_value(v[k]) * g[k].transpose();
  return G;
}

FittedField::FittedField(const NodalField& base, DiscontinuitySet gamma, double band)
    : base_(base), gamma_(std::move(gamma)), band_(band) {}

Vec FittedField::eval(const Point& x, const EvalHint& hint) const {
  double best = band_;
  const GammaChain* bc = nullptr;
  double balpha = 0, side = 0;
  for (auto& c : gamma_.chains) {
    if (!c.has_traces()) continue;
    for (int s = 0; s < c.num_segments(); ++s) {
      const Point a = c.points[s], ab = c.points[s + 1] - a;
      const double L2 = ab.squaredNorm();
      const double t = (x - a).dot(ab) / L2;
      if (t < 0 || t > 1) continue;
      const Point foot = a + t * ab;
      const double d = (x - foot).norm();
      if (d < best) {
        best = d;
        bc = &c;
        balpha = c.alpha[s] + t * std::sqrt(L2);
        side = c.mu[s].dot(x - foot);
      }
    }
  }
  if (!bc) return base_.eval(x, hint);
  Vec zm, zp;
  bc->traces_at(balpha, zm, zp);
  return side >= 0 ? zp : zm;
}

Vec interpolate(const StateField& f, const SimplicialMesh& mesh) {
  const int n = f.n();
  Vec c(static_cast<Eigen::Index>(mesh.num_nodes()) * n);
  for (int v = 0; v < mesh.num_nodes(); ++v) c.segment(static_cast<Eigen::Index>(v) * n, n) = f.eval(mesh.nodes()[v]);
  return c;
}

// ------------------------------------------------------------ quadrature

const TriRule& tri_rule(int order) {
  static const TriRule r1{{{1.0 / 3, 1.0 / 3, 1.0 / 3}}, {1.0}};
  static const TriRule r2{{{2.0 / 3, 1.0 / 6, 1.0 / 6}, {1.0 / 6, 2.0 / 3, 1.0 / 6}, {1.0 / 6, 1.0 / 6, 2.0 / 3}},
                          {1.0 / 3, 1.0 / 3, 1.0 / 3}};
  static const TriRule r4 = [] {
    const double a = 0.445948490915965, wa = 0.223381589678011;
    const double b = 0.091576213509771, wb = 0.109951743655322;
    TriRule r;
    r.bary = {{1 - 2 * a, a, a}, {a, 1 - 2 * a, a}, {a, a, 1 - 2 * a},
              {1 - 2 * b, b, b}, {b, 1 - 2 * b, b}, {b, b, 1 - 2 * b}};
    r.w = {wa, wa, wa, wb, wb, wb};
    return r;
  }();
  if (order <= 1) return r1;
  if (order == 2) return r2;
  return r4;
}

const LineRule& gauss3() {
  static const LineRule r{{0.5 - 0.5 * std::sqrt(0.6), 0.5, 0.5 + 0.5 * std::sqrt(0.6)},
                          {5.0 / 18, 8.0 / 18, 5.0 / 18}};
  return r;
}

// ---------------------------------------------------------------- fluxes

void reduced_flux(const SymmetricSystem& sys, const Vec& z, const Point& x, bool jacobian, ReducedFlux& out) {
  sys.require(z);
  if (sys.reduced_form() == ReducedForm::Stationary) {
    for (int l = 0; l < 2; ++l) {
      out.A[l] = sys.gradient(l, z);
      if (jacobian) out.J[l] = sys.hessian(l, z);
    }
    out.has_zero_order = false;
    return;
  }
  const Vec g = sys.gradient(2, z);
  Mat H;
  if (jacobian) H = sys.hessian(2, z);
  for (int l = 0; l < 2; ++l) {
    out.A[l] = sys.gradient(l, z) - x[l] * g;
    if (jacobian) out.J[l] = sys.hessian(l, z) - x[l] * H;
  }
  out.A0 = -2.0 * g;
  if (jacobian) out.J0 = -2.0 * H;
  out.has_zero_order = true;
}

Vec reduced_directional(const SymmetricSystem& sys, const Point& d, const Vec& z, const Point& x) {
  ReducedFlux f;
  reduced_flux(sys, z, x, false, f);
  return d[0] * f.A[0] + d[1] * f.A[1];
}

Mat reduced_directional_jac(const SymmetricSystem& sys, const Point& d, const Vec& z, const Point& x) {
  ReducedFlux f;
  reduced_flux(sys, z, x, true, f);
  return d[0] * f.J[0] + d[1] * f.J[1];
}

Point reduced_entropy_flux(const SymmetricSystem& sys, const Vec& z, const Point& x) {
  const Vec q = sys.entropy_flux(z);
  if (sys.reduced_form() == ReducedForm::Stationary) return Point(q[0], q[1]);
  return Point(q[0] - x[0] * q[2], q[1] - x[1] * q[2]);
}

// ---------------------------------------------------------------- spaces

Vec TestSpace::expand(const Vec& c) const {
  Vec out = T * c.head(T.cols());
  if (extra.cols() > 0) out += extra * c.tail(extra.cols());
  return out;
}

Vec TestSpace::restrict_functional(const Vec& r) const {
  Vec out(dim());
  out.head(T.cols()) = T.transpose() * r;
  if (extra.cols() > 0) out.tail(extra.cols()) = extra.transpose() * r;
  return out;
}

SpMat TestSpace::project_sparse(const SpMat& G) const {
  SpMat out = SpMat(T.transpose()) * G * T;
  out.makeCompressed();
  return out;
}

Mat TestSpace::project_dense(const SpMat& G) const {
  const int d = dim(), k = local_dim();
  Mat out(d, d);
  out.topLeftCorner(k, k) = Mat(project_sparse(G));
  if (extra.cols() > 0) {
    const Mat GE = G * extra;
    out.topRightCorner(k, extra.cols()) = T.transpose() * GE;
    out.bottomLeftCorner(extra.cols(), k) = out.topRightCorner(k, extra.cols()).transpose();
    out.bottomRightCorner(extra.cols(), extra.cols()) = extra.transpose() * GE;
  }
  return out;
}

namespace {

std::vector<Vec> null_basis(const Mat& C, int n) {
  std::vector<Vec> out;
  if (C.rows() == 0) {
    for (int j = 0; j < n; ++j) out.push_back(Vec::Unit(n, j));
    return out;
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(C.transpose() * C);
  for (int j = 0; j < n; ++j)
    if (es.eigenvalues()[j] < 1e-10) {
      Vec v = es.eigenvectors().col(j);
      // Fix the sign so the basis is reproducible.
      int k = 0;
      v.cwiseAbs().maxCoeff(&k);
      if (v[k] < 0) v = -v;
      out.push_back(v);
    }
  // Identity-aligned kernels come out as unit vectors; keep them exact.
  for (auto& v : out)
    for (int j = 0; j < n; ++j)
      if (std::abs(std::abs(v[j]) - 1.0) < 1e-14) {
        v.setZero();
        v[j] = 1.0;
      }
  return out;
}

}  // namespace

TestSpace make_test_space(const SimplicialMesh& mesh, const ProjectionField& pf, Constraint c, bool with_e0) {
  const int n = pf.n();
  const int N = mesh.num_nodes();
  std::vector<std::vector<Mat>> rows(N);
  if (c != Constraint::None) {
    for (auto& e : mesh.boundary()) {
      const Point mid = 0.5 * (mesh.nodes()[e.v[0]] + mesh.nodes()[e.v[1]]);
      const TagProjection& tp = pf.at(e.tag);
      for (int k : e.v) {
        const Point& xv = mesh.nodes()[k];
        const Mat I = Mat::Identity(n, n);
        if (c == Constraint::ZeroTrace) {
          rows[k].push_back(I);
          continue;
        }
        for (const Point* x : {&xv, &mid}) {
          const Mat& P = pf.P(e.tag, *x);
          rows[k].push_back(c == Constraint::KerP ? P : Mat(I - P));
        }
        if (with_e0 && c == Constraint::KerP)
          for (auto& e0 : tp.e0) rows[k].push_back(e0.transpose());
      }
    }
  }
  TestSpace ts;
  ts.mesh = &mesh;
  ts.n = n;
  std::vector<Trip> trips;
  int col = 0;
  for (int v = 0; v < N; ++v) {
    int nr = 0;
    for (auto& r : rows[v]) nr += static_cast<int>(r.rows());
    Mat C(nr, n);
    int at = 0;
    for (auto& r : rows[v]) {
      C.middleRows(at, r.rows()) = r;
      at += static_cast<int>(r.rows());
    }
    for (auto& d : null_basis(C, n)) {
      for (int j = 0; j < n; ++j)
        if (d[j] != 0) trips.emplace_back(v * n + j, col, d[j]);
      ts.col_node.push_back(v);
      ts.col_dir.push_back(d);
      ++col;
    }
  }
  ts.T.resize(static_cast<Eigen::Index>(N) * n, col);
  ts.T.setFromTriplets(trips.begin(), trips.end());
  ts.extra.resize(static_cast<Eigen::Index>(N) * n, 0);
  return ts;
}

// --------------------------------------------------------- boundary data

Vec boundary_flux(const SymmetricSystem& sys, const Mat& P, const Point& nu, const Vec& z, const Point& x) {
  const Vec f = reduced_directional(sys, nu, z, x);
  return f - P * f;
}

Vec BoundaryData::eval(const SymmetricSystem& sys, const ProjectionField& pf, const std::string& tag,
                       const Point& x, const Point& nu) const {
  const Mat& P = pf.P(tag, x);
  const int n = sys.n();
  auto it = tags.find(tag);
  if (it == tags.end()) {
    if ((Mat::Identity(n, n) - P).cwiseAbs().maxCoeff() > 1e-12)
      throw Error(ErrorCode::MissingBoundaryData, "no data for tag " + tag);
    return Vec::Zero(n);
  }
  const TagData& d = it->second;
  switch (d.kind) {
    case TagData::Zero: return Vec::Zero(n);
    case TagData::Flux: return d.flux - P * d.flux;
    case TagData::State:
      for (auto& p : d.pieces)
        if (x[0] >= p.lo[0] && x[0] <= p.hi[0] && x[1] >= p.lo[1] && x[1] <= p.hi[1])
          return boundary_flux(sys, P, nu, p.state, x);
      throw Error(ErrorCode::MissingBoundaryData, "no state piece covers a point on tag " + tag);
  }
  return Vec::Zero(n);
}

Vec boundary_load(const SimplicialMesh& mesh, const EdgeField& bdot, int n) {
  Vec out = Vec::Zero(static_cast<Eigen::Index>(mesh.num_nodes()) * n);
  const LineRule& g = gauss3();
  for (std::size_t e = 0; e < mesh.boundary().size(); ++e) {
    const auto& be = mesh.boundary()[e];
    const double L = (mesh.nodes()[be.v[1]] - mesh.nodes()[be.v[0]]).norm();
    for (std::size_t q = 0; q < g.t.size(); ++q) {
      const double t = g.t[q];
      const Vec b = (1 - t) * bdot.vals[e][0] + t * bdot.vals[e][1];
      out.segment(static_cast<Eigen::Index>(be.v[0]) * n, n) += g.w[q] * L * (1 - t) * b;
      out.segment(static_cast<Eigen::Index>(be.v[1]) * n, n) += g.w[q] * L * t * b;
    }
  }
  return out;
}

double boundary_pairing(const SimplicialMesh& mesh, const EdgeField& bdot, const Vec& theta, int n) {
  return boundary_load(mesh, bdot, n).dot(theta);
}

// ------------------------------------------------------------ dissipation

DissipationSpec DissipationSpec::identity(int n) { return {{Mat::Identity(n, n), Mat::Identity(n, n)}}; }

DissipationSpec DissipationSpec::mild(int n) {
  DissipationSpec d = identity(n);
  if (n > 1)
    for (auto& M : d.M) M(n - 1, n - 1) = 0.0;
  return d;
}

// -------------------------------------------------------------- residual

namespace {

constexpr int kChunk = 512;

struct ElemBlock {
  Vec r;
  Mat J;
};

}  // namespace

ResidualSystem assemble_residual(const SymmetricSystem& sys, const SimplicialMesh& mesh, const ProjectionField& pf,
                                 const BoundaryData& bd, const Vec& coeffs, double eps,
                                 const DissipationSpec& diss, bool jacobian, const AssemblyOptions& opt) {
  const int n = sys.n();
  const int nt = mesh.num_triangles();
  const TriRule& rule = tri_rule(opt.quad_order);
  std::array<Mat, 2> MtM{diss.M[0].transpose() * diss.M[0], diss.M[1].transpose() * diss.M[1]};
  std::vector<ElemBlock> blocks(nt);
  const int nchunks = (nt + kChunk - 1) / kChunk;
  parallel_chunks(nchunks, [&](int c) {
    ReducedFlux f;
    for (int t = c * kChunk; t < std::min(nt, (c + 1) * kChunk); ++t) {
      const auto& v = mesh.triangles()[t];
      const auto g = mesh.hat_gradients(t);
      const double A = mesh.area(t);
      std::array<Vec, 3> zn;
      for (int k = 0; k < 3; ++k) zn[k] = coeffs.segment(static_cast<Eigen::Index>(v[k]) * n, n);
      Mat grad = Mat::Zero(n, 2);
      for (int k = 0; k < 3; ++k) grad += zn[k] * g[k].transpose();
      ElemBlock& B = blocks[t];
      B.r = Vec::Zero(3 * n);
      if (jacobian) B.J = Mat::Zero(3 * n, 3 * n);
      for (std::size_t q = 0; q < rule.w.size(); ++q) {
        const auto& l = rule.bary[q];
        const Point x = l[0] * mesh.nodes()[v[0]] + l[1] * mesh.nodes()[v[1]] + l[2] * mesh.nodes()[v[2]];
        const Vec z = l[0] * zn[0] + l[1] * zn[1] + l[2] * zn[2];
        try {
          reduced_flux(sys, z, x, jacobian, f);
        } catch (const Error& e) {
          throw Error(e.code(), std::string(e.what()) + " in cell " + std::to_string(t));
        }
        const double w = rule.w[q] * A;
        for (int k = 0; k < 3; ++k) {
          Vec rk = -(g[k][0] * f.A[0] + g[k][1] * f.A[1]);
          if (f.has_zero_order) rk -= l[k] * f.A0;
          B.r.segment(k * n, n) += w * rk;
        }
        if (jacobian)
          for (int k = 0; k < 3; ++k)
            for (int kk = 0; kk < 3; ++kk) {
              Mat blk = -l[kk] * (g[k][0] * f.J[0] + g[k][1] * f.J[1]);
              if (f.has_zero_order) blk -= l[k] * l[kk] * f.J0;
              B.J.block(k * n, kk * n, n, n) += w * blk;
            }
      }
      if (eps > 0) {
        const Vec d0 = MtM[0] * grad.col(0), d1 = MtM[1] * grad.col(1);
        for (int k = 0; k < 3; ++k) B.r.segment(k * n, n) += eps * A * (g[k][0] * d0 + g[k][1] * d1);
        if (jacobian)
          for (int k = 0; k < 3; ++k)
            for (int kk = 0; kk < 3; ++kk)
              B.J.block(k * n, kk * n, n, n) += eps * A * (g[k][0] * g[kk][0] * MtM[0] + g[k][1] * g[kk][1] * MtM[1]);
      }
    }
  });

  ResidualSystem rs;
  const Eigen::Index N = static_cast<Eigen::Index>(mesh.num_nodes()) * n;
  rs.r = Vec::Zero(N);
  std::vector<Trip> trips;
  if (jacobian) trips.reserve(static_cast<std::size_t>(nt) * 9 * n * n + mesh.boundary().size() * 4 * n * n);
  for (int t = 0; t < nt; ++t) {
    const auto& v = mesh.triangles()[t];
    const ElemBlock& B = blocks[t];
    for (int k = 0; k < 3; ++k) {
      rs.r.segment(static_cast<Eigen::Index>(v[k]) * n, n) += B.r.segment(k * n, n);
      if (jacobian)
        for (int kk = 0; kk < 3; ++kk)
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) trips.emplace_back(v[k] * n + i, v[kk] * n + j, B.J(k * n + i, kk * n + j));
    }
  }

  const LineRule& lr = gauss3();
  for (auto& e : mesh.boundary()) {
    const Point a = mesh.nodes()[e.v[0]], b = mesh.nodes()[e.v[1]];
    const double L = (b - a).norm();
    const Vec za = coeffs.segment(static_cast<Eigen::Index>(e.v[0]) * n, n);
    const Vec zb = coeffs.segment(static_cast<Eigen::Index>(e.v[1]) * n, n);
    for (std::size_t q = 0; q < lr.t.size(); ++q) {
      const double t = lr.t[q], w = lr.w[q] * L;
      const Point x = (1 - t) * a + t * b;
      Vec val = bd.eval(sys, pf, e.tag, x, e.nu);
      rs.bnorm = std::max(rs.bnorm, val.cwiseAbs().maxCoeff());
      Mat Jq;
      if (opt.closed) {
        const Mat& P = pf.P(e.tag, x);
        if (P.cwiseAbs().maxCoeff() > 0) {
          const Vec z = (1 - t) * za + t * zb;
          val += P * reduced_directional(sys, e.nu, z, x);
          if (jacobian) Jq = P * reduced_directional_jac(sys, e.nu, z, x);
        }
      }
      const double phi[2] = {1 - t, t};
      for (int k = 0; k < 2; ++k) {
        rs.r.segment(static_cast<Eigen::Index>(e.v[k]) * n, n) += w * phi[k] * val;
        if (jacobian && Jq.size())
          for (int kk = 0; kk < 2; ++kk)
            for (int i = 0; i < n; ++i)
              for (int j = 0; j < n; ++j) trips.emplace_back(e.v[k] * n + i, e.v[kk] * n + j, w * phi[k] * phi[kk] * Jq(i, j));
      }
    }
  }
  if (jacobian) {
    rs.J.resize(N, N);
    rs.J.setFromTriplets(trips.begin(), trips.end());
  }
  return rs;
}

void apply_e0_rows(const SymmetricSystem& sys, const SimplicialMesh& mesh, const ProjectionField& pf,
                   const Vec& coeffs, ResidualSystem& rs, bool jacobian) {
  const int n = sys.n();
  const int N = mesh.num_nodes();
  std::vector<std::vector<Vec>> e0(N);
  std::vector<Point> nus(N, Point::Zero());
  for (auto& e : mesh.boundary()) {
    const TagProjection& tp = pf.at(e.tag);
    if (tp.e0.empty()) continue;
    for (int k : e.v) {
      nus[k] += e.nu;
      for (auto& d : tp.e0) e0[k].push_back(d);
    }
  }
  bool any = false;
  for (auto& v : e0) any = any || !v.empty();
  if (!any) return;
  std::vector<Trip> rt, ct;
  Vec cvals = Vec::Zero(rs.r.size());
  for (int v = 0; v < N; ++v) {
    if (e0[v].empty()) {
      for (int j = 0; j < n; ++j) rt.emplace_back(v * n + j, v * n + j, 1.0);
      continue;
    }
    Mat E(n, static_cast<int>(e0[v].size()));
    for (int k = 0; k < E.cols(); ++k) E.col(k) = e0[v][k];
    Eigen::JacobiSVD<Mat> svd(E, Eigen::ComputeFullU);
    int rank = 0;
    for (int k = 0; k < svd.singularValues().size(); ++k)
      if (svd.singularValues()[k] > 1e-10) ++rank;
    const Mat U = svd.matrixU();
    const Mat keep = U.rightCols(n - rank);
    const Mat cons = U.leftCols(rank);
    for (int i = 0; i < n - rank; ++i)
      for (int j = 0; j < n; ++j) rt.emplace_back(v * n + i, v * n + j, keep(j, i));
    const Point nu = nus[v].normalized();
    const Vec z = coeffs.segment(static_cast<Eigen::Index>(v) * n, n);
    const Point x = mesh.nodes()[v];
    const Vec F = reduced_directional(sys, nu, z, x);
    const Mat JF = jacobian ? reduced_directional_jac(sys, nu, z, x) : Mat();
    for (int i = 0; i < rank; ++i) {
      const int row = v * n + (n - rank) + i;
      cvals[row] = cons.col(i).dot(F);
      if (jacobian) {
        const Vec gr = JF.transpose() * cons.col(i);
        for (int j = 0; j < n; ++j) ct.emplace_back(row, v * n + j, gr[j]);
      }
    }
  }
  SpMat Rk(rs.r.size(), rs.r.size());
  Rk.setFromTriplets(rt.begin(), rt.end());
  rs.r = Rk * rs.r + cvals;
  if (jacobian) {
    SpMat C(rs.r.size(), rs.r.size());
    C.setFromTriplets(ct.begin(), ct.end());
    rs.J = SpMat(Rk * rs.J) + C;
  }
}

Vec weak_residual(const SymmetricSystem& sys, const SimplicialMesh& mesh, const ProjectionField& pf,
                  const BoundaryData& bd, const Vec& coeffs, const TestSpace& tspace, double eps,
                  const DissipationSpec& diss, int quad_order) {
  AssemblyOptions opt;
  opt.quad_order = quad_order;
  opt.closed = false;
  const ResidualSystem rs = assemble_residual(sys, mesh, pf, bd, coeffs, eps, diss, false, opt);
  return tspace.restrict_functional(rs.r);
}

// ----------------------------------------------------------------- gamma

double rh_residual(const SymmetricSystem& sys, const Point& mu, const Vec& zm, const Vec& zp, const Point& x) {
  return (reduced_directional(sys, mu, zp, x) - reduced_directional(sys, mu, zm, x)).cwiseAbs().maxCoeff();
}

GammaQuadrature build_gamma_quadrature(const SymmetricSystem& sys, const SimplicialMesh& mesh,
                                       const DiscontinuitySet& gamma,
                                       const std::vector<std::vector<double>>& breaks, double tol_rh) {
  GammaQuadrature gq;
  const LineRule& lr = gauss3();
  for (std::size_t ci = 0; ci < gamma.chains.size(); ++ci) {
    const GammaChain& c = gamma.chains[ci];
    if (!c.has_traces()) throw Error(ErrorCode::MissingTraces, "chain " + std::to_string(ci));
    for (int s = 0; s <= c.num_segments(); ++s) {
      const Point mu = c.mu[std::min(s, c.num_segments() - 1)];
      const double r = rh_residual(sys, mu, c.zminus[s], c.zplus[s], c.points[s]);
      gq.max_rh = std::max(gq.max_rh, r);
      if (r > tol_rh)
        gq.warnings.push_back("chain " + std::to_string(ci) + " vertex " + std::to_string(s) +
                              ": Rankine-Hugoniot residual " + std::to_string(r));
    }
    for (int s = 0; s < c.num_segments(); ++s) {
      const Point A = c.points[s], B = c.points[s + 1];
      const Point d = B - A;
      const double L = d.norm();
      std::vector<double> ts{0.0, 1.0};
      for (int t : mesh.triangles_near(A.cwiseMin(B), A.cwiseMax(B))) {
        const auto& v = mesh.triangles()[t];
        for (int k = 0; k < 3; ++k) {
          const Point P = mesh.nodes()[v[k]], Q = mesh.nodes()[v[(k + 1) % 3]];
          const Point e = Q - P;
          const double den = d[0] * e[1] - d[1] * e[0];
          if (std::abs(den) < 1e-14 * L * e.norm()) continue;
          const Point w = P - A;
          const double tt = (w[0] * e[1] - w[1] * e[0]) / den;
          const double uu = (w[0] * d[1] - w[1] * d[0]) / den;
          if (tt > 0 && tt < 1 && uu >= -1e-12 && uu <= 1 + 1e-12) ts.push_back(tt);
        }
      }
      if (ci < breaks.size())
        for (double a : breaks[ci]) {
          const double tt = (a - c.alpha[s]) / L;
          if (tt > 0 && tt < 1) ts.push_back(tt);
        }
      std::sort(ts.begin(), ts.end());
      std::vector<double> u{ts[0]};
      for (double t : ts)
        if (t - u.back() > 1e-12) u.push_back(t);
      if (u.back() < 1.0) u.back() = 1.0;
      const Point tan = d / L;
      for (std::size_t i = 0; i + 1 < u.size(); ++i) {
        const double t0 = u[i], t1 = u[i + 1];
        const Point mid = A + 0.5 * (t0 + t1) * d;
        const int tri = mesh.locate(mid, nullptr, 1e-9);
        if (tri < 0) continue;
        for (std::size_t q = 0; q < lr.t.size(); ++q) {
          const double t = t0 + (t1 - t0) * lr.t[q];
          GammaPoint gp;
          gp.chain = static_cast<int>(ci);
          gp.seg = s;
          gp.tri = tri;
          gp.alpha = c.alpha[s] + t * L;
          gp.w = lr.w[q] * (t1 - t0) * L;
          gp.x = A + t * d;
          gp.tangent = tan;
          Vec zm, zp;
          c.traces_at(gp.alpha, zm, zp);
          gp.jump = reduced_directional(sys, tan, zp, gp.x) - reduced_directional(sys, tan, zm, gp.x);
          gq.pts.push_back(std::move(gp));
        }
      }
    }
  }
  return gq;
}

// ------------------------------------------------------ linear operators

std::vector<Vec> apply_R(const SymmetricSystem& sys, const SimplicialMesh& mesh, const StateField& z,
                         const Vec& theta, int quad_order) {
  const int n = sys.n();
  const TriRule& rule = tri_rule(quad_order);
  std::vector<Vec> out;
  out.reserve(static_cast<std::size_t>(mesh.num_triangles()) * rule.w.size());
  ReducedFlux f;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& v = mesh.triangles()[t];
    const auto g = mesh.hat_gradients(t);
    Mat grad = Mat::Zero(n, 2);
    for (int k = 0; k < 3; ++k) grad += theta.segment(static_cast<Eigen::Index>(v[k]) * n, n) * g[k].transpose();
    for (std::size_t q = 0; q < rule.w.size(); ++q) {
      const auto& l = rule.bary[q];
      const Point x = l[0] * mesh.nodes()[v[0]] + l[1] * mesh.nodes()[v[1]] + l[2] * mesh.nodes()[v[2]];
      reduced_flux(sys, z.eval(x, {&mesh, t, l}), x, true, f);
      Vec r = f.J[0] * grad.col(0) + f.J[1] * grad.col(1);
      if (f.has_zero_order) {
        Vec th = Vec::Zero(n);
        for (int k = 0; k < 3; ++k) th += l[k] * theta.segment(static_cast<Eigen::Index>(v[k]) * n, n);
        r += f.J0 * th;
      }
      out.push_back(r);
    }
  }
  return out;
}

SpMat jump_operator(const SimplicialMesh& mesh, const GammaQuadrature& gq, int n) {
  std::vector<Trip> trips;
  for (std::size_t p = 0; p < gq.pts.size(); ++p) {
    const GammaPoint& gp = gq.pts[p];
    const auto g = mesh.hat_gradients(gp.tri);
    const auto& v = mesh.triangles()[gp.tri];
    for (int k = 0; k < 3; ++k) {
      const double dt = g[k].dot(gp.tangent);
      for (int j = 0; j < n; ++j)
        if (gp.jump[j] * dt != 0) trips.emplace_back(static_cast<int>(p), v[k] * n + j, gp.jump[j] * dt);
    }
  }
  SpMat S(static_cast<Eigen::Index>(gq.pts.size()), static_cast<Eigen::Index>(mesh.num_nodes()) * n);
  S.setFromTriplets(trips.begin(), trips.end());
  return S;
}

std::vector<double> apply_S(const SimplicialMesh& mesh, const GammaQuadrature& gq, const Vec& theta, int n) {
  const Vec s = jump_operator(mesh, gq, n) * theta;
  return {s.data(), s.data() + s.size()};
}

HGram assemble_h_gram(const SymmetricSystem& sys, const SimplicialMesh& mesh, const StateField& z,
                      const GammaQuadrature& gq, int quad_order) {
  const int n = sys.n();
  const int nt = mesh.num_triangles();
  const TriRule& rule = tri_rule(quad_order);
  std::vector<Mat> blocks(nt);
  const int nchunks = (nt + kChunk - 1) / kChunk;
  parallel_chunks(nchunks, [&](int c) {
    ReducedFlux f;
    Mat B(n, 3 * n);
    for (int t = c * kChunk; t < std::min(nt, (c + 1) * kChunk); ++t) {
      const auto& v = mesh.triangles()[t];
      const auto g = mesh.hat_gradients(t);
      const double A = mesh.area(t);
      Mat& G = blocks[t];
      G = Mat::Zero(3 * n, 3 * n);
      for (std::size_t q = 0; q < rule.w.size(); ++q) {
        const auto& l = rule.bary[q];
        const Point x = l[0] * mesh.nodes()[v[0]] + l[1] * mesh.nodes()[v[1]] + l[2] * mesh.nodes()[v[2]];
        reduced_flux(sys, z.eval(x, {&mesh, t, l}), x, true, f);
        for (int k = 0; k < 3; ++k) {
          Mat blk = g[k][0] * f.J[0] + g[k][1] * f.J[1];
          if (f.has_zero_order) blk += l[k] * f.J0;
          B.middleCols(k * n, n) = blk;
        }
        G.noalias() += rule.w[q] * A * B.transpose() * B;
      }
    }
  });
  const Eigen::Index N = static_cast<Eigen::Index>(mesh.num_nodes()) * n;
  std::vector<Trip> trips;
  trips.reserve(static_cast<std::size_t>(nt) * 9 * n * n);
  for (int t = 0; t < nt; ++t) {
    const auto& v = mesh.triangles()[t];
    for (int k = 0; k < 3; ++k)
      for (int kk = 0; kk < 3; ++kk)
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) trips.emplace_back(v[k] * n + i, v[kk] * n + j, blocks[t](k * n + i, kk * n + j));
  }
  HGram G;
  G.volume.resize(N, N);
  G.volume.setFromTriplets(trips.begin(), trips.end());
  const SpMat S = jump_operator(mesh, gq, n);
  Vec w(static_cast<Eigen::Index>(gq.pts.size()));
  for (std::size_t p = 0; p < gq.pts.size(); ++p) w[static_cast<Eigen::Index>(p)] = gq.pts[p].w;
  G.jump = SpMat(S.transpose()) * w.asDiagonal() * S;
  return G;
}

SpMat mass_matrix(const SimplicialMesh& mesh, int n) {
  std::vector<Trip> trips;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& v = mesh.triangles()[t];
    const double A = mesh.area(t);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        for (int j = 0; j < n; ++j) trips.emplace_back(v[a] * n + j, v[b] * n + j, A / 12.0 * (a == b ? 2.0 : 1.0));
  }
  const Eigen::Index N = static_cast<Eigen::Index>(mesh.num_nodes()) * n;
  SpMat M(N, N);
  M.setFromTriplets(trips.begin(), trips.end());
  return M;
}

SpMat stiffness_matrix(const SimplicialMesh& mesh, int n) {
  std::vector<Trip> trips;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& v = mesh.triangles()[t];
    const auto g = mesh.hat_gradients(t);
    const double A = mesh.area(t);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        for (int j = 0; j < n; ++j) trips.emplace_back(v[a] * n + j, v[b] * n + j, A * g[a].dot(g[b]));
  }
  const Eigen::Index N = static_cast<Eigen::Index>(mesh.num_nodes()) * n;
  SpMat K(N, N);
  K.setFromTriplets(trips.begin(), trips.end());
  return K;
}

SpMat boundary_mass(const SimplicialMesh& mesh, const ProjectionField& pf, int n) {
  std::vector<Trip> trips;
  const LineRule& lr = gauss3();
  for (auto& e : mesh.boundary()) {
    const Point a = mesh.nodes()[e.v[0]], b = mesh.nodes()[e.v[1]];
    const double L = (b - a).norm();
    for (std::size_t q = 0; q < lr.t.size(); ++q) {
      const double t = lr.t[q];
      const Mat Q = Mat::Identity(n, n) - pf.P(e.tag, (1 - t) * a + t * b);
      const double phi[2] = {1 - t, t};
      for (int k = 0; k < 2; ++k)
        for (int kk = 0; kk < 2; ++kk)
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
              if (Q(i, j) != 0) trips.emplace_back(e.v[k] * n + i, e.v[kk] * n + j, lr.w[q] * L * phi[k] * phi[kk] * Q(i, j));
    }
  }
  const Eigen::Index N = static_cast<Eigen::Index>(mesh.num_nodes()) * n;
  SpMat M(N, N);
  M.setFromTriplets(trips.begin(), trips.end());
  return M;
}

}  // namespace conslaw
