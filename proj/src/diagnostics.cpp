#include "conslaw/diagnostics.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace conslaw {

using Trip = Eigen::Triplet<double>;

// ------------------------------------------------------------- PhiBasis

PhiBasis PhiBasis::make(const DiscontinuitySet& gamma, int per_chain, int n, double p) {
  if (per_chain < 2) throw Error(ErrorCode::Config, "phi resolution must be at least 2 intervals");
  if (!(p >= 2)) throw Error(ErrorCode::Config, "phi norm exponent must be at least 2");
  PhiBasis b;
  b.n = n;
  b.p = p;
  for (int c = 0; c < static_cast<int>(gamma.chains.size()); ++c) {
    const double L = gamma.chains[c].length();
    std::vector<double> br(per_chain + 1);
    for (int k = 0; k <= per_chain; ++k) br[k] = L * k / per_chain;
    b.breaks.push_back(br);
    for (int k = 1; k < per_chain; ++k)
      for (int j = 0; j < n; ++j) b.fns.push_back({c, k, j});
  }
  return b;
}

namespace {

// Hat value and slope of breakpoint node k at arc length a.
void hat(const std::vector<double>& br, int k, double a, double& v, double& s) {
  v = s = 0;
  if (k > 0 && a >= br[k - 1] && a < br[k]) {
    const double h = br[k] - br[k - 1];
    v = (a - br[k - 1]) / h;
    s = 1 / h;
  } else if (k + 1 < static_cast<int>(br.size()) && a >= br[k] && a <= br[k + 1]) {
    const double h = br[k + 1] - br[k];
    v = (br[k + 1] - a) / h;
    s = -1 / h;
  }
}

}  // namespace

Vec PhiBasis::value(const Vec& c, int chain, double a) const {
  Vec out = Vec::Zero(n);
  for (int i = 0; i < size(); ++i) {
    if (fns[i].chain != chain) continue;
    double v, s;
    hat(breaks[chain], fns[i].node, a, v, s);
    out[fns[i].comp] += c[i] * v;
  }
  return out;
}

Vec PhiBasis::slope(const Vec& c, int chain, double a) const {
  Vec out = Vec::Zero(n);
  for (int i = 0; i < size(); ++i) {
    if (fns[i].chain != chain) continue;
    double v, s;
    hat(breaks[chain], fns[i].node, a, v, s);
    out[fns[i].comp] += c[i] * s;
  }
  return out;
}

double PhiBasis::norm(const Vec& c, double q) const {
  const LineRule& g = gauss3();
  double total = 0;
  for (int ch = 0; ch < static_cast<int>(breaks.size()); ++ch) {
    const auto& br = breaks[ch];
    for (size_t k = 0; k + 1 < br.size(); ++k) {
      const double h = br[k + 1] - br[k];
      const Vec d = slope(c, ch, 0.5 * (br[k] + br[k + 1]));
      for (size_t i = 0; i < g.t.size(); ++i) {
        const Vec v = value(c, ch, br[k] + g.t[i] * h);
        total += g.w[i] * h * (std::pow(v.norm(), q) + std::pow(d.norm(), q));
      }
    }
  }
  return std::pow(total, 1.0 / q);
}

Mat PhiBasis::gram2() const {
  const int d = size();
  Mat G = Mat::Zero(d, d);
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) {
      const Fn &fa = fns[a], &fb = fns[b];
      if (fa.chain != fb.chain || fa.comp != fb.comp) continue;
      const auto& br = breaks[fa.chain];
      const int k = fa.node;
      if (fa.node == fb.node) {
        const double h0 = br[k] - br[k - 1], h1 = br[k + 1] - br[k];
        G(a, b) = (h0 + h1) / 3 + 1 / h0 + 1 / h1;
      } else if (std::abs(fa.node - fb.node) == 1) {
        const int lo = std::min(fa.node, fb.node);
        const double h = br[lo + 1] - br[lo];
        G(a, b) = h / 6 - 1 / h;
      }
    }
  return G;
}

std::vector<int> PhiBasis::on_chains(const std::set<int>& chains) const {
  std::vector<int> idx;
  for (int i = 0; i < size(); ++i)
    if (chains.empty() || chains.count(fns[i].chain)) idx.push_back(i);
  return idx;
}

// ------------------------------------------------------------- entropy

namespace {

std::vector<std::array<std::array<double, 3>, 3>> subdivide(int L) {
  std::vector<std::array<std::array<double, 3>, 3>> cur{{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}}};
  for (int l = 0; l < L; ++l) {
    std::vector<std::array<std::array<double, 3>, 3>> nxt;
    for (auto& s : cur) {
      auto mid = [&](int a, int b) {
        std::array<double, 3> m;
        for (int k = 0; k < 3; ++k) m[k] = 0.5 * (s[a][k] + s[b][k]);
        return m;
      };
      const auto m01 = mid(0, 1), m12 = mid(1, 2), m02 = mid(0, 2);
      nxt.push_back({s[0], m01, m02});
      nxt.push_back({m01, s[1], m12});
      nxt.push_back({m02, m12, s[2]});
      nxt.push_back({m01, m12, m02});
    }
    cur = std::move(nxt);
  }
  return cur;
}

}  // namespace

EntropyReport entropy_production(const SymmetricSystem& sys, const StateField& z, const DiscontinuitySet& gamma,
                                 const SimplicialMesh& mesh) {
  EntropyReport rep;
  const LineRule& g = gauss3();
  for (const auto& c : gamma.chains) {
    if (!c.has_traces()) throw Error(ErrorCode::MissingTraces, "chain without traces");
    ChainEntropy ce;
    ce.length = c.length();
    ce.max_pointwise = -std::numeric_limits<double>::infinity();
    for (int s = 0; s < c.num_segments(); ++s) {
      const double L = c.alpha[s + 1] - c.alpha[s];
      for (size_t q = 0; q < g.t.size(); ++q) {
        const double a = c.alpha[s] + g.t[q] * L;
        const Point x = c.point_at(a);
        Vec zm, zp;
        c.traces_at(a, zm, zp);
        const double pr = c.mu[s].dot(reduced_entropy_flux(sys, zp, x) - reduced_entropy_flux(sys, zm, x));
        ce.integrated += g.w[q] * L * pr;
        ce.max_pointwise = std::max(ce.max_pointwise, pr);
        ce.max_jump = std::max(ce.max_jump, (zp - zm).cwiseAbs().maxCoeff());
      }
    }
    if (c.num_segments() == 0) ce.max_pointwise = 0;
    ce.per_length = ce.length > 0 ? ce.integrated / ce.length : 0;
    rep.chains.push_back(ce);
  }

  // Weak form against nonnegative hats.
  const int N = mesh.num_nodes();
  Vec val = Vec::Zero(N);
  const TriRule& rule = tri_rule(4);
  static const auto subs = subdivide(2);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& v = mesh.triangles()[t];
    const auto gr = mesh.hat_gradients(t);
    const double A = mesh.area(t) / subs.size();
    for (const auto& s : subs)
      for (size_t q = 0; q < rule.w.size(); ++q) {
        EvalHint hint{&mesh, t, {}};
        for (int k = 0; k < 3; ++k)
          hint.bary[k] = rule.bary[q][0] * s[0][k] + rule.bary[q][1] * s[1][k] + rule.bary[q][2] * s[2][k];
        const Point x = hint.bary[0] * mesh.nodes()[v[0]] + hint.bary[1] * mesh.nodes()[v[1]] +
                        hint.bary[2] * mesh.nodes()[v[2]];
        const Vec zx = z.eval(x, hint);
        const Point Q = reduced_entropy_flux(sys, zx, x);
        double q0 = 0;
        if (sys.reduced_form() == ReducedForm::SelfSimilar) q0 = -2 * sys.entropy_flux(zx)[2];
        for (int k = 0; k < 3; ++k) val[v[k]] += rule.w[q] * A * (-gr[k].dot(Q) + hint.bary[k] * q0);
      }
  }
  for (auto& e : mesh.boundary()) {
    const Point a = mesh.nodes()[e.v[0]], b = mesh.nodes()[e.v[1]];
    const double L = (b - a).norm();
    for (size_t q = 0; q < g.t.size(); ++q) {
      const Point x = (1 - g.t[q]) * a + g.t[q] * b;
      const double f = e.nu.dot(reduced_entropy_flux(sys, z.eval(x), x));
      val[e.v[0]] += g.w[q] * L * (1 - g.t[q]) * f;
      val[e.v[1]] += g.w[q] * L * g.t[q] * f;
    }
  }
  rep.weak_max = N ? val.maxCoeff() : 0.0;
  return rep;
}

// ---------------------------------------------------------- GramSolver

GramSolver::GramSolver(const TestSpace& ts, const SpMat& G_full) : ts_(&ts) {
  const SpMat K = ts.project_sparse(G_full);
  if (K.rows() == 0) {
    singular_ = ts.extra.cols() > 0;
    return;
  }
  ldlt_.compute(K);
  if (ldlt_.info() != Eigen::Success) {
    singular_ = true;
    return;
  }
  const Vec D = ldlt_.vectorD();
  const double dmax = D.cwiseAbs().maxCoeff();
  const double dmin = D.minCoeff();
  pivot_ratio_ = dmax > 0 ? dmin / dmax : 0;
  if (!(dmax > 0) || dmin <= 1e-13 * dmax) {
    singular_ = true;
    return;
  }
  if (ts.extra.cols() > 0) {
    const Mat GE = G_full * ts.extra;
    B_ = ts.T.transpose() * GE;
    C_ = ts.extra.transpose() * GE;
    KinvB_ = ldlt_.solve(B_);
    const Mat S = C_ - B_.transpose() * KinvB_;
    schur_.compute(S);
    const double smax = S.diagonal().cwiseAbs().maxCoeff();
    if (schur_.info() != Eigen::Success || schur_.vectorD().minCoeff() <= 1e-12 * std::max(smax, 1e-300))
      singular_ = true;
  }
}

Vec GramSolver::solve(const Vec& rhs) const {
  if (singular_) throw Error(ErrorCode::SingularGram, "Gram matrix is singular on the test space");
  const int k = ts_->local_dim();
  const int e = static_cast<int>(ts_->extra.cols());
  Vec out(k + e);
  if (e == 0) {
    out = ldlt_.solve(rhs);
    return out;
  }
  const Vec y = ldlt_.solve(rhs.head(k));
  const Vec x2 = schur_.solve(rhs.tail(e) - B_.transpose() * y);
  out.head(k) = y - KinvB_ * x2;
  out.tail(e) = x2;
  return out;
}

Mat GramSolver::solve(const Mat& rhs) const {
  Mat out(rhs.rows(), rhs.cols());
  for (Eigen::Index c = 0; c < rhs.cols(); ++c) out.col(c) = solve(Vec(rhs.col(c)));
  return out;
}

// -------------------------------------------------- linearized problem

LinearizedProblem LinearizedProblem::build(const SymmetricSystem& sys, const SimplicialMesh& mesh,
                                           const StateField& z, const DiscontinuitySet& gamma, int phi_per_chain,
                                           double p, double tol_rh, int quad_order) {
  LinearizedProblem lp;
  lp.sys = &sys;
  lp.mesh = &mesh;
  lp.n = sys.n();
  lp.phi = PhiBasis::make(gamma, phi_per_chain, lp.n, p);
  lp.gq = build_gamma_quadrature(sys, mesh, gamma, lp.phi.breaks, tol_rh);
  lp.gram = assemble_h_gram(sys, mesh, z, lp.gq, quad_order);
  lp.S = jump_operator(mesh, lp.gq, lp.n);
  lp.w.resize(static_cast<Eigen::Index>(lp.gq.pts.size()));
  lp.Sphi = Mat::Zero(static_cast<Eigen::Index>(lp.gq.pts.size()), lp.phi.size());
  for (size_t q = 0; q < lp.gq.pts.size(); ++q) {
    const GammaPoint& gp = lp.gq.pts[q];
    lp.w[static_cast<Eigen::Index>(q)] = gp.w;
    for (int i = 0; i < lp.phi.size(); ++i) {
      const auto& f = lp.phi.fns[i];
      if (f.chain != gp.chain) continue;
      double v, s;
      hat(lp.phi.breaks[f.chain], f.node, gp.alpha, v, s);
      lp.Sphi(static_cast<Eigen::Index>(q), i) = gp.jump[f.comp] * s;
    }
  }
  return lp;
}

Mat LinearizedProblem::phi_load() const { return SpMat(S.transpose()) * (w.asDiagonal() * Sphi); }

SpMat LinearizedProblem::gamma_h1_gram() const {
  std::vector<Trip> vt, dt;
  for (size_t q = 0; q < gq.pts.size(); ++q) {
    const GammaPoint& gp = gq.pts[q];
    const auto& v = mesh->triangles()[gp.tri];
    const auto g = mesh->hat_gradients(gp.tri);
    // Barycentric coordinates of the point in its triangle.
    const Point a = mesh->nodes()[v[0]], b = mesh->nodes()[v[1]], c = mesh->nodes()[v[2]];
    const double det = (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
    const double l1 = ((gp.x - a).x() * (c - a).y() - (gp.x - a).y() * (c - a).x()) / det;
    const double l2 = ((b - a).x() * (gp.x - a).y() - (b - a).y() * (gp.x - a).x()) / det;
    const double l[3] = {1 - l1 - l2, l1, l2};
    for (int j = 0; j < n; ++j) {
      const int row = static_cast<int>(q) * n + j;
      for (int k = 0; k < 3; ++k) {
        vt.emplace_back(row, v[k] * n + j, l[k]);
        dt.emplace_back(row, v[k] * n + j, g[k].dot(gp.tangent));
      }
    }
  }
  const Eigen::Index rows = static_cast<Eigen::Index>(gq.pts.size()) * n;
  const Eigen::Index N = static_cast<Eigen::Index>(mesh->num_nodes()) * n;
  SpMat V(rows, N), Dm(rows, N);
  V.setFromTriplets(vt.begin(), vt.end());
  Dm.setFromTriplets(dt.begin(), dt.end());
  Vec wn(rows);
  for (size_t q = 0; q < gq.pts.size(); ++q)
    for (int j = 0; j < n; ++j) wn[static_cast<Eigen::Index>(q) * n + j] = gq.pts[q].w;
  SpMat out = SpMat(V.transpose()) * wn.asDiagonal() * V + SpMat(Dm.transpose()) * wn.asDiagonal() * Dm;
  return out;
}

RieszResult riesz_solve(const LinearizedProblem& lp, const TestSpace& ts, const GramSolver& gs, const StateField& z,
                        const Vec& bdot_load_full, const Vec& phi) {
  Vec load = bdot_load_full;
  if (lp.phi.size() > 0 && phi.size() > 0) load += lp.phi_load() * phi;
  RieszResult r;
  r.zeta = gs.solve(ts.restrict_functional(load));
  r.zeta_full = ts.expand(r.zeta);
  r.zdot = apply_R(*lp.sys, *lp.mesh, z, r.zeta_full);
  r.sigma = lp.S * r.zeta_full;
  if (lp.phi.size() > 0 && phi.size() > 0) r.sigma -= lp.Sphi * phi;
  return r;
}

Mat m0_form(const LinearizedProblem& lp, const TestSpace& ts, const GramSolver& gs) {
  const Mat C = lp.Sphi.transpose() * lp.w.asDiagonal() * lp.Sphi;
  if (lp.phi.size() == 0) return C;
  Mat B(ts.dim(), lp.phi.size());
  const Mat L = lp.phi_load();
  for (int i = 0; i < lp.phi.size(); ++i) B.col(i) = ts.restrict_functional(L.col(i));
  const Mat X = gs.solve(B);
  Mat M = C - B.transpose() * X;
  M = 0.5 * (M + M.transpose());
  return M;
}

double m0_value(const LinearizedProblem& lp, const TestSpace& ts, const GramSolver& gs, const Vec& phi) {
  if (phi.size() == 0) return 0;
  return phi.dot(m0_form(lp, ts, gs) * phi);
}

QResult q_from_form(const Mat& M, const PhiBasis& phi, const std::vector<int>& idx_in, double p) {
  QResult r;
  r.p = p;
  std::vector<int> idx = idx_in;
  if (idx.empty())
    for (int i = 0; i < phi.size(); ++i) idx.push_back(i);
  r.basis_size = static_cast<int>(idx.size());
  r.phi = Vec::Zero(phi.size());
  if (idx.empty()) return r;
  const int d = static_cast<int>(idx.size());
  const Mat N2 = phi.gram2();
  Mat Ms(d, d), Ns(d, d);
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) {
      Ms(a, b) = M(idx[a], idx[b]);
      Ns(a, b) = N2(idx[a], idx[b]);
    }
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(Ms, Ns);
  Vec c = es.eigenvectors().col(d - 1);
  double lam = std::max(0.0, es.eigenvalues()[d - 1]);
  auto embed = [&](const Vec& cs) {
    Vec full = Vec::Zero(phi.size());
    for (int a = 0; a < d; ++a) full[idx[a]] = cs[a];
    return full;
  };
  if (p <= 2.0) {
    Vec full = embed(c);
    r.phi = full / phi.norm(full, 2.0);
    r.value = lam;
    return r;
  }
  auto ratio = [&](const Vec& cs) {
    const Vec full = embed(cs);
    const double nn = phi.norm(full, p);
    return nn > 0 ? cs.dot(Ms * cs) / (nn * nn) : 0.0;
  };
  // Largest p = 2 eigenvector seeds the coordinate ascent.
  c /= phi.norm(embed(c), p);
  double best = ratio(c);
  std::vector<double> step(d, 0.25 * c.cwiseAbs().maxCoeff());
  for (int sweep = 0; sweep < 200; ++sweep) {
    bool any = false;
    double smax = 0;
    for (int a = 0; a < d; ++a) {
      for (double sg : {1.0, -1.0}) {
        Vec t = c;
        t[a] += sg * step[a];
        const double v = ratio(t);
        if (v > best * (1 + 1e-14)) {
          best = v;
          c = t;
          any = true;
          step[a] *= 1.5;
          break;
        }
        if (sg < 0) step[a] *= 0.5;
      }
      smax = std::max(smax, step[a]);
    }
    c /= phi.norm(embed(c), p);
    for (auto& s : step) s = std::min(s, 1.0);
    if (!any && smax < 1e-7 * c.cwiseAbs().maxCoeff()) break;
  }
  r.phi = embed(c);
  r.value = std::max(0.0, best);
  return r;
}

QResult q0_estimate(const LinearizedProblem& lp, const TestSpace& ts, const GramSolver& gs) {
  if (lp.phi.size() == 0) {
    QResult r;
    r.p = lp.phi.p;
    return r;
  }
  return q_from_form(m0_form(lp, ts, gs), lp.phi, {}, lp.phi.p);
}

QkResult qk_per_component(const LinearizedProblem& lp, const TestSpace& ts, const GramSolver& gs) {
  QkResult out;
  if (lp.phi.size() == 0) {
    out.holds = true;
    return out;
  }
  const Mat M = m0_form(lp, ts, gs);
  const double p = lp.phi.p;
  const QResult q0 = q_from_form(M, lp.phi, {}, p);
  out.q0 = q0.value;
  const int K = static_cast<int>(lp.phi.breaks.size());
  double sum = 0;
  for (int k = 0; k < K; ++k) {
    const auto idx = lp.phi.on_chains({k});
    QResult qk = q_from_form(M, lp.phi, idx, p);
    // The restriction of the Q0 maximizer is another admissible candidate.
    Vec restricted = Vec::Zero(lp.phi.size());
    for (int i : idx) restricted[i] = q0.phi[i];
    const double nn = lp.phi.norm(restricted, p);
    if (nn > 0) qk.value = std::max(qk.value, restricted.dot(M * restricted) / (nn * nn));
    out.qk.push_back(qk.value);
    sum += qk.value;
  }
  out.bound = std::pow(static_cast<double>(K), (p - 2) / p) * sum;
  out.holds = out.q0 <= out.bound + 1e-9;
  return out;
}

QResult q_regularized(const LinearizedProblem& lp, const TestSpace& ts, double eps_reg,
                      const std::set<int>& gamma_subset) {
  if (eps_reg < 0) throw Error(ErrorCode::Config, "eps_reg must be nonnegative");
  SpMat G = lp.gram.total();
  if (eps_reg > 0) {
    const SpMat Z = mass_matrix(*lp.mesh, lp.n) + stiffness_matrix(*lp.mesh, lp.n) + lp.gamma_h1_gram();
    G = G + eps_reg * Z;
  }
  GramSolver gs(ts, G);
  if (lp.phi.size() == 0) {
    QResult r;
    r.p = lp.phi.p;
    return r;
  }
  return q_from_form(m0_form(lp, ts, gs), lp.phi, lp.phi.on_chains(gamma_subset), lp.phi.p);
}

// ------------------------------------------------- stability and kernel

double stability_c1(const SymmetricSystem& sys, const SimplicialMesh& mesh, const StateField& z,
                    const DiscontinuitySet& gamma, const ProjectionField& pf, double tol_rh) {
  const int n = sys.n();
  const GammaQuadrature gq = build_gamma_quadrature(sys, mesh, gamma, {}, tol_rh);
  const HGram hg = assemble_h_gram(sys, mesh, z, gq);
  const TestSpace ts = make_test_space(mesh, pf, Constraint::KerP, true);
  const SpMat K = ts.project_sparse(hg.total());
  const SpMat Mb = ts.project_sparse(boundary_mass(mesh, pf, n));
  std::vector<int> bset, iset;
  for (int c = 0; c < ts.local_dim(); ++c) (Mb.coeff(c, c) > 0 ? bset : iset).push_back(c);
  if (bset.empty()) return 0.0;
  auto sub = [](const SpMat& A, const std::vector<int>& r, const std::vector<int>& c) {
    std::vector<int> cm(A.cols(), -1), rm(A.rows(), -1);
    for (size_t i = 0; i < r.size(); ++i) rm[r[i]] = static_cast<int>(i);
    for (size_t i = 0; i < c.size(); ++i) cm[c[i]] = static_cast<int>(i);
    std::vector<Trip> t;
    for (int k = 0; k < A.outerSize(); ++k)
      for (SpMat::InnerIterator it(A, k); it; ++it)
        if (rm[it.row()] >= 0 && cm[it.col()] >= 0) t.emplace_back(rm[it.row()], cm[it.col()], it.value());
    SpMat out(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(c.size()));
    out.setFromTriplets(t.begin(), t.end());
    return out;
  };
  Mat S = Mat(sub(K, bset, bset));
  if (!iset.empty()) {
    const SpMat Kii = sub(K, iset, iset);
    Eigen::SimplicialLDLT<SpMat> ldlt(Kii);
    if (ldlt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
    const Vec D = ldlt.vectorD();
    if (D.minCoeff() <= 1e-13 * D.cwiseAbs().maxCoeff()) return std::numeric_limits<double>::infinity();
    const Mat Kib = Mat(sub(K, iset, bset));
    S -= Kib.transpose() * ldlt.solve(Kib);
  }
  S = 0.5 * (S + S.transpose());
  const Mat Mbb = Mat(sub(Mb, bset, bset));
  Eigen::LLT<Mat> llt(S);
  if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(Mbb, S, Eigen::EigenvaluesOnly);
  const double lmax = es.eigenvalues().maxCoeff();
  if (lmax > 1e15) return std::numeric_limits<double>::infinity();
  return std::sqrt(std::max(0.0, lmax));
}

StabilityReport stability_constant(const SymmetricSystem& sys, const StateField& z, const DiscontinuitySet& gamma,
                                   const ProjectionField& pf, const std::vector<const SimplicialMesh*>& meshes,
                                   double growth_limit) {
  StabilityReport r;
  for (auto* m : meshes) {
    r.h.push_back(m->h());
    r.c1.push_back(stability_c1(sys, *m, z, gamma, pf));
  }
  r.bounded = true;
  for (size_t k = 0; k + 1 < r.c1.size(); ++k) {
    double ratio;
    if (r.c1[k] == 0 && r.c1[k + 1] == 0)
      ratio = 1.0;
    else
      ratio = r.c1[k + 1] / r.c1[k];
    if (std::isinf(r.c1[k + 1])) ratio = std::numeric_limits<double>::infinity();
    r.ratios.push_back(ratio);
    if (!(ratio < growth_limit)) r.bounded = false;
  }
  for (double c : r.c1)
    if (std::isinf(c)) r.bounded = false;
  return r;
}

double smallest_generalized_eigenvalue(const SpMat& A, const SpMat& B) {
  const Eigen::Index d = A.rows();
  if (d == 0) return std::numeric_limits<double>::infinity();
  if (d <= 200) {
    Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(Mat(A), Mat(B), Eigen::EigenvaluesOnly);
    return std::max(0.0, es.eigenvalues().minCoeff());
  }
  const double trA = A.diagonal().sum(), trB = B.diagonal().sum();
  const double tau = std::max(1e-8 * trA / trB, 1e-14);
  SpMat Sh = A + tau * B;
  Eigen::SimplicialLDLT<SpMat> ldlt(Sh);
  if (ldlt.info() != Eigen::Success) throw Error(ErrorCode::SingularGram, "shifted factorization failed");
  std::mt19937_64 rng(12345);
  std::normal_distribution<double> N01;
  Vec v(d);
  for (Eigen::Index i = 0; i < d; ++i) v[i] = N01(rng);
  const int m = static_cast<int>(std::min<Eigen::Index>(d, 80));
  double theta = 0;
  for (int restart = 0; restart < 12; ++restart) {
    std::vector<Vec> V;
    std::vector<double> alpha, beta;
    v /= std::sqrt(v.dot(B * v));
    V.push_back(v);
    double bnext = 0;
    for (int j = 0; j < m; ++j) {
      Vec w = ldlt.solve(B * V[j]);
      const double a = V[j].dot(B * w);
      alpha.push_back(a);
      for (int pass = 0; pass < 2; ++pass)
        for (auto& u : V) w -= u.dot(B * w) * u;
      bnext = std::sqrt(std::max(0.0, w.dot(B * w)));
      if (j + 1 == m || bnext < 1e-14 * std::abs(a)) break;
      beta.push_back(bnext);
      V.push_back(w / bnext);
    }
    const int k = static_cast<int>(alpha.size());
    Mat T = Mat::Zero(k, k);
    for (int i = 0; i < k; ++i) {
      T(i, i) = alpha[i];
      if (i + 1 < k) T(i, i + 1) = T(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(T);
    theta = es.eigenvalues()[k - 1];
    const Vec s = es.eigenvectors().col(k - 1);
    const double resid = std::abs(bnext * s[k - 1]);
    Vec x = Vec::Zero(d);
    for (int i = 0; i < k; ++i) x += s[i] * V[i];
    v = x;
    if (resid <= 1e-10 * std::abs(theta) || k == d) break;
  }
  return std::max(0.0, 1.0 / theta - tau);
}

double kernel_sigma_min(const SymmetricSystem& sys, const SimplicialMesh& mesh, const StateField& z,
                        const DiscontinuitySet& gamma, double tol_rh) {
  const int n = sys.n();
  ProjectionField dummy(n);
  const GammaQuadrature gq = build_gamma_quadrature(sys, mesh, gamma, {}, tol_rh);
  const HGram hg = assemble_h_gram(sys, mesh, z, gq);
  for (auto& tag : mesh.tags()) dummy.set(tag, {Mat::Identity(n, n), {}, {}});
  const TestSpace ts = make_test_space(mesh, dummy, Constraint::ZeroTrace, false);
  return smallest_generalized_eigenvalue(ts.project_sparse(hg.total()), ts.project_sparse(mass_matrix(mesh, n)));
}

// ---------------------------------------------------------- enrichment

EnrichResult enrich_projection(const LinearizedProblem& lp, const ProjectionField& pf, const TestSpace& ts) {
  EnrichResult er;
  const SpMat G = lp.gram.total();
  GramSolver gs(ts, G);
  const QResult before = q0_estimate(lp, ts, gs);
  er.q0_before = before.value;
  if (!(before.value > 1e-12)) throw Error(ErrorCode::NoInadmissibility, "q0 vanishes, nothing to enrich");
  const Mat L = lp.phi_load();
  const Vec load = L * before.phi;
  const Vec zp = gs.solve(ts.restrict_functional(load));
  er.zeta_prime_full = ts.expand(zp);

  const TestSpace tc = make_test_space(*lp.mesh, pf, Constraint::KerIminusP, false);
  GramSolver gc(tc, G);
  const Vec f = G * er.zeta_prime_full - load;
  er.xi_full = tc.expand(gc.solve(tc.restrict_functional(f)));

  er.enlarged = ts;
  const Eigen::Index k = ts.extra.cols();
  er.enlarged.extra.conservativeResize(ts.extra.rows(), k + 1);
  er.enlarged.extra.col(k) = er.xi_full - er.zeta_prime_full;
  GramSolver ge(er.enlarged, G);
  er.q0_after = q0_estimate(lp, er.enlarged, ge).value;

  const int n = lp.n;
  const LineRule& g = gauss3();
  for (auto& e : lp.mesh->boundary()) {
    const Point a = lp.mesh->nodes()[e.v[0]], b = lp.mesh->nodes()[e.v[1]];
    const double len = (b - a).norm();
    const Vec x0 = er.xi_full.segment(static_cast<Eigen::Index>(e.v[0]) * n, n);
    const Vec x1 = er.xi_full.segment(static_cast<Eigen::Index>(e.v[1]) * n, n);
    double m = 0;
    for (size_t q = 0; q < g.t.size(); ++q) m += g.w[q] * len * ((1 - g.t[q]) * x0 + g.t[q] * x1).squaredNorm();
    er.xi_mass[e.tag] += m;
  }
  return er;
}

// ------------------------------------------------------------- report

DiagnosticsReport run_diagnostics(const SymmetricSystem& sys, const SimplicialMesh& mesh, const StateField& z,
                                  const DiscontinuitySet& gamma, const PolygonDomain& domain,
                                  const ProjectionField& pf, const DiagnosticsOptions& opt, std::uint64_t seed) {
  DiagnosticsReport rep;
  bool rh_bad = false;
  for (const auto& c : gamma.chains) {
    if (!c.has_traces()) throw Error(ErrorCode::MissingTraces, "chain without traces");
    double mx = 0;
    int bad = 0;
    const int np = static_cast<int>(c.points.size());
    for (int i = 0; i < np; ++i) {
      Point mu(0, 0);
      if (i > 0) mu += c.mu[i - 1];
      if (i + 1 < np) mu += c.mu[i];
      mu.normalize();
      const double r = rh_residual(sys, mu, c.zminus[i], c.zplus[i], c.points[i]);
      mx = std::max(mx, r);
      if (r > opt.tol_rh) ++bad;
    }
    rep.rh_max.push_back(mx);
    rep.rh_bad_fraction.push_back(np ? static_cast<double>(bad) / np : 0.0);
    if (np && static_cast<double>(bad) / np > opt.rh_fraction) rh_bad = true;
  }

  rep.entropy = entropy_production(sys, z, gamma, mesh);
  double max_jump = 0;
  for (auto& ce : rep.entropy.chains) max_jump = std::max(max_jump, ce.max_jump);
  rep.tol_entropy = opt.entropy_factor * max_jump * max_jump * max_jump;
  bool entropy_bad = false;
  for (auto& ce : rep.entropy.chains)
    if (ce.per_length > rep.tol_entropy) entropy_bad = true;

  const LinearizedProblem lp = LinearizedProblem::build(sys, mesh, z, gamma, opt.phi_per_chain, opt.p, 1e300);
  rep.warnings = lp.gq.warnings;
  const TestSpace ts = make_test_space(mesh, pf, Constraint::KerP, true);
  GramSolver gs(ts, lp.gram.total());
  rep.singular_gram = gs.singular();
  if (!rep.singular_gram) {
    rep.q0 = q0_estimate(lp, ts, gs);
    rep.qk = qk_per_component(lp, ts, gs);
    if (opt.enrichment && rep.q0.value > 1e-12) rep.enrichment = enrich_projection(lp, pf, ts);
  } else {
    rep.warnings.push_back("Gram singular on the test space; Q diagnostics skipped");
  }

  std::vector<double> hs = opt.stability_h;
  if (hs.empty()) hs = {4 * mesh.h(), 2 * mesh.h()};
  std::vector<SimplicialMesh> extra;
  extra.reserve(hs.size());
  std::vector<const SimplicialMesh*> levels;
  for (double h : hs) {
    if (std::abs(h - mesh.h()) <= 1e-9 * h) continue;
    extra.push_back(triangulate(domain, h, seed));
  }
  for (auto& m : extra) levels.push_back(&m);
  levels.push_back(&mesh);
  std::sort(levels.begin(), levels.end(), [](auto* a, auto* b) { return a->h() > b->h(); });
  rep.stability = stability_constant(sys, z, gamma, pf, levels, opt.growth_limit);
  for (auto* m : levels) rep.sigma_min.push_back(kernel_sigma_min(sys, *m, z, gamma));
  for (double s : rep.sigma_min)
    if (s < opt.sigma_floor) rep.singular_gram = true;

  if (rh_bad)
    rep.exit_code = 3;
  else if (entropy_bad)
    rep.exit_code = 2;
  else if (rep.singular_gram)
    rep.exit_code = 5;
  else if (!rep.stability.bounded)
    rep.exit_code = 4;
  return rep;
}

}  // namespace conslaw
