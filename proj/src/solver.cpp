#include "conslaw/solver.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace conslaw {

// ----------------------------------------------------------------- params

void SchemeParams::validate() const {
  if (!(eps0 > 0)) throw Error(ErrorCode::InvalidSchedule, "eps0 must be positive");
  if (!(eps_factor > 0 && eps_factor < 1)) throw Error(ErrorCode::InvalidSchedule, "eps_factor must lie in (0,1)");
  if (eps_min < 0 || eps_min_h_factor < 0) throw Error(ErrorCode::InvalidSchedule, "negative eps floor");
  if (h_levels.empty()) throw Error(ErrorCode::InvalidSchedule, "no h levels");
  for (size_t k = 0; k < h_levels.size(); ++k) {
    if (!(h_levels[k] > 0)) throw Error(ErrorCode::InvalidSchedule, "h levels must be positive");
    if (k > 0 && !(h_levels[k] < h_levels[k - 1]))
      throw Error(ErrorCode::InvalidSchedule, "h levels must be strictly decreasing");
    if (eps_floor(h_levels[k]) > eps0)
      throw Error(ErrorCode::InvalidSchedule, "eps floor exceeds eps0");
  }
  if (newton_max_iter < 1 || !(newton_tol > 0)) throw Error(ErrorCode::InvalidSchedule, "bad Newton settings");
}

double SchemeParams::eps_floor(double h) const {
  const double f = std::max(eps_min, eps_min_h_factor * h);
  return f > 0 ? f : eps0;
}

std::vector<double> SchemeParams::eps_schedule(double start, double h) const {
  const double target = eps_floor(h);
  std::vector<double> out;
  double e = std::max(start, target);
  out.push_back(e);
  while (e > target * (1 + 1e-12)) {
    e = std::max(e * eps_factor, target);
    out.push_back(e);
  }
  return out;
}

// ----------------------------------------------------------------- Newton

namespace {

double sup_norm(const Vec& r) { return r.size() ? r.cwiseAbs().maxCoeff() : 0.0; }

bool try_residual(const SymmetricSystem& sys, const SimplicialMesh& mesh, const ProjectionField& pf,
                  const BoundaryData& bd, const Vec& z, double eps, const DissipationSpec& diss,
                  const AssemblyOptions& opt, bool jac, ResidualSystem& out) {
  try {
    out = assemble_residual(sys, mesh, pf, bd, z, eps, diss, jac, opt);
    apply_e0_rows(sys, mesh, pf, z, out, jac);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::OutOfDomain) return false;
    throw;
  }
  return out.r.allFinite();
}

}  // namespace

ViscousResult solve_viscous(const SymmetricSystem& sys, const SimplicialMesh& mesh, const ProjectionField& pf,
                            const BoundaryData& bd, double eps, const DissipationSpec& diss, const Vec& init,
                            const SchemeParams& params) {
  if (!(eps > 0)) throw Error(ErrorCode::InvalidSchedule, "eps must be positive");
  const int n = sys.n();
  if (init.size() != static_cast<Eigen::Index>(mesh.num_nodes()) * n)
    throw Error(ErrorCode::Config, "initial guess has the wrong size");
  AssemblyOptions opt;
  opt.quad_order = params.quad_order;
  ViscousResult res;
  res.coeffs = init;
  ResidualSystem rs;
  if (!try_residual(sys, mesh, pf, bd, res.coeffs, eps, diss, opt, true, rs)) {
    for (int v = 0; v < mesh.num_nodes(); ++v)
      if (!sys.in_domain(init.segment(static_cast<Eigen::Index>(v) * n, n)))
        throw Error(ErrorCode::LeftDomain, "initial guess outside D at node " + std::to_string(v));
    throw Error(ErrorCode::LeftDomain, "initial guess leaves D at a quadrature point");
  }
  auto& nr = res.newton;
  nr.tolerance = params.newton_tol * (1 + rs.bnorm);
  Eigen::SparseLU<SpMat> lu;
  for (int it = 0;; ++it) {
    const double rn = sup_norm(rs.r);
    nr.history.push_back(rn);
    nr.residual = rn;
    nr.iterations = it;
    if (rn <= nr.tolerance) {
      nr.converged = true;
      return res;
    }
    if (it >= params.newton_max_iter)
      throw Error(ErrorCode::NewtonDiverged, "no convergence after " + std::to_string(it) +
                                                 " iterations, residual " + std::to_string(rn));
    lu.compute(rs.J);
    if (lu.info() != Eigen::Success) throw Error(ErrorCode::NewtonDiverged, "singular Jacobian");
    const Vec dz = lu.solve(-rs.r);
    if (!dz.allFinite()) throw Error(ErrorCode::NewtonDiverged, "non-finite Newton step");
    const double r2 = rs.r.norm();
    double alpha = 1.0;
    bool accepted = false, left = false;
    ResidualSystem trial;
    for (int bt = 0; bt <= 30; ++bt, alpha *= 0.5) {
      const Vec zt = res.coeffs + alpha * dz;
      if (!try_residual(sys, mesh, pf, bd, zt, eps, diss, opt, false, trial)) {
        left = true;
        continue;
      }
      if (trial.r.norm() <= (1 - 1e-4 * alpha) * r2 || sup_norm(trial.r) <= nr.tolerance) {
        res.coeffs = zt;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (left) throw Error(ErrorCode::LeftDomain, "every damped step leaves D");
      throw Error(ErrorCode::NewtonDiverged, "line search exhausted, residual " + std::to_string(rn));
    }
    try_residual(sys, mesh, pf, bd, res.coeffs, eps, diss, opt, true, rs);
  }
}

// ----------------------------------------------------------- continuation

std::vector<DiscreteSolution> continuation_solve(const SymmetricSystem& sys,
                                                 const std::vector<std::shared_ptr<const SimplicialMesh>>& meshes,
                                                 const ProjectionField& pf, const BoundaryData& bd,
                                                 const SchemeParams& params, const DissipationSpec& diss,
                                                 const Vec& init_state) {
  params.validate();
  if (meshes.size() != params.h_levels.size()) throw Error(ErrorCode::Config, "one mesh per h level required");
  const int n = sys.n();
  std::vector<DiscreteSolution> out;
  const SimplicialMesh* prev_mesh = nullptr;
  Vec prev;
  double eps_start = params.eps0;
  for (size_t k = 0; k < meshes.size(); ++k) {
    const SimplicialMesh& mesh = *meshes[k];
    DiscreteSolution sol;
    sol.mesh = meshes[k];
    sol.h = params.h_levels[k];
    Vec z;
    if (!prev_mesh) {
      z = init_state.replicate(mesh.num_nodes(), 1);
    } else {
      NodalField pf_prev(*prev_mesh, n, prev);
      z = interpolate(pf_prev, mesh);
    }
    try {
      for (double e : params.eps_schedule(eps_start, sol.h)) {
        ViscousResult vr = solve_viscous(sys, mesh, pf, bd, e, diss, z, params);
        z = vr.coeffs;
        sol.eps = e;
        sol.residual = vr.newton.residual;
        sol.newton_iterations += vr.newton.iterations;
        sol.eps_path.push_back(e);
        sol.iterations_path.push_back(vr.newton.iterations);
      }
      sol.ok = true;
      sol.status = "ok";
      sol.coeffs = z;
      FitParams fp;
      fp.tau_s = params.tau_s;
      fp.eps = sol.eps;
      sol.gamma = fit_shocks(sys, mesh, z, fp);
      prev_mesh = &mesh;
      prev = z;
      eps_start = sol.eps;
    } catch (const Error& e) {
      sol.ok = false;
      sol.status = e.what();
      sol.coeffs = z;
    }
    out.push_back(std::move(sol));
  }
  return out;
}

// ------------------------------------------------------------ shock fitting

namespace {

struct UnionFind {
  std::vector<int> p;
  explicit UnionFind(int n) : p(n) { std::iota(p.begin(), p.end(), 0); }
  int find(int a) {
    while (p[a] != a) a = p[a] = p[p[a]];
    return a;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) p[std::max(a, b)] = std::min(a, b);
  }
};

// Moves y back toward x until it lies in the mesh.
Point clamp_inside(const SimplicialMesh& mesh, const Point& x, const Point& y) {
  Point d = y - x;
  for (int i = 0; i < 30; ++i) {
    if (mesh.locate(x + d) >= 0) return x + d;
    d *= 0.5;
  }
  return x;
}

}  // namespace

DiscontinuitySet fit_shocks(const SymmetricSystem& sys, const SimplicialMesh& mesh, const Vec& coeffs,
                            const FitParams& fp) {
  DiscontinuitySet out;
  const int n = sys.n();
  const int nt = mesh.num_triangles();
  const NodalField f(mesh, n, coeffs);
  double range = 0;
  for (int j = 0; j < n; ++j) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (int v = 0; v < mesh.num_nodes(); ++v) {
      lo = std::min(lo, coeffs[static_cast<Eigen::Index>(v) * n + j]);
      hi = std::max(hi, coeffs[static_cast<Eigen::Index>(v) * n + j]);
    }
    range = std::max(range, hi - lo);
  }
  if (!(range > 1e-12) || nt == 0) return out;

  const double h = mesh.h();
  std::vector<double> g(nt);
  std::vector<Point> dir(nt);
  for (int t = 0; t < nt; ++t) {
    const Mat G = f.gradient(t);
    Eigen::Index jmax = 0;
    G.rowwise().norm().maxCoeff(&jmax);
    const Point gj = G.row(jmax).transpose();
    g[t] = std::sqrt(2 * mesh.area(t)) * gj.norm();
    dir[t] = gj.norm() > 0 ? Point(gj / gj.norm()) : Point(0, 0);
  }
  std::vector<double> sorted = g;
  std::nth_element(sorted.begin(), sorted.begin() + nt / 2, sorted.end());
  const double gthr = std::max(fp.tau_s * sorted[nt / 2], 1e-8 * range);

  const double ws = 2 * h + 4 * fp.eps;
  std::vector<char> flag(nt, 0);
  for (int t = 0; t < nt; ++t) {
    if (g[t] <= gthr) continue;
    const Point c = mesh.centroid(t);
    const Point pa = clamp_inside(mesh, c, c + ws * dir[t]);
    const Point pb = clamp_inside(mesh, c, c - ws * dir[t]);
    const double J = (f.eval(pa) - f.eval(pb)).cwiseAbs().maxCoeff();
    if (J < fp.jump_fraction * range) continue;
    const double rho = g[t] / std::sqrt(2 * mesh.area(t)) * (pa - pb).norm() / J;
    if (rho >= fp.peak_ratio) flag[t] = 1;
  }

  // Components by shared vertices.
  UnionFind uf(nt);
  std::vector<int> first(mesh.num_nodes(), -1);
  for (int t = 0; t < nt; ++t) {
    if (!flag[t]) continue;
    for (int v : mesh.triangles()[t]) {
      if (first[v] < 0)
        first[v] = t;
      else
        uf.unite(first[v], t);
    }
  }
  std::vector<std::vector<int>> comps;
  std::vector<int> comp_of(nt, -1);
  for (int t = 0; t < nt; ++t) {
    if (!flag[t]) continue;
    const int r = uf.find(t);
    if (comp_of[r] < 0) {
      comp_of[r] = static_cast<int>(comps.size());
      comps.emplace_back();
    }
    comps[comp_of[r]].push_back(t);
  }

  for (const auto& comp : comps) {
    if (comp.size() < 2) continue;
    double wsum = 0;
    Point m(0, 0);
    for (int t : comp) {
      m += g[t] * mesh.centroid(t);
      wsum += g[t];
    }
    m /= wsum;
    Eigen::Matrix2d C = Eigen::Matrix2d::Zero();
    for (int t : comp) {
      const Point d = mesh.centroid(t) - m;
      C += g[t] * d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(C);
    Point axis = es.eigenvectors().col(1);
    if (axis.x() < -1e-12 || (std::abs(axis.x()) <= 1e-12 && axis.y() < 0)) axis = -axis;
    // A ridge has its gradients across the axis; blobs around a point do not.
    double align = 0;
    for (int t : comp) align += g[t] * std::abs(dir[t].dot(Point(-axis.y(), axis.x())));
    if (align < fp.min_alignment * wsum) continue;
    double smin = std::numeric_limits<double>::infinity();
    for (int t : comp) smin = std::min(smin, (mesh.centroid(t) - m).dot(axis));
    std::map<long, std::pair<Point, double>> bins;
    for (int t : comp) {
      const long b = static_cast<long>(std::floor(((mesh.centroid(t) - m).dot(axis) - smin) / h));
      auto& e = bins[b];
      if (e.second == 0) e.first.setZero();
      e.first += g[t] * mesh.centroid(t);
      e.second += g[t];
    }
    std::vector<Point> pts;
    for (auto& [b, e] : bins) pts.push_back(e.first / e.second);
    double len = 0;
    for (size_t i = 1; i < pts.size(); ++i) len += (pts[i] - pts[i - 1]).norm();
    if (pts.size() < 3 || len < fp.min_length_h * h) continue;

    Point hint(-axis.y(), axis.x());
    if (std::abs(hint.y()) >= std::abs(hint.x()) ? hint.y() < 0 : hint.x() < 0) hint = -hint;
    GammaChain chain;
    try {
      chain = gamma_from_polyline(pts, hint);
    } catch (const Error&) {
      continue;
    }
    const int np = static_cast<int>(chain.points.size());
    chain.zminus.resize(np);
    chain.zplus.resize(np);
    int bad_rh = 0;
    double prod = 0, max_jump = 0;
    for (int i = 0; i < np; ++i) {
      Point mu(0, 0);
      if (i > 0) mu += chain.mu[i - 1];
      if (i < np - 1) mu += chain.mu[i];
      mu.normalize();
      const Point p = chain.points[i];
      for (int side : {-1, 1}) {
        // March out of the flagged band, then on until the profile flattens.
        Point y = p;
        Vec zy = f.eval(y);
        double peak = 0;
        bool outside = false;
        const double cap = 2 * h + 12 * fp.eps;
        for (int step = 1; step <= 400; ++step) {
          const Point q = p + side * 0.5 * h * step * mu;
          const int t = mesh.locate(q);
          if (t < 0) break;
          const Vec zq = f.eval(q);
          const double change = (zq - zy).cwiseAbs().maxCoeff();
          peak = std::max(peak, change);
          y = q;
          zy = zq;
          if (!flag[t]) outside = true;
          if (outside && (change <= 1e-2 * peak || 0.5 * h * step >= cap)) break;
        }
        (side < 0 ? chain.zminus[i] : chain.zplus[i]) = f.eval(y);
      }
      if (rh_residual(sys, mu, chain.zminus[i], chain.zplus[i], p) > fp.tol_rh) ++bad_rh;
      prod += mu.dot(reduced_entropy_flux(sys, chain.zplus[i], p) - reduced_entropy_flux(sys, chain.zminus[i], p));
      max_jump = std::max(max_jump, (chain.zplus[i] - chain.zminus[i]).cwiseAbs().maxCoeff());
    }
    prod /= np;
    if (fp.eps > 0 && prod > 1e-2 * max_jump * max_jump * max_jump) continue;
    chain.unfitted = bad_rh > 0.2 * np;
    out.chains.push_back(std::move(chain));
  }
  return out;
}

// ------------------------------------------------------------ limit check

namespace {

// Barycentric sub-triangles of the reference triangle after L bisections.
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

double l1_distance(const StateField& a, const StateField& b, const SimplicialMesh& mesh) {
  const TriRule& rule = tri_rule(4);
  static const auto subs = subdivide(1);
  double total = 0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& v = mesh.triangles()[t];
    const double A = mesh.area(t) / subs.size();
    for (const auto& s : subs) {
      for (size_t q = 0; q < rule.w.size(); ++q) {
        EvalHint hint;
        hint.mesh = &mesh;
        hint.tri = t;
        for (int k = 0; k < 3; ++k)
          hint.bary[k] = rule.bary[q][0] * s[0][k] + rule.bary[q][1] * s[1][k] + rule.bary[q][2] * s[2][k];
        const Point x = hint.bary[0] * mesh.nodes()[v[0]] + hint.bary[1] * mesh.nodes()[v[1]] +
                        hint.bary[2] * mesh.nodes()[v[2]];
        total += rule.w[q] * A * (a.eval(x, hint) - b.eval(x, hint)).lpNorm<1>();
      }
    }
  }
  return total;
}

LimitReport limit_check_values(const std::vector<double>& d, double tol_limit) {
  LimitReport r;
  r.d = d;
  bool dec = !d.empty();
  for (size_t k = 0; k + 1 < d.size(); ++k) {
    r.rates.push_back(d[k + 1] > 0 ? std::log2(d[k] / d[k + 1]) : std::numeric_limits<double>::infinity());
    if (!(d[k + 1] < d[k] || (d[k] == 0 && d[k + 1] == 0))) dec = false;
  }
  r.converged = dec && std::isfinite(d.back()) && d.back() < tol_limit;
  return r;
}

LimitReport limit_check(const std::vector<DiscreteSolution>& sols, double tol_limit) {
  std::vector<const DiscreteSolution*> ok;
  for (auto& s : sols)
    if (s.ok) ok.push_back(&s);
  std::vector<double> d;
  for (size_t k = 0; k + 1 < ok.size(); ++k) {
    const auto& a = *ok[k];
    const auto& b = *ok[k + 1];
    const int n = static_cast<int>(a.coeffs.size() / a.mesh->num_nodes());
    NodalField na(*a.mesh, n, a.coeffs), nb(*b.mesh, n, b.coeffs);
    FittedField fa(na, a.gamma, a.h + 2 * a.eps), fb(nb, b.gamma, b.h + 2 * b.eps);
    d.push_back(l1_distance(fa, fb, *b.mesh) + gamma_distance(a.gamma, b.gamma));
  }
  if (d.empty()) {
    LimitReport r;
    return r;
  }
  return limit_check_values(d, tol_limit);
}

// ---------------------------------------------------- viscous structure

namespace {

struct Layer {
  bool active = false;
  Vec jump;  // plus minus minus
  Point mu;
  double d = 0, ell = 1;
};

// Nearest chain segment whose orthogonal projection contains x.
Layer find_layer(const SymmetricSystem& sys, const DiscontinuitySet& gamma, const Point& x, double eps,
                 double reach, double slack = 0) {
  Layer best;
  double bd = std::numeric_limits<double>::infinity();
  for (const auto& c : gamma.chains) {
    for (int s = 0; s < c.num_segments(); ++s) {
      const Point a = c.points[s], ab = c.points[s + 1] - a;
      const double L2 = ab.squaredNorm();
      const double t = (x - a).dot(ab) / L2;
      if (t < 0 || t > 1) continue;
      const Point foot = a + t * ab;
      const double dist = (x - foot).norm();
      if (dist >= bd) continue;
      Vec zm, zp;
      c.traces_at(c.alpha[s] + t * std::sqrt(L2), zm, zp);
      const Vec jz = zp - zm;
      const double jn = jz.squaredNorm();
      double ell = eps;
      if (jn > 0) {
        const Mat dA = reduced_directional_jac(sys, c.mu[s], zp, foot) - reduced_directional_jac(sys, c.mu[s], zm, foot);
        const double ja = std::abs(jz.dot(dA * jz)) / jn;
        if (ja > 1e-8) ell = std::min(4 * eps / ja, 10 * eps);
      }
      if (dist > reach * ell + slack) continue;
      bd = dist;
      best.active = true;
      best.jump = jz;
      best.mu = c.mu[s];
      best.d = c.mu[s].dot(x - foot);
      best.ell = ell;
    }
  }
  return best;
}

}  // namespace

StructureReport viscous_structure_check(const SymmetricSystem& sys, const StateField& z,
                                        const DiscontinuitySet& gamma, const std::vector<double>& eps_list,
                                        const DissipationSpec& diss, const TestSpace& tspace) {
  StructureReport rep;
  rep.eps = eps_list;
  const SimplicialMesh& mesh = *tspace.mesh;
  const int n = sys.n();
  const int nt = mesh.num_triangles();
  const TriRule& rule = tri_rule(4);
  constexpr double kReach = 12.0;
  std::array<Mat, 2> MtM{diss.M[0].transpose() * diss.M[0], diss.M[1].transpose() * diss.M[1]};

  // ||theta||_S pieces for single hats.
  std::vector<double> hat_norm(mesh.num_nodes(), 1.0);
  for (int t = 0; t < nt; ++t) {
    const auto gr = mesh.hat_gradients(t);
    for (int k = 0; k < 3; ++k)
      hat_norm[mesh.triangles()[t][k]] += mesh.area(t) * (1.0 / 3 + gr[k].norm());
  }

  for (double eps : eps_list) {
    std::vector<Vec> V(mesh.num_nodes(), Vec::Zero(n));
    std::vector<std::array<Vec, 3>> contrib(nt);
    const double delta = 1e-4 * mesh.h();
    for (int t = 0; t < nt; ++t) {
      const auto& v = mesh.triangles()[t];
      const auto gr = mesh.hat_gradients(t);
      const Point c = mesh.centroid(t);
      const double ht = std::sqrt(2 * mesh.area(t));
      int L = 0;
      const Layer lc = find_layer(sys, gamma, c, eps, kReach, ht);
      if (lc.active) L = std::clamp(static_cast<int>(std::ceil(std::log2(4 * ht / lc.ell))), 0, 5);
      const auto subs = subdivide(L);
      std::array<Vec, 3> acc{Vec::Zero(n), Vec::Zero(n), Vec::Zero(n)};
      const double A = mesh.area(t) / subs.size();
      ReducedFlux fz, fh;
      for (const auto& s : subs) {
        for (size_t q = 0; q < rule.w.size(); ++q) {
          std::array<double, 3> l;
          for (int k = 0; k < 3; ++k) l[k] = rule.bary[q][0] * s[0][k] + rule.bary[q][1] * s[1][k] + rule.bary[q][2] * s[2][k];
          const Point x = l[0] * mesh.nodes()[v[0]] + l[1] * mesh.nodes()[v[1]] + l[2] * mesh.nodes()[v[2]];
          const Vec zx = z.eval(x);
          const Layer ly = find_layer(sys, gamma, x, eps, kReach);
          Vec zh = zx;
          Mat gz = Mat::Zero(n, 2);
          if (ly.active) {
            const double th = std::tanh(ly.d / ly.ell);
            const double sg = ly.d > 0 ? 1.0 : (ly.d < 0 ? -1.0 : 0.0);
            zh = zx + 0.5 * ly.jump * (th - sg);
            const double sech2 = 1 - th * th;
            gz += (0.5 / ly.ell * sech2) * ly.jump * ly.mu.transpose();
          }
          if (!ly.active || std::abs(ly.d) > 2 * delta) {
            for (int dd = 0; dd < 2; ++dd) {
              Point e(0, 0);
              e[dd] = delta;
              Point xp = x + e, xm = x - e;
              if (ly.active) {
                // Stay on the side of x so the jump is not differenced.
                if ((ly.mu.dot(e) > 0) == (ly.d > 0)) xm = x; else xp = x;
              }
              gz.col(dd) += (z.eval(xp) - z.eval(xm)) / (xp - xm).norm();
            }
          }
          reduced_flux(sys, zx, x, false, fz);
          reduced_flux(sys, zh, x, false, fh);
          const double w = rule.w[q] * A;
          for (int k = 0; k < 3; ++k) {
            Vec r = Vec::Zero(n);
            for (int dd = 0; dd < 2; ++dd)
              r += gr[k][dd] * (fz.A[dd] - fh.A[dd] + eps * MtM[dd] * gz.col(dd));
            if (fz.has_zero_order) r += l[k] * (fz.A0 - fh.A0);
            acc[k] += w * r;
          }
        }
      }
      contrib[t] = acc;
    }
    for (int t = 0; t < nt; ++t)
      for (int k = 0; k < 3; ++k) V[mesh.triangles()[t][k]] += contrib[t][k];

    // Single hats, then the sign-combined test function.
    const int nc = tspace.local_dim();
    double best = 0;
    Vec theta = Vec::Zero(static_cast<Eigen::Index>(mesh.num_nodes()) * n);
    double signed_sum = 0;
    for (int a = 0; a < nc; ++a) {
      const double va = tspace.col_dir[a].dot(V[tspace.col_node[a]]);
      best = std::max(best, std::abs(va) / hat_norm[tspace.col_node[a]]);
      const double sg = va >= 0 ? 1.0 : -1.0;
      signed_sum += sg * va;
      theta.segment(static_cast<Eigen::Index>(tspace.col_node[a]) * n, n) += sg * tspace.col_dir[a];
    }
    double sup = 0, w11 = 0;
    for (int v = 0; v < mesh.num_nodes(); ++v)
      sup = std::max(sup, theta.segment(static_cast<Eigen::Index>(v) * n, n).norm());
    const TriRule& r2 = tri_rule(2);
    for (int t = 0; t < nt; ++t) {
      const auto& v = mesh.triangles()[t];
      const auto gr = mesh.hat_gradients(t);
      Mat G = Mat::Zero(n, 2);
      for (int k = 0; k < 3; ++k) G += theta.segment(static_cast<Eigen::Index>(v[k]) * n, n) * gr[k].transpose();
      w11 += mesh.area(t) * G.norm();
      for (size_t q = 0; q < r2.w.size(); ++q) {
        Vec th = Vec::Zero(n);
        for (int k = 0; k < 3; ++k) th += r2.bary[q][k] * theta.segment(static_cast<Eigen::Index>(v[k]) * n, n);
        w11 += r2.w[q] * mesh.area(t) * th.norm();
      }
    }
    if (sup + w11 > 0) best = std::max(best, std::abs(signed_sum) / (sup + w11));
    rep.value.push_back(best);
  }

  // Ordered by decreasing eps, the values must decrease.
  std::vector<size_t> idx(eps_list.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return eps_list[a] > eps_list[b]; });
  rep.decreasing = idx.size() >= 2;
  for (size_t k = 0; k + 1 < idx.size(); ++k)
    if (!(rep.value[idx[k + 1]] < rep.value[idx[k]])) rep.decreasing = false;
  if (!rep.decreasing && !gamma.empty())
    rep.warning = "viscous-structure functional does not decrease with eps";
  return rep;
}

}  // namespace conslaw
