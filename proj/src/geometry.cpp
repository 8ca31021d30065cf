#include "conslaw/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <random>
#include <set>

namespace conslaw {

namespace {

double cross(const Point& a, const Point& b) { return a[0] * b[1] - a[1] * b[0]; }

bool segments_cross(const Point& a, const Point& b, const Point& c, const Point& d) {
  const double d1 = cross(b - a, c - a), d2 = cross(b - a, d - a);
  const double d3 = cross(d - c, a - c), d4 = cross(d - c, b - c);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
    return true;
  auto on = [](const Point& p, const Point& q, const Point& r) {
    return std::abs(cross(q - p, r - p)) < 1e-14 * (1 + (q - p).squaredNorm()) &&
           r[0] >= std::min(p[0], q[0]) - 1e-14 && r[0] <= std::max(p[0], q[0]) + 1e-14 &&
           r[1] >= std::min(p[1], q[1]) - 1e-14 && r[1] <= std::max(p[1], q[1]) + 1e-14;
  };
  return on(a, b, c) || on(a, b, d) || on(c, d, a) || on(c, d, b);
}

struct Fnv {
  std::uint64_t h = 1469598103934665603ull;
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= c[i];
      h *= 1099511628211ull;
    }
  }
  void f64(double x) { bytes(&x, sizeof x); }
  void i64(std::int64_t x) { bytes(&x, sizeof x); }
};

}  // namespace

double point_segment_distance(const Point& p, const Point& a, const Point& b) {
  const Point ab = b - a;
  const double L2 = ab.squaredNorm();
  double t = L2 > 0 ? (p - a).dot(ab) / L2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (a + t * ab - p).norm();
}

// ---------------------------------------------------------------- polygon

PolygonDomain PolygonDomain::rectangle(double x0, double x1, double y0, double y1,
                                       const std::string& bottom, const std::string& right,
                                       const std::string& top, const std::string& left) {
  PolygonDomain d;
  d.vertices = {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
  d.edge_tags = {bottom, right, top, left};
  return d;
}

double PolygonDomain::signed_area() const {
  double a = 0;
  for (std::size_t i = 0; i < vertices.size(); ++i)
    a += cross(vertices[i], vertices[(i + 1) % vertices.size()]);
  return 0.5 * a;
}

void PolygonDomain::validate() const {
  const std::size_t nv = vertices.size();
  if (nv < 3) throw Error(ErrorCode::DegeneratePolygon, "fewer than 3 vertices");
  if (edge_tags.size() != nv) throw Error(ErrorCode::DegeneratePolygon, "one tag per edge required");
  for (auto& t : edge_tags)
    if (t.empty()) throw Error(ErrorCode::DegeneratePolygon, "empty boundary tag");
  if (!(signed_area() > 0)) throw Error(ErrorCode::DegeneratePolygon, "polygon must be counterclockwise");
  for (std::size_t i = 0; i < nv; ++i) {
    if ((vertices[(i + 1) % nv] - vertices[i]).norm() == 0)
      throw Error(ErrorCode::DegeneratePolygon, "repeated vertex");
    for (std::size_t j = i + 2; j < nv; ++j) {
      if (i == 0 && j == nv - 1) continue;
      if (segments_cross(vertices[i], vertices[(i + 1) % nv], vertices[j], vertices[(j + 1) % nv]))
        throw Error(ErrorCode::DegeneratePolygon, "polygon not simple");
    }
  }
}

bool PolygonDomain::is_axis_rectangle() const {
  if (vertices.size() != 4) return false;
  for (int i = 0; i < 4; ++i) {
    const Point e = vertices[(i + 1) % 4] - vertices[i];
    if (e[0] != 0 && e[1] != 0) return false;
  }
  return true;
}

bool PolygonDomain::contains(const Point& p) const {
  bool in = false;
  const std::size_t nv = vertices.size();
  for (std::size_t i = 0, j = nv - 1; i < nv; j = i++) {
    const Point& a = vertices[i];
    const Point& b = vertices[j];
    if ((a[1] > p[1]) != (b[1] > p[1]) &&
        p[0] < (b[0] - a[0]) * (p[1] - a[1]) / (b[1] - a[1]) + a[0])
      in = !in;
  }
  return in;
}

double PolygonDomain::diameter() const {
  double d = 0;
  for (auto& a : vertices)
    for (auto& b : vertices) d = std::max(d, (a - b).norm());
  return d;
}

// ------------------------------------------------------------------- mesh

SimplicialMesh::SimplicialMesh(std::vector<Point> nodes, std::vector<std::array<int, 3>> tris,
                               std::vector<BoundaryEdge> boundary)
    : nodes_(std::move(nodes)), tris_(std::move(tris)), boundary_(std::move(boundary)) {
  build();
}

void SimplicialMesh::build() {
  if (tris_.empty()) throw Error(ErrorCode::MeshFailure, "mesh without triangles");
  double asum = 0;
  for (auto& t : tris_) {
    for (int k : t)
      if (k < 0 || k >= num_nodes()) throw Error(ErrorCode::MeshFailure, "node index out of range");
    const double a = cross(nodes_[t[1]] - nodes_[t[0]], nodes_[t[2]] - nodes_[t[0]]);
    if (a == 0) throw Error(ErrorCode::MeshFailure, "degenerate triangle");
    if (a < 0) std::swap(t[1], t[2]);
    asum += 0.5 * std::abs(a);
  }
  h_ = std::sqrt(2.0 * asum / tris_.size());
  boundary_node_.assign(nodes_.size(), 0);
  node_tags_.assign(nodes_.size(), {});
  for (auto& e : boundary_) {
    for (int k : e.v) {
      boundary_node_[k] = 1;
      auto& v = node_tags_[k];
      if (std::find(v.begin(), v.end(), e.tag) == v.end()) v.push_back(e.tag);
    }
  }
  for (auto& v : node_tags_) std::sort(v.begin(), v.end());

  lo_ = hi_ = nodes_[0];
  for (auto& p : nodes_) {
    lo_ = lo_.cwiseMin(p);
    hi_ = hi_.cwiseMax(p);
  }
  const int g = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(tris_.size()) / 2.0)));
  gx_ = gy_ = g;
  buckets_.assign(static_cast<std::size_t>(gx_) * gy_, {});
  const Point span = (hi_ - lo_).cwiseMax(Point(1e-300, 1e-300));
  for (int t = 0; t < num_triangles(); ++t) {
    Point a = nodes_[tris_[t][0]], b = a;
    for (int k : tris_[t]) {
      a = a.cwiseMin(nodes_[k]);
      b = b.cwiseMax(nodes_[k]);
    }
    const int i0 = std::clamp(static_cast<int>((a[0] - lo_[0]) / span[0] * gx_), 0, gx_ - 1);
    const int i1 = std::clamp(static_cast<int>((b[0] - lo_[0]) / span[0] * gx_), 0, gx_ - 1);
    const int j0 = std::clamp(static_cast<int>((a[1] - lo_[1]) / span[1] * gy_), 0, gy_ - 1);
    const int j1 = std::clamp(static_cast<int>((b[1] - lo_[1]) / span[1] * gy_), 0, gy_ - 1);
    for (int j = j0; j <= j1; ++j)
      for (int i = i0; i <= i1; ++i) buckets_[j * gx_ + i].push_back(t);
  }
}

double SimplicialMesh::area(int t) const {
  const auto& v = tris_[t];
  return 0.5 * cross(nodes_[v[1]] - nodes_[v[0]], nodes_[v[2]] - nodes_[v[0]]);
}

Point SimplicialMesh::centroid(int t) const {
  const auto& v = tris_[t];
  return (nodes_[v[0]] + nodes_[v[1]] + nodes_[v[2]]) / 3.0;
}

std::array<Point, 3> SimplicialMesh::hat_gradients(int t) const {
  const auto& v = tris_[t];
  const double twoA = 2.0 * area(t);
  std::array<Point, 3> g;
  for (int k = 0; k < 3; ++k) {
    const Point& p1 = nodes_[v[(k + 1) % 3]];
    const Point& p2 = nodes_[v[(k + 2) % 3]];
    g[k] = Point(p1[1] - p2[1], p2[0] - p1[0]) / twoA;
  }
  return g;
}

double SimplicialMesh::min_angle_deg() const {
  double mn = 180;
  for (auto& t : tris_) {
    for (int k = 0; k < 3; ++k) {
      const Point a = nodes_[t[(k + 1) % 3]] - nodes_[t[k]];
      const Point b = nodes_[t[(k + 2) % 3]] - nodes_[t[k]];
      mn = std::min(mn, std::acos(std::clamp(a.dot(b) / (a.norm() * b.norm()), -1.0, 1.0)) * 180.0 / M_PI);
    }
  }
  return mn;
}

double SimplicialMesh::max_edge() const {
  double mx = 0;
  for (auto& t : tris_)
    for (int k = 0; k < 3; ++k) mx = std::max(mx, (nodes_[t[k]] - nodes_[t[(k + 1) % 3]]).norm());
  return mx;
}

std::vector<std::string> SimplicialMesh::tags() const {
  std::set<std::string> s;
  for (auto& e : boundary_) s.insert(e.tag);
  return {s.begin(), s.end()};
}

std::vector<int> SimplicialMesh::triangles_near(const Point& a, const Point& b) const {
  const Point span = (hi_ - lo_).cwiseMax(Point(1e-300, 1e-300));
  const int i0 = std::clamp(static_cast<int>(std::floor((a[0] - lo_[0]) / span[0] * gx_)), 0, gx_ - 1);
  const int i1 = std::clamp(static_cast<int>(std::floor((b[0] - lo_[0]) / span[0] * gx_)), 0, gx_ - 1);
  const int j0 = std::clamp(static_cast<int>(std::floor((a[1] - lo_[1]) / span[1] * gy_)), 0, gy_ - 1);
  const int j1 = std::clamp(static_cast<int>(std::floor((b[1] - lo_[1]) / span[1] * gy_)), 0, gy_ - 1);
  std::vector<int> out;
  for (int j = j0; j <= j1; ++j)
    for (int i = i0; i <= i1; ++i)
      for (int t : buckets_[j * gx_ + i]) out.push_back(t);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

int SimplicialMesh::locate(const Point& p, std::array<double, 3>* bary, double tol) const {
  const double pad = 1e-9 * (1 + (hi_ - lo_).norm());
  if (p[0] < lo_[0] - pad || p[0] > hi_[0] + pad || p[1] < lo_[1] - pad || p[1] > hi_[1] + pad)
    return -1;
  int best = -1;
  double best_min = -std::numeric_limits<double>::infinity();
  std::array<double, 3> bb{};
  for (int t : triangles_near(p, p)) {
    const auto& v = tris_[t];
    const double A = 2.0 * area(t);
    std::array<double, 3> l;
    for (int k = 0; k < 3; ++k)
      l[k] = cross(nodes_[v[(k + 1) % 3]] - p, nodes_[v[(k + 2) % 3]] - p) / A;
    const double mn = std::min({l[0], l[1], l[2]});
    if (mn > best_min) {
      best_min = mn;
      best = t;
      bb = l;
    }
  }
  if (best < 0 || best_min < -tol) return -1;
  if (bary) *bary = bb;
  return best;
}

std::uint64_t SimplicialMesh::id() const {
  Fnv f;
  for (auto& p : nodes_) {
    f.f64(p[0]);
    f.f64(p[1]);
  }
  for (auto& t : tris_)
    for (int k : t) f.i64(k);
  for (auto& e : boundary_) {
    f.i64(e.v[0]);
    f.i64(e.v[1]);
    f.bytes(e.tag.data(), e.tag.size());
  }
  return f.h;
}

bool SimplicialMesh::is_conforming() const {
  std::map<std::pair<int, int>, int> count;
  for (auto& t : tris_)
    for (int k = 0; k < 3; ++k) {
      int a = t[k], b = t[(k + 1) % 3];
      count[{std::min(a, b), std::max(a, b)}]++;
    }
  std::set<std::pair<int, int>> bset;
  for (auto& e : boundary_) bset.insert({std::min(e.v[0], e.v[1]), std::max(e.v[0], e.v[1])});
  for (auto& [e, c] : count) {
    if (c > 2) return false;
    if (c == 1 && !bset.count(e)) return false;
    if (c == 2 && bset.count(e)) return false;
  }
  if (bset.size() != boundary_.size()) return false;
  const long V = num_nodes(), E = static_cast<long>(count.size()), F = num_triangles();
  return V - E + F == 1;
}

// ----------------------------------------------------------- triangulate

namespace {

std::vector<BoundaryEdge> boundary_from_triangles(const std::vector<Point>& nodes,
                                                  const std::vector<std::array<int, 3>>& tris,
                                                  const PolygonDomain& dom) {
  std::map<std::pair<int, int>, int> count;
  for (auto& t : tris)
    for (int k = 0; k < 3; ++k) {
      int a = t[k], b = t[(k + 1) % 3];
      count[{std::min(a, b), std::max(a, b)}]++;
    }
  std::vector<BoundaryEdge> out;
  for (auto& t : tris)
    for (int k = 0; k < 3; ++k) {
      const int a = t[k], b = t[(k + 1) % 3];
      if (count[{std::min(a, b), std::max(a, b)}] != 1) continue;
      const Point mid = 0.5 * (nodes[a] + nodes[b]);
      int best = -1;
      double bd = std::numeric_limits<double>::infinity();
      const std::size_t nv = dom.vertices.size();
      for (std::size_t s = 0; s < nv; ++s) {
        const double d = point_segment_distance(mid, dom.vertices[s], dom.vertices[(s + 1) % nv]);
        if (d < bd) {
          bd = d;
          best = static_cast<int>(s);
        }
      }
      const Point e = nodes[b] - nodes[a];
      Point nu(e[1], -e[0]);
      nu.normalize();
      out.push_back({{a, b}, dom.edge_tags[best], nu});
    }
  return out;
}

SimplicialMesh structured_rectangle(const PolygonDomain& dom, double h) {
  Point lo = dom.vertices[0], hi = lo;
  for (auto& v : dom.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  const int nx = std::max(1, static_cast<int>(std::ceil((hi[0] - lo[0]) / h - 1e-9)));
  const int ny = std::max(1, static_cast<int>(std::ceil((hi[1] - lo[1]) / h - 1e-9)));
  std::vector<Point> nodes;
  nodes.reserve(static_cast<std::size_t>(nx + 1) * (ny + 1));
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i)
      nodes.emplace_back(lo[0] + (hi[0] - lo[0]) * i / nx, lo[1] + (hi[1] - lo[1]) * j / ny);
  auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
  std::vector<std::array<int, 3>> tris;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      tris.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      tris.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  return SimplicialMesh(nodes, tris, boundary_from_triangles(nodes, tris, dom));
}

struct Tri {
  std::array<int, 3> v;
  Point cc;
  double r2;
};

Tri make_tri(const std::vector<Point>& p, int a, int b, int c) {
  if (cross(p[b] - p[a], p[c] - p[a]) < 0) std::swap(b, c);
  const Point A = p[a], B = p[b], C = p[c];
  const double d = 2 * (A[0] * (B[1] - C[1]) + B[0] * (C[1] - A[1]) + C[0] * (A[1] - B[1]));
  const double a2 = A.squaredNorm(), b2 = B.squaredNorm(), c2 = C.squaredNorm();
  Point cc((a2 * (B[1] - C[1]) + b2 * (C[1] - A[1]) + c2 * (A[1] - B[1])) / d,
           (a2 * (C[0] - B[0]) + b2 * (A[0] - C[0]) + c2 * (B[0] - A[0])) / d);
  return {{a, b, c}, cc, (A - cc).squaredNorm()};
}

std::vector<std::array<int, 3>> bowyer_watson(const std::vector<Point>& pts) {
  Point lo = pts[0], hi = lo;
  for (auto& p : pts) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double D = (hi - lo).norm() * 10 + 1;
  const Point c = 0.5 * (lo + hi);
  std::vector<Point> p = pts;
  const int s0 = static_cast<int>(p.size());
  p.push_back(c + Point(-D, -D));
  p.push_back(c + Point(D, -D));
  p.push_back(c + Point(0, D));
  std::vector<Tri> tris{make_tri(p, s0, s0 + 1, s0 + 2)};
  for (int i = 0; i < s0; ++i) {
    std::vector<Tri> keep;
    std::map<std::pair<int, int>, int> edges;
    for (auto& t : tris) {
      if ((p[i] - t.cc).squaredNorm() < t.r2 * (1 + 1e-12)) {
        for (int k = 0; k < 3; ++k) {
          int a = t.v[k], b = t.v[(k + 1) % 3];
          edges[{std::min(a, b), std::max(a, b)}]++;
        }
      } else {
        keep.push_back(t);
      }
    }
    for (auto& [e, cnt] : edges)
      if (cnt == 1) keep.push_back(make_tri(p, e.first, e.second, i));
    tris.swap(keep);
  }
  std::vector<std::array<int, 3>> out;
  for (auto& t : tris)
    if (t.v[0] < s0 && t.v[1] < s0 && t.v[2] < s0) out.push_back(t.v);
  return out;
}

SimplicialMesh delaunay_polygon(const PolygonDomain& dom, double h, std::uint64_t seed) {
  const std::size_t nv = dom.vertices.size();
  std::vector<Point> bpts;
  for (std::size_t s = 0; s < nv; ++s) {
    const Point a = dom.vertices[s], b = dom.vertices[(s + 1) % nv];
    const int k = std::max(1, static_cast<int>(std::ceil((b - a).norm() / h - 1e-9)));
    for (int i = 0; i < k; ++i) bpts.push_back(a + (b - a) * (static_cast<double>(i) / k));
  }

  Point lo = dom.vertices[0], hi = lo;
  for (auto& v : dom.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  std::mt19937_64 rng(seed);
  for (int attempt = 0; attempt < 6; ++attempt) {
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const double ox = attempt == 0 ? 0.0 : U(rng) * h, oy = attempt == 0 ? 0.0 : U(rng) * h;
    std::vector<Point> pts = bpts;
    std::vector<std::pair<int, int>> bsegs;
    for (std::size_t i = 0; i < bpts.size(); ++i)
      bsegs.push_back({static_cast<int>(i), static_cast<int>((i + 1) % bpts.size())});
    const double dy = h * std::sqrt(3.0) / 2.0;
    int row = 0;
    for (double y = lo[1] + oy; y < hi[1]; y += dy, ++row) {
      for (double x = lo[0] + ox + (row % 2 ? 0.5 * h : 0.0); x < hi[0]; x += h) {
        const Point q(x, y);
        if (!dom.contains(q)) continue;
        double d = std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < nv; ++s)
          d = std::min(d, point_segment_distance(q, dom.vertices[s], dom.vertices[(s + 1) % nv]));
        if (d > 0.6 * h) pts.push_back(q);
      }
    }

    // Refinement: split missing or encroached boundary segments, insert
    // circumcenters of poor triangles.
    std::vector<std::array<int, 3>> inside;
    for (int round = 0; round < 60; ++round) {
      const auto tris = bowyer_watson(pts);
      inside.clear();
      for (auto& t : tris) {
        const Point c = (pts[t[0]] + pts[t[1]] + pts[t[2]]) / 3.0;
        if (dom.contains(c)) inside.push_back(t);
      }
      std::set<std::pair<int, int>> es;
      for (auto& t : inside)
        for (int k = 0; k < 3; ++k) es.insert({std::min(t[k], t[(k + 1) % 3]), std::max(t[k], t[(k + 1) % 3])});
      std::vector<char> split(bsegs.size(), 0);
      for (std::size_t s = 0; s < bsegs.size(); ++s) {
        auto [a, b] = bsegs[s];
        if (!es.count({std::min(a, b), std::max(a, b)})) split[s] = 1;
      }
      std::vector<Point> centers;
      for (auto& t : inside) {
        const Point A = pts[t[0]], B = pts[t[1]], C = pts[t[2]];
        const double la = (B - C).norm(), lb = (C - A).norm(), lc = (A - B).norm();
        const double area = 0.5 * std::abs(cross(B - A, C - A));
        const double lmax = std::max({la, lb, lc});
        const double smin = 2 * area / (lmax * std::max({la * lb, lb * lc, lc * la}) / lmax);
        const double min_angle = std::asin(std::min(1.0, smin)) * 180.0 / M_PI;
        if (min_angle >= 21.0 && lmax <= 1.4 * h) continue;
        const Tri tt = make_tri(pts, t[0], t[1], t[2]);
        if (!dom.contains(tt.cc)) continue;
        bool enc = false;
        for (std::size_t s = 0; s < bsegs.size(); ++s) {
          const Point a = pts[bsegs[s].first], b = pts[bsegs[s].second];
          if ((a - tt.cc).dot(b - tt.cc) < 0) {
            split[s] = 1;
            enc = true;
          }
        }
        if (!enc) centers.push_back(tt.cc);
      }
      bool changed = false;
      std::vector<std::pair<int, int>> next;
      for (std::size_t s = 0; s < bsegs.size(); ++s) {
        auto [a, b] = bsegs[s];
        if (!split[s]) {
          next.push_back(bsegs[s]);
          continue;
        }
        const int m = static_cast<int>(pts.size());
        pts.push_back(0.5 * (pts[a] + pts[b]));
        next.push_back({a, m});
        next.push_back({m, b});
        changed = true;
      }
      bsegs.swap(next);
      // Circumcenters too close to each other or to existing points are skipped.
      std::vector<Point> accepted;
      for (auto& c : centers) {
        bool near = false;
        for (auto& q : accepted)
          if ((q - c).norm() < 0.3 * h) near = true;
        if (!near) accepted.push_back(c);
      }
      if (!changed)
        for (auto& c : accepted) {
          pts.push_back(c);
          changed = true;
        }
      if (!changed) break;
    }
    if (inside.empty()) continue;
    SimplicialMesh mesh(pts, inside, boundary_from_triangles(pts, inside, dom));
    if (mesh.min_angle_deg() >= 20.0 && mesh.max_edge() <= 1.5 * h && mesh.is_conforming()) return mesh;
  }
  throw Error(ErrorCode::MeshFailure, "Delaunay refinement failed the quality checks");
}

}  // namespace

SimplicialMesh triangulate(const PolygonDomain& dom, double h_target, std::uint64_t seed) {
  dom.validate();
  if (!(h_target > 0)) throw Error(ErrorCode::MeshFailure, "h_target must be positive");
  if (dom.is_axis_rectangle()) return structured_rectangle(dom, h_target);
  double shortest = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < dom.vertices.size(); ++s)
    shortest = std::min(shortest, (dom.vertices[(s + 1) % dom.vertices.size()] - dom.vertices[s]).norm());
  if (h_target >= shortest) throw Error(ErrorCode::MeshFailure, "h_target exceeds the shortest polygon edge");
  return delaunay_polygon(dom, h_target, seed);
}

// ------------------------------------------------------------ projection

void ProjectionField::set(const std::string& tag, TagProjection tp) {
  if (tp.P.rows() != n_ || tp.P.cols() != n_) throw Error(ErrorCode::Config, "projector size != n for tag " + tag);
  tags_[tag] = std::move(tp);
}

const TagProjection& ProjectionField::at(const std::string& tag) const {
  auto it = tags_.find(tag);
  if (it == tags_.end()) throw Error(ErrorCode::UnknownTag, tag);
  return it->second;
}

const Mat& ProjectionField::P(const std::string& tag, const Point& x) const {
  const TagProjection& tp = at(tag);
  for (auto& w : tp.windows)
    if (x[0] >= w.lo[0] - 1e-12 && x[0] <= w.hi[0] + 1e-12 && x[1] >= w.lo[1] - 1e-12 &&
        x[1] <= w.hi[1] + 1e-12)
      return w.P;
  return tp.P;
}

void ProjectionField::validate() const {
  auto check = [&](const Mat& P, const std::string& tag) {
    if ((P * P - P).cwiseAbs().maxCoeff() > 1e-12) throw Error(ErrorCode::Config, "P not idempotent on " + tag);
    if ((P - P.transpose()).cwiseAbs().maxCoeff() > 1e-12)
      throw Error(ErrorCode::Config, "P not symmetric on " + tag);
  };
  for (auto& [tag, tp] : tags_) {
    check(tp.P, tag);
    for (auto& w : tp.windows) {
      if (w.P.rows() != n_ || w.P.cols() != n_) throw Error(ErrorCode::Config, "window projector size on " + tag);
      check(w.P, tag);
    }
    for (auto& e : tp.e0) {
      if (e.size() != n_ || std::abs(e.norm() - 1) > 1e-12)
        throw Error(ErrorCode::Config, "e0 must be a unit n-vector on " + tag);
      if ((tp.P * e).norm() > 1e-12) throw Error(ErrorCode::Config, "e0 not in ker P on " + tag);
      for (auto& w : tp.windows)
        if ((w.P * e).norm() > 1e-12) throw Error(ErrorCode::Config, "e0 not in ker P on " + tag);
    }
  }
}

Vec projection_apply(const ProjectionField& pf, const std::string& tag, const Vec& v, const Point& x) {
  return pf.P(tag, x) * v;
}

// ---------------------------------------------------------------- gamma

Point GammaChain::tangent(int s) const { return (points[s + 1] - points[s]).normalized(); }

namespace {
int segment_of(const std::vector<double>& alpha, double a) {
  const int ns = static_cast<int>(alpha.size()) - 1;
  int s = static_cast<int>(std::upper_bound(alpha.begin(), alpha.end(), a) - alpha.begin()) - 1;
  return std::clamp(s, 0, ns - 1);
}
}  // namespace

Point GammaChain::point_at(double a) const {
  const int s = segment_of(alpha, a);
  const double L = alpha[s + 1] - alpha[s];
  const double t = L > 0 ? std::clamp((a - alpha[s]) / L, 0.0, 1.0) : 0.0;
  return (1 - t) * points[s] + t * points[s + 1];
}

void GammaChain::traces_at(double a, Vec& zm, Vec& zp) const {
  if (!has_traces()) throw Error(ErrorCode::MissingTraces, "chain without traces");
  const int s = segment_of(alpha, a);
  const double L = alpha[s + 1] - alpha[s];
  const double t = L > 0 ? std::clamp((a - alpha[s]) / L, 0.0, 1.0) : 0.0;
  zm = (1 - t) * zminus[s] + t * zminus[s + 1];
  zp = (1 - t) * zplus[s] + t * zplus[s + 1];
}

GammaChain gamma_from_polyline(const std::vector<Point>& in, const Point& hint) {
  std::vector<Point> pts;
  for (auto& p : in)
    if (pts.empty() || (p - pts.back()).norm() > 0) pts.push_back(p);
  if (pts.size() < 2) throw Error(ErrorCode::TooShort, "chain needs two distinct points");
  const int ns = static_cast<int>(pts.size()) - 1;
  for (int i = 0; i < ns; ++i)
    for (int j = i + 2; j < ns; ++j)
      if (segments_cross(pts[i], pts[i + 1], pts[j], pts[j + 1]))
        throw Error(ErrorCode::SelfIntersecting, "chain crosses itself");
  GammaChain c;
  c.points = pts;
  c.alpha.assign(pts.size(), 0.0);
  double orient = 0;
  for (int s = 0; s < ns; ++s) {
    const Point d = pts[s + 1] - pts[s];
    c.alpha[s + 1] = c.alpha[s] + d.norm();
    const Point t = d.normalized();
    c.mu.emplace_back(-t[1], t[0]);
    orient += d.norm() * c.mu.back().dot(hint);
  }
  if (orient < 0)
    for (auto& m : c.mu) m = -m;
  return c;
}

namespace {

struct Closest {
  double dist;
  int seg;
  double alpha;
};

Closest closest_on(const GammaChain& c, const Point& p) {
  Closest best{std::numeric_limits<double>::infinity(), 0, 0};
  for (int s = 0; s < c.num_segments(); ++s) {
    const Point a = c.points[s], ab = c.points[s + 1] - a;
    const double L2 = ab.squaredNorm();
    const double t = L2 > 0 ? std::clamp((p - a).dot(ab) / L2, 0.0, 1.0) : 0.0;
    const double d = (a + t * ab - p).norm();
    if (d < best.dist) best = {d, s, c.alpha[s] + t * std::sqrt(L2)};
  }
  return best;
}

std::vector<std::pair<Point, double>> samples(const GammaChain& c, int per_seg) {
  std::vector<std::pair<Point, double>> out;
  for (int s = 0; s < c.num_segments(); ++s)
    for (int k = 0; k <= per_seg; ++k) {
      const double t = static_cast<double>(k) / per_seg;
      out.push_back({(1 - t) * c.points[s] + t * c.points[s + 1], (1 - t) * c.alpha[s] + t * c.alpha[s + 1]});
    }
  return out;
}

// One-sided Hausdorff distance and trace mismatch of a against b.
std::pair<double, double> one_sided(const DiscontinuitySet& a, const DiscontinuitySet& b) {
  double H = 0, T = 0;
  for (auto& ca : a.chains) {
    double sum = 0;
    int cnt = 0;
    for (auto& [p, al] : samples(ca, 8)) {
      Closest best{std::numeric_limits<double>::infinity(), 0, 0};
      int bc = -1;
      for (std::size_t k = 0; k < b.chains.size(); ++k) {
        Closest c = closest_on(b.chains[k], p);
        if (c.dist < best.dist) {
          best = c;
          bc = static_cast<int>(k);
        }
      }
      H = std::max(H, best.dist);
      const GammaChain& cb = b.chains[bc];
      if (ca.has_traces() && cb.has_traces()) {
        Vec am, ap, bm, bp;
        ca.traces_at(al, am, ap);
        cb.traces_at(best.alpha, bm, bp);
        const int sa = segment_of(ca.alpha, al);
        if (ca.mu[sa].dot(cb.mu[best.seg]) < 0) std::swap(bm, bp);
        sum += (am - bm).squaredNorm() + (ap - bp).squaredNorm();
        ++cnt;
      }
    }
    if (cnt) T = std::max(T, std::sqrt(sum / cnt));
  }
  return {H, T};
}

}  // namespace

double gamma_distance(const DiscontinuitySet& g1, const DiscontinuitySet& g2) {
  if (g1.empty() && g2.empty()) return 0.0;
  if (g1.empty() || g2.empty()) return std::numeric_limits<double>::infinity();
  auto [h12, t12] = one_sided(g1, g2);
  auto [h21, t21] = one_sided(g2, g1);
  return std::max(h12, h21) + std::max(t12, t21);
}

}  // namespace conslaw
