#pragma once

#include "conslaw/common.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace conslaw {

/// Simple counterclockwise polygon; edge k joins vertex k to vertex k+1.
struct PolygonDomain {
  std::vector<Point> vertices;
  std::vector<std::string> edge_tags;

  static PolygonDomain rectangle(double x0, double x1, double y0, double y1,
                                 const std::string& bottom, const std::string& right,
                                 const std::string& top, const std::string& left);
  double signed_area() const;
  /// Throws DegeneratePolygon unless the polygon is simple, counterclockwise
  /// and fully tagged.
  void validate() const;
  bool is_axis_rectangle() const;
  bool contains(const Point& p) const;
  double diameter() const;
};

struct BoundaryEdge {
  std::array<int, 2> v;
  std::string tag;
  Point nu;
};

class SimplicialMesh {
 public:
  SimplicialMesh() = default;
  SimplicialMesh(std::vector<Point> nodes, std::vector<std::array<int, 3>> tris,
                 std::vector<BoundaryEdge> boundary);

  const std::vector<Point>& nodes() const { return nodes_; }
  const std::vector<std::array<int, 3>>& triangles() const { return tris_; }
  const std::vector<BoundaryEdge>& boundary() const { return boundary_; }
  int num_nodes() const { return static_cast<int>(nodes_.size()); }
  int num_triangles() const { return static_cast<int>(tris_.size()); }
  double h() const { return h_; }

  double area(int t) const;
  Point centroid(int t) const;
  /// Constant gradients of the three barycentric hats of triangle t.
  std::array<Point, 3> hat_gradients(int t) const;
  double min_angle_deg() const;
  double max_edge() const;
  bool is_boundary_node(int v) const { return boundary_node_[v]; }
  /// Tags of the boundary edges touching node v (sorted, unique).
  const std::vector<std::string>& node_tags(int v) const { return node_tags_[v]; }
  std::vector<std::string> tags() const;

  /// Triangle containing p with barycentric coordinates; -1 if outside.
  int locate(const Point& p, std::array<double, 3>* bary = nullptr, double tol = 1e-10) const;
  /// Triangles whose bounding box overlaps [lo, hi].
  std::vector<int> triangles_near(const Point& lo, const Point& hi) const;

  /// Stable content hash (nodes, connectivity, tags).
  std::uint64_t id() const;

  /// Interior-edge and Euler-formula conformity checks.
  bool is_conforming() const;

 private:
  void build();
  std::vector<Point> nodes_;
  std::vector<std::array<int, 3>> tris_;
  std::vector<BoundaryEdge> boundary_;
  double h_ = 0.0;
  std::vector<char> boundary_node_;
  std::vector<std::vector<std::string>> node_tags_;
  Point lo_, hi_;
  int gx_ = 1, gy_ = 1;
  std::vector<std::vector<int>> buckets_;
};

/// Structured right-triangle grid for axis-aligned rectangles, Delaunay
/// refinement with boundary preservation otherwise.
SimplicialMesh triangulate(const PolygonDomain& dom, double h_target, std::uint64_t seed = 0);

/// Per-tag boundary projector with optional box windows overriding P.
struct ProjectionWindow {
  Point lo, hi;
  Mat P;
};

struct TagProjection {
  Mat P;
  std::vector<Vec> e0;
  std::vector<ProjectionWindow> windows;
};

class ProjectionField {
 public:
  explicit ProjectionField(int n = 1) : n_(n) {}
  int n() const { return n_; }
  void set(const std::string& tag, TagProjection tp);
  bool has(const std::string& tag) const { return tags_.count(tag) > 0; }
  const TagProjection& at(const std::string& tag) const;
  /// P at boundary point x on an edge with this tag.
  const Mat& P(const std::string& tag, const Point& x) const;
  const std::map<std::string, TagProjection>& tags() const { return tags_; }
  /// Throws Config on a projector that is not a symmetric idempotent or
  /// an e0 direction outside ker P.
  void validate() const;

 private:
  int n_;
  std::map<std::string, TagProjection> tags_;
};

Vec projection_apply(const ProjectionField& pf, const std::string& tag, const Vec& v,
                     const Point& x = Point::Zero());

/// One polyline of the discontinuity set. Traces are per vertex; the plus
/// side is the one mu points into.
struct GammaChain {
  std::vector<Point> points;
  std::vector<Point> mu;
  std::vector<double> alpha;
  std::vector<Vec> zminus, zplus;
  bool unfitted = false;

  int num_segments() const { return static_cast<int>(points.size()) - 1; }
  double length() const { return alpha.empty() ? 0.0 : alpha.back(); }
  Point tangent(int s) const;
  bool has_traces() const { return zminus.size() == points.size() && zplus.size() == points.size(); }
  /// Position and linearly interpolated traces at arc length a.
  Point point_at(double a) const;
  void traces_at(double a, Vec& zm, Vec& zp) const;
};

struct DiscontinuitySet {
  std::vector<GammaChain> chains;
  bool empty() const { return chains.empty(); }
};

/// Builds a chain with mu the counterclockwise normal of the tangent,
/// flipped so that it has a nonnegative component along hint.
GammaChain gamma_from_polyline(const std::vector<Point>& pts, const Point& hint);

/// Symmetric Hausdorff distance of the chain point sets plus the
/// arc-length aligned trace mismatch; +inf when exactly one set is empty.
double gamma_distance(const DiscontinuitySet& g1, const DiscontinuitySet& g2);

double point_segment_distance(const Point& p, const Point& a, const Point& b);

}  // namespace conslaw
