#pragma once

#include "chord/mesh.hpp"

#include <numeric>

namespace chord {

// Closest point on triangle abc to p (Ericson, Real-Time Collision Detection).
inline Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b,
                                      const Vec3& c) {
  Vec3 ab = b - a, ac = c - a, ap = p - a;
  double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return a;

  Vec3 bp = p - b;
  double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return b;

  double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return a + (d1 / (d1 - d3)) * ab;

  Vec3 cp = p - c;
  double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return c;

  double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return a + (d2 / (d2 - d6)) * ac;

  double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0)
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);

  double denom = 1.0 / (va + vb + vc);
  return a + (vb * denom) * ab + (vc * denom) * ac;
}

struct RayHit {
  double t = std::numeric_limits<double>::infinity();
  int face = -1;
  bool valid() const { return face >= 0; }
};

// Median-split AABB tree over the faces of one mesh. The mesh must outlive
// the tree. Queries: closest surface point and nearest ray hit (ties broken
// by smallest face index).
class MeshBvh {
 public:
  explicit MeshBvh(const TriMesh& mesh) : mesh_(&mesh) {
    const std::size_t n = mesh.faces.size();
    order_.resize(n);
    std::iota(order_.begin(), order_.end(), 0);
    centroids_.resize(n);
    for (std::size_t f = 0; f < n; ++f) {
      const auto& [a, b, c] = mesh.faces[f];
      centroids_[f] =
          (mesh.vertices[a] + mesh.vertices[b] + mesh.vertices[c]) / 3.0;
    }
    if (n > 0) {
      nodes_.reserve(2 * n);
      build(0, n);
    }
  }

  const TriMesh& mesh() const { return *mesh_; }

  // Closest point on the surface; also reports the owning face.
  Vec3 closest_point(const Vec3& p, int* face_out = nullptr) const {
    double best = std::numeric_limits<double>::infinity();
    Vec3 best_pt = Vec3::Zero();
    int best_face = -1;
    if (!nodes_.empty()) closest_rec(0, p, best, best_pt, best_face);
    if (face_out) *face_out = best_face;
    return best_pt;
  }

  double distance(const Vec3& p) const {
    if (nodes_.empty()) return std::numeric_limits<double>::infinity();
    return (closest_point(p) - p).norm();
  }

  RayHit raycast(const Vec3& origin, const Vec3& dir) const {
    RayHit hit;
    if (!nodes_.empty()) raycast_rec(0, origin, dir, hit);
    return hit;
  }

 private:
  struct Node {
    Vec3 lo, hi;
    int left = -1, right = -1;     // children, or
    int begin = 0, count = 0;      // leaf range into order_
    bool leaf() const { return count > 0; }
  };

  int build(std::size_t begin, std::size_t end) {
    Node node;
    node.lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    node.hi = -node.lo;
    for (std::size_t i = begin; i < end; ++i)
      for (int v : mesh_->faces[order_[i]]) {
        node.lo = node.lo.cwiseMin(mesh_->vertices[v]);
        node.hi = node.hi.cwiseMax(mesh_->vertices[v]);
      }
    int id = int(nodes_.size());
    nodes_.push_back(node);
    if (end - begin <= 4) {
      nodes_[id].begin = int(begin);
      nodes_[id].count = int(end - begin);
      // keep face-index order inside leaves for deterministic tie-breaks
      std::sort(order_.begin() + begin, order_.begin() + end);
      return id;
    }
    Vec3 extent = node.hi - node.lo;
    int axis = 0;
    if (extent.y() > extent.x()) axis = 1;
    if (extent.z() > extent[axis]) axis = 2;
    std::size_t mid = (begin + end) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid,
                     order_.begin() + end, [&](std::size_t a, std::size_t b) {
                       double ca = centroids_[a][axis], cb = centroids_[b][axis];
                       return ca < cb || (ca == cb && a < b);
                     });
    int left = build(begin, mid);
    int right = build(mid, end);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  static double box_distance2(const Node& n, const Vec3& p) {
    Vec3 d = (n.lo - p).cwiseMax(p - n.hi).cwiseMax(0.0);
    return d.squaredNorm();
  }

  void closest_rec(int id, const Vec3& p, double& best, Vec3& best_pt,
                   int& best_face) const {
    const Node& node = nodes_[id];
    if (box_distance2(node, p) >= best) return;
    if (node.leaf()) {
      for (int i = node.begin; i < node.begin + node.count; ++i) {
        int f = int(order_[i]);
        const auto& [a, b, c] = mesh_->faces[f];
        Vec3 q = closest_point_on_triangle(p, mesh_->vertices[a],
                                           mesh_->vertices[b], mesh_->vertices[c]);
        double d2 = (q - p).squaredNorm();
        if (d2 < best || (d2 == best && f < best_face)) {
          best = d2;
          best_pt = q;
          best_face = f;
        }
      }
      return;
    }
    double dl = box_distance2(nodes_[node.left], p);
    double dr = box_distance2(nodes_[node.right], p);
    if (dl <= dr) {
      closest_rec(node.left, p, best, best_pt, best_face);
      closest_rec(node.right, p, best, best_pt, best_face);
    } else {
      closest_rec(node.right, p, best, best_pt, best_face);
      closest_rec(node.left, p, best, best_pt, best_face);
    }
  }

  static bool box_hit(const Node& n, const Vec3& o, const Vec3& inv_dir,
                      double t_max) {
    double t0 = 0, t1 = t_max;
    for (int a = 0; a < 3; ++a) {
      double ta = (n.lo[a] - o[a]) * inv_dir[a];
      double tb = (n.hi[a] - o[a]) * inv_dir[a];
      if (ta > tb) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
      if (t0 > t1) return false;
    }
    return true;
  }

  void raycast_rec(int id, const Vec3& o, const Vec3& d, RayHit& hit) const {
    const Node& node = nodes_[id];
    Vec3 inv(1.0 / d.x(), 1.0 / d.y(), 1.0 / d.z());
    if (!box_hit(node, o, inv, hit.t)) return;
    if (node.leaf()) {
      for (int i = node.begin; i < node.begin + node.count; ++i) {
        int f = int(order_[i]);
        double t;
        if (ray_triangle(o, d, f, t) &&
            (t < hit.t || (t == hit.t && f < hit.face))) {
          hit.t = t;
          hit.face = f;
        }
      }
      return;
    }
    raycast_rec(node.left, o, d, hit);
    raycast_rec(node.right, o, d, hit);
  }

  // Moller-Trumbore; front and back faces both count.
  bool ray_triangle(const Vec3& o, const Vec3& d, int f, double& t) const {
    const auto& [ia, ib, ic] = mesh_->faces[f];
    const Vec3& a = mesh_->vertices[ia];
    Vec3 e1 = mesh_->vertices[ib] - a;
    Vec3 e2 = mesh_->vertices[ic] - a;
    Vec3 pv = d.cross(e2);
    double det = e1.dot(pv);
    if (std::abs(det) < 1e-14) return false;
    double inv_det = 1.0 / det;
    Vec3 tv = o - a;
    double u = tv.dot(pv) * inv_det;
    if (u < 0 || u > 1) return false;
    Vec3 qv = tv.cross(e1);
    double v = d.dot(qv) * inv_det;
    if (v < 0 || u + v > 1) return false;
    t = e2.dot(qv) * inv_det;
    return t > 1e-12;
  }

  const TriMesh* mesh_;
  std::vector<std::size_t> order_;
  std::vector<Vec3> centroids_;
  std::vector<Node> nodes_;
};

}  // namespace chord
