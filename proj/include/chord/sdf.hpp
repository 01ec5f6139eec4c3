#pragma once

#include "chord/bvh.hpp"
#include "chord/winding.hpp"

#include <memory>

namespace chord {

// Signed distance to a watertight mesh: magnitude from the closest triangle,
// sign from the generalized winding number (>= 0.5 means inside, negative).
// Construct once per mesh; queries are pure and order-stable.
class MeshSdf {
 public:
  explicit MeshSdf(const TriMesh& mesh, bool require_watertight = true)
      : mesh_(mesh), bvh_(mesh_) {
    if (require_watertight && !is_watertight(mesh_))
      throw NotWatertight("MeshSdf: mesh is not watertight");
  }

  double operator()(const Vec3& p) const {
    double d = bvh_.distance(p);
    return inside_by_winding(mesh_, p) ? -d : d;
  }

  std::vector<double> batch(const std::vector<Vec3>& points) const {
    std::vector<double> out(points.size());
    parallel_for(0, points.size(), [&](std::size_t lo, std::size_t hi) {
      for (std::size_t i = lo; i < hi; ++i) out[i] = (*this)(points[i]);
    });
    return out;
  }

  const TriMesh& mesh() const { return mesh_; }
  const MeshBvh& bvh() const { return bvh_; }

 private:
  TriMesh mesh_;  // owned copy so the BVH stays valid
  MeshBvh bvh_;
};

inline std::vector<double> mesh_signed_distance(const TriMesh& mesh,
                                                const std::vector<Vec3>& points) {
  return MeshSdf(mesh).batch(points);
}

}  // namespace chord
