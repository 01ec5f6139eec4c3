#pragma once

#include "chord/sdf.hpp"
#include "chord/voxel.hpp"

namespace chord {

struct Box {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();

  Vec3 extent() const { return hi - lo; }

  Box expanded(double margin) const {
    return {lo - Vec3::Constant(margin), hi + Vec3::Constant(margin)};
  }

  static Box of(const TriMesh& mesh) {
    Box b;
    mesh.bounds(b.lo, b.hi);
    return b;
  }

  static Box hull(const Box& a, const Box& b) {
    return {a.lo.cwiseMin(b.lo), a.hi.cwiseMax(b.hi)};
  }
};

namespace detail {

// Crossings of a +x ray with a candidate face set, plus the smallest
// barycentric margin seen; a tiny margin means the ray grazed an edge and
// parity cannot be trusted for this row.
struct RowCrossings {
  std::vector<double> ts;
  double min_margin = std::numeric_limits<double>::infinity();

  void collect(const TriMesh& mesh, const std::vector<int>& candidates,
               const Vec3& origin) {
    ts.clear();
    min_margin = std::numeric_limits<double>::infinity();
    const Vec3 dir(1, 0, 0);
    for (int f : candidates) {
      const auto& [ia, ib, ic] = mesh.faces[f];
      const Vec3& a = mesh.vertices[ia];
      Vec3 e1 = mesh.vertices[ib] - a;
      Vec3 e2 = mesh.vertices[ic] - a;
      Vec3 pv = dir.cross(e2);
      double det = e1.dot(pv);
      if (std::abs(det) < 1e-14) continue;  // x-degenerate; grazing test below
      double inv_det = 1.0 / det;
      Vec3 tv = origin - a;
      double u = tv.dot(pv) * inv_det;
      if (u < -1e-9 || u > 1 + 1e-9) continue;
      Vec3 qv = tv.cross(e1);
      double v = dir.dot(qv) * inv_det;
      if (v < -1e-9 || u + v > 1 + 1e-9) continue;
      double margin = std::min({u, v, 1.0 - u - v});
      min_margin = std::min(min_margin, margin);
      if (margin >= 0) ts.push_back(e2.dot(qv) * inv_det);
    }
    std::sort(ts.begin(), ts.end());
  }
};

}  // namespace detail

// Occupancy grid over `bounds`: a cell is 1 iff its center is inside the
// mesh (winding number >= 0.5). Cells are cubes sized by the longest axis /
// resolution; counts per axis adapt to cover the box. Row-parity raycasts
// (faces binned by their y/z footprint) do the bulk of the work, with exact
// winding evaluation wherever a ray grazes an edge or a crossing lands too
// close to a cell center.
inline VoxelGrid voxelize(const TriMesh& mesh, int resolution, const Box& bounds) {
  if (resolution < 8) throw Error("voxelize: resolution must be >= 8");
  if (!is_watertight(mesh)) throw NotWatertight("voxelize: mesh not watertight");

  const Vec3 extent = bounds.extent();
  const double cell = extent.maxCoeff() / resolution;
  if (cell <= 0) throw Error("voxelize: empty bounds");
  std::array<int, 3> res;
  for (int a = 0; a < 3; ++a)
    res[a] = std::max(2, int(std::ceil(extent[a] / cell - 1e-9)));

  VoxelGrid grid = VoxelGrid::make(bounds.lo + Vec3::Constant(cell / 2), cell,
                                   res, 1, "occupancy");

  // Bin faces by the rows their y/z bounding rectangle covers.
  std::vector<std::vector<int>> bins(std::size_t(res[1]) * res[2]);
  const double y0 = grid.origin.y(), z0 = grid.origin.z();
  for (int f = 0; f < int(mesh.faces.size()); ++f) {
    const auto& [a, b, c] = mesh.faces[f];
    double ylo = std::min({mesh.vertices[a].y(), mesh.vertices[b].y(),
                           mesh.vertices[c].y()});
    double yhi = std::max({mesh.vertices[a].y(), mesh.vertices[b].y(),
                           mesh.vertices[c].y()});
    double zlo = std::min({mesh.vertices[a].z(), mesh.vertices[b].z(),
                           mesh.vertices[c].z()});
    double zhi = std::max({mesh.vertices[a].z(), mesh.vertices[b].z(),
                           mesh.vertices[c].z()});
    int jlo = std::max(0, int(std::ceil((ylo - y0) / cell - 1e-9)));
    int jhi = std::min(res[1] - 1, int(std::floor((yhi - y0) / cell + 1e-9)));
    int klo = std::max(0, int(std::ceil((zlo - z0) / cell - 1e-9)));
    int khi = std::min(res[2] - 1, int(std::floor((zhi - z0) / cell + 1e-9)));
    for (int k = klo; k <= khi; ++k)
      for (int j = jlo; j <= jhi; ++j) bins[std::size_t(k) * res[1] + j].push_back(f);
  }

  const double safety = cell * 1e-6;
  parallel_for(0, std::size_t(res[2]), [&](std::size_t klo, std::size_t khi) {
    detail::RowCrossings row;
    for (std::size_t k = klo; k < khi; ++k)
      for (int j = 0; j < res[1]; ++j) {
        const auto& candidates = bins[k * res[1] + j];
        if (candidates.empty()) continue;  // row stays 0
        Vec3 origin(bounds.lo.x() - cell, grid.position(0, j, int(k)).y(),
                    grid.position(0, j, int(k)).z());
        row.collect(mesh, candidates, origin);
        bool row_ok = row.min_margin > 1e-9 && row.ts.size() % 2 == 0;
        std::size_t cursor = 0;
        bool inside = false;
        for (int i = 0; i < res[0]; ++i) {
          double tx = grid.position(i, j, int(k)).x() - origin.x();
          bool ambiguous = !row_ok;
          while (cursor < row.ts.size() && row.ts[cursor] < tx) {
            if (tx - row.ts[cursor] < safety) ambiguous = true;
            inside = !inside;
            ++cursor;
          }
          if (cursor < row.ts.size() && row.ts[cursor] - tx < safety)
            ambiguous = true;
          bool occ = ambiguous
                         ? inside_by_winding(mesh, grid.position(i, j, int(k)))
                         : inside;
          grid.at(i, j, int(k)) = occ ? 1.0 : 0.0;
        }
      }
  }, 1);

  return grid;
}

inline double occupied_volume(const VoxelGrid& grid) {
  double cells = 0;
  for (double v : grid.values) cells += (v >= 0.5) ? 1.0 : 0.0;
  return cells * grid.cell_size * grid.cell_size * grid.cell_size;
}

}  // namespace chord
