#pragma once

#include "chord/mc_tables.hpp"
#include "chord/voxel.hpp"
#include "chord/mesh.hpp"

#include <unordered_map>

namespace chord {

// Extracts the iso-surface of a scalar lattice. Values below `iso` are
// inside; output triangles face outward (toward increasing values). Vertices
// lie on cell edges by linear interpolation and are welded across cells, so
// a closed surface strictly inside the grid comes out watertight.
inline TriMesh marching_cubes(const VoxelGrid& grid, double iso = 0.0) {
  if (grid.channels != 1) throw Error("marching_cubes: needs a scalar grid");
  const int nx = grid.resolution[0], ny = grid.resolution[1],
            nz = grid.resolution[2];
  if (nx < 2 || ny < 2 || nz < 2)
    throw Error("marching_cubes: resolution must be >= 2 per axis");

  TriMesh out;
  std::unordered_map<std::uint64_t, int> edge_vertex;
  edge_vertex.reserve(1024);

  auto node_id = [&](int i, int j, int k) {
    return (std::uint64_t(k) * ny + j) * nx + i;
  };

  // Vertex on the edge leaving node (i,j,k) along `axis`, interpolated once
  // and shared by every cell that touches the edge.
  auto edge_point = [&](int i, int j, int k, int axis, double v0, double v1) {
    std::uint64_t key = node_id(i, j, k) * 3 + std::uint64_t(axis);
    auto it = edge_vertex.find(key);
    if (it != edge_vertex.end()) return it->second;
    double t = (iso - v0) / (v1 - v0);
    Vec3 p = grid.position(i, j, k);
    p[axis] += t * grid.cell_size;
    int idx = int(out.vertices.size());
    out.vertices.push_back(p);
    edge_vertex.emplace(key, idx);
    return idx;
  };

  double corner_val[8];
  int corner_node[8][3];
  for (int k = 0; k + 1 < nz; ++k)
    for (int j = 0; j + 1 < ny; ++j)
      for (int i = 0; i + 1 < nx; ++i) {
        int cube = 0;
        for (int c = 0; c < 8; ++c) {
          corner_node[c][0] = i + mc::kCornerOffset[c][0];
          corner_node[c][1] = j + mc::kCornerOffset[c][1];
          corner_node[c][2] = k + mc::kCornerOffset[c][2];
          corner_val[c] =
              grid.at(corner_node[c][0], corner_node[c][1], corner_node[c][2]);
          if (corner_val[c] < iso) cube |= 1 << c;
        }
        if (mc::kEdgeTable[cube] == 0) continue;

        int edge_idx[12];
        for (int e = 0; e < 12; ++e) {
          if (!(mc::kEdgeTable[cube] & (1u << e))) continue;
          int c0 = mc::kEdgeCorners[e][0], c1 = mc::kEdgeCorners[e][1];
          // orient the edge from the lower-indexed lattice node
          int axis = 0;
          for (int a = 0; a < 3; ++a)
            if (corner_node[c0][a] != corner_node[c1][a]) axis = a;
          bool swap = corner_node[c0][axis] > corner_node[c1][axis];
          int lo = swap ? c1 : c0, hi = swap ? c0 : c1;
          edge_idx[e] =
              edge_point(corner_node[lo][0], corner_node[lo][1],
                         corner_node[lo][2], axis, corner_val[lo], corner_val[hi]);
        }

        for (int t = 0; mc::kTriTable[cube][t] != -1; t += 3) {
          int a = edge_idx[mc::kTriTable[cube][t]];
          int b = edge_idx[mc::kTriTable[cube][t + 1]];
          int c = edge_idx[mc::kTriTable[cube][t + 2]];
          if (a == b || b == c || a == c) continue;  // degenerate sliver
          out.faces.push_back({a, c, b});            // outward orientation
        }
      }
  return out;
}

}  // namespace chord
