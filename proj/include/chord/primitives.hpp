#pragma once

#include "chord/mesh.hpp"

#include <cmath>
#include <map>

namespace chord {

// Icosphere: subdivided icosahedron, watertight, genus 0.
inline TriMesh make_icosphere(double radius, int subdivisions,
                              const Vec3& center = Vec3::Zero()) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  TriMesh m;
  m.vertices = {{-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0},
                {0, -1, t}, {0, 1, t},  {0, -1, -t}, {0, 1, -t},
                {t, 0, -1}, {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
  m.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
             {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
             {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
             {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (auto& v : m.vertices) v.normalize();

  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> midpoints;
    auto midpoint = [&](int a, int b) {
      auto key = std::minmax(a, b);
      auto it = midpoints.find(key);
      if (it != midpoints.end()) return it->second;
      int idx = int(m.vertices.size());
      m.vertices.push_back(((m.vertices[a] + m.vertices[b]) * 0.5).normalized());
      midpoints[key] = idx;
      return idx;
    };
    std::vector<std::array<int, 3>> faces;
    faces.reserve(m.faces.size() * 4);
    for (const auto& [a, b, c] : m.faces) {
      int ab = midpoint(a, b), bc = midpoint(b, c), ca = midpoint(c, a);
      faces.push_back({a, ab, ca});
      faces.push_back({b, bc, ab});
      faces.push_back({c, ca, bc});
      faces.push_back({ab, bc, ca});
    }
    m.faces = std::move(faces);
  }
  for (auto& v : m.vertices) v = center + radius * v;
  return m;
}

// Torus around the z axis: major radius R (ring), minor radius r (tube).
// Watertight, genus 1.
inline TriMesh make_torus(double R, double r, int segments_u = 48,
                          int segments_v = 24) {
  TriMesh m;
  for (int i = 0; i < segments_u; ++i) {
    double u = 2.0 * M_PI * i / segments_u;
    for (int j = 0; j < segments_v; ++j) {
      double v = 2.0 * M_PI * j / segments_v;
      double w = R + r * std::cos(v);
      m.vertices.emplace_back(w * std::cos(u), w * std::sin(u), r * std::sin(v));
    }
  }
  auto idx = [&](int i, int j) {
    return (i % segments_u) * segments_v + (j % segments_v);
  };
  for (int i = 0; i < segments_u; ++i)
    for (int j = 0; j < segments_v; ++j) {
      int a = idx(i, j), b = idx(i + 1, j), c = idx(i + 1, j + 1), d = idx(i, j + 1);
      m.faces.push_back({a, b, c});
      m.faces.push_back({a, c, d});
    }
  return m;
}

// Axis-aligned box from two triangles per side, outward faces.
inline TriMesh make_box(const Vec3& lo, const Vec3& hi) {
  TriMesh m;
  for (int i = 0; i < 8; ++i)
    m.vertices.emplace_back(i & 1 ? hi.x() : lo.x(), i & 2 ? hi.y() : lo.y(),
                            i & 4 ? hi.z() : lo.z());
  const int quads[6][4] = {{0, 2, 3, 1}, {4, 5, 7, 6}, {0, 1, 5, 4},
                           {2, 6, 7, 3}, {0, 4, 6, 2}, {1, 3, 7, 5}};
  for (const auto& q : quads) {
    m.faces.push_back({q[0], q[1], q[2]});
    m.faces.push_back({q[0], q[2], q[3]});
  }
  return m;
}

// Single quad (two triangles) centered at `center`, spanning `ux` and `uy`.
inline TriMesh make_quad(const Vec3& center, const Vec3& ux, const Vec3& uy) {
  TriMesh m;
  m.vertices = {center - ux - uy, center + ux - uy, center + ux + uy,
                center - ux + uy};
  m.faces = {{0, 1, 2}, {0, 2, 3}};
  return m;
}

}  // namespace chord
