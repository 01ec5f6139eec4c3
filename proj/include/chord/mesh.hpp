#pragma once

#include "chord/common.hpp"
#include "chord/rigid.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <utility>

namespace chord {

// Indexed triangle mesh, vertices in meters.
struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;

  bool empty() const { return faces.empty(); }
  std::size_t vertex_count() const { return vertices.size(); }
  std::size_t face_count() const { return faces.size(); }

  Vec3 face_normal(std::size_t f) const {
    const auto& [a, b, c] = faces[f];
    return (vertices[b] - vertices[a]).cross(vertices[c] - vertices[a]);
  }

  double face_area(std::size_t f) const { return 0.5 * face_normal(f).norm(); }

  double area() const {
    double s = 0;
    for (std::size_t f = 0; f < faces.size(); ++f) s += face_area(f);
    return s;
  }

  // Signed volume via the divergence theorem; positive for outward faces.
  double signed_volume() const {
    double v = 0;
    for (const auto& [a, b, c] : faces)
      v += vertices[a].dot(vertices[b].cross(vertices[c]));
    return v / 6.0;
  }

  void bounds(Vec3& lo, Vec3& hi) const {
    lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    hi = -lo;
    for (const auto& v : vertices) {
      lo = lo.cwiseMin(v);
      hi = hi.cwiseMax(v);
    }
  }

  double bounding_radius() const {
    double r2 = 0;
    for (const auto& v : vertices) r2 = std::max(r2, v.squaredNorm());
    return std::sqrt(r2);
  }

  void transform(const RigidTransform& t) {
    for (auto& v : vertices) v = t.apply(v);
  }

  TriMesh transformed(const RigidTransform& t) const {
    TriMesh out = *this;
    out.transform(t);
    return out;
  }

  void check_indices() const {
    const int n = int(vertices.size());
    for (const auto& f : faces)
      for (int idx : f)
        if (idx < 0 || idx >= n) throw Error("TriMesh: face index out of range");
  }
};

// Undirected edge -> number of incident faces.
inline std::map<std::pair<int, int>, int> edge_face_counts(const TriMesh& mesh) {
  std::map<std::pair<int, int>, int> counts;
  for (const auto& f : mesh.faces)
    for (int k = 0; k < 3; ++k) {
      int a = f[k], b = f[(k + 1) % 3];
      if (a > b) std::swap(a, b);
      ++counts[{a, b}];
    }
  return counts;
}

inline bool is_edge_manifold(const TriMesh& mesh) {
  for (const auto& [e, c] : edge_face_counts(mesh))
    if (c > 2) return false;
  return true;
}

// Every edge shared by exactly two faces.
inline bool is_watertight(const TriMesh& mesh) {
  if (mesh.empty()) return false;
  for (const auto& [e, c] : edge_face_counts(mesh))
    if (c != 2) return false;
  return true;
}

// V - E + F with E counted over unique undirected edges. 2 - 2g for a
// closed genus-g surface; additive over connected components.
inline int euler_characteristic(const TriMesh& mesh) {
  auto counts = edge_face_counts(mesh);
  for (const auto& [e, c] : counts)
    if (c > 2) throw NonManifold("euler_characteristic: edge with >2 faces");
  return int(mesh.vertices.size()) - int(counts.size()) + int(mesh.faces.size());
}

// Area-weighted surface sampling, deterministic given seed.
inline std::vector<Vec3> sample_surface_points(const TriMesh& mesh, std::size_t n,
                                               std::uint64_t seed) {
  if (mesh.faces.empty()) throw EmptyMesh("sample_surface_points: no faces");
  std::vector<double> cdf(mesh.faces.size());
  double total = 0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    total += mesh.face_area(f);
    cdf[f] = total;
  }
  if (total <= 0) throw EmptyMesh("sample_surface_points: zero total area");

  Rng rng(seed);
  std::vector<Vec3> pts;
  pts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    double target = rng.uniform() * total;
    auto it = std::lower_bound(cdf.begin(), cdf.end(), target);
    std::size_t f = std::min<std::size_t>(it - cdf.begin(), cdf.size() - 1);
    double r1 = std::sqrt(rng.uniform());
    double r2 = rng.uniform();
    const auto& [a, b, c] = mesh.faces[f];
    pts.push_back((1 - r1) * mesh.vertices[a] + r1 * (1 - r2) * mesh.vertices[b] +
                  r1 * r2 * mesh.vertices[c]);
  }
  return pts;
}

// ---------------------------------------------------------------------------
// ASCII OBJ, v/f records only, 1-based indices.
// ---------------------------------------------------------------------------

inline void save_obj(const TriMesh& mesh, std::ostream& os) {
  char buf[128];
  for (const auto& v : mesh.vertices) {
    std::snprintf(buf, sizeof(buf), "v %.9g %.9g %.9g\n", v.x(), v.y(), v.z());
    os << buf;
  }
  for (const auto& f : mesh.faces) {
    std::snprintf(buf, sizeof(buf), "f %d %d %d\n", f[0] + 1, f[1] + 1, f[2] + 1);
    os << buf;
  }
}

inline void save_obj(const TriMesh& mesh, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("save_obj: cannot open " + path);
  save_obj(mesh, os);
}

inline TriMesh load_obj(std::istream& is) {
  TriMesh mesh;
  std::string line;
  while (std::getline(is, line)) {
    if (line.size() < 2) continue;
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "v") {
      Vec3 v;
      ss >> v.x() >> v.y() >> v.z();
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::array<int, 3> f{};
      for (int k = 0; k < 3; ++k) {
        std::string tok;
        ss >> tok;
        f[k] = std::atoi(tok.c_str()) - 1;  // ignore optional /vt/vn suffixes
      }
      mesh.faces.push_back(f);
    }
  }
  mesh.check_indices();
  return mesh;
}

inline TriMesh load_obj(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("load_obj: cannot open " + path);
  return load_obj(is);
}

}  // namespace chord
