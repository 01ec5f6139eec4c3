#pragma once

#include "chord/mesh.hpp"

namespace chord {

// Signed solid angle of triangle (a, b, c) seen from p, in steradians
// (van Oosterom & Strackee). Positive when the triangle winds
// counterclockwise as seen from p, i.e. its outward normal faces away.
inline double triangle_solid_angle(const Vec3& p, const Vec3& a, const Vec3& b,
                                   const Vec3& c) {
  Vec3 va = a - p, vb = b - p, vc = c - p;
  double la = va.norm(), lb = vb.norm(), lc = vc.norm();
  double det = va.dot(vb.cross(vc));
  double denom =
      la * lb * lc + va.dot(vb) * lc + vb.dot(vc) * la + vc.dot(va) * lb;
  return 2.0 * std::atan2(det, denom);
}

// Generalized winding number: ~1 inside a closed outward-oriented surface,
// ~0 outside; fractional for open geometry.
inline double winding_number(const TriMesh& mesh, const Vec3& p) {
  double omega = 0;
  for (const auto& [a, b, c] : mesh.faces)
    omega +=
        triangle_solid_angle(p, mesh.vertices[a], mesh.vertices[b], mesh.vertices[c]);
  return omega / (4.0 * M_PI);
}

inline bool inside_by_winding(const TriMesh& mesh, const Vec3& p) {
  return winding_number(mesh, p) >= 0.5;
}

}  // namespace chord
