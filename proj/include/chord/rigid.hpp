#pragma once

#include "chord/common.hpp"

namespace chord {

// Proper rigid motion (rotation + translation), meters.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }

  Vec3 apply(const Vec3& x) const { return rotation * x + translation; }
  Vec3 operator()(const Vec3& x) const { return apply(x); }

  RigidTransform inverse() const {
    RigidTransform inv;
    inv.rotation = rotation.transpose();
    inv.translation = -(inv.rotation * translation);
    return inv;
  }

  // this ∘ other: applies `other` first.
  RigidTransform compose(const RigidTransform& other) const {
    RigidTransform out;
    out.rotation = rotation * other.rotation;
    out.translation = rotation * other.translation + translation;
    return out;
  }

  bool is_rotation(double tol = 1e-9) const {
    Mat3 err = rotation.transpose() * rotation - Mat3::Identity();
    return err.cwiseAbs().maxCoeff() <= tol &&
           std::abs(rotation.determinant() - 1.0) <= tol;
  }
};

inline RigidTransform operator*(const RigidTransform& a, const RigidTransform& b) {
  return a.compose(b);
}

inline Mat3 axis_angle_to_matrix(const Vec3& aa) {
  double angle = aa.norm();
  if (angle < 1e-12) {
    // First-order Rodrigues term keeps gradients sane near zero.
    Mat3 skew;
    skew << 0, -aa.z(), aa.y(), aa.z(), 0, -aa.x(), -aa.y(), aa.x(), 0;
    return Mat3::Identity() + skew;
  }
  return Eigen::AngleAxisd(angle, aa / angle).toRotationMatrix();
}

// Builds the object rotation from one or two predicted shape-aligned axes.
// Columns are (e1, e2, e1 x e2) with e1 = r1 normalized and e2 the
// Gram-Schmidt complement of r2. For one-axis symmetric categories r2 is
// absent and the frame is completed from world-up (world-x when r1 is
// within 1e-4 rad of up).
inline Mat3 rotation_from_decoupled_axes(const Vec3& r1,
                                         const Vec3* r2 = nullptr) {
  const double n1 = r1.norm();
  if (n1 <= 1e-8) throw ZeroAxis("rotation_from_decoupled_axes: |r1| <= 1e-8");
  const Vec3 e1 = r1 / n1;

  Vec3 cand;
  if (r2 != nullptr) {
    cand = *r2;
  } else {
    const Vec3 up(0, 0, 1);
    cand = (std::abs(e1.dot(up)) >= std::cos(1e-4)) ? Vec3(1, 0, 0) : up;
  }

  Vec3 e2 = cand - cand.dot(e1) * e1;
  const double n2 = e2.norm();
  // sin(angle between r1 and r2) = |e2| / |cand|; reject below 1e-4 rad.
  if (n2 <= 1e-4 * cand.norm() || cand.norm() <= 1e-8)
    throw DegenerateAxes("rotation_from_decoupled_axes: axes nearly parallel");
  e2 /= n2;

  Mat3 out;
  out.col(0) = e1;
  out.col(1) = e2;
  out.col(2) = e1.cross(e2);
  return out;
}

inline Mat3 rotation_from_decoupled_axes(const Vec3& r1, const Vec3& r2) {
  return rotation_from_decoupled_axes(r1, &r2);
}

}  // namespace chord
