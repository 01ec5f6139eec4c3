#pragma once

#include "chord/rigid.hpp"

namespace chord {

// Pinhole camera. `pose` maps world to camera coordinates; pixel (u, v) has
// its center at integer coordinates, u along +x (columns), v along +y (rows).
struct Camera {
  double fx = 100, fy = 100, cx = 31.5, cy = 31.5;
  RigidTransform pose;  // world -> camera
  int width = 64, height = 64;

  bool valid() const { return fx > 0 && fy > 0 && width >= 8 && height >= 8; }

  Vec3 to_camera(const Vec3& world) const { return pose.apply(world); }
};

// Projects a camera-space point to pixels.
inline Vec2 project(const Vec3& x, const Camera& cam) {
  if (x.z() <= 0) throw BehindCamera("project: point has z <= 0");
  return Vec2(cam.fx * x.x() / x.z() + cam.cx, cam.fy * x.y() / x.z() + cam.cy);
}

inline Vec2 project_world(const Vec3& world, const Camera& cam) {
  return project(cam.to_camera(world), cam);
}

// Camera positioned at `eye` looking at `target`; world->camera transform.
inline RigidTransform look_at(const Vec3& eye, const Vec3& target,
                              const Vec3& up_hint = Vec3(0, 0, 1)) {
  Vec3 fwd = (target - eye).normalized();
  Vec3 right = fwd.cross(up_hint);
  if (right.norm() < 1e-6) right = fwd.cross(Vec3(0, 1, 0));
  right.normalize();
  Vec3 down = fwd.cross(right).normalized();  // +y in image space
  Mat3 r_cw;                                  // camera -> world columns
  r_cw.col(0) = right;
  r_cw.col(1) = down;
  r_cw.col(2) = fwd;
  RigidTransform w2c;
  w2c.rotation = r_cw.transpose();
  w2c.translation = -(w2c.rotation * eye);
  return w2c;
}

}  // namespace chord
