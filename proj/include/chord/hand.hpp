#pragma once

#include "chord/marching_cubes.hpp"
#include "chord/primitives.hpp"
#include "chord/rigid.hpp"
#include "chord/bvh.hpp"

#include <nlohmann/json.hpp>

namespace chord {

// 16-joint articulated proxy hand: wrist root plus three joints per finger
// (thumb, index, middle, ring, pinky). The skinned surface is extracted once
// from a capsule-union field, so it is watertight by construction. Fingers
// extend along +x in the rest pose; the palm faces -z; curling is a positive
// rotation about the local y axis.
struct HandModel {
  static constexpr int kJoints = 16;
  static constexpr int kKeypoints = 21;  // joints + 5 fingertip sites

  TriMesh template_mesh;
  MatX skin_weights;               // V x 16, nonnegative rows summing to 1
  std::array<int, 16> parent;      // tree rooted at 0
  std::array<Vec3, 16> rest_offset;  // joint position in parent frame
  std::array<int, 16> finger_of;   // -1 for root, else 0..4
  std::array<Vec3, 5> tip_site;    // template-space fingertip points
  std::array<int, 5> tip_bone;     // distal joint each site follows
  std::array<Vec3, 16> rest_joint; // absolute rest positions (derived)

  int joint_of(int finger, int link) const { return 1 + 3 * finger + link; }
};

struct HandPose {
  std::array<Vec3, 16> theta{};  // axis-angle per joint; theta[0] is unused,
                                 // the root motion lives in `root`
  std::array<double, 10> beta;   // 5 finger length + 5 finger thickness scales
  RigidTransform root;

  HandPose() { beta.fill(1.0); }

  void validate() const {
    for (const auto& aa : theta)
      if (!(aa.norm() < M_PI)) throw InvalidPose("HandPose: |theta| must be < pi");
    for (double b : beta)
      if (!(b >= 0.7 && b <= 1.3)) throw InvalidPose("HandPose: beta outside [0.7, 1.3]");
    if (!root.is_rotation(1e-6) || !root.translation.allFinite())
      throw InvalidPose("HandPose: invalid root transform");
  }
};

using JointFrames = std::array<RigidTransform, 16>;

namespace detail {

inline double capsule_sdf(const Vec3& p, const Vec3& a, const Vec3& b, double r) {
  Vec3 ab = b - a, ap = p - a;
  double t = ab.squaredNorm() > 0 ? ap.dot(ab) / ab.squaredNorm() : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (ap - t * ab).norm() - r;
}

inline double rounded_box_sdf(const Vec3& p, const Vec3& center,
                              const Vec3& half, double r) {
  Vec3 q = (p - center).cwiseAbs() - half;
  return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0) - r;
}

}  // namespace detail

// Builds the proxy hand. Deterministic; `mesh_cell` trades template
// resolution against vertex count (the 7.5 mm default gives ~1000 vertices).
inline HandModel make_hand_model(double mesh_cell = 0.0075) {
  HandModel m;
  m.parent[0] = -1;
  m.finger_of[0] = -1;

  // Finger base positions and phalanx lengths (meters).
  const Vec3 base[5] = {
      {0.030, 0.052, 0.0},   // thumb, off the palm edge
      {0.092, 0.033, 0.0},   // index
      {0.095, 0.011, 0.0},   // middle
      {0.092, -0.011, 0.0},  // ring
      {0.086, -0.033, 0.0},  // pinky
  };
  const double phalanx[5][3] = {
      {0.032, 0.026, 0.022},  // thumb
      {0.034, 0.023, 0.019},
      {0.038, 0.026, 0.020},
      {0.034, 0.023, 0.019},
      {0.028, 0.019, 0.016},
  };
  const double radius[5] = {0.0095, 0.0080, 0.0082, 0.0078, 0.0070};

  for (int f = 0; f < 5; ++f) {
    for (int l = 0; l < 3; ++l) {
      int j = m.joint_of(f, l);
      m.parent[j] = l == 0 ? 0 : j - 1;
      m.rest_offset[j] = l == 0 ? base[f] : Vec3(phalanx[f][l - 1], 0, 0);
      m.finger_of[j] = f;
    }
    m.tip_bone[f] = m.joint_of(f, 2);
  }
  m.rest_offset[0] = Vec3::Zero();
  m.rest_joint[0] = Vec3::Zero();
  for (int j = 1; j < 16; ++j)
    m.rest_joint[j] = m.rest_joint[m.parent[j]] + m.rest_offset[j];
  for (int f = 0; f < 5; ++f)
    m.tip_site[f] = m.rest_joint[m.tip_bone[f]] + Vec3(phalanx[f][2], 0, 0);

  // Template surface: palm slab + wrist stub + finger capsules.
  auto hand_sdf = [&](const Vec3& p) {
    double d = detail::rounded_box_sdf(p, Vec3(0.046, 0.0, 0.0),
                                       Vec3(0.040, 0.037, 0.009), 0.006);
    d = std::min(d, detail::capsule_sdf(p, Vec3(-0.028, 0, 0), Vec3(0.005, 0, 0),
                                        0.016));
    for (int f = 0; f < 5; ++f) {
      const Vec3* prev = &m.rest_joint[m.joint_of(f, 0)];
      // connect the finger base to the palm
      d = std::min(d, detail::capsule_sdf(p, Vec3(0.046, base[f].y() * 0.6, 0),
                                          *prev, radius[f]));
      for (int l = 1; l < 3; ++l) {
        const Vec3* next = &m.rest_joint[m.joint_of(f, l)];
        d = std::min(d, detail::capsule_sdf(p, *prev, *next, radius[f]));
        prev = next;
      }
      d = std::min(d, detail::capsule_sdf(p, *prev, m.tip_site[f], radius[f]));
    }
    return d;
  };

  Vec3 lo(-0.055, -0.065, -0.035), hi(0.205, 0.085, 0.035);
  std::array<int, 3> res;
  for (int a = 0; a < 3; ++a)
    res[a] = int(std::ceil((hi[a] - lo[a]) / mesh_cell)) + 1;
  VoxelGrid grid = VoxelGrid::make(lo, mesh_cell, res, 1, "sdf");
  for (int k = 0; k < res[2]; ++k)
    for (int j = 0; j < res[1]; ++j)
      for (int i = 0; i < res[0]; ++i)
        grid.at(i, j, k) = hand_sdf(grid.position(i, j, k));
  m.template_mesh = marching_cubes(grid);

  // Skinning weights from distance to bone segments (top-4, Gaussian falloff).
  struct BoneSeg { Vec3 a, b; };
  std::array<BoneSeg, 16> bones;
  bones[0] = {Vec3(-0.028, 0, 0), Vec3(0.080, 0, 0)};
  for (int f = 0; f < 5; ++f)
    for (int l = 0; l < 3; ++l) {
      int j = m.joint_of(f, l);
      Vec3 end = l < 2 ? m.rest_joint[j + 1] : m.tip_site[f];
      bones[j] = {m.rest_joint[j], end};
    }

  const double sigma = 0.014;
  const std::size_t nv = m.template_mesh.vertices.size();
  m.skin_weights = MatX::Zero(nv, 16);
  for (std::size_t v = 0; v < nv; ++v) {
    const Vec3& p = m.template_mesh.vertices[v];
    Eigen::Matrix<double, 16, 1> w;
    for (int j = 0; j < 16; ++j) {
      double d = detail::capsule_sdf(p, bones[j].a, bones[j].b, 0.0);
      w[j] = std::exp(-(d * d) / (sigma * sigma));
    }
    // keep the four strongest influences
    Eigen::Matrix<double, 16, 1> sorted = w;
    std::nth_element(sorted.data(), sorted.data() + 12, sorted.data() + 16);
    double cutoff = sorted[12];
    for (int j = 0; j < 16; ++j)
      if (w[j] < cutoff) w[j] = 0;
    m.skin_weights.row(v) = w / w.sum();
  }
  return m;
}

// ---------------------------------------------------------------------------
// Kinematics
// ---------------------------------------------------------------------------

inline double length_scale(const HandModel& m, const HandPose& pose, int joint) {
  int f = m.finger_of[joint];
  return f < 0 ? 1.0 : pose.beta[f];
}

inline double thickness_scale(const HandModel& m, const HandPose& pose, int joint) {
  int f = m.finger_of[joint];
  return f < 0 ? 1.0 : pose.beta[5 + f];
}

// T_b = T_parent * translate(beta-scaled offset) * rotate(theta_b); the root
// frame is the pose's root transform. Finger base offsets place the finger
// and are unscaled; phalanx offsets scale with the finger length.
inline JointFrames forward_kinematics(const HandModel& m, const HandPose& pose) {
  pose.validate();
  JointFrames frames;
  frames[0] = pose.root;
  for (int j = 1; j < 16; ++j) {
    bool is_base = m.parent[j] == 0;
    double scale = is_base ? 1.0 : length_scale(m, pose, j);
    RigidTransform local;
    local.rotation = axis_angle_to_matrix(pose.theta[j]);
    local.translation = scale * m.rest_offset[j];
    frames[j] = frames[m.parent[j]].compose(local);
  }
  return frames;
}

// Linear blend skinning with per-finger length/thickness scaling applied in
// each bone's rest-local frame (bones run along +x at rest).
inline Vec3 skin_point(const HandModel& m, const HandPose& pose,
                       const JointFrames& frames, const Vec3& p,
                       const Eigen::Ref<const Eigen::RowVectorXd>& weights) {
  Vec3 out = Vec3::Zero();
  for (int j = 0; j < 16; ++j) {
    double w = weights[j];
    if (w == 0) continue;
    Vec3 local = p - m.rest_joint[j];
    double ls = length_scale(m, pose, j), ts = thickness_scale(m, pose, j);
    Vec3 scaled(local.x() * ls, local.y() * ts, local.z() * ts);
    out += w * frames[j].apply(scaled);
  }
  return out;
}

inline TriMesh skin(const HandModel& m, const HandPose& pose) {
  JointFrames frames = forward_kinematics(m, pose);
  TriMesh out;
  out.faces = m.template_mesh.faces;
  out.vertices.resize(m.template_mesh.vertices.size());
  parallel_for(0, out.vertices.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t v = lo; v < hi; ++v)
      out.vertices[v] = skin_point(m, pose, frames, m.template_mesh.vertices[v],
                                   m.skin_weights.row(v));
  });
  return out;
}

// 21 keypoints: the 16 frame origins then the 5 skinned fingertip sites
// (order: root, thumb chain, index, middle, ring, pinky, tips).
inline std::vector<Vec3> joint_positions(const HandModel& m, const HandPose& pose) {
  JointFrames frames = forward_kinematics(m, pose);
  std::vector<Vec3> out(21);
  for (int j = 0; j < 16; ++j) out[j] = frames[j].translation;
  Eigen::RowVectorXd one_hot = Eigen::RowVectorXd::Zero(16);
  for (int f = 0; f < 5; ++f) {
    one_hot.setZero();
    one_hot[m.tip_bone[f]] = 1.0;
    out[16 + f] = skin_point(m, pose, frames, m.tip_site[f], one_hot);
  }
  return out;
}

// Mean per-joint position error in millimeters.
inline double mpjpe(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt) {
  if (pred.size() != 21 || gt.size() != 21)
    throw LengthMismatch("mpjpe: expected 21 keypoints");
  double sum = 0;
  for (int i = 0; i < 21; ++i) sum += (pred[i] - gt[i]).norm();
  return sum / 21.0 * 1000.0;
}

// ---------------------------------------------------------------------------
// Pose-aware features
// ---------------------------------------------------------------------------

enum class PoseFeatureMode { kWithGlobal, kWithoutGlobal, kJointDistances };

// Query-point coordinates in the joint local frames. with_global: all 16
// frames (48 values); without_global: the 15 non-root frames (45 values);
// joint_distances: 21 point-to-keypoint distances, the signed projection of
// the offset from the nearest hand-surface point onto the surface normal,
// and that offset's norm (23 values). The last mode needs the skinned mesh
// and keypoints.
inline VecX pose_feature(const Vec3& x, const JointFrames& frames,
                         PoseFeatureMode mode,
                         const MeshBvh* hand_surface = nullptr,
                         const std::vector<Vec3>* keypoints = nullptr) {
  for (const auto& f : frames)
    if (!f.is_rotation(1e-6) || !f.translation.allFinite())
      throw InvalidFrames("pose_feature: invalid joint frames");

  switch (mode) {
    case PoseFeatureMode::kWithGlobal: {
      VecX out(48);
      for (int j = 0; j < 16; ++j)
        out.segment<3>(3 * j) = frames[j].inverse().apply(x);
      return out;
    }
    case PoseFeatureMode::kWithoutGlobal: {
      VecX out(45);
      for (int j = 1; j < 16; ++j)
        out.segment<3>(3 * (j - 1)) = frames[j].inverse().apply(x);
      return out;
    }
    case PoseFeatureMode::kJointDistances: {
      if (hand_surface == nullptr || keypoints == nullptr ||
          keypoints->size() != 21)
        throw InvalidFrames("pose_feature: joint_distances needs mesh + keypoints");
      VecX out(23);
      for (int i = 0; i < 21; ++i) out[i] = (x - (*keypoints)[i]).norm();
      int face = -1;
      Vec3 nearest = hand_surface->closest_point(x, &face);
      Vec3 offset = x - nearest;
      Vec3 n = hand_surface->mesh().face_normal(face).normalized();
      out[21] = offset.dot(n);
      out[22] = offset.norm();
      return out;
    }
  }
  throw InvalidFrames("pose_feature: unknown mode");
}

inline int pose_feature_dim(PoseFeatureMode mode) {
  switch (mode) {
    case PoseFeatureMode::kWithGlobal: return 48;
    case PoseFeatureMode::kWithoutGlobal: return 45;
    case PoseFeatureMode::kJointDistances: return 23;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// Serialization: template as OBJ, the rest as JSON.
// ---------------------------------------------------------------------------

inline Json pose_to_json(const HandPose& pose) {
  Json j;
  for (const auto& aa : pose.theta) j["theta"].push_back({aa.x(), aa.y(), aa.z()});
  j["beta"] = pose.beta;
  Json root;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) root["R"].push_back(pose.root.rotation(r, c));
  root["t"] = {pose.root.translation.x(), pose.root.translation.y(),
               pose.root.translation.z()};
  j["root"] = root;
  return j;
}

inline HandPose pose_from_json(const Json& j) {
  HandPose pose;
  for (int i = 0; i < 16; ++i)
    pose.theta[i] = Vec3(j["theta"][i][0], j["theta"][i][1], j["theta"][i][2]);
  for (int i = 0; i < 10; ++i) pose.beta[i] = j["beta"][i];
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) pose.root.rotation(r, c) = j["root"]["R"][3 * r + c];
  pose.root.translation = Vec3(j["root"]["t"][0], j["root"]["t"][1], j["root"]["t"][2]);
  return pose;
}

inline void save_hand_model(const HandModel& m, const std::string& stem) {
  save_obj(m.template_mesh, stem + ".obj");
  Json j;
  j["parent"] = m.parent;
  for (const auto& o : m.rest_offset) j["rest_offset"].push_back({o.x(), o.y(), o.z()});
  j["finger_of"] = m.finger_of;
  for (const auto& s : m.tip_site) j["tip_site"].push_back({s.x(), s.y(), s.z()});
  j["tip_bone"] = m.tip_bone;
  for (Eigen::Index v = 0; v < m.skin_weights.rows(); ++v) {
    Json row;
    for (int k = 0; k < 16; ++k) row.push_back(m.skin_weights(v, k));
    j["weights"].push_back(row);
  }
  std::ofstream os(stem + ".json", std::ios::binary);
  if (!os) throw IoError("save_hand_model: cannot open " + stem + ".json");
  os << j.dump() << "\n";
}

inline HandModel load_hand_model(const std::string& stem) {
  HandModel m;
  m.template_mesh = load_obj(stem + ".obj");
  std::ifstream is(stem + ".json", std::ios::binary);
  if (!is) throw IoError("load_hand_model: cannot open " + stem + ".json");
  Json j = Json::parse(is);
  for (int i = 0; i < 16; ++i) {
    m.parent[i] = j["parent"][i];
    m.rest_offset[i] = Vec3(j["rest_offset"][i][0], j["rest_offset"][i][1],
                            j["rest_offset"][i][2]);
    m.finger_of[i] = j["finger_of"][i];
  }
  for (int f = 0; f < 5; ++f) {
    m.tip_site[f] = Vec3(j["tip_site"][f][0], j["tip_site"][f][1], j["tip_site"][f][2]);
    m.tip_bone[f] = j["tip_bone"][f];
  }
  m.rest_joint[0] = Vec3::Zero();
  for (int jt = 1; jt < 16; ++jt)
    m.rest_joint[jt] = m.rest_joint[m.parent[jt]] + m.rest_offset[jt];
  const auto& w = j["weights"];
  m.skin_weights = MatX::Zero(w.size(), 16);
  for (std::size_t v = 0; v < w.size(); ++v)
    for (int k = 0; k < 16; ++k) m.skin_weights(v, k) = w[v][k];
  return m;
}

}  // namespace chord
