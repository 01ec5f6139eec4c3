#pragma once

#include "chord/bvh.hpp"
#include "chord/camera.hpp"
#include "chord/voxel.hpp"

namespace chord {

// Per-entity rendered maps. Depth is the camera-space hit z (0 where no
// hit), normals are camera-space unit vectors flipped toward the camera,
// color is flat Lambertian under a headlight. mask == 1 exactly where
// depth > 0.
struct MapStack {
  int width = 0, height = 0;
  std::vector<double> depth;   // H*W
  std::vector<double> normal;  // H*W*3
  std::vector<double> mask;    // H*W
  std::vector<double> color;   // H*W*3

  static MapStack zeros(int width, int height) {
    MapStack s;
    s.width = width;
    s.height = height;
    s.depth.assign(std::size_t(width) * height, 0.0);
    s.normal.assign(std::size_t(width) * height * 3, 0.0);
    s.mask.assign(std::size_t(width) * height, 0.0);
    s.color.assign(std::size_t(width) * height * 3, 0.0);
    return s;
  }

  std::size_t pix(int row, int col) const { return std::size_t(row) * width + col; }

  bool consistent() const {
    for (std::size_t i = 0; i < depth.size(); ++i) {
      if ((depth[i] > 0) != (mask[i] == 1.0)) return false;
      if (mask[i] == 1.0) {
        double n2 = normal[3 * i] * normal[3 * i] +
                    normal[3 * i + 1] * normal[3 * i + 1] +
                    normal[3 * i + 2] * normal[3 * i + 2];
        if (std::abs(n2 - 1.0) > 1e-6) return false;  // f32 storage slack
      }
    }
    return true;
  }
};

// Nearest ray-triangle hit per pixel (ties broken by smallest face index).
// Rays go through integer pixel centers; rows are independent.
inline MapStack raycast(const TriMesh& mesh, const Camera& cam,
                        const Vec3& albedo = Vec3(0.8, 0.8, 0.8)) {
  if (!cam.valid()) throw Error("raycast: invalid camera");
  MapStack out = MapStack::zeros(cam.width, cam.height);
  if (mesh.empty()) return out;

  TriMesh cam_mesh = mesh.transformed(cam.pose);
  MeshBvh bvh(cam_mesh);

  parallel_for(0, std::size_t(cam.height), [&](std::size_t rlo, std::size_t rhi) {
    for (std::size_t r = rlo; r < rhi; ++r)
      for (int c = 0; c < cam.width; ++c) {
        Vec3 dir((c - cam.cx) / cam.fx, (double(r) - cam.cy) / cam.fy, 1.0);
        RayHit hit = bvh.raycast(Vec3::Zero(), dir);
        if (!hit.valid()) continue;
        std::size_t i = out.pix(int(r), c);
        Vec3 p = hit.t * dir;
        Vec3 n = cam_mesh.face_normal(hit.face).normalized();
        if (n.dot(dir) > 0) n = -n;  // face the camera
        out.depth[i] = to_f32(p.z());
        out.mask[i] = 1.0;
        for (int a = 0; a < 3; ++a) out.normal[3 * i + a] = to_f32(n[a]);
        double lambert = std::max(0.0, -n.dot(dir.normalized()));
        for (int a = 0; a < 3; ++a)
          out.color[3 * i + a] = to_f32(lambert * albedo[a]);
      }
  }, 1);
  return out;
}

enum class RenderMode { kSeparate, kMerged };

// Renders the hand/object pair. Separate: each entity ignores the other.
// Merged: joint z-buffer, each stack masked to the pixels it wins.
inline std::pair<MapStack, MapStack> render_scene(
    const TriMesh& hand, const TriMesh& object, const Camera& cam,
    RenderMode mode, const Vec3& hand_albedo = Vec3(0.85, 0.65, 0.55),
    const Vec3& object_albedo = Vec3(0.55, 0.65, 0.85)) {
  MapStack hs = raycast(hand, cam, hand_albedo);
  MapStack os = raycast(object, cam, object_albedo);
  if (mode == RenderMode::kSeparate) return {hs, os};

  for (std::size_t i = 0; i < hs.depth.size(); ++i) {
    bool h = hs.mask[i] == 1.0, o = os.mask[i] == 1.0;
    if (h && o) {
      // losing entity is occluded at this pixel
      MapStack& loser = hs.depth[i] <= os.depth[i] ? os : hs;
      loser.depth[i] = 0;
      loser.mask[i] = 0;
      for (int a = 0; a < 3; ++a) {
        loser.normal[3 * i + a] = 0;
        loser.color[3 * i + a] = 0;
      }
    }
  }
  return {hs, os};
}

// Flat composite of the merged stacks; the synthetic stand-in for the photo.
inline std::vector<double> composite_color(const MapStack& hand,
                                           const MapStack& object) {
  std::vector<double> rgb(hand.color.size(), 0.0);
  for (std::size_t i = 0; i < hand.depth.size(); ++i) {
    const MapStack* winner = nullptr;
    if (hand.mask[i] == 1.0 && object.mask[i] == 1.0)
      winner = hand.depth[i] <= object.depth[i] ? &hand : &object;
    else if (hand.mask[i] == 1.0)
      winner = &hand;
    else if (object.mask[i] == 1.0)
      winner = &object;
    if (winner)
      for (int a = 0; a < 3; ++a) rgb[3 * i + a] = winner->color[3 * i + a];
  }
  return rgb;
}

// Bilinear interpolation over the four neighboring pixel centers;
// out-of-bounds coordinates clamp to the border pixel.
inline double bilinear_sample(const std::vector<double>& map, int width,
                              int height, int channels, const Vec2& uv, int c) {
  double u = std::clamp(uv.x(), 0.0, double(width - 1));
  double v = std::clamp(uv.y(), 0.0, double(height - 1));
  int c0 = std::min(int(u), width - 2 < 0 ? 0 : width - 2);
  int r0 = std::min(int(v), height - 2 < 0 ? 0 : height - 2);
  int c1 = std::min(c0 + 1, width - 1);
  int r1 = std::min(r0 + 1, height - 1);
  double fu = u - c0, fv = v - r0;
  auto px = [&](int r, int col) {
    return map[(std::size_t(r) * width + col) * channels + c];
  };
  double top = px(r0, c0) * (1 - fu) + px(r0, c1) * fu;
  double bot = px(r1, c0) * (1 - fu) + px(r1, c1) * fu;
  return top * (1 - fv) + bot * fv;
}

// ---------------------------------------------------------------------------
// Disk format: one raw float32 buffer per channel group + JSON header.
// ---------------------------------------------------------------------------

inline void save_map_channel(const std::vector<double>& data, int width,
                             int height, int channels, const std::string& kind,
                             const std::string& path_stem) {
  Json meta;
  meta["width"] = width;
  meta["height"] = height;
  meta["channels"] = channels;
  meta["kind"] = kind;
  std::ofstream os(path_stem + ".json", std::ios::binary);
  if (!os) throw IoError("save_map_channel: cannot open " + path_stem + ".json");
  os << meta.dump(2) << "\n";
  save_f32(data, path_stem + ".bin");
}

inline std::vector<double> load_map_channel(const std::string& path_stem,
                                            int* width = nullptr,
                                            int* height = nullptr,
                                            int* channels = nullptr) {
  std::ifstream is(path_stem + ".json", std::ios::binary);
  if (!is) throw IoError("load_map_channel: cannot open " + path_stem + ".json");
  Json meta = Json::parse(is);
  if (width) *width = meta["width"];
  if (height) *height = meta["height"];
  if (channels) *channels = meta["channels"];
  auto data = load_f32(path_stem + ".bin");
  std::size_t expect =
      std::size_t(int(meta["width"])) * int(meta["height"]) * int(meta["channels"]);
  if (data.size() != expect)
    throw IoError("load_map_channel: size mismatch in " + path_stem);
  return data;
}

inline void save_map_stack(const MapStack& s, const std::string& dir,
                           const std::string& entity) {
  save_map_channel(s.depth, s.width, s.height, 1, "depth", dir + "/" + entity + "_depth");
  save_map_channel(s.normal, s.width, s.height, 3, "normal", dir + "/" + entity + "_normal");
  save_map_channel(s.mask, s.width, s.height, 1, "mask", dir + "/" + entity + "_mask");
  save_map_channel(s.color, s.width, s.height, 3, "color", dir + "/" + entity + "_color");
}

inline MapStack load_map_stack(const std::string& dir, const std::string& entity) {
  MapStack s;
  s.depth = load_map_channel(dir + "/" + entity + "_depth", &s.width, &s.height);
  s.normal = load_map_channel(dir + "/" + entity + "_normal");
  s.mask = load_map_channel(dir + "/" + entity + "_mask");
  s.color = load_map_channel(dir + "/" + entity + "_color");
  return s;
}

}  // namespace chord
