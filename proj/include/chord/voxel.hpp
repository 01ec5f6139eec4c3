#pragma once

#include "chord/common.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <fstream>

namespace chord {

using Json = nlohmann::ordered_json;

// Regular lattice of scalar (or multi-channel) samples. Sample (i, j, k)
// lives at origin + (i, j, k) * cell_size. For occupancy grids the lattice
// points are the voxel centers; for SDF grids they are the marching-cubes
// nodes. Storage is x-fastest, channel-interleaved.
struct VoxelGrid {
  Vec3 origin = Vec3::Zero();
  double cell_size = 1.0;
  std::array<int, 3> resolution = {0, 0, 0};
  int channels = 1;
  std::string kind = "sdf";  // "occupancy" | "sdf" | "latent"
  std::vector<double> values;

  static VoxelGrid make(const Vec3& origin, double cell_size,
                        std::array<int, 3> resolution, int channels = 1,
                        std::string kind = "sdf") {
    if (resolution[0] < 2 || resolution[1] < 2 || resolution[2] < 2)
      throw Error("VoxelGrid: resolution must be >= 2 per axis");
    if (cell_size <= 0) throw Error("VoxelGrid: cell size must be > 0");
    VoxelGrid g;
    g.origin = origin;
    g.cell_size = cell_size;
    g.resolution = resolution;
    g.channels = channels;
    g.kind = std::move(kind);
    g.values.assign(std::size_t(resolution[0]) * resolution[1] * resolution[2] *
                        channels,
                    0.0);
    return g;
  }

  std::size_t cell_count() const {
    return std::size_t(resolution[0]) * resolution[1] * resolution[2];
  }

  std::size_t index(int i, int j, int k, int c = 0) const {
    return (std::size_t(k) * resolution[1] + j) * resolution[0] * channels +
           std::size_t(i) * channels + c;
  }

  double& at(int i, int j, int k, int c = 0) { return values[index(i, j, k, c)]; }
  double at(int i, int j, int k, int c = 0) const {
    return values[index(i, j, k, c)];
  }

  Vec3 position(int i, int j, int k) const {
    return origin + cell_size * Vec3(i, j, k);
  }

  bool contains(const Vec3& p) const {
    Vec3 local = (p - origin) / cell_size;
    return local.x() >= 0 && local.y() >= 0 && local.z() >= 0 &&
           local.x() <= resolution[0] - 1 && local.y() <= resolution[1] - 1 &&
           local.z() <= resolution[2] - 1;
  }

  // Trilinear interpolation of one channel; clamps to the lattice border.
  double sample(const Vec3& p, int c = 0) const {
    Vec3 local = (p - origin) / cell_size;
    double vals[1];
    sample_multi(local, &c, 1, vals);
    return vals[0];
  }

  // Trilinear interpolation of all channels at once (local = lattice coords).
  void sample_all(const Vec3& p, double* out) const {
    Vec3 local = (p - origin) / cell_size;
    std::vector<int> cs(channels);
    for (int c = 0; c < channels; ++c) cs[c] = c;
    sample_multi(local, cs.data(), channels, out);
  }

 private:
  void sample_multi(Vec3 local, const int* cs, int nc, double* out) const {
    auto clampf = [](double v, double lo, double hi) {
      return v < lo ? lo : (v > hi ? hi : v);
    };
    local.x() = clampf(local.x(), 0.0, double(resolution[0] - 1));
    local.y() = clampf(local.y(), 0.0, double(resolution[1] - 1));
    local.z() = clampf(local.z(), 0.0, double(resolution[2] - 1));
    int i0 = std::min(int(local.x()), resolution[0] - 2);
    int j0 = std::min(int(local.y()), resolution[1] - 2);
    int k0 = std::min(int(local.z()), resolution[2] - 2);
    double fx = local.x() - i0, fy = local.y() - j0, fz = local.z() - k0;
    for (int n = 0; n < nc; ++n) {
      int c = cs[n];
      double c00 = at(i0, j0, k0, c) * (1 - fx) + at(i0 + 1, j0, k0, c) * fx;
      double c10 = at(i0, j0 + 1, k0, c) * (1 - fx) + at(i0 + 1, j0 + 1, k0, c) * fx;
      double c01 = at(i0, j0, k0 + 1, c) * (1 - fx) + at(i0 + 1, j0, k0 + 1, c) * fx;
      double c11 =
          at(i0, j0 + 1, k0 + 1, c) * (1 - fx) + at(i0 + 1, j0 + 1, k0 + 1, c) * fx;
      double c0 = c00 * (1 - fy) + c10 * fy;
      double c1 = c01 * (1 - fy) + c11 * fy;
      out[n] = c0 * (1 - fz) + c1 * fz;
    }
  }
};

// ---------------------------------------------------------------------------
// Binary I/O: raw little-endian float32 buffer + JSON sidecar. The sidecar
// path is `<path>.json`, the buffer is `<path>.bin`.
// ---------------------------------------------------------------------------

inline void save_f32(const std::vector<double>& values, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("save_f32: cannot open " + path);
  std::vector<float> buf(values.begin(), values.end());
  os.write(reinterpret_cast<const char*>(buf.data()),
           std::streamsize(buf.size() * sizeof(float)));
}

inline std::vector<double> load_f32(const std::string& path) {
  std::ifstream is(path, std::ios::binary | std::ios::ate);
  if (!is) throw IoError("load_f32: cannot open " + path);
  std::size_t bytes = std::size_t(is.tellg());
  if (bytes % sizeof(float) != 0) throw IoError("load_f32: truncated " + path);
  std::vector<float> buf(bytes / sizeof(float));
  is.seekg(0);
  is.read(reinterpret_cast<char*>(buf.data()), std::streamsize(bytes));
  return {buf.begin(), buf.end()};
}

inline void save_voxel_grid(const VoxelGrid& g, const std::string& path_stem) {
  Json meta;
  meta["origin"] = {g.origin.x(), g.origin.y(), g.origin.z()};
  meta["cell_size"] = g.cell_size;
  meta["resolution"] = {g.resolution[0], g.resolution[1], g.resolution[2]};
  meta["channels"] = g.channels;
  meta["kind"] = g.kind;
  std::ofstream os(path_stem + ".json", std::ios::binary);
  if (!os) throw IoError("save_voxel_grid: cannot open " + path_stem + ".json");
  os << meta.dump(2) << "\n";
  save_f32(g.values, path_stem + ".bin");
}

inline VoxelGrid load_voxel_grid(const std::string& path_stem) {
  std::ifstream is(path_stem + ".json", std::ios::binary);
  if (!is) throw IoError("load_voxel_grid: cannot open " + path_stem + ".json");
  Json meta = Json::parse(is);
  VoxelGrid g = VoxelGrid::make(
      Vec3(meta["origin"][0], meta["origin"][1], meta["origin"][2]),
      meta["cell_size"],
      {meta["resolution"][0], meta["resolution"][1], meta["resolution"][2]},
      meta.value("channels", 1), meta["kind"]);
  g.values = load_f32(path_stem + ".bin");
  if (g.values.size() != g.cell_count() * g.channels)
    throw IoError("load_voxel_grid: size mismatch in " + path_stem);
  return g;
}

}  // namespace chord
