#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace chord {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using MatX = Eigen::MatrixXd;
using VecX = Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Errors. One base type so callers can catch everything from this library;
// the concrete classes match the failure modes the API documents.
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define CHORD_DEFINE_ERROR(NAME)                                  \
  struct NAME : Error {                                           \
    explicit NAME(const std::string& msg = #NAME) : Error(msg) {} \
  }

CHORD_DEFINE_ERROR(ZeroAxis);
CHORD_DEFINE_ERROR(DegenerateAxes);
CHORD_DEFINE_ERROR(BehindCamera);
CHORD_DEFINE_ERROR(NotWatertight);
CHORD_DEFINE_ERROR(NonManifold);
CHORD_DEFINE_ERROR(EmptyMesh);
CHORD_DEFINE_ERROR(InvalidPose);
CHORD_DEFINE_ERROR(InvalidFrames);
CHORD_DEFINE_ERROR(LengthMismatch);
CHORD_DEFINE_ERROR(ShapeMismatch);
CHORD_DEFINE_ERROR(NonFiniteLoss);
CHORD_DEFINE_ERROR(InsufficientData);
CHORD_DEFINE_ERROR(EmptyCollection);
CHORD_DEFINE_ERROR(OpenSurface);
CHORD_DEFINE_ERROR(EmptyDataset);
CHORD_DEFINE_ERROR(EmptyField);
CHORD_DEFINE_ERROR(ParamOutOfRange);
CHORD_DEFINE_ERROR(GraspFailed);
CHORD_DEFINE_ERROR(FramingFailed);
CHORD_DEFINE_ERROR(ManifestMismatch);
CHORD_DEFINE_ERROR(CheckpointPriorMismatch);
CHORD_DEFINE_ERROR(IoError);

#undef CHORD_DEFINE_ERROR

// ---------------------------------------------------------------------------
// Deterministic RNG. std::uniform_real_distribution is implementation-defined,
// so every sampled byte in the pipeline goes through this generator instead.
// xoshiro-style splitmix core; doubles use the 53-bit mantissa convention.
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Mixes a stream id into a base seed (per-scene, per-shape derived seeds).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t s = seed ^ (0x9e3779b97f4a7c15ull * (stream + 1));
  return splitmix64(s);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : state_(seed) {
    // warm up so that small seeds do not produce correlated first draws
    splitmix64(state_);
    splitmix64(state_);
  }

  std::uint64_t next_u64() { return splitmix64(state_); }

  // uniform in [0, 1)
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // index in [0, n)
  std::size_t index(std::size_t n) {
    return std::size_t(uniform() * double(n)) % (n == 0 ? 1 : n);
  }

  // Box-Muller, cosine branch only; deterministic, no cached state.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  Vec3 normal3() {
    double a = normal(), b = normal(), c = normal();
    return Vec3(a, b, c);
  }

  Vec3 unit_vector() {
    Vec3 v = normal3();
    double n = v.norm();
    return n > 1e-12 ? Vec3(v / n) : Vec3(1, 0, 0);
  }

 private:
  std::uint64_t state_;
};

// FNV-1a over raw bytes; used for content-derived seeds and manifest hashes.
inline std::uint64_t fnv1a(const void* data, std::size_t n,
                           std::uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a(const std::string& s,
                           std::uint64_t h = 0xcbf29ce484222325ull) {
  return fnv1a(s.data(), s.size(), h);
}

// ---------------------------------------------------------------------------
// Chunked parallel-for. Work is split into fixed-size chunks independent of
// the worker count, and each output element is written by exactly one worker,
// so results are byte-identical to a serial run. Worker count comes from
// CHORD_THREADS or hardware_concurrency.
// ---------------------------------------------------------------------------

inline int worker_count() {
  static int n = [] {
    if (const char* env = std::getenv("CHORD_THREADS")) {
      int v = std::atoi(env);
      if (v > 0) return v;
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : int(hc);
  }();
  return n;
}

inline void parallel_for(std::size_t begin, std::size_t end,
                         const std::function<void(std::size_t, std::size_t)>& body,
                         std::size_t chunk = 0) {
  if (end <= begin) return;
  const std::size_t total = end - begin;
  if (chunk == 0) chunk = std::max<std::size_t>(1, total / 64);
  const int workers = worker_count();
  if (workers <= 1 || total <= chunk) {
    for (std::size_t lo = begin; lo < end; lo += chunk)
      body(lo, std::min(end, lo + chunk));
    return;
  }
  std::atomic<std::size_t> cursor{begin};
  auto run = [&] {
    for (;;) {
      std::size_t lo = cursor.fetch_add(chunk);
      if (lo >= end) return;
      body(lo, std::min(end, lo + chunk));
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (int i = 0; i + 1 < workers; ++i) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
}

inline bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

// Values that live in float32 disk formats are quantized at creation so the
// write/read cycle is lossless.
inline double to_f32(double v) { return double(float(v)); }

}  // namespace chord
