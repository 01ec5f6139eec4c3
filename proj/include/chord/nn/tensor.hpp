#pragma once

#include "chord/common.hpp"

#include <numeric>

namespace chord::nn {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using ConstMapRM = Eigen::Map<const MatRM>;

// Dense row-major tensor (last index fastest).
struct Tensor {
  std::vector<int> shape;
  VecX data;

  Tensor() = default;

  static Tensor zeros(std::vector<int> shape) {
    Tensor t;
    t.shape = std::move(shape);
    t.data = VecX::Zero(t.count());
    return t;
  }

  static Tensor scalar(double v) {
    Tensor t;
    t.shape = {1};
    t.data = VecX::Constant(1, v);
    return t;
  }

  static Tensor from(std::vector<int> shape, VecX values) {
    Tensor t;
    t.shape = std::move(shape);
    t.data = std::move(values);
    if (t.data.size() != t.count()) throw ShapeMismatch("Tensor::from size");
    return t;
  }

  Eigen::Index count() const {
    Eigen::Index n = 1;
    for (int d : shape) n *= d;
    return n;
  }

  int rank() const { return int(shape.size()); }
  int dim(int i) const { return shape[i]; }
  int last_dim() const { return shape.empty() ? 1 : shape.back(); }
  Eigen::Index rows() const { return count() / std::max(1, last_dim()); }

  // {rows, last_dim} matrix view
  MapRM mat() { return MapRM(data.data(), rows(), last_dim()); }
  ConstMapRM mat() const { return ConstMapRM(data.data(), rows(), last_dim()); }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
  bool finite() const { return data.allFinite(); }
};

inline std::string shape_str(const std::vector<int>& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i)
    out += std::to_string(s[i]) + (i + 1 < s.size() ? "," : "");
  return out + ")";
}

// C = A * B with work split into fixed row chunks so multi-threaded results
// are byte-identical to serial execution.
inline void pgemm(const ConstMapRM& a, const ConstMapRM& b, MapRM c) {
  const Eigen::Index rows = a.rows();
  parallel_for(0, std::size_t(rows), [&](std::size_t lo, std::size_t hi) {
    c.middleRows(Eigen::Index(lo), Eigen::Index(hi - lo)).noalias() =
        a.middleRows(Eigen::Index(lo), Eigen::Index(hi - lo)) * b;
  }, 128);
}

// Fixed sparse row map: out[r] = sum_k w[r][k] * in[idx[r][k]]. Rows with no
// entries stay zero. Used for code splatting (linear in the codes).
struct SparseMap {
  int in_rows = 0, out_rows = 0;
  std::vector<int> offsets;  // out_rows + 1
  std::vector<int> indices;
  std::vector<double> weights;

  void apply(const Tensor& in, Tensor& out) const {
    const int c = in.last_dim();
    auto im = in.mat();
    auto om = out.mat();
    om.setZero();
    for (int r = 0; r < out_rows; ++r)
      for (int k = offsets[r]; k < offsets[r + 1]; ++k)
        om.row(r) += weights[k] * im.row(indices[k]);
    (void)c;
  }

  // accumulate dIn += S^T dOut
  void apply_transpose(const Tensor& dout, Tensor& din) const {
    auto dm = dout.mat();
    auto im = din.mat();
    for (int r = 0; r < out_rows; ++r)
      for (int k = offsets[r]; k < offsets[r + 1]; ++k)
        im.row(indices[k]) += weights[k] * dm.row(r);
  }
};

}  // namespace chord::nn
