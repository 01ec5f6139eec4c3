#pragma once

#include "chord/nn/tensor.hpp"

namespace chord::nn {

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode tape. Nodes are created in topological order; backward()
// walks them in reverse. Gradients accumulate in fixed order, so training
// is deterministic.
class Graph {
 public:
  Var leaf(Tensor value, bool requires_grad) {
    return push(std::move(value), requires_grad, {}, nullptr);
  }

  Var constant(Tensor value) { return leaf(std::move(value), false); }

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  Tensor& grad(Var v) { return ensure_grad(v.id); }
  bool needs_grad(Var v) const { return nodes_[v.id].needs_grad; }

  // ---- arithmetic -------------------------------------------------------

  // out = alpha * a + beta * b (same shape)
  Var axpy(Var a, Var b, double alpha = 1.0, double beta = 1.0) {
    const Tensor& ta = nodes_[a.id].value;
    const Tensor& tb = nodes_[b.id].value;
    if (!ta.same_shape(tb)) throw ShapeMismatch("axpy: shape mismatch");
    Tensor out = Tensor::from(ta.shape, alpha * ta.data + beta * tb.data);
    return push(std::move(out), any_grad({a, b}), {a, b},
                [a, b, alpha, beta](Graph& g, int self) {
                  const VecX& go = g.nodes_[self].grad.data;
                  if (g.needs_grad(a)) g.ensure_grad(a.id).data += alpha * go;
                  if (g.needs_grad(b)) g.ensure_grad(b.id).data += beta * go;
                });
  }

  Var scale(Var a, double s) {
    const Tensor& ta = nodes_[a.id].value;
    Tensor out = Tensor::from(ta.shape, s * ta.data);
    return push(std::move(out), any_grad({a}), {a},
                [a, s](Graph& g, int self) {
                  if (g.needs_grad(a))
                    g.ensure_grad(a.id).data += s * g.nodes_[self].grad.data;
                });
  }

  Var relu(Var a) {
    const Tensor& ta = nodes_[a.id].value;
    Tensor out = Tensor::from(ta.shape, ta.data.cwiseMax(0.0));
    return push(std::move(out), any_grad({a}), {a},
                [a](Graph& g, int self) {
                  if (!g.needs_grad(a)) return;
                  const VecX& x = g.nodes_[a.id].value.data;
                  const VecX& go = g.nodes_[self].grad.data;
                  VecX& gi = g.ensure_grad(a.id).data;
                  for (Eigen::Index i = 0; i < x.size(); ++i)
                    if (x[i] > 0) gi[i] += go[i];
                });
  }

  // ---- linear algebra ---------------------------------------------------

  Var matmul(Var a, Var b) {
    const Tensor& ta = nodes_[a.id].value;
    const Tensor& tb = nodes_[b.id].value;
    if (tb.rank() != 2 || ta.last_dim() != tb.dim(0))
      throw ShapeMismatch("matmul: inner dims " + shape_str(ta.shape) + " x " +
                          shape_str(tb.shape));
    std::vector<int> out_shape = ta.shape;
    out_shape.back() = tb.dim(1);
    Tensor out = Tensor::zeros(out_shape);
    pgemm(ta.mat(), tb.mat(), out.mat());
    return push(std::move(out), any_grad({a, b}), {a, b},
                [a, b](Graph& g, int self) {
                  const Tensor& go = g.nodes_[self].grad;
                  const Tensor& ta = g.nodes_[a.id].value;
                  const Tensor& tb = g.nodes_[b.id].value;
                  if (g.needs_grad(a))
                    g.ensure_grad(a.id).mat().noalias() +=
                        go.mat() * tb.mat().transpose();
                  if (g.needs_grad(b))
                    g.ensure_grad(b.id).mat().noalias() +=
                        ta.mat().transpose() * go.mat();
                });
  }

  // broadcast add of a row vector over the last axis
  Var add_bias(Var x, Var bias) {
    const Tensor& tx = nodes_[x.id].value;
    const Tensor& tb = nodes_[bias.id].value;
    if (tb.count() != tx.last_dim()) throw ShapeMismatch("add_bias");
    Tensor out = tx;
    out.mat().rowwise() += tb.data.transpose();
    return push(std::move(out), any_grad({x, bias}), {x, bias},
                [x, bias](Graph& g, int self) {
                  const Tensor& go = g.nodes_[self].grad;
                  if (g.needs_grad(x)) g.ensure_grad(x.id).data += go.data;
                  if (g.needs_grad(bias))
                    g.ensure_grad(bias.id).data += go.mat().colwise().sum();
                });
  }

  // concatenation along the last axis
  Var concat(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeMismatch("concat: empty");
    Eigen::Index rows = nodes_[parts[0].id].value.rows();
    int total = 0;
    for (Var p : parts) {
      const Tensor& t = nodes_[p.id].value;
      if (t.rows() != rows) throw ShapeMismatch("concat: row mismatch");
      total += t.last_dim();
    }
    std::vector<int> out_shape = nodes_[parts[0].id].value.shape;
    out_shape.back() = total;
    Tensor out = Tensor::zeros(out_shape);
    int off = 0;
    for (Var p : parts) {
      const Tensor& t = nodes_[p.id].value;
      out.mat().middleCols(off, t.last_dim()) = t.mat();
      off += t.last_dim();
    }
    return push(std::move(out), any_grad(parts), parts,
                [parts](Graph& g, int self) {
                  const Tensor& go = g.nodes_[self].grad;
                  int off = 0;
                  for (Var p : parts) {
                    int w = g.nodes_[p.id].value.last_dim();
                    if (g.needs_grad(p))
                      g.ensure_grad(p.id).mat() += go.mat().middleCols(off, w);
                    off += w;
                  }
                });
  }

  Var gather_rows(Var x, std::vector<int> idx) {
    const Tensor& tx = nodes_[x.id].value;
    Tensor out = Tensor::zeros({int(idx.size()), tx.last_dim()});
    for (std::size_t i = 0; i < idx.size(); ++i)
      out.mat().row(Eigen::Index(i)) = tx.mat().row(idx[i]);
    return push(std::move(out), any_grad({x}), {x},
                [x, idx = std::move(idx)](Graph& g, int self) {
                  if (!g.needs_grad(x)) return;
                  const Tensor& go = g.nodes_[self].grad;
                  auto gm = g.ensure_grad(x.id).mat();
                  for (std::size_t i = 0; i < idx.size(); ++i)
                    gm.row(idx[i]) += go.mat().row(Eigen::Index(i));
                });
  }

  // out = S * x for a fixed sparse map (code splatting)
  Var linear_fixed(const SparseMap& s, Var x) {
    const Tensor& tx = nodes_[x.id].value;
    if (tx.rows() != s.in_rows) throw ShapeMismatch("linear_fixed");
    Tensor out = Tensor::zeros({s.out_rows, tx.last_dim()});
    s.apply(tx, out);
    return push(std::move(out), any_grad({x}), {x},
                [x, &s](Graph& g, int self) {
                  if (!g.needs_grad(x)) return;
                  s.apply_transpose(g.nodes_[self].grad, g.ensure_grad(x.id));
                });
  }

  // ---- convolutions (kernel 3, pad 1) ------------------------------------

  Var conv2d(Var x, Var w, Var b, int stride) {
    const Tensor& tx = nodes_[x.id].value;  // {H, W, C}
    const Tensor& tw = nodes_[w.id].value;  // {Cout, C, 3, 3}
    if (tx.rank() != 3 || tw.rank() != 4 || tw.dim(1) != tx.dim(2) ||
        tw.dim(2) != 3 || tw.dim(3) != 3)
      throw ShapeMismatch("conv2d: " + shape_str(tx.shape) + " w " +
                          shape_str(tw.shape));
    const int H = tx.dim(0), W = tx.dim(1), C = tx.dim(2), Cout = tw.dim(0);
    const int Ho = (H - 1) / stride + 1, Wo = (W - 1) / stride + 1;

    auto cols = std::make_shared<Tensor>(Tensor::zeros({Ho * Wo, C * 9}));
    im2col2d(tx, stride, *cols);
    Tensor wm = Tensor::from({Cout, C * 9}, tw.data);
    Tensor out = Tensor::zeros({Ho, Wo, Cout});
    {
      MatRM wt = wm.mat().transpose();
      pgemm(cols->mat(), ConstMapRM(wt.data(), wt.rows(), wt.cols()), out.mat());
    }
    Var tmp = push(std::move(out), any_grad({x, w}), {x, w},
                   [x, w, cols, stride](Graph& g, int self) {
                     const Tensor& go = g.nodes_[self].grad;  // {Ho,Wo,Cout}
                     const Tensor& tw = g.nodes_[w.id].value;
                     const int Cout = tw.dim(0);
                     if (g.needs_grad(w)) {
                       auto gw = MapRM(g.ensure_grad(w.id).data.data(), Cout,
                                       tw.count() / Cout);
                       gw.noalias() += go.mat().transpose() * cols->mat();
                     }
                     if (g.needs_grad(x)) {
                       Tensor dcols = Tensor::zeros(
                           {int(cols->dim(0)), int(cols->dim(1))});
                       ConstMapRM wm(tw.data.data(), Cout, tw.count() / Cout);
                       pgemm(go.mat(), wm, dcols.mat());
                       col2im2d(dcols, stride, g.ensure_grad(x.id));
                     }
                   });
    return add_bias(tmp, b);
  }

  Var conv3d(Var x, Var w, Var b) {
    const Tensor& tx = nodes_[x.id].value;  // {D, H, W, C}
    const Tensor& tw = nodes_[w.id].value;  // {Cout, C, 3, 3, 3}
    if (tx.rank() != 4 || tw.rank() != 5 || tw.dim(1) != tx.dim(3))
      throw ShapeMismatch("conv3d");
    const int D = tx.dim(0), H = tx.dim(1), W = tx.dim(2), C = tx.dim(3);
    const int Cout = tw.dim(0);

    auto cols = std::make_shared<Tensor>(Tensor::zeros({D * H * W, C * 27}));
    im2col3d(tx, *cols);
    Tensor out = Tensor::zeros({D, H, W, Cout});
    {
      ConstMapRM wm(tw.data.data(), Cout, tw.count() / Cout);
      MatRM wt = wm.transpose();
      pgemm(cols->mat(), ConstMapRM(wt.data(), wt.rows(), wt.cols()), out.mat());
    }
    Var tmp = push(std::move(out), any_grad({x, w}), {x, w},
                   [x, w, cols](Graph& g, int self) {
                     const Tensor& go = g.nodes_[self].grad;
                     const Tensor& tw = g.nodes_[w.id].value;
                     const int Cout = tw.dim(0);
                     if (g.needs_grad(w)) {
                       auto gw = MapRM(g.ensure_grad(w.id).data.data(), Cout,
                                       tw.count() / Cout);
                       gw.noalias() += go.mat().transpose() * cols->mat();
                     }
                     if (g.needs_grad(x)) {
                       Tensor dcols = Tensor::zeros(
                           {int(cols->dim(0)), int(cols->dim(1))});
                       ConstMapRM wm(tw.data.data(), Cout, tw.count() / Cout);
                       pgemm(go.mat(), wm, dcols.mat());
                       col2im3d(dcols, g.ensure_grad(x.id));
                     }
                   });
    return add_bias(tmp, b);
  }

  Var upsample2x(Var x) {
    const Tensor& tx = nodes_[x.id].value;  // {H, W, C}
    if (tx.rank() != 3) throw ShapeMismatch("upsample2x");
    const int H = tx.dim(0), W = tx.dim(1), C = tx.dim(2);
    Tensor out = Tensor::zeros({2 * H, 2 * W, C});
    for (int r = 0; r < 2 * H; ++r)
      for (int c = 0; c < 2 * W; ++c)
        out.data.segment(std::size_t(r * 2 * W + c) * C, C) =
            tx.data.segment(std::size_t((r / 2) * W + c / 2) * C, C);
    return push(std::move(out), any_grad({x}), {x},
                [x, H, W, C](Graph& g, int self) {
                  if (!g.needs_grad(x)) return;
                  const VecX& go = g.nodes_[self].grad.data;
                  VecX& gi = g.ensure_grad(x.id).data;
                  for (int r = 0; r < 2 * H; ++r)
                    for (int c = 0; c < 2 * W; ++c)
                      gi.segment(std::size_t((r / 2) * W + c / 2) * C, C) +=
                          go.segment(std::size_t(r * 2 * W + c) * C, C);
                });
  }

  // ---- samplers (query coordinates are fixed inputs) ----------------------

  // map {H, W, C} sampled at per-row pixel coordinates uv / stride, border
  // clamped; one output row per query.
  Var bilinear2d(Var map, const std::vector<Vec2>& uvs, double stride = 1.0) {
    const Tensor& tm = nodes_[map.id].value;
    if (tm.rank() != 3) throw ShapeMismatch("bilinear2d");
    const int H = tm.dim(0), W = tm.dim(1), C = tm.dim(2);
    const int n = int(uvs.size());
    auto taps = std::make_shared<std::vector<std::array<std::pair<int, double>, 4>>>(n);
    Tensor out = Tensor::zeros({n, C});
    for (int i = 0; i < n; ++i) {
      double u = std::clamp(uvs[i].x() / stride, 0.0, double(W - 1));
      double v = std::clamp(uvs[i].y() / stride, 0.0, double(H - 1));
      int c0 = std::min(int(u), std::max(0, W - 2));
      int r0 = std::min(int(v), std::max(0, H - 2));
      int c1 = std::min(c0 + 1, W - 1), r1 = std::min(r0 + 1, H - 1);
      double fu = u - c0, fv = v - r0;
      (*taps)[i] = {{{r0 * W + c0, (1 - fu) * (1 - fv)},
                     {r0 * W + c1, fu * (1 - fv)},
                     {r1 * W + c0, (1 - fu) * fv},
                     {r1 * W + c1, fu * fv}}};
      for (const auto& [pix, wgt] : (*taps)[i])
        out.mat().row(i) += wgt * tm.data.segment(std::size_t(pix) * C, C).transpose();
    }
    return push(std::move(out), any_grad({map}), {map},
                [map, taps, C](Graph& g, int self) {
                  if (!g.needs_grad(map)) return;
                  const Tensor& go = g.nodes_[self].grad;
                  VecX& gm = g.ensure_grad(map.id).data;
                  for (int i = 0; i < int(taps->size()); ++i)
                    for (const auto& [pix, wgt] : (*taps)[i])
                      gm.segment(std::size_t(pix) * C, C) +=
                          wgt * go.mat().row(i).transpose();
                });
  }

  // volume {D, H, W, C} sampled at lattice coordinates (x, y, z) where x
  // indexes W, y indexes H, z indexes D. Points outside the lattice produce
  // zero rows (and no gradients), matching the out-of-cube convention.
  Var trilinear3d(Var volume, const std::vector<Vec3>& pts) {
    const Tensor& tv = nodes_[volume.id].value;
    if (tv.rank() != 4) throw ShapeMismatch("trilinear3d");
    const int D = tv.dim(0), H = tv.dim(1), W = tv.dim(2), C = tv.dim(3);
    const int n = int(pts.size());
    auto taps = std::make_shared<std::vector<std::array<std::pair<int, double>, 8>>>();
    taps->assign(n, {});
    Tensor out = Tensor::zeros({n, C});
    for (int i = 0; i < n; ++i) {
      const Vec3& p = pts[i];
      if (p.x() < 0 || p.y() < 0 || p.z() < 0 || p.x() > W - 1 || p.y() > H - 1 ||
          p.z() > D - 1) {
        for (auto& t : (*taps)[i]) t = {0, 0.0};
        continue;
      }
      int i0 = std::min(int(p.x()), std::max(0, W - 2));
      int j0 = std::min(int(p.y()), std::max(0, H - 2));
      int k0 = std::min(int(p.z()), std::max(0, D - 2));
      double fx = p.x() - i0, fy = p.y() - j0, fz = p.z() - k0;
      int t = 0;
      for (int dz = 0; dz < 2; ++dz)
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            double wgt = (dx ? fx : 1 - fx) * (dy ? fy : 1 - fy) * (dz ? fz : 1 - fz);
            int cell = ((k0 + dz) * H + (j0 + dy)) * W + (i0 + dx);
            (*taps)[i][t++] = {cell, wgt};
            out.mat().row(i) +=
                wgt * tv.data.segment(std::size_t(cell) * C, C).transpose();
          }
    }
    return push(std::move(out), any_grad({volume}), {volume},
                [volume, taps, C](Graph& g, int self) {
                  if (!g.needs_grad(volume)) return;
                  const Tensor& go = g.nodes_[self].grad;
                  VecX& gv = g.ensure_grad(volume.id).data;
                  for (int i = 0; i < int(taps->size()); ++i)
                    for (const auto& [cell, wgt] : (*taps)[i])
                      if (wgt != 0.0)
                        gv.segment(std::size_t(cell) * C, C) +=
                            wgt * go.mat().row(i).transpose();
                });
  }

  // ---- reductions / losses ------------------------------------------------

  Var l1_mean(Var pred, Var target) {
    const Tensor& tp = nodes_[pred.id].value;
    const Tensor& tt = nodes_[target.id].value;
    if (!tp.same_shape(tt)) throw ShapeMismatch("l1_mean");
    double v = (tp.data - tt.data).cwiseAbs().mean();
    return push(Tensor::scalar(v), any_grad({pred, target}), {pred, target},
                [pred, target](Graph& g, int self) {
                  const Tensor& tp = g.nodes_[pred.id].value;
                  const Tensor& tt = g.nodes_[target.id].value;
                  double go = g.nodes_[self].grad.data[0] / double(tp.count());
                  VecX sign = (tp.data - tt.data)
                                  .unaryExpr([](double d) {
                                    return d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0);
                                  });
                  if (g.needs_grad(pred)) g.ensure_grad(pred.id).data += go * sign;
                  if (g.needs_grad(target))
                    g.ensure_grad(target.id).data -= go * sign;
                });
  }

  Var mean_sq(Var x) {
    const Tensor& tx = nodes_[x.id].value;
    double v = tx.data.squaredNorm() / double(tx.count());
    return push(Tensor::scalar(v), any_grad({x}), {x},
                [x](Graph& g, int self) {
                  if (!g.needs_grad(x)) return;
                  const Tensor& tx = g.nodes_[x.id].value;
                  double go = g.nodes_[self].grad.data[0];
                  g.ensure_grad(x.id).data +=
                      (2.0 * go / double(tx.count())) * tx.data;
                });
  }

  Var sum_sq(Var x) {
    const Tensor& tx = nodes_[x.id].value;
    return push(Tensor::scalar(tx.data.squaredNorm()), any_grad({x}), {x},
                [x](Graph& g, int self) {
                  if (!g.needs_grad(x)) return;
                  double go = g.nodes_[self].grad.data[0];
                  g.ensure_grad(x.id).data += (2.0 * go) * g.nodes_[x.id].value.data;
                });
  }

  // ---- engine -------------------------------------------------------------

  void backward(Var loss) {
    const Tensor& lv = nodes_[loss.id].value;
    if (lv.count() != 1) throw ShapeMismatch("backward: loss must be scalar");
    if (!lv.finite()) throw NonFiniteLoss("backward: loss is not finite");
    ensure_grad(loss.id).data[0] = 1.0;
    for (int i = loss.id; i >= 0; --i) {
      auto& node = nodes_[i];
      if (!node.needs_grad || !node.backward || node.grad.data.size() == 0)
        continue;
      node.backward(*this, i);
    }
  }

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;  // lazily allocated
    bool needs_grad = false;
    std::function<void(Graph&, int)> backward;
  };

  friend struct GraphTestAccess;

  bool any_grad(const std::vector<Var>& vars) const {
    for (Var v : vars)
      if (nodes_[v.id].needs_grad) return true;
    return false;
  }

  Tensor& ensure_grad(int id) {
    Node& n = nodes_[id];
    if (n.grad.data.size() == 0) n.grad = Tensor::zeros(n.value.shape);
    return n.grad;
  }

  Var push(Tensor value, bool needs_grad, const std::vector<Var>&,
           std::function<void(Graph&, int)> backward) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return Var{int(nodes_.size()) - 1};
  }

  // ---- im2col helpers (kernel 3, pad 1) -----------------------------------

  static void im2col2d(const Tensor& x, int stride, Tensor& cols) {
    const int H = x.dim(0), W = x.dim(1), C = x.dim(2);
    const int Ho = (H - 1) / stride + 1, Wo = (W - 1) / stride + 1;
    auto cm = cols.mat();
    for (int r = 0; r < Ho; ++r)
      for (int c = 0; c < Wo; ++c) {
        Eigen::Index row = Eigen::Index(r) * Wo + c;
        for (int kh = 0; kh < 3; ++kh)
          for (int kw = 0; kw < 3; ++kw) {
            int ih = r * stride + kh - 1, iw = c * stride + kw - 1;
            if (ih < 0 || ih >= H || iw < 0 || iw >= W) continue;
            for (int ch = 0; ch < C; ++ch)
              cm(row, (ch * 3 + kh) * 3 + kw) =
                  x.data[(std::size_t(ih) * W + iw) * C + ch];
          }
      }
  }

  static void col2im2d(const Tensor& dcols, int stride, Tensor& dx) {
    const int H = dx.dim(0), W = dx.dim(1), C = dx.dim(2);
    const int Wo = (W - 1) / stride + 1, Ho = (H - 1) / stride + 1;
    auto cm = dcols.mat();
    for (int r = 0; r < Ho; ++r)
      for (int c = 0; c < Wo; ++c) {
        Eigen::Index row = Eigen::Index(r) * Wo + c;
        for (int kh = 0; kh < 3; ++kh)
          for (int kw = 0; kw < 3; ++kw) {
            int ih = r * stride + kh - 1, iw = c * stride + kw - 1;
            if (ih < 0 || ih >= H || iw < 0 || iw >= W) continue;
            for (int ch = 0; ch < C; ++ch)
              dx.data[(std::size_t(ih) * W + iw) * C + ch] +=
                  cm(row, (ch * 3 + kh) * 3 + kw);
          }
      }
  }

  static void im2col3d(const Tensor& x, Tensor& cols) {
    const int D = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
    auto cm = cols.mat();
    for (int d = 0; d < D; ++d)
      for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c) {
          Eigen::Index row = (Eigen::Index(d) * H + r) * W + c;
          for (int kd = 0; kd < 3; ++kd)
            for (int kh = 0; kh < 3; ++kh)
              for (int kw = 0; kw < 3; ++kw) {
                int id = d + kd - 1, ih = r + kh - 1, iw = c + kw - 1;
                if (id < 0 || id >= D || ih < 0 || ih >= H || iw < 0 || iw >= W)
                  continue;
                for (int ch = 0; ch < C; ++ch)
                  cm(row, ((ch * 3 + kd) * 3 + kh) * 3 + kw) =
                      x.data[((std::size_t(id) * H + ih) * W + iw) * C + ch];
              }
        }
  }

  static void col2im3d(const Tensor& dcols, Tensor& dx) {
    const int D = dx.dim(0), H = dx.dim(1), W = dx.dim(2), C = dx.dim(3);
    auto cm = dcols.mat();
    for (int d = 0; d < D; ++d)
      for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c) {
          Eigen::Index row = (Eigen::Index(d) * H + r) * W + c;
          for (int kd = 0; kd < 3; ++kd)
            for (int kh = 0; kh < 3; ++kh)
              for (int kw = 0; kw < 3; ++kw) {
                int id = d + kd - 1, ih = r + kh - 1, iw = c + kw - 1;
                if (id < 0 || id >= D || ih < 0 || ih >= H || iw < 0 || iw >= W)
                  continue;
                for (int ch = 0; ch < C; ++ch)
                  dx.data[((std::size_t(id) * H + ih) * W + iw) * C + ch] +=
                      cm(row, ((ch * 3 + kd) * 3 + kh) * 3 + kw);
              }
        }
  }

  std::vector<Node> nodes_;
};

}  // namespace chord::nn
