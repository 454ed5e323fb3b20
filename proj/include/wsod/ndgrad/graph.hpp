// Copyright (c) 2026 wsod contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "wsod/core/map_ops.hpp"
#include "wsod/ndgrad/tensor.hpp"

// Reverse-mode tape over a fixed op vocabulary. Nodes evaluate eagerly at
// construction; backward() runs one reverse sweep through transient buffers
// and then adds the sweep's result into each node's persistent grad, so two
// backward calls accumulate exactly twice the gradient.

namespace wsod::ndgrad {

enum class Op {
  leaf,
  conv3x3,
  conv1x1,
  relu,
  sigmoid,
  gap,
  upsample_bilinear,
  concat_channels,
  add,
  mul_scalar,
  sub,
  square,
  sum,
  mean,
  custom,
};

inline const char* op_name(Op op) {
  switch (op) {
    case Op::leaf: return "leaf";
    case Op::conv3x3: return "conv3x3";
    case Op::conv1x1: return "conv1x1";
    case Op::relu: return "relu";
    case Op::sigmoid: return "sigmoid";
    case Op::gap: return "gap";
    case Op::upsample_bilinear: return "upsample_bilinear";
    case Op::concat_channels: return "concat_channels";
    case Op::add: return "add";
    case Op::mul_scalar: return "mul_scalar";
    case Op::sub: return "sub";
    case Op::square: return "square";
    case Op::sum: return "sum";
    case Op::mean: return "mean";
    case Op::custom: return "custom";
  }
  return "?";
}

namespace detail {

// Lane-blocked dot product and axpy: independent accumulator lanes keep the
// reduction order fixed (deterministic) while still auto-vectorizing.
template <typename T>
inline T blocked_dot(const T* a, const T* b, int n) {
  constexpr int L = 16;
  T acc[L] = {};
  int j = 0;
  for (; j + L <= n; j += L)
    for (int u = 0; u < L; ++u) acc[u] += a[j + u] * b[j + u];
  T tail = T(0);
  for (; j < n; ++j) tail += a[j] * b[j];
  T s01 = (acc[0] + acc[1]) + (acc[2] + acc[3]);
  T s23 = (acc[4] + acc[5]) + (acc[6] + acc[7]);
  T s45 = (acc[8] + acc[9]) + (acc[10] + acc[11]);
  T s67 = (acc[12] + acc[13]) + (acc[14] + acc[15]);
  return ((s01 + s23) + (s45 + s67)) + tail;
}

template <typename T>
inline void axpy(T* y, const T* x, T a, int n) {
  for (int j = 0; j < n; ++j) y[j] += a * x[j];
}

template <typename T>
inline T blocked_sum(const T* a, int n) {
  constexpr int L = 16;
  T acc[L] = {};
  int j = 0;
  for (; j + L <= n; j += L)
    for (int u = 0; u < L; ++u) acc[u] += a[j + u];
  T tail = T(0);
  for (; j < n; ++j) tail += a[j];
  T s01 = (acc[0] + acc[1]) + (acc[2] + acc[3]);
  T s23 = (acc[4] + acc[5]) + (acc[6] + acc[7]);
  T s45 = (acc[8] + acc[9]) + (acc[10] + acc[11]);
  T s67 = (acc[12] + acc[13]) + (acc[14] + acc[15]);
  return ((s01 + s23) + (s45 + s67)) + tail;
}

template <typename T>
struct AxisTap {
  int lo, hi;
  T g;
};

template <typename T>
inline std::vector<AxisTap<T>> axis_taps(int in_n, int out_n) {
  std::vector<AxisTap<T>> t;
  t.reserve(static_cast<std::size_t>(out_n));
  for (const auto& e : core::bilinear_axis(in_n, out_n))
    t.push_back({e.lo, e.hi, static_cast<T>(e.g)});
  return t;
}

}  // namespace detail

template <typename T>
class Graph {
 public:
  struct CustomSpec {
    std::string name = "custom";
    std::vector<int> out_shape;
    // forward: maps input values to output values
    std::function<std::vector<T>(const std::vector<T>&)> forward;
    // backward: accumulate d(loss)/d(input) into gx given input/output values
    // and d(loss)/d(output)
    std::function<void(const std::vector<T>& x, const std::vector<T>& y, const std::vector<T>& gy,
                       std::vector<T>& gx)>
        backward;
  };

  /// Adds a leaf holding the given tensor (copies it in).
  int leaf(Tensor<T> t) {
    Node n;
    n.op = Op::leaf;
    n.out = std::move(t);
    return push(std::move(n));
  }

  int leaf(std::vector<int> shape, const std::vector<T>& values, bool requires_grad) {
    Tensor<T> t(std::move(shape));
    if (values.size() != t.count())
      throw_shape("leaf: value count " + std::to_string(values.size()) + " for shape " +
                  shape_str(t.shape));
    t.value = values;
    t.set_requires_grad(requires_grad);
    return leaf(std::move(t));
  }

  /// conv3x3 with zero padding 1. x: (Ci,H,W); w: (Co,Ci,3,3); b: (Co).
  int conv3x3(int x, int w, int b, int stride = 1) {
    const Tensor<T>& xt = val(x);
    const Tensor<T>& wt = val(w);
    const Tensor<T>& bt = val(b);
    require_rank(xt.shape, 3, "conv3x3 input");
    require_rank(wt.shape, 4, "conv3x3 weight");
    require_rank(bt.shape, 1, "conv3x3 bias");
    if (stride != 1 && stride != 2) throw_config("conv3x3: stride must be 1 or 2");
    const int ci = chw_c(xt.shape), h = chw_h(xt.shape), w_in = chw_w(xt.shape);
    const int co = wt.shape[0];
    if (wt.shape[1] != ci || wt.shape[2] != 3 || wt.shape[3] != 3 || bt.shape[0] != co)
      throw_shape("conv3x3: weight " + shape_str(wt.shape) + " bias " + shape_str(bt.shape) +
                  " vs input " + shape_str(xt.shape));
    const int oh = (h - 1) / stride + 1;
    const int ow = (w_in - 1) / stride + 1;

    Node n;
    n.op = Op::conv3x3;
    n.in = {x, w, b};
    n.stride = stride;
    n.out = Tensor<T>({co, oh, ow});
    forward_conv3x3(xt, wt, bt, stride, n.out);
    return push(std::move(n));
  }

  /// conv1x1. x: (Ci,H,W); w: (Co,Ci); b: (Co).
  int conv1x1(int x, int w, int b) {
    const Tensor<T>& xt = val(x);
    const Tensor<T>& wt = val(w);
    const Tensor<T>& bt = val(b);
    require_rank(xt.shape, 3, "conv1x1 input");
    require_rank(wt.shape, 2, "conv1x1 weight");
    require_rank(bt.shape, 1, "conv1x1 bias");
    const int ci = chw_c(xt.shape);
    const int co = wt.shape[0];
    if (wt.shape[1] != ci || bt.shape[0] != co)
      throw_shape("conv1x1: weight " + shape_str(wt.shape) + " bias " + shape_str(bt.shape) +
                  " vs input " + shape_str(xt.shape));
    const int pix = chw_h(xt.shape) * chw_w(xt.shape);

    Node n;
    n.op = Op::conv1x1;
    n.in = {x, w, b};
    n.out = Tensor<T>({co, chw_h(xt.shape), chw_w(xt.shape)});
    for (int o = 0; o < co; ++o) {
      T* orow = n.out.value.data() + static_cast<std::size_t>(o) * pix;
      for (int p = 0; p < pix; ++p) orow[p] = bt.value[static_cast<std::size_t>(o)];
      for (int i = 0; i < ci; ++i)
        detail::axpy(orow, xt.value.data() + static_cast<std::size_t>(i) * pix,
                     wt.value[static_cast<std::size_t>(o) * ci + i], pix);
    }
    return push(std::move(n));
  }

  int relu(int x) {
    Node n = unary(Op::relu, x);
    const auto& xv = val(x).value;
    for (std::size_t i = 0; i < xv.size(); ++i) n.out.value[i] = xv[i] > T(0) ? xv[i] : T(0);
    return push(std::move(n));
  }

  int sigmoid(int x) {
    Node n = unary(Op::sigmoid, x);
    const auto& xv = val(x).value;
    for (std::size_t i = 0; i < xv.size(); ++i)
      n.out.value[i] = T(1) / (T(1) + std::exp(-xv[i]));
    return push(std::move(n));
  }

  /// Global average pool: (C,H,W) -> (C,1,1).
  int gap(int x) {
    const Tensor<T>& xt = val(x);
    require_rank(xt.shape, 3, "gap input");
    const int c = chw_c(xt.shape);
    const int pix = chw_h(xt.shape) * chw_w(xt.shape);
    Node n;
    n.op = Op::gap;
    n.in = {x, -1, -1};
    n.out = Tensor<T>({c, 1, 1});
    for (int i = 0; i < c; ++i)
      n.out.value[static_cast<std::size_t>(i)] =
          detail::blocked_sum(xt.value.data() + static_cast<std::size_t>(i) * pix, pix) /
          static_cast<T>(pix);
    return push(std::move(n));
  }

  int upsample_bilinear(int x, int oh, int ow) {
    const Tensor<T>& xt = val(x);
    require_rank(xt.shape, 3, "upsample input");
    if (oh < 1 || ow < 1) throw_config("upsample_bilinear: target dims must be >= 1");
    const int c = chw_c(xt.shape), h = chw_h(xt.shape), w = chw_w(xt.shape);
    Node n;
    n.op = Op::upsample_bilinear;
    n.in = {x, -1, -1};
    n.ty = detail::axis_taps<T>(h, oh);
    n.tx = detail::axis_taps<T>(w, ow);
    n.out = Tensor<T>({c, oh, ow});
    for (int ch = 0; ch < c; ++ch) {
      const T* src = xt.value.data() + static_cast<std::size_t>(ch) * h * w;
      T* dst = n.out.value.data() + static_cast<std::size_t>(ch) * oh * ow;
      for (int y = 0; y < oh; ++y) {
        const auto& ay = n.ty[static_cast<std::size_t>(y)];
        const T* r0 = src + static_cast<std::size_t>(ay.lo) * w;
        const T* r1 = src + static_cast<std::size_t>(ay.hi) * w;
        for (int xo = 0; xo < ow; ++xo) {
          const auto& ax = n.tx[static_cast<std::size_t>(xo)];
          const T top = T(0.5) * (r0[ax.lo] + r0[ax.hi]) + ax.g * (r0[ax.hi] - r0[ax.lo]);
          const T bot = T(0.5) * (r1[ax.lo] + r1[ax.hi]) + ax.g * (r1[ax.hi] - r1[ax.lo]);
          dst[static_cast<std::size_t>(y) * ow + xo] =
              T(0.5) * (top + bot) + ay.g * (bot - top);
        }
      }
    }
    return push(std::move(n));
  }

  int concat_channels(int a, int b) {
    const Tensor<T>& at = val(a);
    const Tensor<T>& bt = val(b);
    require_rank(at.shape, 3, "concat input");
    require_rank(bt.shape, 3, "concat input");
    if (chw_h(at.shape) != chw_h(bt.shape) || chw_w(at.shape) != chw_w(bt.shape))
      throw_shape("concat_channels: " + shape_str(at.shape) + " vs " + shape_str(bt.shape));
    Node n;
    n.op = Op::concat_channels;
    n.in = {a, b, -1};
    n.out = Tensor<T>({chw_c(at.shape) + chw_c(bt.shape), chw_h(at.shape), chw_w(at.shape)});
    std::copy(at.value.begin(), at.value.end(), n.out.value.begin());
    std::copy(bt.value.begin(), bt.value.end(),
              n.out.value.begin() + static_cast<std::ptrdiff_t>(at.value.size()));
    return push(std::move(n));
  }

  int add(int a, int b) { return binary(Op::add, a, b); }
  int sub(int a, int b) { return binary(Op::sub, a, b); }

  int mul_scalar(int x, double s) {
    Node n = unary(Op::mul_scalar, x);
    n.scalar = s;
    const auto& xv = val(x).value;
    for (std::size_t i = 0; i < xv.size(); ++i) n.out.value[i] = static_cast<T>(s) * xv[i];
    return push(std::move(n));
  }

  int square(int x) {
    Node n = unary(Op::square, x);
    const auto& xv = val(x).value;
    for (std::size_t i = 0; i < xv.size(); ++i) n.out.value[i] = xv[i] * xv[i];
    return push(std::move(n));
  }

  int sum(int x) {
    Node n;
    n.op = Op::sum;
    n.in = {x, -1, -1};
    n.out = Tensor<T>({1, 1, 1});
    n.out.value[0] = detail::blocked_sum(val(x).value.data(), static_cast<int>(val(x).count()));
    return push(std::move(n));
  }

  int mean(int x) {
    Node n;
    n.op = Op::mean;
    n.in = {x, -1, -1};
    n.out = Tensor<T>({1, 1, 1});
    n.out.value[0] = detail::blocked_sum(val(x).value.data(), static_cast<int>(val(x).count())) /
                     static_cast<T>(val(x).count());
    return push(std::move(n));
  }

  int custom(int x, CustomSpec spec) {
    const Tensor<T>& xt = val(x);
    Node n;
    n.op = Op::custom;
    n.in = {x, -1, -1};
    n.out = Tensor<T>(spec.out_shape);
    std::vector<T> y = spec.forward(xt.value);
    if (y.size() != n.out.count())
      throw_contract(spec.name + ": forward produced " + std::to_string(y.size()) +
                     " values for shape " + shape_str(spec.out_shape));
    n.out.value = std::move(y);
    n.spec = std::make_shared<CustomSpec>(std::move(spec));
    return push(std::move(n));
  }

  const Tensor<T>& val(int id) const { return nodes_.at(static_cast<std::size_t>(id)).out; }
  Tensor<T>& node_tensor(int id) { return nodes_.at(static_cast<std::size_t>(id)).out; }
  std::size_t size() const { return nodes_.size(); }

  /// Reverse sweep from a one-element loss node; adds this sweep's gradients
  /// into every requires-grad node's persistent grad buffer.
  void backward(int loss_id) {
    const Tensor<T>& loss = val(loss_id);
    if (loss.count() != 1)
      throw_contract("backward: loss must be a single element, got " + shape_str(loss.shape));
    std::vector<std::vector<T>> gbuf(nodes_.size());
    gbuf[static_cast<std::size_t>(loss_id)].assign(1, T(1));

    for (int id = loss_id; id >= 0; --id) {
      Node& n = nodes_[static_cast<std::size_t>(id)];
      auto& gy = gbuf[static_cast<std::size_t>(id)];
      if (gy.empty() || !n.flows_grad) continue;
      switch (n.op) {
        case Op::leaf: break;
        case Op::conv3x3: backward_conv3x3(n, gy, gbuf); break;
        case Op::conv1x1: backward_conv1x1(n, gy, gbuf); break;
        case Op::relu: {
          auto& gx = grad_buf(n.in[0], gbuf);
          const auto& xv = val(n.in[0]).value;
          for (std::size_t i = 0; i < xv.size(); ++i)
            if (xv[i] > T(0)) gx[i] += gy[i];
          break;
        }
        case Op::sigmoid: {
          auto& gx = grad_buf(n.in[0], gbuf);
          const auto& yv = n.out.value;
          for (std::size_t i = 0; i < yv.size(); ++i) gx[i] += gy[i] * yv[i] * (T(1) - yv[i]);
          break;
        }
        case Op::gap: {
          auto& gx = grad_buf(n.in[0], gbuf);
          const auto& xs = val(n.in[0]).shape;
          const int pix = chw_h(xs) * chw_w(xs);
          const T inv = T(1) / static_cast<T>(pix);
          for (int c = 0; c < chw_c(xs); ++c) {
            const T g = gy[static_cast<std::size_t>(c)] * inv;
            T* row = gx.data() + static_cast<std::size_t>(c) * pix;
            for (int p = 0; p < pix; ++p) row[p] += g;
          }
          break;
        }
        case Op::upsample_bilinear: {
          auto& gx = grad_buf(n.in[0], gbuf);
          const auto& xs = val(n.in[0]).shape;
          const int h = chw_h(xs), w = chw_w(xs);
          const int oh = chw_h(n.out.shape), ow = chw_w(n.out.shape);
          for (int c = 0; c < chw_c(xs); ++c) {
            T* g = gx.data() + static_cast<std::size_t>(c) * h * w;
            const T* go = gy.data() + static_cast<std::size_t>(c) * oh * ow;
            for (int y = 0; y < oh; ++y) {
              const auto& ay = n.ty[static_cast<std::size_t>(y)];
              const T wy_lo = T(0.5) - ay.g, wy_hi = T(0.5) + ay.g;
              for (int xo = 0; xo < ow; ++xo) {
                const auto& ax = n.tx[static_cast<std::size_t>(xo)];
                const T wx_lo = T(0.5) - ax.g, wx_hi = T(0.5) + ax.g;
                const T v = go[static_cast<std::size_t>(y) * ow + xo];
                g[static_cast<std::size_t>(ay.lo) * w + ax.lo] += v * wy_lo * wx_lo;
                g[static_cast<std::size_t>(ay.lo) * w + ax.hi] += v * wy_lo * wx_hi;
                g[static_cast<std::size_t>(ay.hi) * w + ax.lo] += v * wy_hi * wx_lo;
                g[static_cast<std::size_t>(ay.hi) * w + ax.hi] += v * wy_hi * wx_hi;
              }
            }
          }
          break;
        }
        case Op::concat_channels: {
          const std::size_t na = val(n.in[0]).count();
          auto& ga = grad_buf(n.in[0], gbuf);
          auto& gb = grad_buf(n.in[1], gbuf);
          for (std::size_t i = 0; i < na; ++i) ga[i] += gy[i];
          for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += gy[na + i];
          break;
        }
        case Op::add: {
          auto& ga = grad_buf(n.in[0], gbuf);
          auto& gb = grad_buf(n.in[1], gbuf);
          for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
          for (std::size_t i = 0; i < gy.size(); ++i) gb[i] += gy[i];
          break;
        }
        case Op::sub: {
          auto& ga = grad_buf(n.in[0], gbuf);
          auto& gb = grad_buf(n.in[1], gbuf);
          for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
          for (std::size_t i = 0; i < gy.size(); ++i) gb[i] -= gy[i];
          break;
        }
        case Op::mul_scalar: {
          auto& gx = grad_buf(n.in[0], gbuf);
          const T s = static_cast<T>(n.scalar);
          for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += s * gy[i];
          break;
        }
        case Op::square: {
          auto& gx = grad_buf(n.in[0], gbuf);
          const auto& xv = val(n.in[0]).value;
          for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += T(2) * xv[i] * gy[i];
          break;
        }
        case Op::sum: {
          auto& gx = grad_buf(n.in[0], gbuf);
          for (auto& g : gx) g += gy[0];
          break;
        }
        case Op::mean: {
          auto& gx = grad_buf(n.in[0], gbuf);
          const T inv = T(1) / static_cast<T>(gx.size());
          for (auto& g : gx) g += gy[0] * inv;
          break;
        }
        case Op::custom: {
          auto& gx = grad_buf(n.in[0], gbuf);
          n.spec->backward(val(n.in[0]).value, n.out.value, gy, gx);
          break;
        }
      }
    }

    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      Node& n = nodes_[i];
      if (!n.out.requires_grad || gbuf[i].empty()) continue;
      if (n.out.grad.empty()) n.out.grad.assign(n.out.count(), T(0));
      for (std::size_t j = 0; j < gbuf[i].size(); ++j) n.out.grad[j] += gbuf[i][j];
    }
  }

 private:
  struct Node {
    Op op = Op::leaf;
    std::array<int, 3> in = {-1, -1, -1};
    Tensor<T> out;
    int stride = 1;
    double scalar = 0.0;
    bool flows_grad = false;  // any upstream leaf requires grad
    std::vector<detail::AxisTap<T>> ty, tx;
    std::shared_ptr<CustomSpec> spec;
  };

  Node unary(Op op, int x) {
    Node n;
    n.op = op;
    n.in = {x, -1, -1};
    n.out = Tensor<T>(val(x).shape);
    return n;
  }

  int binary(Op op, int a, int b) {
    const Tensor<T>& at = val(a);
    const Tensor<T>& bt = val(b);
    if (at.shape != bt.shape)
      throw_shape(std::string(op_name(op)) + ": " + shape_str(at.shape) + " vs " +
                  shape_str(bt.shape));
    Node n;
    n.op = op;
    n.in = {a, b, -1};
    n.out = Tensor<T>(at.shape);
    for (std::size_t i = 0; i < at.value.size(); ++i)
      n.out.value[i] = op == Op::add ? at.value[i] + bt.value[i] : at.value[i] - bt.value[i];
    return push(std::move(n));
  }

  int push(Node n) {
    n.flows_grad = n.out.requires_grad;
    for (int in_id : n.in)
      if (in_id >= 0) {
        if (in_id >= static_cast<int>(nodes_.size()))
          throw_contract("graph: input id out of range");
        n.flows_grad = n.flows_grad || nodes_[static_cast<std::size_t>(in_id)].flows_grad;
      }
    if (!n.out.values_finite())
      throw_numeric(std::string(op_name(n.op)) + ": non-finite values in forward output");
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  std::vector<T>& grad_buf(int id, std::vector<std::vector<T>>& gbuf) {
    auto& g = gbuf[static_cast<std::size_t>(id)];
    if (g.empty()) g.assign(nodes_[static_cast<std::size_t>(id)].out.count(), T(0));
    return g;
  }

  void forward_conv3x3(const Tensor<T>& xt, const Tensor<T>& wt, const Tensor<T>& bt, int stride,
                       Tensor<T>& out) {
    const int ci = chw_c(xt.shape), h = chw_h(xt.shape), w = chw_w(xt.shape);
    const int co = out.shape[0], oh = out.shape[1], ow = out.shape[2];
    const int k = ci * 9;
    std::vector<T>& patches = scratch_;
    patches.assign(static_cast<std::size_t>(oh) * ow * k, T(0));
    im2col(xt.value.data(), ci, h, w, stride, oh, ow, patches.data());
    const int pix = oh * ow;
    for (int o = 0; o < co; ++o) {
      const T* wrow = wt.value.data() + static_cast<std::size_t>(o) * k;
      const T bias = bt.value[static_cast<std::size_t>(o)];
      T* orow = out.value.data() + static_cast<std::size_t>(o) * pix;
      for (int p = 0; p < pix; ++p)
        orow[p] = bias + detail::blocked_dot(patches.data() + static_cast<std::size_t>(p) * k,
                                             wrow, k);
    }
  }

  void backward_conv3x3(Node& n, const std::vector<T>& gy, std::vector<std::vector<T>>& gbuf) {
    const Tensor<T>& xt = val(n.in[0]);
    const Tensor<T>& wt = val(n.in[1]);
    const int ci = chw_c(xt.shape), h = chw_h(xt.shape), w = chw_w(xt.shape);
    const int co = n.out.shape[0], oh = n.out.shape[1], ow = n.out.shape[2];
    const int k = ci * 9;
    const int pix = oh * ow;

    std::vector<T> patches(static_cast<std::size_t>(pix) * k, T(0));
    im2col(xt.value.data(), ci, h, w, n.stride, oh, ow, patches.data());

    const bool need_w = nodes_[static_cast<std::size_t>(n.in[1])].flows_grad;
    const bool need_b = nodes_[static_cast<std::size_t>(n.in[2])].flows_grad;
    const bool need_x = nodes_[static_cast<std::size_t>(n.in[0])].flows_grad;

    if (need_b) {
      auto& gb = grad_buf(n.in[2], gbuf);
      for (int o = 0; o < co; ++o)
        gb[static_cast<std::size_t>(o)] +=
            detail::blocked_sum(gy.data() + static_cast<std::size_t>(o) * pix, pix);
    }
    if (need_w) {
      auto& gw = grad_buf(n.in[1], gbuf);
      for (int p = 0; p < pix; ++p) {
        const T* prow = patches.data() + static_cast<std::size_t>(p) * k;
        for (int o = 0; o < co; ++o)
          detail::axpy(gw.data() + static_cast<std::size_t>(o) * k, prow,
                       gy[static_cast<std::size_t>(o) * pix + p], k);
      }
    }
    if (need_x) {
      auto& gx = grad_buf(n.in[0], gbuf);
      std::vector<T> dpatch(static_cast<std::size_t>(pix) * k, T(0));
      for (int p = 0; p < pix; ++p) {
        T* drow = dpatch.data() + static_cast<std::size_t>(p) * k;
        for (int o = 0; o < co; ++o)
          detail::axpy(drow, wt.value.data() + static_cast<std::size_t>(o) * k,
                       gy[static_cast<std::size_t>(o) * pix + p], k);
      }
      // col2im scatter
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          const T* drow = dpatch.data() + (static_cast<std::size_t>(oy) * ow + ox) * k;
          for (int c = 0; c < ci; ++c)
            for (int dy = 0; dy < 3; ++dy) {
              const int iy = oy * n.stride - 1 + dy;
              if (iy < 0 || iy >= h) continue;
              for (int dx = 0; dx < 3; ++dx) {
                const int ix = ox * n.stride - 1 + dx;
                if (ix < 0 || ix >= w) continue;
                gx[(static_cast<std::size_t>(c) * h + iy) * w + ix] +=
                    drow[c * 9 + dy * 3 + dx];
              }
            }
        }
    }
  }

  void backward_conv1x1(Node& n, const std::vector<T>& gy, std::vector<std::vector<T>>& gbuf) {
    const Tensor<T>& xt = val(n.in[0]);
    const Tensor<T>& wt = val(n.in[1]);
    const int ci = chw_c(xt.shape);
    const int co = n.out.shape[0];
    const int pix = chw_h(xt.shape) * chw_w(xt.shape);
    const bool need_w = nodes_[static_cast<std::size_t>(n.in[1])].flows_grad;
    const bool need_b = nodes_[static_cast<std::size_t>(n.in[2])].flows_grad;
    const bool need_x = nodes_[static_cast<std::size_t>(n.in[0])].flows_grad;

    if (need_b) {
      auto& gb = grad_buf(n.in[2], gbuf);
      for (int o = 0; o < co; ++o)
        gb[static_cast<std::size_t>(o)] +=
            detail::blocked_sum(gy.data() + static_cast<std::size_t>(o) * pix, pix);
    }
    if (need_w) {
      auto& gw = grad_buf(n.in[1], gbuf);
      for (int o = 0; o < co; ++o)
        for (int i = 0; i < ci; ++i)
          gw[static_cast<std::size_t>(o) * ci + i] +=
              detail::blocked_dot(gy.data() + static_cast<std::size_t>(o) * pix,
                                  xt.value.data() + static_cast<std::size_t>(i) * pix, pix);
    }
    if (need_x) {
      auto& gx = grad_buf(n.in[0], gbuf);
      for (int i = 0; i < ci; ++i)
        for (int o = 0; o < co; ++o)
          detail::axpy(gx.data() + static_cast<std::size_t>(i) * pix,
                       gy.data() + static_cast<std::size_t>(o) * pix,
                       wt.value[static_cast<std::size_t>(o) * ci + i], pix);
    }
  }

  static void im2col(const T* x, int ci, int h, int w, int stride, int oh, int ow, T* patches) {
    const int k = ci * 9;
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        T* prow = patches + (static_cast<std::size_t>(oy) * ow + ox) * k;
        for (int c = 0; c < ci; ++c) {
          const T* plane = x + static_cast<std::size_t>(c) * h * w;
          for (int dy = 0; dy < 3; ++dy) {
            const int iy = oy * stride - 1 + dy;
            for (int dx = 0; dx < 3; ++dx) {
              const int ix = ox * stride - 1 + dx;
              prow[c * 9 + dy * 3 + dx] =
                  (iy < 0 || iy >= h || ix < 0 || ix >= w)
                      ? T(0)
                      : plane[static_cast<std::size_t>(iy) * w + ix];
            }
          }
        }
      }
  }

  std::vector<Node> nodes_;
  std::vector<T> scratch_;  // im2col buffer reused across forward convs
};

}  // namespace wsod::ndgrad
