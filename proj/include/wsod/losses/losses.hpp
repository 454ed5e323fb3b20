// Copyright (c) 2026 wsod contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "wsod/core/types.hpp"
#include "wsod/ndgrad/gradcheck.hpp"
#include "wsod/ndgrad/graph.hpp"

// Training objectives. Each builder appends nodes to the caller's graph and
// returns the scalar loss node. Cross-entropies over probability maps clamp
// to [1e-7, 1-1e-7] before any logarithm; the classification loss works on
// logits through softplus and needs no clamping.

namespace wsod::losses {

constexpr double kProbClamp = 1e-7;

template <typename T>
struct LossValue {
  int node = -1;
  double value = 0.0;
};

namespace detail {

template <typename T>
inline T softplus(T x) {
  // log(1 + e^x) without overflow on either tail
  return x > T(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

template <typename T>
inline T clamp_prob(T p) {
  return std::min(std::max(p, static_cast<T>(kProbClamp)), static_cast<T>(1.0 - kProbClamp));
}

}  // namespace detail

/// Mean-over-categories BCE on raw logits: -(1/C) sum_i [y_i log s(s_i) +
/// (1-y_i) log(1-s(s_i))] with s the logistic function.
template <typename T>
inline LossValue<T> classification_loss(ndgrad::Graph<T>& g, int logits,
                                        const core::CategoryLabel& yc) {
  const auto& t = g.val(logits);
  const int c = static_cast<int>(t.count());
  if (c != yc.num_categories())
    throw_shape("classification_loss: " + std::to_string(c) + " logits vs " +
                std::to_string(yc.num_categories()) + " categories");
  std::vector<T> y(yc.bits.begin(), yc.bits.end());

  typename ndgrad::Graph<T>::CustomSpec spec;
  spec.name = "classification_loss";
  spec.out_shape = {1, 1, 1};
  spec.forward = [y, c](const std::vector<T>& s) {
    T acc = T(0);
    for (int i = 0; i < c; ++i)
      acc += y[static_cast<std::size_t>(i)] * detail::softplus(-s[static_cast<std::size_t>(i)]) +
             (T(1) - y[static_cast<std::size_t>(i)]) * detail::softplus(s[static_cast<std::size_t>(i)]);
    return std::vector<T>{acc / static_cast<T>(c)};
  };
  spec.backward = [y, c](const std::vector<T>& s, const std::vector<T>&, const std::vector<T>& gy,
                         std::vector<T>& gx) {
    const T scale = gy[0] / static_cast<T>(c);
    for (int i = 0; i < c; ++i) {
      const T sig = T(1) / (T(1) + std::exp(-s[static_cast<std::size_t>(i)]));
      gx[static_cast<std::size_t>(i)] += scale * (sig - y[static_cast<std::size_t>(i)]);
    }
  };
  const int node = g.custom(logits, std::move(spec));
  return {node, static_cast<double>(g.val(node).value[0])};
}

namespace detail {

/// Shared pixel-BCE builder for binary and soft targets.
template <typename T>
inline int pixel_bce(ndgrad::Graph<T>& g, int pred, std::vector<T> target, const char* name) {
  const auto& t = g.val(pred);
  if (t.count() != target.size())
    throw_shape(std::string(name) + ": prediction " + ndgrad::shape_str(t.shape) + " vs " +
                std::to_string(target.size()) + " target pixels");
  const std::size_t n = target.size();

  typename ndgrad::Graph<T>::CustomSpec spec;
  spec.name = name;
  spec.out_shape = {1, 1, 1};
  spec.forward = [target, n](const std::vector<T>& p) {
    T acc = T(0);
    for (std::size_t i = 0; i < n; ++i) {
      const T ph = clamp_prob(p[i]);
      acc += -(target[i] * std::log(ph) + (T(1) - target[i]) * std::log(T(1) - ph));
    }
    return std::vector<T>{acc / static_cast<T>(n)};
  };
  spec.backward = [target, n](const std::vector<T>& p, const std::vector<T>&,
                              const std::vector<T>& gy, std::vector<T>& gx) {
    const T scale = gy[0] / static_cast<T>(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (p[i] <= static_cast<T>(kProbClamp) || p[i] >= static_cast<T>(1.0 - kProbClamp))
        continue;  // clamped region: flat
      gx[i] += scale * (p[i] - target[i]) / (p[i] * (T(1) - p[i]));
    }
  };
  return g.custom(pred, std::move(spec));
}

}  // namespace detail

/// Pixel-mean BCE of a prediction map against a binary pseudo label.
template <typename T>
inline LossValue<T> filter_loss(ndgrad::Graph<T>& g, int pred, const core::BinaryMask& label) {
  const auto& t = g.val(pred);
  core::check_same_dims(ndgrad::chw_h(t.shape), ndgrad::chw_w(t.shape), label.height, label.width,
                        "filter_loss");
  std::vector<T> target(label.data.begin(), label.data.end());
  const int node = detail::pixel_bce(g, pred, std::move(target), "filter_loss");
  return {node, static_cast<double>(g.val(node).value[0])};
}

/// Pixel-mean BCE against a soft target map; the target is captured by value,
/// so no gradient can reach it.
template <typename T>
inline LossValue<T> multi_guidance_loss(ndgrad::Graph<T>& g, int pred,
                                        const core::ScoreMap& soft_target) {
  const auto& t = g.val(pred);
  core::check_same_dims(ndgrad::chw_h(t.shape), ndgrad::chw_w(t.shape), soft_target.height,
                        soft_target.width, "multi_guidance_loss");
  std::vector<T> target(soft_target.data.size());
  for (std::size_t i = 0; i < target.size(); ++i) target[i] = static_cast<T>(soft_target.data[i]);
  const int node = detail::pixel_bce(g, pred, std::move(target), "multi_guidance_loss");
  return {node, static_cast<double>(g.val(node).value[0])};
}

/// Agreement term between the two filter predictions. Default: mean (p1-p2)^2,
/// a similarity penalty minimized when the filters agree. Literal mode keeps
/// the source equation's sign, -sum (p1-p2)^2, available for comparison runs.
template <typename T>
inline LossValue<T> self_supervision_loss(ndgrad::Graph<T>& g, int p1, int p2,
                                          bool literal_signed = false) {
  const int sq = g.square(g.sub(p1, p2));
  const int node = literal_signed ? g.mul_scalar(g.sum(sq), -1.0) : g.mean(sq);
  return {node, static_cast<double>(g.val(node).value[0])};
}

/// L = L1 + L2 + Lmg + delta * Lss.
template <typename T>
inline LossValue<T> total_loss(ndgrad::Graph<T>& g, const LossValue<T>& l1, const LossValue<T>& l2,
                               const LossValue<T>& lmg, const LossValue<T>& lss, double delta) {
  const int node = g.add(g.add(l1.node, l2.node), g.add(lmg.node, g.mul_scalar(lss.node, delta)));
  return {node, static_cast<double>(g.val(node).value[0])};
}

/// Finite-difference coverage for every composite loss; logits/pre-sigmoid
/// leaves keep probabilities away from the clamp kinks.
inline std::vector<ndgrad::GradCheck> loss_checks() {
  std::vector<ndgrad::GradCheck> checks;

  checks.push_back({"classification_loss",
                    {{5, 1, 1}},
                    [](ndgrad::Graph<double>& g, const std::vector<int>& L) {
                      core::CategoryLabel yc;
                      yc.bits = {1, 0, 1, 0, 0};
                      return classification_loss(g, L[0], yc).node;
                    },
                    2.0});
  checks.push_back({"filter_loss",
                    {{1, 4, 4}},
                    [](ndgrad::Graph<double>& g, const std::vector<int>& L) {
                      core::BinaryMask y(4, 4);
                      for (std::size_t i = 0; i < 16; ++i) y.data[i] = (i * 7 % 3) == 0 ? 1 : 0;
                      return filter_loss(g, g.sigmoid(L[0]), y).node;
                    },
                    2.0});
  checks.push_back({"multi_guidance_loss",
                    {{1, 4, 4}},
                    [](ndgrad::Graph<double>& g, const std::vector<int>& L) {
                      core::ScoreMap ys(4, 4);
                      for (std::size_t i = 0; i < 16; ++i) ys.data[i] = (1.0 + (i % 9)) / 10.0;
                      return multi_guidance_loss(g, g.sigmoid(L[0]), ys).node;
                    },
                    2.0});
  checks.push_back({"self_supervision_default",
                    {{1, 4, 4}, {1, 4, 4}},
                    [](ndgrad::Graph<double>& g, const std::vector<int>& L) {
                      return self_supervision_loss(g, g.sigmoid(L[0]), g.sigmoid(L[1]), false).node;
                    },
                    2.0});
  checks.push_back({"self_supervision_literal",
                    {{1, 4, 4}, {1, 4, 4}},
                    [](ndgrad::Graph<double>& g, const std::vector<int>& L) {
                      return self_supervision_loss(g, g.sigmoid(L[0]), g.sigmoid(L[1]), true).node;
                    },
                    2.0});
  checks.push_back({"total_loss",
                    {{1, 2, 1}, {1, 2, 1}, {1, 2, 1}},
                    [](ndgrad::Graph<double>& g, const std::vector<int>& L) {
                      core::BinaryMask y1(2, 1), y2(2, 1);
                      y1.data = {1, 0};
                      y2.data = {0, 1};
                      core::ScoreMap ys(2, 1);
                      ys.data = {0.3, 0.8};
                      const int p1 = g.sigmoid(L[0]);
                      const int p2 = g.sigmoid(L[1]);
                      const int ps = g.sigmoid(L[2]);
                      auto l1 = filter_loss(g, p1, y1);
                      auto l2 = filter_loss(g, p2, y2);
                      auto lmg = multi_guidance_loss(g, ps, ys);
                      auto lss = self_supervision_loss(g, p1, p2, false);
                      return total_loss(g, l1, l2, lmg, lss, 2.0).node;
                    },
                    2.0});
  return checks;
}

}  // namespace wsod::losses
