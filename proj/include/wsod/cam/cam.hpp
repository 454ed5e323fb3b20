// Copyright (c) 2026 wsod contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "wsod/core/map_ops.hpp"
#include "wsod/core/types.hpp"
#include "wsod/nets/nets.hpp"

// Class activation maps from the trained classifier, and the multi-scale
// flip-averaged inference ensemble.
//
// Per-class maps come from sliding the classification head spatially over the
// block-5 features: channel i is rectified and min-max rescaled at feature
// resolution, then bilinearly upsampled to the input size. The fused map is
// the per-class maps weighted by the squashed class scores (raw logits may be
// negative, which would make the fusion ill-posed; the literal raw-logit
// weighting stays available behind a flag) and rescaled once more.

namespace wsod::cam {

struct CamConfig {
  bool sigmoid_weights = true;  // weight classes by the squashed score
  bool renormalize = true;      // min-max rescale the fused map
  // The smallest member still needs enough feature resolution to localize:
  // below ~2x the final stride its map degenerates to a frame-wide blob that
  // washes out the ensemble mean, so the default set leans large.
  std::vector<double> scales = {0.75, 1.0, 1.25, 1.5};
  bool flip = true;  // include horizontally flipped ensemble members
};

struct CamResult {
  core::ScoreMap map;                      // fused activation map, in [0,1]
  std::vector<core::ScoreMap> per_class;   // one rescaled map per class
  std::vector<double> scores;              // raw logits
};

namespace detail {

template <typename T>
void require_finite_params(const ndgrad::ParamSet<T>& params) {
  for (const auto& [name, p] : params)
    for (T v : p.value)
      if (!std::isfinite(static_cast<double>(v)))
        throw_numeric("classifier parameter '" + name + "' contains non-finite values");
}

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline core::ScoreMap sum_maps(const core::ScoreMap& a, const core::ScoreMap& b) {
  core::check_same_dims(a.height, a.width, b.height, b.width, "ensemble member");
  core::ScoreMap out(a.height, a.width);
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = a.data[i] + b.data[i];
  return out;
}

inline int scaled_dim(double scale, int dim) {
  return static_cast<int>(std::llround(scale * dim / 32.0)) * 32;
}

}  // namespace detail

template <typename T>
CamResult compute_cam(const ndgrad::ParamSet<T>& params, const core::ImageRGB& image,
                      const CamConfig& cfg = {}) {
  detail::require_finite_params(params);
  ndgrad::Graph<T> g;
  nets::ForwardTrace<T> tr;
  const int img = g.leaf(ndgrad::image_tensor<T>(image));
  nets::detail::require_divisible(image.height, image.width);
  const auto feats = nets::encoder_forward(g, params, tr, img, false);
  const int hw = params.bind(g, "head.w", false);
  const int hb = params.bind(g, "head.b", false);
  // The head both scores the pooled feature and, applied spatially, localizes.
  const int act = g.conv1x1(feats.f5, hw, hb);
  const int logits = g.conv1x1(g.gap(feats.f5), hw, hb);

  const auto& at = g.val(act);
  const int num_classes = at.shape[0];
  const int h5 = ndgrad::chw_h(at.shape), w5 = ndgrad::chw_w(at.shape);

  CamResult res;
  res.scores.resize(static_cast<std::size_t>(num_classes));
  // Match the classifier's scores exactly; the rescaled per-class maps are
  // invariant to a positive scale, so only the fusion weights see it.
  const double scale = nets::detail::meta_value(params, "logit_scale", 1.0);
  const auto& lv = g.val(logits).value;
  for (int i = 0; i < num_classes; ++i) {
    res.scores[static_cast<std::size_t>(i)] =
        scale * static_cast<double>(lv[static_cast<std::size_t>(i)]);
    if (!std::isfinite(res.scores[static_cast<std::size_t>(i)]))
      throw_numeric("classifier produced a non-finite score");
  }

  res.per_class.reserve(static_cast<std::size_t>(num_classes));
  const std::size_t plane = static_cast<std::size_t>(h5) * static_cast<std::size_t>(w5);
  for (int i = 0; i < num_classes; ++i) {
    core::ScoreMap raw(h5, w5);
    const T* src = at.value.data() + static_cast<std::size_t>(i) * plane;
    for (std::size_t p = 0; p < plane; ++p)
      raw.data[p] = std::max(0.0, static_cast<double>(src[p]));
    res.per_class.push_back(
        core::resize_bilinear(core::normalize_map(raw), image.height, image.width));
  }

  core::ScoreMap fused(image.height, image.width);
  for (int i = 0; i < num_classes; ++i) {
    const double w =
        cfg.sigmoid_weights ? detail::logistic(res.scores[static_cast<std::size_t>(i)])
                            : res.scores[static_cast<std::size_t>(i)];
    const auto& m = res.per_class[static_cast<std::size_t>(i)].data;
    for (std::size_t p = 0; p < fused.data.size(); ++p) fused.data[p] += w * m[p];
  }
  if (cfg.renormalize) {
    res.map = core::normalize_map(fused);
  } else {
    res.map = core::ScoreMap(image.height, image.width);
    for (std::size_t p = 0; p < fused.data.size(); ++p)
      res.map.data[p] = std::clamp(fused.data[p], 0.0, 1.0);
  }
  return res;
}

/// Per-member maps and the pre-rescale mean, for inspection.
struct MultiCamTrace {
  std::vector<core::ScoreMap> members;
  core::ScoreMap mean;
};

/// Ensemble over {4 scales} x {original, flipped}: each member map is resized
/// back to the input size and un-flipped, the members are averaged, and the
/// mean is min-max rescaled. Flips are applied at full input resolution on
/// both ends (image before resizing, map after resizing back) so flipping the
/// input flips the output bitwise. Members of one scale are summed first and
/// the four partial sums reduced as a balanced tree, which keeps the
/// degenerate all-scales-equal ensemble exactly equal to its members.
template <typename T>
core::ScoreMap multi_inference_cam(const ndgrad::ParamSet<T>& params,
                                   const core::ImageRGB& image, const CamConfig& cfg = {},
                                   MultiCamTrace* trace = nullptr) {
  if (cfg.scales.size() != 4)
    throw_config("multi-scale inference takes exactly four scales, got " +
                 std::to_string(cfg.scales.size()));
  for (double s : cfg.scales)
    if (!(s > 0.0)) throw_config("multi-scale inference: scales must be positive");

  auto member = [&](double scale, bool flipped) {
    const int sh = detail::scaled_dim(scale, image.height);
    const int sw = detail::scaled_dim(scale, image.width);
    if (sh < 32 || sw < 32)
      throw_config("scale " + std::to_string(scale) + " shrinks the input below 32 pixels");
    const core::ImageRGB& base = image;
    const core::ImageRGB scaled =
        core::resize_bilinear(flipped ? core::flip_horizontal(base) : base, sh, sw);
    core::ScoreMap m = core::resize_bilinear(compute_cam(params, scaled, cfg).map,
                                             image.height, image.width);
    return flipped ? core::flip_horizontal(m) : m;
  };

  std::vector<core::ScoreMap> pair_sums;
  std::vector<core::ScoreMap> members;
  for (double s : cfg.scales) {
    core::ScoreMap m0 = member(s, false);
    if (cfg.flip) {
      core::ScoreMap m1 = member(s, true);
      pair_sums.push_back(detail::sum_maps(m0, m1));
      members.push_back(std::move(m0));
      members.push_back(std::move(m1));
    } else {
      pair_sums.push_back(m0);
      members.push_back(std::move(m0));
    }
  }
  core::ScoreMap total = detail::sum_maps(detail::sum_maps(pair_sums[0], pair_sums[1]),
                                          detail::sum_maps(pair_sums[2], pair_sums[3]));
  const double count = static_cast<double>(members.size());
  core::ScoreMap mean(total.height, total.width);
  for (std::size_t i = 0; i < mean.data.size(); ++i) mean.data[i] = total.data[i] / count;
  if (trace) {
    trace->members = std::move(members);
    trace->mean = mean;
  }
  return core::normalize_map(mean);
}

}  // namespace wsod::cam
