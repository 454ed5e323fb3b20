// Copyright (c) 2026 wsod contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "wsod/common.hpp"
#include "wsod/core/types.hpp"
#include "wsod/ndgrad/bridge.hpp"
#include "wsod/ndgrad/graph.hpp"
#include "wsod/ndgrad/init.hpp"
#include "wsod/ndgrad/params.hpp"

// Network definitions.
//
// Classifier: five conv3x3(stride 2)+relu blocks, then global average
// pooling and a 1x1 "head" projection to class logits. The head weights
// double as the per-class activation-map projection.
//
// Saliency model: the same encoder family feeding
//   - up to two "directive filter" branches on the block-5 features
//     ((depth-1) conv3x3+relu layers, then conv1x1), each yielding a
//     1-channel map;
//   - one or two decoders that fuse block-3/4/5 features bottom-up
//     (upsample-concat-conv3x3 twice, then conv1x1).
// Every prediction head ends in a sigmoid and is bilinearly upsampled to the
// input resolution.

namespace wsod::nets {

struct NetConfig {
  std::vector<int> encoder_channels = {8, 16, 32, 64, 64};
  int filter_width = 192;
  int filter_depth = 4;  // conv layers per filter, incl. the 1x1 head
  int decoder_width = 32;
  // First encoder block stride. 1 keeps full resolution through the stem so
  // stage-5 features land at 1/16 instead of 1/32 — small objects stay
  // visible at the cost of a ~2.5x slower encoder.
  int stem_stride = 2;
  // Fixed multiplier on the classifier logits. Values above 1 let the scores
  // travel further per optimizer step when the step size is small.
  double logit_scale = 1.0;
};

inline void validate_config(const NetConfig& cfg) {
  if (cfg.encoder_channels.size() != 5)
    throw_config("net config: encoder needs exactly 5 channel widths");
  for (int c : cfg.encoder_channels)
    if (c < 1) throw_config("net config: encoder channels must be >= 1");
  if (cfg.filter_width < 1) throw_config("net config: filter width must be >= 1");
  if (cfg.filter_depth < 2)
    throw_config("net config: filter depth must be >= 2 (hidden layers + head)");
  if (cfg.decoder_width < 1)
    throw_config("net config: decoder width must be >= 1");
  if (cfg.stem_stride != 1 && cfg.stem_stride != 2)
    throw_config("net config: stem_stride must be 1 or 2");
  if (!(cfg.logit_scale > 0.0))
    throw_config("net config: logit_scale must be positive");
}

enum class Arch { single_decoder, single_df, dual_decoder, mdf };

inline const char* arch_name(Arch a) {
  switch (a) {
    case Arch::single_decoder: return "single_decoder";
    case Arch::single_df: return "single_df";
    case Arch::dual_decoder: return "dual_decoder";
    case Arch::mdf: return "mdf";
  }
  return "?";
}

inline bool arch_has_filter1(Arch a) { return a == Arch::single_df || a == Arch::mdf; }
inline bool arch_has_filter2(Arch a) { return a == Arch::mdf; }
inline bool arch_has_decoder2(Arch a) { return a == Arch::dual_decoder; }

namespace detail {

template <typename T>
void add_conv3(ndgrad::ParamSet<T>& ps, const std::string& name, int ci,
               int co, std::uint64_t seed) {
  ps.add(name + ".w", ndgrad::xavier_init<T>({co, ci, 3, 3}, seed));
  ps.add(name + ".b", ndgrad::Tensor<T>({co}));
}

template <typename T>
void add_conv1(ndgrad::ParamSet<T>& ps, const std::string& name, int ci,
               int co, std::uint64_t seed) {
  ps.add(name + ".w", ndgrad::xavier_init<T>({co, ci}, seed));
  ps.add(name + ".b", ndgrad::Tensor<T>({co}));
}

template <typename T>
void add_encoder(ndgrad::ParamSet<T>& ps, const NetConfig& cfg,
                 std::uint64_t seed, std::uint64_t& ordinal) {
  int ci = 3;
  for (int b = 0; b < 5; ++b) {
    add_conv3(ps, "enc" + std::to_string(b + 1), ci, cfg.encoder_channels[static_cast<std::size_t>(b)],
              mix_seed(seed, ordinal++));
    ci = cfg.encoder_channels[static_cast<std::size_t>(b)];
  }
}

template <typename T>
void add_filter(ndgrad::ParamSet<T>& ps, const NetConfig& cfg,
                const std::string& prefix, std::uint64_t seed,
                std::uint64_t& ordinal) {
  int ci = cfg.encoder_channels[4];
  for (int l = 1; l < cfg.filter_depth; ++l) {
    add_conv3(ps, prefix + ".c" + std::to_string(l), ci, cfg.filter_width,
              mix_seed(seed, ordinal++));
    ci = cfg.filter_width;
  }
  add_conv1(ps, prefix + ".head", ci, 1, mix_seed(seed, ordinal++));
}

template <typename T>
void add_decoder(ndgrad::ParamSet<T>& ps, const NetConfig& cfg,
                 const std::string& prefix, std::uint64_t seed,
                 std::uint64_t& ordinal) {
  add_conv3(ps, prefix + ".c45", cfg.encoder_channels[3] + cfg.encoder_channels[4],
            cfg.decoder_width, mix_seed(seed, ordinal++));
  add_conv3(ps, prefix + ".c34", cfg.encoder_channels[2] + cfg.decoder_width,
            cfg.decoder_width, mix_seed(seed, ordinal++));
  add_conv1(ps, prefix + ".head", cfg.decoder_width, 1, mix_seed(seed, ordinal++));
}

// Structural constants stored alongside the weights (never trained, never
// bound into a graph), so a checkpoint fully describes how to run itself.
template <typename T>
void add_meta(ndgrad::ParamSet<T>& ps, const std::string& name, double value) {
  ndgrad::Tensor<T> t({1});
  t.value[0] = static_cast<T>(value);
  ps.add("meta." + name, std::move(t));
}

template <typename T>
double meta_value(const ndgrad::ParamSet<T>& ps, const std::string& name,
                  double fallback) {
  const std::string key = "meta." + name;
  return ps.has(key) ? static_cast<double>(ps.at(key).value[0]) : fallback;
}

}  // namespace detail

template <typename T>
ndgrad::ParamSet<T> make_classifier_params(const NetConfig& cfg,
                                           int num_classes,
                                           std::uint64_t seed) {
  validate_config(cfg);
  if (num_classes < 1) throw_config("classifier: num_classes must be >= 1");
  ndgrad::ParamSet<T> ps;
  std::uint64_t ordinal = 0;
  detail::add_encoder(ps, cfg, seed, ordinal);
  detail::add_conv1(ps, "head", cfg.encoder_channels[4], num_classes,
                    mix_seed(seed, ordinal++));
  detail::add_meta(ps, "stem_stride", cfg.stem_stride);
  detail::add_meta(ps, "logit_scale", cfg.logit_scale);
  return ps;
}

template <typename T>
ndgrad::ParamSet<T> make_mfnet_params(const NetConfig& cfg, Arch arch,
                                      std::uint64_t seed) {
  validate_config(cfg);
  ndgrad::ParamSet<T> ps;
  std::uint64_t ordinal = 0;
  detail::add_encoder(ps, cfg, seed, ordinal);
  if (arch_has_filter1(arch)) detail::add_filter(ps, cfg, "f1", seed, ordinal);
  if (arch_has_filter2(arch)) detail::add_filter(ps, cfg, "f2", seed, ordinal);
  detail::add_decoder(ps, cfg, "dec", seed, ordinal);
  if (arch_has_decoder2(arch)) detail::add_decoder(ps, cfg, "dec2", seed, ordinal);
  detail::add_meta(ps, "stem_stride", cfg.stem_stride);
  return ps;
}

/// Records which parameter was bound to which graph leaf during a forward
/// pass, so gradients can be collected back after backward().
template <typename T>
struct ForwardTrace {
  std::vector<std::pair<std::string, int>> bound;

  int bind(ndgrad::Graph<T>& g, const ndgrad::ParamSet<T>& ps,
           const std::string& name, bool trainable) {
    const int id = ps.bind(g, name, trainable);
    if (trainable) bound.emplace_back(name, id);
    return id;
  }
  void collect(ndgrad::Graph<T>& g, ndgrad::ParamSet<T>& ps,
               double scale = 1.0) const {
    for (const auto& [name, id] : bound) ps.collect(g, name, id, scale);
  }
};

template <typename T>
struct FeatureStack {
  int f3 = -1;
  int f4 = -1;
  int f5 = -1;
};

namespace detail {

inline void require_divisible(int h, int w) {
  if (h % 32 != 0 || w % 32 != 0 || h <= 0 || w <= 0)
    throw_shape("network input dims must be positive multiples of 32, got " +
                std::to_string(h) + "x" + std::to_string(w));
}

template <typename T>
int conv_block(ndgrad::Graph<T>& g, const ndgrad::ParamSet<T>& ps,
               ForwardTrace<T>& tr, const std::string& name, int x, int stride,
               bool trainable) {
  const int w = tr.bind(g, ps, name + ".w", trainable);
  const int b = tr.bind(g, ps, name + ".b", trainable);
  return g.relu(g.conv3x3(x, w, b, stride));
}

template <typename T>
int conv_head(ndgrad::Graph<T>& g, const ndgrad::ParamSet<T>& ps,
              ForwardTrace<T>& tr, const std::string& name, int x,
              bool trainable) {
  const int w = tr.bind(g, ps, name + ".w", trainable);
  const int b = tr.bind(g, ps, name + ".b", trainable);
  return g.conv1x1(x, w, b);
}

}  // namespace detail

template <typename T>
FeatureStack<T> encoder_forward(ndgrad::Graph<T>& g,
                                const ndgrad::ParamSet<T>& ps,
                                ForwardTrace<T>& tr, int image_id,
                                bool trainable) {
  const int stem = static_cast<int>(detail::meta_value(ps, "stem_stride", 2.0));
  FeatureStack<T> f;
  int x = image_id;
  for (int b = 1; b <= 5; ++b) {
    x = detail::conv_block(g, ps, tr, "enc" + std::to_string(b), x,
                           b == 1 ? stem : 2, trainable);
    if (b == 3) f.f3 = x;
    if (b == 4) f.f4 = x;
    if (b == 5) f.f5 = x;
  }
  return f;
}

template <typename T>
struct ClassifierOut {
  FeatureStack<T> feats;
  int scores = -1;  // (C,1,1) raw logits
};

template <typename T>
ClassifierOut<T> classifier_forward(ndgrad::Graph<T>& g,
                                    const ndgrad::ParamSet<T>& ps,
                                    ForwardTrace<T>& tr, int image_id,
                                    bool trainable) {
  const auto& shape = g.node_tensor(image_id).shape;
  detail::require_divisible(ndgrad::chw_h(shape), ndgrad::chw_w(shape));
  ClassifierOut<T> out;
  out.feats = encoder_forward(g, ps, tr, image_id, trainable);
  const int pooled = g.gap(out.feats.f5);
  out.scores = detail::conv_head(g, ps, tr, "head", pooled, trainable);
  const double scale = detail::meta_value(ps, "logit_scale", 1.0);
  if (scale != 1.0) out.scores = g.mul_scalar(out.scores, static_cast<T>(scale));
  return out;
}

template <typename T>
int filter_forward(ndgrad::Graph<T>& g, const ndgrad::ParamSet<T>& ps,
                   ForwardTrace<T>& tr, const std::string& prefix, int f5,
                   int depth, bool trainable) {
  int x = f5;
  for (int l = 1; l < depth; ++l)
    x = detail::conv_block(g, ps, tr, prefix + ".c" + std::to_string(l), x, 1,
                           trainable);
  return detail::conv_head(g, ps, tr, prefix + ".head", x, trainable);
}

template <typename T>
int decoder_forward(ndgrad::Graph<T>& g, const ndgrad::ParamSet<T>& ps,
                    ForwardTrace<T>& tr, const std::string& prefix,
                    const FeatureStack<T>& f, bool trainable) {
  // Copy the dims out before adding nodes: growing the graph may reallocate
  // node storage and invalidate references into it.
  const int h4 = ndgrad::chw_h(g.node_tensor(f.f4).shape);
  const int w4 = ndgrad::chw_w(g.node_tensor(f.f4).shape);
  const int h3 = ndgrad::chw_h(g.node_tensor(f.f3).shape);
  const int w3 = ndgrad::chw_w(g.node_tensor(f.f3).shape);
  const int up5 = g.upsample_bilinear(f.f5, h4, w4);
  const int d1 = detail::conv_block(g, ps, tr, prefix + ".c45",
                                    g.concat_channels(f.f4, up5), 1, trainable);
  const int up4 = g.upsample_bilinear(d1, h3, w3);
  const int d2 = detail::conv_block(g, ps, tr, prefix + ".c34",
                                    g.concat_channels(f.f3, up4), 1, trainable);
  return detail::conv_head(g, ps, tr, prefix + ".head", d2, trainable);
}

template <typename T>
struct MfnetOut {
  FeatureStack<T> feats;
  int p1 = -1;   // filter-1 prediction at input resolution
  int p2 = -1;   // filter-2 prediction at input resolution
  int ps = -1;   // decoder prediction at input resolution
  int ps2 = -1;  // second decoder (dual-decoder variant)
};

template <typename T>
MfnetOut<T> mfnet_forward(ndgrad::Graph<T>& g, const ndgrad::ParamSet<T>& ps,
                          ForwardTrace<T>& tr, int image_id,
                          const NetConfig& cfg, Arch arch, bool trainable) {
  const auto& shape = g.node_tensor(image_id).shape;
  const int h = ndgrad::chw_h(shape), w = ndgrad::chw_w(shape);
  detail::require_divisible(h, w);
  MfnetOut<T> out;
  out.feats = encoder_forward(g, ps, tr, image_id, trainable);
  auto head_to_input = [&](int map1ch) {
    return g.upsample_bilinear(g.sigmoid(map1ch), h, w);
  };
  if (arch_has_filter1(arch))
    out.p1 = head_to_input(
        filter_forward(g, ps, tr, "f1", out.feats.f5, cfg.filter_depth, trainable));
  if (arch_has_filter2(arch))
    out.p2 = head_to_input(
        filter_forward(g, ps, tr, "f2", out.feats.f5, cfg.filter_depth, trainable));
  out.ps = head_to_input(decoder_forward(g, ps, tr, "dec", out.feats, trainable));
  if (arch_has_decoder2(arch))
    out.ps2 = head_to_input(decoder_forward(g, ps, tr, "dec2", out.feats, trainable));
  return out;
}

/// Convenience host-level forward: returns the prediction maps as ScoreMaps.
template <typename T>
struct MfnetMaps {
  core::ScoreMap p1, p2, ps, ps2;
};

template <typename T>
MfnetMaps<T> mfnet_predict(const ndgrad::ParamSet<T>& params,
                           const core::ImageRGB& image, const NetConfig& cfg,
                           Arch arch) {
  ndgrad::Graph<T> g;
  ForwardTrace<T> tr;
  const int img = g.leaf(ndgrad::image_tensor<T>(image));
  const MfnetOut<T> out = mfnet_forward(g, params, tr, img, cfg, arch, false);
  MfnetMaps<T> maps;
  if (out.p1 >= 0) maps.p1 = ndgrad::score_map(g.node_tensor(out.p1));
  if (out.p2 >= 0) maps.p2 = ndgrad::score_map(g.node_tensor(out.p2));
  maps.ps = ndgrad::score_map(g.node_tensor(out.ps));
  if (out.ps2 >= 0) maps.ps2 = ndgrad::score_map(g.node_tensor(out.ps2));
  return maps;
}

/// Test-time path: encoder and decoder only; the filter parameters are never
/// touched, so a checkpoint without them loads and runs.
template <typename T>
core::ScoreMap infer_saliency(const ndgrad::ParamSet<T>& params,
                              const core::ImageRGB& image,
                              const NetConfig& cfg) {
  validate_config(cfg);
  detail::require_divisible(image.height, image.width);
  ndgrad::Graph<T> g;
  ForwardTrace<T> tr;
  const int img = g.leaf(ndgrad::image_tensor<T>(image));
  const FeatureStack<T> feats = encoder_forward(g, params, tr, img, false);
  const int logits = decoder_forward(g, params, tr, "dec", feats, false);
  const int ps = g.upsample_bilinear(g.sigmoid(logits), image.height, image.width);
  return ndgrad::score_map(g.node_tensor(ps));
}

/// Host-level classifier scores for one image.
template <typename T>
std::vector<double> classifier_scores(const ndgrad::ParamSet<T>& params,
                                      const core::ImageRGB& image) {
  ndgrad::Graph<T> g;
  ForwardTrace<T> tr;
  const int img = g.leaf(ndgrad::image_tensor<T>(image));
  const ClassifierOut<T> out = classifier_forward(g, params, tr, img, false);
  const auto& t = g.node_tensor(out.scores);
  std::vector<double> s(t.value.size());
  for (std::size_t i = 0; i < s.size(); ++i)
    s[i] = static_cast<double>(t.value[i]);
  return s;
}

}  // namespace wsod::nets
