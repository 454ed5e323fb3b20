// Copyright (c) 2026 wsod contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "wsod/core/map_ops.hpp"
#include "wsod/core/types.hpp"
#include "wsod/refine/crf.hpp"
#include "wsod/refine/pamr.hpp"
#include "wsod/refine/slic.hpp"

// Pseudo-label synthesis. One activation map feeds two refinement branches:
// the pixel branch smooths it with the affinity propagation pass, the
// superpixel branch replaces it with cluster means over a SLIC segmentation.
// Both branches optionally pass through dense-CRF inference and are then
// thresholded into binary masks. Fusion operators combine the two masks for
// the ablation grid, and make_ys builds the soft guidance target from the two
// filter predictions during training.

namespace wsod::labels {

struct RefineConfig {
  refine::PamrParams pamr;
  int slic_clusters = 96;
  double slic_compactness = 10.0;
  int slic_iterations = 10;
  // Dense-CRF stage on both branches. Off by default at desk scale: with
  // exact O(N^2) message passing on 64x64 inputs the pairwise term dwarfs the
  // unaries and projects both branch maps onto the same color partition,
  // erasing the difference between the two refinements that the second
  // training signal depends on. Enable for large, high-contrast inputs.
  bool use_crf = false;
  refine::CrfParams crf;
  // Binarization cut after the refinement chain. Refined activation maps are
  // rescaled ensembles, not calibrated probabilities, and their halos spread
  // well past object borders; 0.6 balances precision against recall on the
  // synthetic corpus (measured sweep: 0.5 -> IoU 0.57, 0.6 -> 0.71, 0.7 ->
  // 0.59 with empty foregrounds appearing).
  double threshold = 0.6;
};

struct LabelPair {
  core::PseudoLabel y1;  // pixel-branch label
  core::PseudoLabel y2;  // superpixel-branch label
};

inline core::BinaryMask binarize(const core::ScoreMap& map, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0))
    throw_config("binarize: threshold must lie strictly inside (0,1), got " +
                 std::to_string(threshold));
  core::BinaryMask mask(map.height, map.width);
  for (std::size_t i = 0; i < map.data.size(); ++i)
    mask.data[i] = map.data[i] > threshold ? 1 : 0;
  return mask;
}

inline LabelPair synthesize_labels(const core::ImageRGB& image, const core::ScoreMap& cam_map,
                                   const RefineConfig& cfg = {}) {
  core::check_same_dims(image.height, image.width, cam_map.height, cam_map.width,
                        "label synthesis");
  core::ScoreMap pixel = refine::pamr_refine(image, cam_map, cfg.pamr);
  if (cfg.use_crf) pixel = refine::crf_refine(image, pixel, cfg.crf);

  const refine::SuperpixelSegmentation seg =
      refine::slic(image, cfg.slic_clusters, cfg.slic_compactness, cfg.slic_iterations);
  core::ScoreMap super = refine::superpixel_refine(cam_map, seg);
  if (cfg.use_crf) super = refine::crf_refine(image, super, cfg.crf);

  LabelPair out;
  out.y1.mask = binarize(pixel, cfg.threshold);
  out.y1.provenance = core::LabelProvenance::pixel;
  out.y2.mask = binarize(super, cfg.threshold);
  out.y2.provenance = core::LabelProvenance::superpixel;
  return out;
}

enum class FuseMode { avg, intersect, union_mask };

inline const char* fuse_mode_name(FuseMode m) {
  switch (m) {
    case FuseMode::avg: return "avg";
    case FuseMode::intersect: return "intersect";
    case FuseMode::union_mask: return "union";
  }
  return "?";
}

struct FusedLabel {
  core::ScoreMap soft;      // avg: per-pixel mean; binary modes mirror the mask
  core::BinaryMask mask;    // avg: soft thresholded at 0.5; else AND / OR
  core::LabelProvenance provenance = core::LabelProvenance::fused_avg;
};

inline FusedLabel fuse(const core::BinaryMask& a, const core::BinaryMask& b, FuseMode mode) {
  core::check_same_dims(a.height, a.width, b.height, b.width, "fuse");
  FusedLabel out;
  out.soft = core::ScoreMap(a.height, a.width);
  out.mask = core::BinaryMask(a.height, a.width);
  for (std::size_t i = 0; i < out.mask.data.size(); ++i) {
    const int va = a.data[i] ? 1 : 0, vb = b.data[i] ? 1 : 0;
    switch (mode) {
      case FuseMode::avg:
        out.soft.data[i] = 0.5 * (va + vb);
        out.mask.data[i] = out.soft.data[i] > 0.5 ? 1 : 0;
        break;
      case FuseMode::intersect:
        out.mask.data[i] = static_cast<std::uint8_t>(va & vb);
        out.soft.data[i] = out.mask.data[i];
        break;
      case FuseMode::union_mask:
        out.mask.data[i] = static_cast<std::uint8_t>(va | vb);
        out.soft.data[i] = out.mask.data[i];
        break;
    }
  }
  out.provenance = mode == FuseMode::avg        ? core::LabelProvenance::fused_avg
                   : mode == FuseMode::intersect ? core::LabelProvenance::fused_intersect
                                                 : core::LabelProvenance::fused_union;
  return out;
}

/// Soft guidance target: the two filter predictions are averaged and passed
/// through the pixel-wise refinement. The result is a plain map with no graph
/// attachment, so it acts as a constant during backpropagation.
inline core::ScoreMap make_ys(const core::ScoreMap& p1, const core::ScoreMap& p2,
                              const core::ImageRGB& image,
                              const refine::PamrParams& pamr_cfg = {}) {
  core::check_same_dims(p1.height, p1.width, p2.height, p2.width, "guidance average");
  core::ScoreMap avg(p1.height, p1.width);
  for (std::size_t i = 0; i < avg.data.size(); ++i)
    avg.data[i] = (p1.data[i] + p2.data[i]) / 2.0;
  return refine::pamr_refine(image, avg, pamr_cfg);
}

}  // namespace wsod::labels
