// Copyright (c) 2026 wsod contributors.
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "wsod/core/synthetic.hpp"
#include "wsod/labels/labels.hpp"

using namespace wsod;
using namespace wsod::labels;

namespace {

core::ScoreMap mask_to_map(const core::BinaryMask& m) {
  core::ScoreMap out(m.height, m.width);
  for (std::size_t i = 0; i < m.data.size(); ++i) out.data[i] = m.data[i] ? 1.0 : 0.0;
  return out;
}

double iou(const core::BinaryMask& a, const core::BinaryMask& b) {
  REQUIRE(a.height == b.height);
  REQUIRE(a.width == b.width);
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const bool va = a.data[i] != 0, vb = b.data[i] != 0;
    inter += (va && vb) ? 1 : 0;
    uni += (va || vb) ? 1 : 0;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

bool masks_equal(const core::BinaryMask& a, const core::BinaryMask& b) {
  return a.height == b.height && a.width == b.width && a.data == b.data;
}

core::BinaryMask random_mask(Rng& rng, int h, int w) {
  core::BinaryMask m(h, w);
  for (auto& v : m.data) v = static_cast<std::uint8_t>(rng.uniform_int(0, 1));
  return m;
}

// A saturated foreground shape on a far-away background color with light
// noise: the high-contrast regime where the CRF stage is meant to operate.
// The shape radius stays above two superpixel cell widths so cluster means
// cannot dilute it.
core::Sample high_contrast_sample(std::uint64_t seed) {
  Rng rng(seed);
  core::Sample s;
  s.image = core::ImageRGB(64, 64);
  s.gt_mask = core::BinaryMask(64, 64);
  const double bg[3] = {0.08, 0.12, 0.85};
  const double fg[3] = {0.95, 0.75, 0.05};
  const bool disc = rng.uniform_int(0, 1) != 0;
  const int ry = rng.uniform_int(12, 20), rx = rng.uniform_int(12, 20);
  const int cy = rng.uniform_int(ry + 2, 61 - ry), cx = rng.uniform_int(rx + 2, 61 - rx);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      const bool in = disc ? (static_cast<double>(y - cy) * (y - cy)) / (ry * ry) +
                                     (static_cast<double>(x - cx) * (x - cx)) / (rx * rx) <=
                                 1.0
                           : std::abs(y - cy) <= ry && std::abs(x - cx) <= rx;
      s.gt_mask.at(y, x) = in ? 1 : 0;
      for (int c = 0; c < 3; ++c)
        s.image.at(c, y, x) =
            std::clamp((in ? fg[c] : bg[c]) + rng.uniform(-0.04, 0.04), 0.0, 1.0);
    }
  return s;
}

// Coarse blobby stand-in for a real activation map: the truth mask blurred
// through a low-resolution bottleneck.
core::ScoreMap coarse_cam(const core::BinaryMask& gt) {
  return core::resize_bilinear(core::resize_bilinear(mask_to_map(gt), 8, 8), gt.height,
                               gt.width);
}

}  // namespace

// ----------------------------------------------------------------- binarize

TEST_CASE("binarize thresholds strictly above") {
  core::ScoreMap uniform(6, 6, 0.4);
  CHECK(binarize(uniform, 0.5).count_ones() == 0);
  core::ScoreMap at(2, 2, 0.5);
  CHECK(binarize(at, 0.5).count_ones() == 0);  // exactly-at-threshold is background
}

TEST_CASE("binarize of a binary map at one half is the identity") {
  Rng rng(5);
  const core::BinaryMask gt = random_mask(rng, 9, 7);
  CHECK(masks_equal(binarize(mask_to_map(gt), 0.5), gt));
}

TEST_CASE("binarize count matches a brute-force scan") {
  Rng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    core::ScoreMap m(8, 8);
    for (auto& v : m.data) v = rng.u01();
    const double thr = rng.uniform(0.1, 0.9);
    const core::BinaryMask mask = binarize(m, thr);
    std::size_t want = 0;
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x)
        if (m.at(y, x) > thr) ++want;
    CHECK(mask.count_ones() == want);
  }
}

TEST_CASE("binarize validates the threshold") {
  core::ScoreMap m(2, 2, 0.5);
  REQUIRE_THROWS_AS(binarize(m, 0.0), Error);
  REQUIRE_THROWS_AS(binarize(m, 1.0), Error);
  try {
    binarize(m, -0.5);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::config);
  }
}

// --------------------------------------------------------------------- fuse

TEST_CASE("fusing a mask with itself by intersection is the identity") {
  Rng rng(7);
  const core::BinaryMask a = random_mask(rng, 10, 10);
  const FusedLabel f = fuse(a, a, FuseMode::intersect);
  CHECK(masks_equal(f.mask, a));
  CHECK(f.provenance == core::LabelProvenance::fused_intersect);
}

TEST_CASE("fusion respects the boolean lattice ordering") {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const core::BinaryMask a = random_mask(rng, 12, 9);
    const core::BinaryMask b = random_mask(rng, 12, 9);
    const auto inter = fuse(a, b, FuseMode::intersect).mask;
    const auto uni = fuse(a, b, FuseMode::union_mask).mask;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
      REQUIRE(inter.data[i] <= a.data[i]);
      REQUIRE(a.data[i] <= uni.data[i]);
      REQUIRE(inter.data[i] <= b.data[i]);
      REQUIRE(b.data[i] <= uni.data[i]);
    }
  }
}

TEST_CASE("averaging complementary masks gives a uniform half map") {
  Rng rng(9);
  const core::BinaryMask a = random_mask(rng, 8, 8);
  core::BinaryMask b(8, 8);
  for (std::size_t i = 0; i < a.data.size(); ++i) b.data[i] = a.data[i] ? 0 : 1;
  const FusedLabel f = fuse(a, b, FuseMode::avg);
  for (double v : f.soft.data) CHECK(v == 0.5);
  CHECK(f.mask.count_ones() == 0);  // strict threshold: ties fall to background
}

TEST_CASE("thresholded average fusion coincides with intersection") {
  // With a strict one-half threshold the three-valued average collapses onto
  // the intersection mask; the soft map still distinguishes the two modes.
  Rng rng(10);
  const core::BinaryMask a = random_mask(rng, 11, 13);
  const core::BinaryMask b = random_mask(rng, 11, 13);
  CHECK(masks_equal(fuse(a, b, FuseMode::avg).mask, fuse(a, b, FuseMode::intersect).mask));
}

TEST_CASE("fusion rejects mismatched dimensions") {
  REQUIRE_THROWS_AS(fuse(core::BinaryMask(4, 4), core::BinaryMask(4, 5), FuseMode::avg), Error);
}

// ------------------------------------------------------------------ make_ys

TEST_CASE("guidance target on equal constant predictions is that constant") {
  const auto img = core::gen_synthetic_dataset(1, 32, 4, 11)[0].image;
  const core::ScoreMap p(32, 32, 0.37);
  const core::ScoreMap ys = make_ys(p, p, img);
  for (double v : ys.data) CHECK(v == 0.37);
}

TEST_CASE("guidance target of complementary predictions is uniform one half") {
  const auto img = core::gen_synthetic_dataset(1, 32, 4, 12)[0].image;
  core::ScoreMap p1(32, 32);
  core::ScoreMap p2(32, 32);
  Rng rng(13);
  for (std::size_t i = 0; i < p1.data.size(); ++i) {
    p1.data[i] = static_cast<double>(rng.uniform_int(0, 256)) / 256.0;  // dyadic: 1-p is exact
    p2.data[i] = 1.0 - p1.data[i];
  }
  const core::ScoreMap ys = make_ys(p1, p2, img);
  for (double v : ys.data) CHECK(v == 0.5);
}

TEST_CASE("guidance target equals refinement of the hand-averaged map") {
  const auto sample = core::gen_synthetic_dataset(1, 48, 4, 14)[0];
  Rng rng(15);
  core::ScoreMap p1(48, 48);
  core::ScoreMap p2(48, 48);
  for (std::size_t i = 0; i < p1.data.size(); ++i) {
    p1.data[i] = rng.u01();
    p2.data[i] = rng.u01();
  }
  core::ScoreMap avg(48, 48);
  for (std::size_t i = 0; i < avg.data.size(); ++i) avg.data[i] = 0.5 * (p1.data[i] + p2.data[i]);
  const core::ScoreMap want = refine::pamr_refine(sample.image, avg);
  const core::ScoreMap got = make_ys(p1, p2, sample.image);
  for (std::size_t i = 0; i < got.data.size(); ++i)
    REQUIRE(std::abs(got.data[i] - want.data[i]) <= 1e-9);
}

TEST_CASE("guidance target is symmetric in its two predictions and bounded") {
  const auto img = core::gen_synthetic_dataset(1, 32, 4, 16)[0].image;
  Rng rng(17);
  core::ScoreMap p1(32, 32);
  core::ScoreMap p2(32, 32);
  for (std::size_t i = 0; i < p1.data.size(); ++i) {
    p1.data[i] = rng.u01();
    p2.data[i] = rng.u01();
  }
  const core::ScoreMap a = make_ys(p1, p2, img);
  const core::ScoreMap b = make_ys(p2, p1, img);
  CHECK(a.data == b.data);
  for (double v : a.data) {
    REQUIRE(v >= 0.0);
    REQUIRE(v <= 1.0);
  }
}

// -------------------------------------------------------- label synthesis

TEST_CASE("an all-zero activation map synthesizes all-background labels") {
  const auto img = core::gen_synthetic_dataset(1, 64, 4, 18)[0].image;
  const core::ScoreMap zero(64, 64, 0.0);
  const LabelPair lp = synthesize_labels(img, zero);
  CHECK(lp.y1.mask.count_ones() == 0);
  CHECK(lp.y2.mask.count_ones() == 0);
  CHECK(lp.y1.provenance == core::LabelProvenance::pixel);
  CHECK(lp.y2.provenance == core::LabelProvenance::superpixel);
  RefineConfig with_crf;
  with_crf.use_crf = true;
  const LabelPair lc = synthesize_labels(img, zero, with_crf);
  CHECK(lc.y1.mask.count_ones() == 0);
  CHECK(lc.y2.mask.count_ones() == 0);
}

TEST_CASE("labels from a ground-truth activation map stay close to the truth") {
  const auto samples = core::gen_synthetic_dataset(20, 64, 4, 19);
  double worst1 = 1.0, worst2 = 1.0;
  for (const auto& s : samples) {
    const LabelPair lp = synthesize_labels(s.image, mask_to_map(s.gt_mask));
    const double i1 = iou(lp.y1.mask, s.gt_mask);
    const double i2 = iou(lp.y2.mask, s.gt_mask);
    worst1 = std::min(worst1, i1);
    worst2 = std::min(worst2, i2);
    REQUIRE(i1 >= 0.9);
    REQUIRE(i2 >= 0.9);
  }
  INFO("worst pixel-branch IoU " << worst1 << ", worst superpixel-branch IoU " << worst2);
}

TEST_CASE("the crf-enabled chain keeps high-contrast labels close to the truth") {
  RefineConfig cfg;
  cfg.use_crf = true;
  for (int k = 0; k < 20; ++k) {
    const core::Sample s = high_contrast_sample(1000 + static_cast<std::uint64_t>(k));
    const LabelPair lp = synthesize_labels(s.image, mask_to_map(s.gt_mask), cfg);
    REQUIRE(iou(lp.y1.mask, s.gt_mask) >= 0.9);
    REQUIRE(iou(lp.y2.mask, s.gt_mask) >= 0.9);
  }
}

TEST_CASE("the two refinement branches genuinely differ across the corpus") {
  const auto samples = core::gen_synthetic_dataset(40, 64, 4, 19);
  int differing = 0;
  for (const auto& s : samples) {
    const LabelPair lp = synthesize_labels(s.image, coarse_cam(s.gt_mask));
    if (!masks_equal(lp.y1.mask, lp.y2.mask)) ++differing;
  }
  INFO("differing pairs " << differing << "/40");
  CHECK(differing * 2 >= 40);
}

TEST_CASE("label synthesis is deterministic") {
  const auto s = core::gen_synthetic_dataset(1, 64, 4, 20)[0];
  const LabelPair a = synthesize_labels(s.image, mask_to_map(s.gt_mask));
  const LabelPair b = synthesize_labels(s.image, mask_to_map(s.gt_mask));
  CHECK(masks_equal(a.y1.mask, b.y1.mask));
  CHECK(masks_equal(a.y2.mask, b.y2.mask));
}

TEST_CASE("label synthesis rejects mismatched inputs") {
  const auto img = core::gen_synthetic_dataset(1, 64, 4, 21)[0].image;
  REQUIRE_THROWS_AS(synthesize_labels(img, core::ScoreMap(32, 32, 0.5)), Error);
}

