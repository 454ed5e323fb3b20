// Copyright (c) 2026 wsod contributors.
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <cmath>
#include <fstream>
#include <limits>

#include "support/temp_dir.hpp"
#include "wsod/core/manifest.hpp"
#include "wsod/core/map_ops.hpp"
#include "wsod/core/png.hpp"
#include "wsod/core/synthetic.hpp"
#include "wsod/core/types.hpp"
#include "wsod/core/wsf.hpp"

using namespace wsod;
using namespace wsod::core;

namespace {

ScoreMap random_map(Rng& rng, int h, int w, double lo = 0.0, double hi = 1.0) {
  ScoreMap m(h, w);
  for (auto& v : m.data) v = rng.uniform(lo, hi);
  return m;
}

bool bitwise_equal(const ScoreMap& a, const ScoreMap& b) {
  if (a.height != b.height || a.width != b.width) return false;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    if (a.data[i] != b.data[i]) return false;
  return true;
}

}  // namespace

// ---------------------------------------------------------------- normalize

TEST_CASE("normalize_map sends a constant map to all zeros") {
  ScoreMap m(8, 8, 5.0);
  const ScoreMap out = normalize_map(m);
  for (double v : out.data) CHECK(v == 0.0);
}

TEST_CASE("normalize_map is the affine min-max rescale") {
  ScoreMap m(1, 3);
  m.data = {0.0, 2.0, 4.0};
  const ScoreMap out = normalize_map(m);
  CHECK(out.data[0] == 0.0);
  CHECK(out.data[1] == 0.5);
  CHECK(out.data[2] == 1.0);
}

TEST_CASE("normalize_map agrees with an independent two-pass scan") {
  Rng rng(101);
  for (int trial = 0; trial < 20; ++trial) {
    const ScoreMap m = random_map(rng, 8, 8, -3.0, 7.0);
    // oracle: separate min scan, then max scan, then elementwise rescale
    double lo = m.data[0], hi = m.data[0];
    for (double v : m.data) lo = std::min(lo, v);
    for (double v : m.data) hi = std::max(hi, v);
    const ScoreMap out = normalize_map(m);
    for (std::size_t i = 0; i < m.data.size(); ++i) {
      const double expect = (m.data[i] - lo) / (hi - lo);
      CHECK(std::abs(out.data[i] - expect) <= 1e-12);
    }
    CHECK(in_unit_range(out));
  }
}

TEST_CASE("normalize_map rejects non-finite input") {
  ScoreMap m(2, 2, 0.25);
  m.data[3] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(normalize_map(m), Error);
  try {
    normalize_map(m);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::numeric);
  }
}

// ------------------------------------------------------------------- resize

TEST_CASE("resize_bilinear identity returns the input bit-identically") {
  Rng rng(7);
  const ScoreMap m = random_map(rng, 9, 13);
  const ScoreMap out = resize_bilinear(m, 9, 13);
  CHECK(bitwise_equal(m, out));
}

TEST_CASE("resize_bilinear preserves constant maps exactly at any scale") {
  for (double c : {0.0, 0.1, 1.0 / 3.0, 0.7071067811865476, 1.0}) {
    ScoreMap m(5, 9, c);
    for (auto [oh, ow] : {std::pair{7, 5}, {64, 64}, {2, 2}, {1, 17}, {9, 5}}) {
      const ScoreMap out = resize_bilinear(m, oh, ow);
      for (double v : out.data) CHECK(v == c);
    }
  }
}

TEST_CASE("resize_bilinear on a 2x2 step map gives monotone rows") {
  ScoreMap m(2, 2);
  m.at(0, 0) = 0.0; m.at(0, 1) = 1.0;
  m.at(1, 0) = 0.0; m.at(1, 1) = 1.0;
  const ScoreMap out = resize_bilinear(m, 2, 4);
  REQUIRE(out.height == 2);
  REQUIRE(out.width == 4);
  // corner-aligned: samples at x = 0, 1/3, 2/3, 1 of the [0,1] ramp
  for (int y = 0; y < 2; ++y) {
    CHECK(std::abs(out.at(y, 0) - 0.0) <= 1e-12);
    CHECK(std::abs(out.at(y, 1) - 1.0 / 3.0) <= 1e-12);
    CHECK(std::abs(out.at(y, 2) - 2.0 / 3.0) <= 1e-12);
    CHECK(std::abs(out.at(y, 3) - 1.0) <= 1e-12);
    for (int x = 0; x + 1 < 4; ++x) CHECK(out.at(y, x) <= out.at(y, x + 1));
  }
}

TEST_CASE("resize_bilinear commutes with horizontal flip bitwise") {
  Rng rng(23);
  for (auto [h, w, oh, ow] :
       {std::tuple{16, 16, 33, 47}, {7, 11, 64, 64}, {12, 20, 5, 3}, {8, 8, 8, 24}}) {
    const ScoreMap m = random_map(rng, h, w);
    const ScoreMap a = resize_bilinear(flip_horizontal(m), oh, ow);
    const ScoreMap b = flip_horizontal(resize_bilinear(m, oh, ow));
    CHECK(bitwise_equal(a, b));
  }
}

TEST_CASE("resize_bilinear round trip deviation stays under the frozen bound") {
  // measured max |down(up(x)) - x| on this corpus: 0.2874 (seed 3, 20 maps);
  // frozen with ~10% headroom
  Rng rng(3);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const ScoreMap m = random_map(rng, 12, 12);
    const ScoreMap up = resize_bilinear(m, 24, 24);
    const ScoreMap back = resize_bilinear(up, 12, 12);
    for (std::size_t i = 0; i < m.data.size(); ++i)
      worst = std::max(worst, std::abs(back.data[i] - m.data[i]));
  }
  INFO("measured worst deviation " << worst);
  CHECK(worst <= 0.32);
}

TEST_CASE("resize_bilinear rejects degenerate targets") {
  ScoreMap m(4, 4, 0.5);
  CHECK_THROWS_AS(resize_bilinear(m, 0, 4), Error);
  try {
    resize_bilinear(m, 4, 0);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::config);
  }
}

TEST_CASE("resized maps and images stay inside the unit range") {
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const int h = rng.uniform_int(2, 20), w = rng.uniform_int(2, 20);
    const int oh = rng.uniform_int(1, 40), ow = rng.uniform_int(1, 40);
    CHECK(in_unit_range(resize_bilinear(random_map(rng, h, w), oh, ow)));
  }
}

// ---------------------------------------------------------------- synthetic

TEST_CASE("gen_synthetic_dataset is deterministic per seed") {
  const auto a = gen_synthetic_dataset(3, 64, 4, 7);
  const auto b = gen_synthetic_dataset(3, 64, 4, 7);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].image.data == b[i].image.data);
    CHECK(a[i].gt_mask.data == b[i].gt_mask.data);
    CHECK(a[i].category.bits == b[i].category.bits);
  }
  const auto c = gen_synthetic_dataset(3, 64, 4, 8);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.size() && !any_diff; ++i)
    any_diff = a[i].image.data != c[i].image.data;
  CHECK(any_diff);
}

TEST_CASE("synthetic samples carry coherent categories and masks") {
  const auto corpus = gen_synthetic_dataset(200, 64, 4, 11);
  REQUIRE(corpus.size() == 200);
  double fg_sum = 0.0;
  bool saw_single = false;
  for (const auto& s : corpus) {
    REQUIRE(s.image.height == 64);
    REQUIRE(s.gt_mask.height == 64);
    CHECK(s.category.num_categories() == 4);
    const int nbits = s.category.count();
    CHECK(nbits >= 1);
    CHECK(nbits <= 3);
    if (nbits == 1) saw_single = true;
    CHECK(is_binary(s.gt_mask));
    CHECK(s.gt_mask.count_ones() > 0);
    for (double v : s.image.data) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    fg_sum += static_cast<double>(s.gt_mask.count_ones()) / s.gt_mask.pixels();
  }
  CHECK(saw_single);
  const double mean_fg = fg_sum / 200.0;
  INFO("mean foreground fraction " << mean_fg);
  CHECK(mean_fg > 0.05);
  CHECK(mean_fg < 0.6);
}

TEST_CASE("gen_synthetic_dataset validates its configuration") {
  CHECK_THROWS_AS(gen_synthetic_dataset(0, 64, 4, 1), Error);
  CHECK_THROWS_AS(gen_synthetic_dataset(1, 16, 4, 1), Error);
  CHECK_THROWS_AS(gen_synthetic_dataset(1, 64, 1, 1), Error);
  CHECK_THROWS_AS(gen_synthetic_dataset(1, 64, 9, 1), Error);
  try {
    gen_synthetic_dataset(1, 16, 4, 1);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::config);
  }
}

// ----------------------------------------------------------------- png, wsf

TEST_CASE("png image round trip is exact at 8-bit quantization") {
  testing::TempDir td("wsod_png");
  const auto corpus = gen_synthetic_dataset(1, 64, 4, 5);
  const ImageRGB& img = corpus[0].image;
  png::write_image(td.file("img.png"), img);
  const ImageRGB back = png::read_image(td.file("img.png"));
  REQUIRE(back.height == img.height);
  REQUIRE(back.width == img.width);
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    const double q = std::lround(img.data[i] * 255.0) / 255.0;
    CHECK(std::abs(back.data[i] - q) <= 1e-12);
  }
}

TEST_CASE("png map and mask round trips preserve content") {
  testing::TempDir td("wsod_png");
  Rng rng(17);
  const ScoreMap m = random_map(rng, 9, 7);
  png::write_map(td.file("m.png"), m);
  const ScoreMap mback = png::read_map(td.file("m.png"));
  for (std::size_t i = 0; i < m.data.size(); ++i)
    CHECK(std::abs(mback.data[i] - std::lround(m.data[i] * 255.0) / 255.0) <= 1e-12);

  BinaryMask mask(9, 7);
  for (auto& v : mask.data) v = rng.uniform_int(0, 1);
  png::write_mask(td.file("b.png"), mask);
  const BinaryMask bback = png::read_mask(td.file("b.png"));
  CHECK(bback.data == mask.data);
}

TEST_CASE("png writer output is byte-identical across calls") {
  testing::TempDir td("wsod_png");
  Rng rng(29);
  const ScoreMap m = random_map(rng, 33, 21);
  png::write_map(td.file("a.png"), m);
  png::write_map(td.file("b.png"), m);
  const auto a = png::detail::read_file(td.file("a.png"));
  const auto b = png::detail::read_file(td.file("b.png"));
  CHECK(a == b);
}

TEST_CASE("wsf tensor files round trip") {
  testing::TempDir td("wsod_wsf");
  TensorFile t;
  t.dims = {2, 3, 4};
  t.values.resize(24);
  for (std::size_t i = 0; i < t.values.size(); ++i) t.values[i] = 0.5f - 0.01f * i;
  write_wsf(td.file("t.wsf"), t);
  const TensorFile back = read_wsf(td.file("t.wsf"));
  CHECK(back.dims == t.dims);
  CHECK(back.values == t.values);

  Rng rng(41);
  const ScoreMap m = random_map(rng, 6, 5);
  write_wsf_map(td.file("m.wsf"), m);
  const ScoreMap mb = read_wsf_map(td.file("m.wsf"));
  for (std::size_t i = 0; i < m.data.size(); ++i)
    CHECK(mb.data[i] == static_cast<double>(static_cast<float>(m.data[i])));
}

TEST_CASE("wsf reader rejects foreign bytes") {
  testing::TempDir td("wsod_wsf");
  std::ofstream f(td.file("junk.wsf"), std::ios::binary);
  f << "not a tensor";
  f.close();
  CHECK_THROWS_AS(read_wsf(td.file("junk.wsf")), Error);
}

// ----------------------------------------------------------------- manifest

TEST_CASE("dataset save and load round trip through the manifest") {
  testing::TempDir td("wsod_ds");
  const auto corpus = gen_synthetic_dataset(4, 64, 4, 13);
  const std::string man = save_dataset(td.path().string(), corpus);
  const auto back = load_dataset(man, 4);
  REQUIRE(back.size() == corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    CHECK(back[i].category.bits == corpus[i].category.bits);
    CHECK(back[i].gt_mask.data == corpus[i].gt_mask.data);
    REQUIRE(back[i].image.height == 64);
    for (std::size_t j = 0; j < corpus[i].image.data.size(); ++j) {
      const double q = std::lround(corpus[i].image.data[j] * 255.0) / 255.0;
      CHECK(std::abs(back[i].image.data[j] - q) <= 1e-12);
    }
  }
}

TEST_CASE("load_dataset infers category width from the records") {
  testing::TempDir td("wsod_ds");
  const auto corpus = gen_synthetic_dataset(12, 64, 4, 19);
  const std::string man = save_dataset(td.path().string(), corpus);
  const auto back = load_dataset(man);
  bool saw_high = false;
  for (const auto& s : back) {
    if (s.category.num_categories() == 4) saw_high = true;
    CHECK(s.category.count() >= 1);
  }
  CHECK(saw_high);
}

TEST_CASE("read_manifest rejects malformed files") {
  testing::TempDir td("wsod_ds");
  std::ofstream f(td.file("manifest.json"));
  f << "{\"not\": \"an array\"}";
  f.close();
  CHECK_THROWS_AS(read_manifest(td.file("manifest.json")), Error);
  CHECK_THROWS_AS(read_manifest(td.file("missing.json")), Error);
}
