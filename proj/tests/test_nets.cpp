// Copyright (c) 2026 wsod contributors.
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>
#include <vector>

#include "wsod/core/synthetic.hpp"
#include "wsod/nets/nets.hpp"

using namespace wsod;
using namespace wsod::nets;
using ndgrad::Graph;
using ndgrad::ParamSet;
using ndgrad::Tensor;

namespace {

core::ImageRGB test_image(int h, int w, std::uint64_t seed) {
  if (h == w) return core::gen_synthetic_dataset(1, h, 4, seed)[0].image;
  core::ImageRGB img(h, w);
  Rng rng(seed);
  for (auto& v : img.data) v = rng.u01();
  return img;
}

void zero_param(ParamSet<double>& ps, const std::string& name) {
  auto& p = ps.at(name);
  std::fill(p.value.begin(), p.value.end(), 0.0);
}

void copy_param(ParamSet<double>& ps, const std::string& from, const std::string& to) {
  ps.at(to).value = ps.at(from).value;
}

std::vector<std::string> layer_suffixes(int depth) {
  std::vector<std::string> out;
  for (int l = 1; l < depth; ++l) {
    out.push_back(".c" + std::to_string(l) + ".w");
    out.push_back(".c" + std::to_string(l) + ".b");
  }
  out.push_back(".head.w");
  out.push_back(".head.b");
  return out;
}

bool bitwise_equal(const core::ScoreMap& a, const core::ScoreMap& b) {
  if (a.height != b.height || a.width != b.width) return false;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    if (a.data[i] != b.data[i]) return false;
  return true;
}

}  // namespace

// --------------------------------------------------------------- classifier

TEST_CASE("classifier head with zero weights yields zero scores") {
  const NetConfig cfg;
  auto ps = make_classifier_params<double>(cfg, 4, 7);
  zero_param(ps, "head.w");
  zero_param(ps, "head.b");
  const auto s = classifier_scores(ps, test_image(64, 64, 1));
  REQUIRE(s.size() == 4);
  for (double v : s) CHECK(v == 0.0);
}

TEST_CASE("classifier scores scale linearly with the head parameters") {
  const NetConfig cfg;
  auto ps = make_classifier_params<double>(cfg, 3, 11);
  const auto img = test_image(64, 64, 2);
  const auto s0 = classifier_scores(ps, img);
  for (auto& v : ps.at("head.w").value) v *= 2.0;
  for (auto& v : ps.at("head.b").value) v *= 2.0;
  const auto s1 = classifier_scores(ps, img);
  REQUIRE(s1.size() == s0.size());
  for (std::size_t i = 0; i < s0.size(); ++i) CHECK(s1[i] == 2.0 * s0[i]);
}

TEST_CASE("classifier scores match a hand computation on constant features") {
  // Zeroed encoder weights make each block output its bias everywhere, so the
  // pooled feature is the last bias and the scores follow by hand.
  NetConfig cfg;
  cfg.encoder_channels = {1, 1, 1, 1, 1};
  auto ps = make_classifier_params<double>(cfg, 2, 3);
  const double biases[5] = {0.25, 0.5, 0.125, 1.0, 0.4375};
  for (int b = 1; b <= 5; ++b) {
    zero_param(ps, "enc" + std::to_string(b) + ".w");
    ps.at("enc" + std::to_string(b) + ".b").value = {biases[b - 1]};
  }
  ps.at("head.w").value = {1.5, -2.0};
  ps.at("head.b").value = {0.25, 0.5};
  const auto s = classifier_scores(ps, test_image(64, 64, 3));
  REQUIRE(s.size() == 2);
  CHECK(std::abs(s[0] - (1.5 * 0.4375 + 0.25)) <= 1e-6);
  CHECK(std::abs(s[1] - (-2.0 * 0.4375 + 0.5)) <= 1e-6);
}

TEST_CASE("encoder features halve spatially from block to block") {
  const NetConfig cfg;
  const auto ps = make_classifier_params<double>(cfg, 2, 5);
  Graph<double> g;
  ForwardTrace<double> tr;
  const int img = g.leaf(ndgrad::image_tensor<double>(test_image(64, 96, 4)));
  const auto out = classifier_forward(g, ps, tr, img, false);
  const auto& s3 = g.val(out.feats.f3).shape;
  const auto& s4 = g.val(out.feats.f4).shape;
  const auto& s5 = g.val(out.feats.f5).shape;
  CHECK(s3 == std::vector<int>{32, 8, 12});
  CHECK(s4 == std::vector<int>{64, 4, 6});
  CHECK(s5 == std::vector<int>{64, 2, 3});
  CHECK(g.val(out.scores).shape == std::vector<int>{2, 1, 1});
}

// ------------------------------------------------------------ saliency model

TEST_CASE("prediction maps are uniformly one half when output layers are zero") {
  const NetConfig cfg;
  auto ps = make_mfnet_params<double>(cfg, Arch::mdf, 13);
  for (const char* head : {"f1.head", "f2.head", "dec.head"}) {
    zero_param(ps, std::string(head) + ".w");
    zero_param(ps, std::string(head) + ".b");
  }
  const auto maps = mfnet_predict(ps, test_image(64, 64, 5), cfg, Arch::mdf);
  for (const core::ScoreMap* m : {&maps.p1, &maps.p2, &maps.ps})
    for (double v : m->data) CHECK(v == 0.5);
}

TEST_CASE("identical filter parameters produce identical filter maps") {
  const NetConfig cfg;
  auto ps = make_mfnet_params<double>(cfg, Arch::mdf, 17);
  for (const auto& suffix : layer_suffixes(cfg.filter_depth))
    copy_param(ps, "f1" + suffix, "f2" + suffix);
  const auto maps = mfnet_predict(ps, test_image(64, 64, 6), cfg, Arch::mdf);
  CHECK(bitwise_equal(maps.p1, maps.p2));
}

TEST_CASE("the two filters start from distinct initial parameters") {
  const NetConfig cfg;
  const auto ps = make_mfnet_params<double>(cfg, Arch::mdf, 19);
  CHECK(ps.at("f1.c1.w").value != ps.at("f2.c1.w").value);
}

TEST_CASE("parameter construction is seed-deterministic") {
  const NetConfig cfg;
  const auto a = make_mfnet_params<double>(cfg, Arch::mdf, 23);
  const auto b = make_mfnet_params<double>(cfg, Arch::mdf, 23);
  const auto c = make_mfnet_params<double>(cfg, Arch::mdf, 24);
  CHECK(a.at("enc3.w").value == b.at("enc3.w").value);
  CHECK(a.at("f2.c2.w").value == b.at("f2.c2.w").value);
  CHECK(a.at("enc3.w").value != c.at("enc3.w").value);
}

TEST_CASE("prediction maps keep the input resolution") {
  const NetConfig cfg;
  const auto ps = make_mfnet_params<double>(cfg, Arch::mdf, 29);
  for (int size : {64, 96, 128}) {
    const auto maps = mfnet_predict(ps, test_image(size, size, 7), cfg, Arch::mdf);
    for (const core::ScoreMap* m : {&maps.p1, &maps.p2, &maps.ps}) {
      CHECK(m->height == size);
      CHECK(m->width == size);
    }
  }
  const auto rect = mfnet_predict(ps, test_image(64, 96, 8), cfg, Arch::mdf);
  CHECK(rect.ps.height == 64);
  CHECK(rect.ps.width == 96);
}

TEST_CASE("non-multiple-of-32 input dims raise a shape error") {
  const NetConfig cfg;
  const auto ps = make_mfnet_params<double>(cfg, Arch::mdf, 31);
  const auto cls = make_classifier_params<double>(cfg, 2, 31);
  const auto img = test_image(48, 64, 9);
  REQUIRE_THROWS_AS(mfnet_predict(ps, img, cfg, Arch::mdf), Error);
  REQUIRE_THROWS_AS(infer_saliency(ps, img, cfg), Error);
  REQUIRE_THROWS_AS(classifier_scores(cls, img), Error);
  try {
    infer_saliency(ps, img, cfg);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::shape);
  }
}

TEST_CASE("swapping the filter parameter sets swaps the filter maps only") {
  const NetConfig cfg;
  auto ps = make_mfnet_params<double>(cfg, Arch::mdf, 37);
  const auto img = test_image(64, 64, 10);
  const auto before = mfnet_predict(ps, img, cfg, Arch::mdf);
  for (const auto& suffix : layer_suffixes(cfg.filter_depth))
    std::swap(ps.at("f1" + suffix).value, ps.at("f2" + suffix).value);
  const auto after = mfnet_predict(ps, img, cfg, Arch::mdf);
  CHECK(bitwise_equal(after.p1, before.p2));
  CHECK(bitwise_equal(after.p2, before.p1));
  CHECK(bitwise_equal(after.ps, before.ps));
}

TEST_CASE("prediction maps lie strictly inside the unit interval") {
  const NetConfig cfg;
  for (std::uint64_t seed : {41ULL, 42ULL, 43ULL}) {
    const auto ps = make_mfnet_params<double>(cfg, Arch::mdf, seed);
    const auto maps = mfnet_predict(ps, test_image(64, 64, seed + 100), cfg, Arch::mdf);
    for (const core::ScoreMap* m : {&maps.p1, &maps.p2, &maps.ps})
      for (double v : m->data) {
        REQUIRE(v > 0.0);
        REQUIRE(v < 1.0);
      }
  }
}

TEST_CASE("the dual-decoder variant produces two distinct decoder maps") {
  const NetConfig cfg;
  const auto ps = make_mfnet_params<double>(cfg, Arch::dual_decoder, 47);
  const auto maps = mfnet_predict(ps, test_image(64, 64, 11), cfg, Arch::dual_decoder);
  REQUIRE(!maps.ps.data.empty());
  REQUIRE(!maps.ps2.data.empty());
  CHECK(maps.p1.data.empty());
  CHECK(maps.p2.data.empty());
  CHECK(!bitwise_equal(maps.ps, maps.ps2));
}

TEST_CASE("decoder output responds to the third feature block") {
  const NetConfig cfg;
  const auto ps = make_mfnet_params<double>(cfg, Arch::single_decoder, 53);
  const auto img = test_image(64, 64, 12);

  Graph<double> g;
  ForwardTrace<double> tr;
  const int in = g.leaf(ndgrad::image_tensor<double>(img));
  auto feats = encoder_forward(g, ps, tr, in, false);
  const int base = decoder_forward(g, ps, tr, "dec", feats, false);

  Tensor<double> bumped = g.val(feats.f3);
  Rng rng(99);
  for (auto& v : bumped.value) v += rng.uniform(-0.1, 0.1);
  FeatureStack<double> perturbed = feats;
  perturbed.f3 = g.leaf(std::move(bumped));
  const int moved = decoder_forward(g, ps, tr, "dec", perturbed, false);

  const auto& a = g.val(base).value;
  const auto& b = g.val(moved).value;
  double max_delta = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    max_delta = std::max(max_delta, std::abs(a[i] - b[i]));
  CHECK(max_delta > 1e-6);
}

// --------------------------------------------------------- test-time variant

TEST_CASE("test-time inference equals the decoder map bitwise") {
  const NetConfig cfg;
  const auto ps = make_mfnet_params<double>(cfg, Arch::mdf, 59);
  const auto img = test_image(64, 64, 13);
  const auto maps = mfnet_predict(ps, img, cfg, Arch::mdf);
  const auto inf = infer_saliency(ps, img, cfg);
  CHECK(bitwise_equal(inf, maps.ps));
}

TEST_CASE("test-time inference runs without filter parameters") {
  const NetConfig cfg;
  const auto full = make_mfnet_params<double>(cfg, Arch::mdf, 61);
  ParamSet<double> trimmed;
  for (const auto& [name, p] : full) {
    if (name.rfind("f1.", 0) == 0 || name.rfind("f2.", 0) == 0) continue;
    Tensor<double> t(p.shape);
    t.value = p.value;
    trimmed.add(name, std::move(t));
  }
  const auto img = test_image(64, 64, 14);
  const auto inf = infer_saliency(trimmed, img, cfg);
  CHECK(bitwise_equal(inf, infer_saliency(full, img, cfg)));
}

TEST_CASE("test-time inference outpaces the full forward at 128x128") {
  const NetConfig cfg;
  const auto ps = make_mfnet_params<double>(cfg, Arch::mdf, 67);
  const auto img = test_image(128, 128, 15);

  auto best_of = [](int reps, auto&& fn) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      fn();
      const auto t1 = std::chrono::steady_clock::now();
      best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
    }
    return best;
  };

  mfnet_predict(ps, img, cfg, Arch::mdf);  // warm-up
  infer_saliency(ps, img, cfg);
  const double t_full = best_of(5, [&] { mfnet_predict(ps, img, cfg, Arch::mdf); });
  const double t_infer = best_of(5, [&] { infer_saliency(ps, img, cfg); });
  INFO("full forward " << t_full * 1e3 << " ms, test-time " << t_infer * 1e3
                       << " ms, ratio " << t_full / t_infer);
  CHECK(t_full >= 2.0 * t_infer);
}

// ------------------------------------------------------------- construction

TEST_CASE("config validation rejects malformed architectures") {
  NetConfig bad;
  bad.encoder_channels = {8, 16, 32};
  REQUIRE_THROWS_AS(make_mfnet_params<double>(bad, Arch::mdf, 1), Error);
  NetConfig shallow;
  shallow.filter_depth = 1;
  REQUIRE_THROWS_AS(make_mfnet_params<double>(shallow, Arch::mdf, 1), Error);
  REQUIRE_THROWS_AS(make_classifier_params<double>(NetConfig{}, 0, 1), Error);
}

TEST_CASE("architecture variants carry exactly the parameters they use") {
  const NetConfig cfg;
  const auto plain = make_mfnet_params<double>(cfg, Arch::single_decoder, 3);
  CHECK(!plain.has("f1.c1.w"));
  CHECK(!plain.has("dec2.c45.w"));
  CHECK(plain.has("dec.head.w"));
  const auto single = make_mfnet_params<double>(cfg, Arch::single_df, 3);
  CHECK(single.has("f1.head.w"));
  CHECK(!single.has("f2.c1.w"));
  const auto dual = make_mfnet_params<double>(cfg, Arch::dual_decoder, 3);
  CHECK(dual.has("dec2.head.w"));
  CHECK(!dual.has("f1.c1.w"));
  const auto mdf = make_mfnet_params<double>(cfg, Arch::mdf, 3);
  CHECK(mdf.has("f1.c3.w"));
  CHECK(mdf.has("f2.c3.w"));
  CHECK(!mdf.has("dec2.c45.w"));
}
