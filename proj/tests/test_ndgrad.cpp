// Copyright (c) 2026 wsod contributors.
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <cmath>

#include "support/temp_dir.hpp"
#include "wsod/ndgrad/adam.hpp"
#include "wsod/ndgrad/gradcheck.hpp"
#include "wsod/ndgrad/graph.hpp"
#include "wsod/ndgrad/init.hpp"
#include "wsod/ndgrad/params.hpp"

using namespace wsod;
using namespace wsod::ndgrad;

namespace {

std::vector<double> random_values(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

}  // namespace

// ------------------------------------------------------------------ forward

TEST_CASE("gap of a constant feature map returns the constant per channel") {
  Graph<double> g;
  Tensor<double> t({3, 5, 7});
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < 35; ++i) t.value[c * 35 + i] = 0.25 * (1.0 + c);
  const int out = g.gap(g.leaf(std::move(t)));
  CHECK(g.val(out).shape == std::vector<int>{3, 1, 1});
  CHECK(g.val(out).value[0] == Catch::Approx(0.25).epsilon(1e-12));
  CHECK(g.val(out).value[1] == Catch::Approx(0.50).epsilon(1e-12));
  CHECK(g.val(out).value[2] == Catch::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("relu of an all-negative tensor is identically zero") {
  Graph<double> g;
  Rng rng(5);
  const int x = g.leaf({2, 4, 4}, random_values(rng, 32, -2.0, -0.01), false);
  const int y = g.relu(x);
  for (double v : g.val(y).value) CHECK(v == 0.0);
}

TEST_CASE("conv3x3 with an identity kernel reproduces its input") {
  Graph<double> g;
  Rng rng(9);
  const std::vector<double> xv = random_values(rng, 2 * 6 * 6);
  const int x = g.leaf({2, 6, 6}, xv, false);
  std::vector<double> wv(2 * 2 * 9, 0.0);
  wv[0 * 2 * 9 + 0 * 9 + 4] = 1.0;  // out 0 <- in 0, center tap
  wv[1 * 2 * 9 + 1 * 9 + 4] = 1.0;  // out 1 <- in 1, center tap
  const int w = g.leaf({2, 2, 3, 3}, wv, false);
  const int b = g.leaf({2}, {0.0, 0.0}, false);
  const int y = g.conv3x3(x, w, b, 1);
  REQUIRE(g.val(y).shape == std::vector<int>{2, 6, 6});
  for (std::size_t i = 0; i < xv.size(); ++i)
    CHECK(g.val(y).value[i] == Catch::Approx(xv[i]).margin(1e-15));
}

TEST_CASE("conv3x3 agrees with a naive direct convolution") {
  Rng rng(13);
  for (int stride : {1, 2}) {
    Graph<double> g;
    const int ci = 3, co = 4, h = 6, w = 5;
    const std::vector<double> xv = random_values(rng, ci * h * w);
    const std::vector<double> wv = random_values(rng, co * ci * 9);
    const std::vector<double> bv = random_values(rng, co);
    const int y = g.conv3x3(g.leaf({ci, h, w}, xv, false), g.leaf({co, ci, 3, 3}, wv, false),
                            g.leaf({co}, bv, false), stride);
    const int oh = (h - 1) / stride + 1, ow = (w - 1) / stride + 1;
    REQUIRE(g.val(y).shape == std::vector<int>{co, oh, ow});
    // oracle: direct quadruple loop, zero padding 1
    for (int o = 0; o < co; ++o)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          double acc = bv[o];
          for (int c = 0; c < ci; ++c)
            for (int dy = 0; dy < 3; ++dy)
              for (int dx = 0; dx < 3; ++dx) {
                const int iy = oy * stride - 1 + dy, ix = ox * stride - 1 + dx;
                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                acc += xv[(c * h + iy) * w + ix] * wv[(o * ci + c) * 9 + dy * 3 + dx];
              }
          CHECK(g.val(y).value[(o * oh + oy) * ow + ox] == Catch::Approx(acc).margin(1e-12));
        }
  }
}

TEST_CASE("shape violations raise shape errors with context") {
  Graph<double> g;
  const int x = g.leaf({2, 4, 4}, std::vector<double>(32, 0.1), false);
  const int w_bad = g.leaf({3, 5, 3, 3}, std::vector<double>(135, 0.0), false);
  const int b = g.leaf({3}, {0.0, 0.0, 0.0}, false);
  CHECK_THROWS_AS(g.conv3x3(x, w_bad, b, 1), Error);
  const int y = g.leaf({2, 4, 5}, std::vector<double>(40, 0.0), false);
  CHECK_THROWS_AS(g.add(x, y), Error);
  try {
    g.add(x, y);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::shape);
    CHECK(std::string(e.what()).find("4,4") != std::string::npos);
  }
}

// ----------------------------------------------------------------- backward

TEST_CASE("loss sum(x) gives unit gradients") {
  Graph<double> g;
  Rng rng(17);
  const int x = g.leaf({2, 4, 4}, random_values(rng, 32), true);
  g.backward(g.sum(x));
  for (double v : g.val(x).grad) CHECK(v == 1.0);
}

TEST_CASE("loss mean(square(x)) gives gradient 2x/N") {
  Graph<double> g;
  Rng rng(19);
  const std::vector<double> xv = random_values(rng, 32);
  const int x = g.leaf({2, 4, 4}, xv, true);
  g.backward(g.mean(g.square(x)));
  for (std::size_t i = 0; i < xv.size(); ++i)
    CHECK(g.val(x).grad[i] == Catch::Approx(2.0 * xv[i] / 32.0).margin(1e-15));
}

TEST_CASE("backward twice accumulates exactly twice the gradient") {
  Graph<double> g;
  Rng rng(23);
  const int x = g.leaf({2, 4, 4}, random_values(rng, 32), true);
  const int r = g.leaf({2, 4, 4}, random_values(rng, 32), false);
  const int loss = g.mean(g.square(g.sub(g.sigmoid(x), r)));
  g.backward(loss);
  const std::vector<double> once = g.val(x).grad;
  g.backward(loss);
  for (std::size_t i = 0; i < once.size(); ++i) CHECK(g.val(x).grad[i] == 2.0 * once[i]);
}

TEST_CASE("backward rejects non-scalar losses") {
  Graph<double> g;
  const int x = g.leaf({2, 2, 2}, std::vector<double>(8, 0.5), true);
  const int y = g.square(x);
  CHECK_THROWS_AS(g.backward(y), Error);
  try {
    g.backward(y);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::contract);
  }
}

TEST_CASE("ops do not mutate their input tensors") {
  Graph<double> g;
  Rng rng(29);
  const std::vector<double> xv = random_values(rng, 2 * 4 * 4);
  const std::vector<double> wv = random_values(rng, 3 * 2 * 9);
  const std::vector<double> bv = random_values(rng, 3);
  const int x = g.leaf({2, 4, 4}, xv, true);
  const int w = g.leaf({3, 2, 3, 3}, wv, true);
  const int b = g.leaf({3}, bv, true);
  const int y = g.conv3x3(x, w, b, 1);
  const int z = g.mean(g.square(g.sigmoid(g.relu(y))));
  g.backward(z);
  CHECK(g.val(x).value == xv);
  CHECK(g.val(w).value == wv);
  CHECK(g.val(b).value == bv);
}

TEST_CASE("finite-difference check passes for every op kind") {
  const auto checks = standard_op_checks();
  REQUIRE(checks.size() >= 13);
  const auto results = run_checks(checks, {1001, 2002});
  REQUIRE(results.size() >= 20);
  for (const auto& r : results) {
    INFO(r.name << " max rel err " << r.max_rel_err);
    CHECK(r.max_rel_err <= 1e-6);
  }
}

// --------------------------------------------------------------------- adam

TEST_CASE("adam with zero gradient leaves parameters unchanged") {
  std::vector<double> p = {1.0, -2.0, 0.5};
  const std::vector<double> orig = p;
  AdamState<double> st;
  for (int i = 0; i < 5; ++i) adam_step(p, std::vector<double>(3, 0.0), st, 0.1);
  CHECK(p == orig);
}

TEST_CASE("adam under a constant gradient descends against its sign") {
  std::vector<double> p = {1.0, 1.0};
  AdamState<double> st;
  const std::vector<double> grad = {0.3, -0.7};
  for (int i = 0; i < 50; ++i) adam_step(p, grad, st, 0.01);
  CHECK(p[0] < 1.0);
  CHECK(p[1] > 1.0);
}

TEST_CASE("adam matches the hand-evaluated recurrences for three steps") {
  std::vector<double> p = {0.8};
  AdamState<double> st;
  const double g = 0.5, lr = 0.1;
  // oracle: write out m_t, v_t, bias corrections, and the update explicitly
  double m = 0.0, v = 0.0, expect = 0.8;
  for (int t = 1; t <= 3; ++t) {
    adam_step(p, {g}, st, lr);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mhat = m / (1.0 - std::pow(0.9, t));
    const double vhat = v / (1.0 - std::pow(0.999, t));
    expect -= lr * mhat / (std::sqrt(vhat) + 1e-8);
    CHECK(p[0] == Catch::Approx(expect).margin(1e-12));
  }
}

TEST_CASE("adam aborts on non-finite gradients") {
  std::vector<double> p = {1.0};
  AdamState<double> st;
  adam_step(p, {0.5}, st, 0.1);
  const double after_one = p[0];
  const long step_after_one = st.step;
  CHECK_THROWS_AS(adam_step(p, {std::nan("")}, st, 0.1), Error);
  CHECK(p[0] == after_one);
  CHECK(st.step == step_after_one);
}

// ------------------------------------------------------------------- xavier

TEST_CASE("xavier samples respect the analytic bound and the seed") {
  const auto t1 = xavier_init<double>({8, 4, 3, 3}, 77);
  const auto t2 = xavier_init<double>({8, 4, 3, 3}, 77);
  const auto t3 = xavier_init<double>({8, 4, 3, 3}, 78);
  CHECK(t1.value == t2.value);
  CHECK(t1.value != t3.value);
  const double a = std::sqrt(6.0 / (4 * 9 + 8 * 9));
  for (double v : t1.value) {
    CHECK(v >= -a);
    CHECK(v <= a);
  }
}

TEST_CASE("xavier empirical variance matches 2/(fan_in+fan_out)") {
  double sum = 0.0, sum2 = 0.0;
  std::size_t n = 0;
  for (int s = 0; s < 5; ++s) {
    const auto t = xavier_init<double>({50, 40}, 900 + s);
    for (double v : t.value) {
      sum += v;
      sum2 += v * v;
      ++n;
    }
  }
  REQUIRE(n == 10000);
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  const double expect = 2.0 / (40 + 50);
  CHECK(var == Catch::Approx(expect).epsilon(0.10));
}

// ------------------------------------------------------------- params + ckpt

TEST_CASE("param set binds leaves, collects gradients, and steps") {
  ParamSet<double> ps;
  ps.add("w", xavier_init<double>({4, 2}, 3));
  ps.add("b", Tensor<double>({4}, 0.0));
  Graph<double> g;
  Rng rng(31);
  const int x = g.leaf({2, 3, 3}, random_values(rng, 18), false);
  const int w = ps.bind(g, "w");
  const int b = ps.bind(g, "b");
  const int loss = g.mean(g.square(g.conv1x1(x, w, b)));
  g.backward(loss);
  ps.zero_grads();
  ps.collect(g, "w", w);
  ps.collect(g, "b", b);
  double gnorm = 0.0;
  for (double v : ps.at("w").grad) gnorm += v * v;
  CHECK(gnorm > 0.0);
  const std::vector<double> before = ps.at("w").value;
  ps.adam_step_all(0.05);
  CHECK(ps.at("w").value != before);
}

TEST_CASE("checkpoints round trip through wsf plus index") {
  testing::TempDir td("wsod_ckpt");
  ParamSet<float> ps;
  ps.add("enc.w", xavier_init<float>({3, 2, 3, 3}, 11));
  ps.add("enc.b", Tensor<float>({3}, 0.5f));
  ps.add("head.w", xavier_init<float>({4, 3}, 12));
  ps.save(td.path().string());
  const auto back = ParamSet<float>::load(td.path().string());
  REQUIRE(back.size() == 3);
  CHECK(back.at("enc.w").value == ps.at("enc.w").value);
  CHECK(back.at("enc.w").shape == ps.at("enc.w").shape);
  CHECK(back.at("enc.b").value == ps.at("enc.b").value);
  CHECK(back.at("head.w").value == ps.at("head.w").value);
}
