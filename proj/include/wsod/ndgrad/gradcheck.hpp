// Copyright (c) 2026 wsod contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "wsod/ndgrad/graph.hpp"

// Central finite-difference verification of the analytic gradients, always on
// 64-bit graphs. Relative error uses denominator max(1, |analytic|, |numeric|)
// so the tolerance reads as absolute for small components and relative for
// large ones.

namespace wsod::ndgrad {

struct GradCheck {
  std::string name;
  std::vector<std::vector<int>> leaf_shapes;
  // Builds the graph over the given leaf ids and returns a scalar loss id.
  std::function<int(Graph<double>&, const std::vector<int>&)> build;
  double value_scale = 1.0;
  // Leaf values are pushed away from zero by at least this much (kinked ops).
  double min_abs = 0.0;
};

struct GradCheckResult {
  std::string name;
  double max_rel_err = 0.0;
};

namespace detail {

inline std::vector<std::vector<double>> draw_leaves(const GradCheck& gc, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<double>> vals;
  for (const auto& shape : gc.leaf_shapes) {
    std::vector<double> v(shape_count(shape));
    for (auto& x : v) {
      x = rng.uniform(-gc.value_scale, gc.value_scale);
      if (std::abs(x) < gc.min_abs) x = x < 0 ? x - gc.min_abs : x + gc.min_abs;
    }
    vals.push_back(std::move(v));
  }
  return vals;
}

inline double eval_loss(const GradCheck& gc, const std::vector<std::vector<double>>& vals) {
  Graph<double> g;
  std::vector<int> ids;
  for (std::size_t i = 0; i < gc.leaf_shapes.size(); ++i)
    ids.push_back(g.leaf(gc.leaf_shapes[i], vals[i], false));
  return g.val(gc.build(g, ids)).value[0];
}

}  // namespace detail

/// Max relative error between analytic and central-difference gradients over
/// every element of every leaf.
inline double run_gradcheck(const GradCheck& gc, std::uint64_t seed, double h = 1e-3) {
  std::vector<std::vector<double>> vals = detail::draw_leaves(gc, seed);

  Graph<double> g;
  std::vector<int> ids;
  for (std::size_t i = 0; i < gc.leaf_shapes.size(); ++i)
    ids.push_back(g.leaf(gc.leaf_shapes[i], vals[i], true));
  const int loss = gc.build(g, ids);
  if (g.val(loss).count() != 1) throw_contract(gc.name + ": gradcheck loss must be scalar");
  g.backward(loss);

  double max_rel = 0.0;
  for (std::size_t li = 0; li < vals.size(); ++li) {
    const auto& grad = g.val(ids[static_cast<std::size_t>(li)]).grad;
    for (std::size_t ei = 0; ei < vals[li].size(); ++ei) {
      const double orig = vals[li][ei];
      vals[li][ei] = orig + h;
      const double fp = detail::eval_loss(gc, vals);
      vals[li][ei] = orig - h;
      const double fm = detail::eval_loss(gc, vals);
      vals[li][ei] = orig;
      const double gn = (fp - fm) / (2.0 * h);
      const double ga = grad.empty() ? 0.0 : grad[ei];
      const double denom = std::max({1.0, std::abs(ga), std::abs(gn)});
      max_rel = std::max(max_rel, std::abs(ga - gn) / denom);
    }
  }
  return max_rel;
}

/// The registry covering every op kind, each reduced to a scalar through a
/// squared-distance probe so all gradient paths carry signal.
inline std::vector<GradCheck> standard_op_checks() {
  auto probe = [](Graph<double>& g, int y, int r) {
    return g.mean(g.square(g.sub(y, r)));
  };
  std::vector<GradCheck> checks;

  checks.push_back({"conv3x3_s1",
                    {{2, 4, 4}, {3, 2, 3, 3}, {3}, {3, 4, 4}},
                    [probe](Graph<double>& g, const std::vector<int>& L) {
                      return probe(g, g.conv3x3(L[0], L[1], L[2], 1), L[3]);
                    }});
  checks.push_back({"conv3x3_s2",
                    {{2, 4, 4}, {3, 2, 3, 3}, {3}, {3, 2, 2}},
                    [probe](Graph<double>& g, const std::vector<int>& L) {
                      return probe(g, g.conv3x3(L[0], L[1], L[2], 2), L[3]);
                    }});
  checks.push_back({"conv1x1",
                    {{3, 4, 4}, {2, 3}, {2}, {2, 4, 4}},
                    [probe](Graph<double>& g, const std::vector<int>& L) {
                      return probe(g, g.conv1x1(L[0], L[1], L[2]), L[3]);
                    }});
  checks.push_back({"relu",
                    {{2, 4, 4}, {2, 4, 4}},
                    [probe](Graph<double>& g, const std::vector<int>& L) {
                      return probe(g, g.relu(L[0]), L[1]);
                    },
                    1.0,
                    0.05});
  checks.push_back({"sigmoid",
                    {{2, 4, 4}, {2, 4, 4}},
                    [probe](Graph<double>& g, const std::vector<int>& L) {
                      return probe(g, g.sigmoid(L[0]), L[1]);
                    }});
  checks.push_back({"gap",
                    {{2, 4, 4}, {2, 1, 1}},
                    [probe](Graph<double>& g, const std::vector<int>& L) {
                      return probe(g, g.gap(L[0]), L[1]);
                    }});
  checks.push_back({"upsample_bilinear",
                    {{2, 4, 4}, {2, 7, 5}},
                    [probe](Graph<double>& g, const std::vector<int>& L) {
                      return probe(g, g.upsample_bilinear(L[0], 7, 5), L[1]);
                    }});
  checks.push_back({"concat_channels",
                    {{2, 4, 4}, {3, 4, 4}, {5, 4, 4}},
                    [probe](Graph<double>& g, const std::vector<int>& L) {
                      return probe(g, g.concat_channels(L[0], L[1]), L[2]);
                    }});
  checks.push_back({"add",
                    {{2, 4, 4}, {2, 4, 4}, {2, 4, 4}},
                    [probe](Graph<double>& g, const std::vector<int>& L) {
                      return probe(g, g.add(L[0], L[1]), L[2]);
                    }});
  checks.push_back({"sub",
                    {{2, 4, 4}, {2, 4, 4}, {2, 4, 4}},
                    [probe](Graph<double>& g, const std::vector<int>& L) {
                      return probe(g, g.sub(L[0], L[1]), L[2]);
                    }});
  checks.push_back({"mul_scalar",
                    {{2, 4, 4}, {2, 4, 4}},
                    [probe](Graph<double>& g, const std::vector<int>& L) {
                      return probe(g, g.mul_scalar(L[0], 0.7), L[1]);
                    }});
  checks.push_back({"square",
                    {{2, 4, 4}, {2, 4, 4}},
                    [probe](Graph<double>& g, const std::vector<int>& L) {
                      return probe(g, g.square(L[0]), L[1]);
                    }});
  checks.push_back({"sum",
                    {{2, 4, 4}, {2, 4, 4}},
                    [](Graph<double>& g, const std::vector<int>& L) {
                      return g.sum(g.square(g.sub(L[0], L[1])));
                    }});
  checks.push_back({"mean",
                    {{2, 4, 4}, {2, 4, 4}},
                    [](Graph<double>& g, const std::vector<int>& L) {
                      return g.mean(g.square(g.sub(L[0], L[1])));
                    }});
  return checks;
}

/// Runs every check over the given seeds; one result per (check, seed).
inline std::vector<GradCheckResult> run_checks(const std::vector<GradCheck>& checks,
                                               const std::vector<std::uint64_t>& seeds,
                                               double h = 1e-3) {
  std::vector<GradCheckResult> out;
  for (const auto& gc : checks)
    for (std::uint64_t s : seeds)
      out.push_back({gc.name + "@" + std::to_string(s), run_gradcheck(gc, s, h)});
  return out;
}

}  // namespace wsod::ndgrad
