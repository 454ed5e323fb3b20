// Copyright (c) 2026 wsod contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "wsod/common.hpp"
#include "wsod/core/types.hpp"

// Pixel-adaptive refinement: iteratively re-estimates a score map as an
// appearance-weighted average over a dilated neighborhood, so scores flow
// between pixels of similar color and stop at color edges.

namespace wsod::refine {

struct PamrParams {
  int iterations = 10;
  std::vector<int> radii = {1, 2, 4, 8};
  double temperature = 0.01;
};

namespace detail {

struct NeighborTable {
  // Per-pixel neighbor spans into flat (index, weight) arrays; the span for
  // pixel i is [row_start[i], row_start[i+1]). The center pixel is excluded
  // from the span but its unit weight is included in row_z.
  std::vector<std::size_t> row_start;
  std::vector<int> index;
  std::vector<double> weight;
  std::vector<double> row_z;  // sum of weights including the center's 1.0
};

inline std::vector<std::pair<int, int>> dilation_offsets(
    const std::vector<int>& radii) {
  std::vector<std::pair<int, int>> offs;
  for (int r : radii) {
    if (r < 1) throw_config("pamr: dilation radii must be >= 1");
    for (int dy : {-r, 0, r})
      for (int dx : {-r, 0, r}) {
        if (dy == 0 && dx == 0) continue;
        const std::pair<int, int> o{dy, dx};
        if (std::find(offs.begin(), offs.end(), o) == offs.end())
          offs.push_back(o);
      }
  }
  return offs;
}

// Affinities depend only on the image; build once, reuse every iteration.
inline NeighborTable build_affinities(const core::ImageRGB& img,
                                      const PamrParams& p) {
  if (p.temperature <= 0.0)
    throw_config("pamr: temperature must be positive");
  if (p.iterations < 1) throw_config("pamr: iterations must be >= 1");
  const auto offs = dilation_offsets(p.radii);
  const int h = img.height, w = img.width;
  NeighborTable t;
  t.row_start.assign(static_cast<std::size_t>(h) * w + 1, 0);
  t.row_z.assign(static_cast<std::size_t>(h) * w, 0.0);
  t.index.reserve(static_cast<std::size_t>(h) * w * offs.size());
  t.weight.reserve(static_cast<std::size_t>(h) * w * offs.size());
  const double* r = img.plane(0);
  const double* g = img.plane(1);
  const double* b = img.plane(2);
  std::size_t i = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x, ++i) {
      double z = 1.0;  // center contributes exp(0)
      for (const auto& [dy, dx] : offs) {
        const int yy = y + dy, xx = x + dx;
        if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
        const std::size_t j =
            static_cast<std::size_t>(yy) * static_cast<std::size_t>(w) + xx;
        const double dr = r[i] - r[j];
        const double dg = g[i] - g[j];
        const double db = b[i] - b[j];
        const double wgt =
            std::exp(-(dr * dr + dg * dg + db * db) / p.temperature);
        t.index.push_back(static_cast<int>(j));
        t.weight.push_back(wgt);
        z += wgt;
      }
      t.row_z[i] = z;
      t.row_start[i + 1] = t.index.size();
    }
  return t;
}

}  // namespace detail

inline core::ScoreMap pamr_refine(const core::ImageRGB& img,
                                  const core::ScoreMap& map,
                                  const PamrParams& params = {}) {
  if (img.height != map.height || img.width != map.width)
    throw_shape("pamr_refine: image " + std::to_string(img.height) + "x" +
                std::to_string(img.width) + " vs map " +
                std::to_string(map.height) + "x" + std::to_string(map.width));
  const detail::NeighborTable t = detail::build_affinities(img, params);
  std::vector<double> cur = map.data;
  std::vector<double> next(cur.size());
  for (int it = 0; it < params.iterations; ++it) {
    for (std::size_t i = 0; i < cur.size(); ++i) {
      // Delta form of the stochastic update: a constant map is a bitwise
      // fixed point because every (map_j - map_i) term vanishes exactly.
      double acc = 0.0;
      for (std::size_t k = t.row_start[i]; k < t.row_start[i + 1]; ++k)
        acc += t.weight[k] * (cur[static_cast<std::size_t>(t.index[k])] - cur[i]);
      next[i] = cur[i] + acc / t.row_z[i];
    }
    cur.swap(next);
  }
  core::ScoreMap out(map.height, map.width);
  for (std::size_t i = 0; i < cur.size(); ++i)
    out.data[i] = std::min(1.0, std::max(0.0, cur[i]));
  return out;
}

}  // namespace wsod::refine
