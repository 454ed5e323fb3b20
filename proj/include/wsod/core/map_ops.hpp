// Copyright (c) 2026 wsod contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "wsod/core/types.hpp"

namespace wsod::core {

/// Affine rescale of a raw map to [0, 1]: (v - min) / (max - min).
/// A constant input maps to all zeros, so a dead activation channel stays dead.
inline ScoreMap normalize_map(const ScoreMap& raw) {
  ScoreMap out(raw.height, raw.width);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : raw.data) {
    if (!std::isfinite(v)) throw_numeric("normalize_map: non-finite input");
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi > lo) {
    // Direct division (not multiply-by-inverse) so the extremes land exactly
    // on 0 and 1: IEEE guarantees x/x == 1 for finite nonzero x.
    const double range = hi - lo;
    for (std::size_t i = 0; i < raw.data.size(); ++i)
      out.data[i] = std::clamp((raw.data[i] - lo) / range, 0.0, 1.0);
  }
  return out;
}

// One output position of a corner-aligned bilinear axis: samples lo/hi blended
// as 0.5*(a+b) + g*(b-a) with g in [-0.5, 0.5]. The midpoint form makes a
// constant input an exact fixed point (g*(b-a) vanishes) and, because the
// mirrored table negates g (exact in IEEE), resizing commutes with axis
// reversal bitwise — both properties other blend formulations only hold to ulp.
struct AxisSample {
  int lo = 0;
  int hi = 0;
  double g = -0.5;
};

inline std::vector<AxisSample> bilinear_axis(int in_n, int out_n) {
  std::vector<AxisSample> t(static_cast<std::size_t>(out_n));
  if (in_n == 1) {
    for (auto& e : t) e = {0, 0, -0.5};
    return t;
  }
  const double denom = out_n > 1 ? static_cast<double>(out_n - 1) : 1.0;
  for (int x = 0; x < out_n; ++x) {
    const int xm = out_n - 1 - x;
    if (x > xm) {
      const AxisSample& e = t[static_cast<std::size_t>(xm)];
      t[static_cast<std::size_t>(x)] = {in_n - 1 - e.hi, in_n - 1 - e.lo, -e.g};
      continue;
    }
    const double s = static_cast<double>(x) * static_cast<double>(in_n - 1) / denom;
    int lo = static_cast<int>(s);
    if (lo > in_n - 2) lo = in_n - 2;
    const double f = s - static_cast<double>(lo);
    t[static_cast<std::size_t>(x)] = {lo, lo + 1, f - 0.5};
  }
  return t;
}

namespace detail {

inline double blend(double a, double b, double g) { return 0.5 * (a + b) + g * (b - a); }

inline void resize_plane(const double* src, int w, double* dst, int oh, int ow,
                         const std::vector<AxisSample>& ty, const std::vector<AxisSample>& tx) {
  for (int y = 0; y < oh; ++y) {
    const AxisSample& ay = ty[static_cast<std::size_t>(y)];
    const double* r0 = src + static_cast<std::size_t>(ay.lo) * w;
    const double* r1 = src + static_cast<std::size_t>(ay.hi) * w;
    double* out = dst + static_cast<std::size_t>(y) * ow;
    for (int x = 0; x < ow; ++x) {
      const AxisSample& ax = tx[static_cast<std::size_t>(x)];
      const double top = blend(r0[ax.lo], r0[ax.hi], ax.g);
      const double bot = blend(r1[ax.lo], r1[ax.hi], ax.g);
      out[x] = std::clamp(blend(top, bot, ay.g), 0.0, 1.0);
    }
  }
}

}  // namespace detail

/// Corner-aligned bilinear resize. Identity targets return the input verbatim.
inline ScoreMap resize_bilinear(const ScoreMap& m, int oh, int ow) {
  if (oh < 1 || ow < 1) throw_config("resize_bilinear: target dims must be >= 1");
  if (oh == m.height && ow == m.width) return m;
  ScoreMap out(oh, ow);
  const auto ty = bilinear_axis(m.height, oh);
  const auto tx = bilinear_axis(m.width, ow);
  detail::resize_plane(m.data.data(), m.width, out.data.data(), oh, ow, ty, tx);
  return out;
}

inline ImageRGB resize_bilinear(const ImageRGB& img, int oh, int ow) {
  if (oh < 1 || ow < 1) throw_config("resize_bilinear: target dims must be >= 1");
  if (oh == img.height && ow == img.width) return img;
  ImageRGB out(oh, ow);
  const auto ty = bilinear_axis(img.height, oh);
  const auto tx = bilinear_axis(img.width, ow);
  for (int c = 0; c < 3; ++c)
    detail::resize_plane(img.plane(c), img.width, out.plane(c), oh, ow, ty, tx);
  return out;
}

inline ScoreMap flip_horizontal(const ScoreMap& m) {
  ScoreMap out(m.height, m.width);
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) out.at(y, x) = m.at(y, m.width - 1 - x);
  return out;
}

inline ImageRGB flip_horizontal(const ImageRGB& img) {
  ImageRGB out(img.height, img.width);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) out.at(c, y, x) = img.at(c, y, img.width - 1 - x);
  return out;
}

}  // namespace wsod::core
