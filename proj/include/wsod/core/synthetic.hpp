// Copyright (c) 2026 wsod contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "wsod/core/types.hpp"

// Synthetic image-level-label corpus: colored geometric figures on a textured
// gray background. Each figure kind maps to one category bit and to a hue
// family, so categories are visually grounded; the ground-truth mask (the
// union of figure pixels) is carried on each sample for evaluation only.

namespace wsod::core {

constexpr int kMaxShapeKinds = 8;

namespace detail {

struct Hsv {
  double h, s, v;
};

inline void hsv_to_rgb(const Hsv& in, double rgb[3]) {
  const double h = (in.h - std::floor(in.h)) * 6.0;
  const int i = static_cast<int>(h) % 6;
  const double f = h - std::floor(h);
  const double p = in.v * (1.0 - in.s);
  const double q = in.v * (1.0 - in.s * f);
  const double t = in.v * (1.0 - in.s * (1.0 - f));
  switch (i) {
    case 0: rgb[0] = in.v; rgb[1] = t; rgb[2] = p; break;
    case 1: rgb[0] = q; rgb[1] = in.v; rgb[2] = p; break;
    case 2: rgb[0] = p; rgb[1] = in.v; rgb[2] = t; break;
    case 3: rgb[0] = p; rgb[1] = q; rgb[2] = in.v; break;
    case 4: rgb[0] = t; rgb[1] = p; rgb[2] = in.v; break;
    default: rgb[0] = in.v; rgb[1] = p; rgb[2] = q; break;
  }
}

/// Bilinear value noise in [-1, 1] over a node lattice with the given cell size.
struct ValueNoise {
  int cell;
  int nodes_x, nodes_y;
  std::vector<double> nodes;

  ValueNoise(Rng& rng, int height, int width, int cell_size) : cell(cell_size) {
    nodes_x = width / cell + 2;
    nodes_y = height / cell + 2;
    nodes.resize(static_cast<std::size_t>(nodes_x) * nodes_y);
    for (auto& n : nodes) n = rng.uniform(-1.0, 1.0);
  }

  double at(int y, int x) const {
    const double fy = static_cast<double>(y) / cell;
    const double fx = static_cast<double>(x) / cell;
    const int iy = static_cast<int>(fy), ix = static_cast<int>(fx);
    const double ty = fy - iy, tx = fx - ix;
    const auto n = [&](int yy, int xx) { return nodes[static_cast<std::size_t>(yy) * nodes_x + xx]; };
    const double top = n(iy, ix) * (1.0 - tx) + n(iy, ix + 1) * tx;
    const double bot = n(iy + 1, ix) * (1.0 - tx) + n(iy + 1, ix + 1) * tx;
    return top * (1.0 - ty) + bot * ty;
  }
};

inline bool shape_covers(int kind, int y, int x, int cy, int cx, double r) {
  const double dy = y - cy, dx = x - cx;
  switch (kind) {
    case 0:  // disk
      return dy * dy + dx * dx <= r * r;
    case 1:  // square
      return std::abs(dx) <= r && std::abs(dy) <= r;
    case 2: {  // upward triangle
      if (dy < -r || dy > r) return false;
      const double half = (dy + r) * 0.5;
      return std::abs(dx) <= half;
    }
    case 3:  // cross
      return (std::abs(dx) <= r / 3.0 && std::abs(dy) <= r) ||
             (std::abs(dy) <= r / 3.0 && std::abs(dx) <= r);
    case 4:  // diamond
      return std::abs(dx) + std::abs(dy) <= r;
    case 5: {  // ring
      const double d2 = dy * dy + dx * dx;
      return d2 <= r * r && d2 >= (r * 0.5) * (r * 0.5);
    }
    case 6:  // horizontal bar
      return std::abs(dy) <= r / 2.5 && std::abs(dx) <= r;
    default:  // vertical bar
      return std::abs(dx) <= r / 2.5 && std::abs(dy) <= r;
  }
}

}  // namespace detail

inline std::vector<Sample> gen_synthetic_dataset(int count, int size, int num_classes,
                                                 std::uint64_t seed) {
  if (count < 1) throw_config("dataset count must be >= 1");
  if (size < 32) throw_config("dataset image size must be >= 32");
  if (num_classes < 2 || num_classes > kMaxShapeKinds)
    throw_config("num_categories must be in [2, 8]");

  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int idx = 0; idx < count; ++idx) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(idx)));
    Sample s;
    s.image = ImageRGB(size, size);
    s.gt_mask = BinaryMask(size, size);
    s.category.bits.assign(static_cast<std::size_t>(num_classes), 0);

    // Textured gray background: per-channel base plus shared multi-octave noise.
    double base[3];
    const double g0 = rng.uniform(0.30, 0.60);
    for (double& b : base) b = g0 + rng.uniform(-0.05, 0.05);
    detail::ValueNoise coarse(rng, size, size, std::max(4, size / 4));
    detail::ValueNoise mid(rng, size, size, std::max(2, size / 8));
    detail::ValueNoise fine(rng, size, size, std::max(1, size / 16));
    std::vector<double> noise(static_cast<std::size_t>(size) * size);
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x)
        noise[static_cast<std::size_t>(y) * size + x] =
            0.05 * coarse.at(y, x) + 0.025 * mid.at(y, x) + 0.0125 * fine.at(y, x);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
          s.image.at(c, y, x) =
              std::clamp(base[c] + noise[static_cast<std::size_t>(y) * size + x], 0.05, 0.95);

    // 1..3 figures of distinct kinds, placed without overlap.
    const int max_shapes = std::min(3, num_classes);
    const int want = 1 + rng.uniform_int(0, max_shapes - 1);
    std::array<int, kMaxShapeKinds> kinds{};
    for (int k = 0; k < num_classes; ++k) kinds[static_cast<std::size_t>(k)] = k;
    for (int k = 0; k < want; ++k) {  // partial Fisher-Yates
      const int j = k + rng.uniform_int(0, num_classes - 1 - k);
      std::swap(kinds[static_cast<std::size_t>(k)], kinds[static_cast<std::size_t>(j)]);
    }

    struct Placed {
      int cy, cx;
      double r;
    };
    std::vector<Placed> placed;
    for (int k = 0; k < want; ++k) {
      const int kind = kinds[static_cast<std::size_t>(k)];
      const double r = rng.uniform(0.12, 0.20) * size;
      const int lo = static_cast<int>(std::ceil(r)) + 2;
      const int hi = size - lo - 1;
      if (hi <= lo) continue;  // image too small for this radius
      bool ok = false;
      int cy = 0, cx = 0;
      for (int attempt = 0; attempt < 50 && !ok; ++attempt) {
        cy = rng.uniform_int(lo, hi);
        cx = rng.uniform_int(lo, hi);
        ok = true;
        for (const auto& p : placed) {
          const double dy = cy - p.cy, dx = cx - p.cx;
          const double min_d = r + p.r + 3.0;
          if (dy * dy + dx * dx < min_d * min_d) {
            ok = false;
            break;
          }
        }
      }
      if (!ok) continue;  // crowded image: draw fewer figures

      // Kind-keyed hue family with jitter; redraw until it clears the background.
      double rgb[3];
      for (int attempt = 0; attempt < 20; ++attempt) {
        detail::Hsv hsv{static_cast<double>(kind) / num_classes + rng.uniform(-0.05, 0.05),
                        rng.uniform(0.65, 1.0), rng.uniform(0.65, 0.95)};
        detail::hsv_to_rgb(hsv, rgb);
        const double d2 = (rgb[0] - base[0]) * (rgb[0] - base[0]) +
                          (rgb[1] - base[1]) * (rgb[1] - base[1]) +
                          (rgb[2] - base[2]) * (rgb[2] - base[2]);
        if (d2 >= 0.25 * 0.25) break;
      }

      const int pad = static_cast<int>(std::ceil(r)) + 1;
      for (int y = cy - pad; y <= cy + pad; ++y)
        for (int x = cx - pad; x <= cx + pad; ++x) {
          if (y < 0 || y >= size || x < 0 || x >= size) continue;
          if (!detail::shape_covers(kind, y, x, cy, cx, r)) continue;
          const double shade = 0.25 * noise[static_cast<std::size_t>(y) * size + x];
          for (int c = 0; c < 3; ++c) s.image.at(c, y, x) = std::clamp(rgb[c] + shade, 0.0, 1.0);
          s.gt_mask.at(y, x) = 1;
        }
      placed.push_back({cy, cx, r});
      s.category.bits[static_cast<std::size_t>(kind)] = 1;
    }

    // Guarantee at least one figure per image (a crowded draw can drop them all).
    if (placed.empty()) {
      const int kind = kinds[0];
      const double r = 0.15 * size;
      const int c0 = size / 2;
      double rgb[3];
      detail::Hsv hsv{static_cast<double>(kind) / num_classes, 0.85, 0.85};
      detail::hsv_to_rgb(hsv, rgb);
      const int pad = static_cast<int>(std::ceil(r)) + 1;
      for (int y = c0 - pad; y <= c0 + pad; ++y)
        for (int x = c0 - pad; x <= c0 + pad; ++x) {
          if (y < 0 || y >= size || x < 0 || x >= size) continue;
          if (!detail::shape_covers(kind, y, x, c0, c0, r)) continue;
          for (int c = 0; c < 3; ++c) s.image.at(c, y, x) = rgb[c];
          s.gt_mask.at(y, x) = 1;
        }
      s.category.bits[static_cast<std::size_t>(kind)] = 1;
    }

    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace wsod::core
