// Copyright (c) 2026 wsod contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wsod/common.hpp"

namespace wsod::core {

/// Planar RGB image, channel-major layout, values in [0, 1].
struct ImageRGB {
  int height = 0;
  int width = 0;
  std::vector<double> data;  // size 3*H*W, index c*H*W + y*W + x

  ImageRGB() = default;
  ImageRGB(int h, int w, double fill = 0.0)
      : height(h), width(w), data(static_cast<std::size_t>(3) * h * w, fill) {}

  double& at(int c, int y, int x) {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  double at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  const double* plane(int c) const { return data.data() + static_cast<std::size_t>(c) * height * width; }
  double* plane(int c) { return data.data() + static_cast<std::size_t>(c) * height * width; }
  std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }
};

/// Single-channel real map in [0, 1].
struct ScoreMap {
  int height = 0;
  int width = 0;
  std::vector<double> data;  // size H*W, row-major

  ScoreMap() = default;
  ScoreMap(int h, int w, double fill = 0.0)
      : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill) {}

  double& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
  double at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
  std::size_t pixels() const { return data.size(); }
};

/// Binary mask, values strictly in {0, 1}.
struct BinaryMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;

  BinaryMask() = default;
  BinaryMask(int h, int w, std::uint8_t fill = 0)
      : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill) {}

  std::uint8_t& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
  std::size_t pixels() const { return data.size(); }
  std::size_t count_ones() const {
    std::size_t n = 0;
    for (auto v : data) n += v;
    return n;
  }
};

enum class LabelProvenance { pixel, superpixel, fused_avg, fused_intersect, fused_union, ys };

inline const char* provenance_name(LabelProvenance p) {
  switch (p) {
    case LabelProvenance::pixel: return "pixel";
    case LabelProvenance::superpixel: return "superpixel";
    case LabelProvenance::fused_avg: return "fused_avg";
    case LabelProvenance::fused_intersect: return "fused_intersect";
    case LabelProvenance::fused_union: return "fused_union";
    case LabelProvenance::ys: return "ys";
  }
  return "?";
}

struct PseudoLabel {
  BinaryMask mask;
  LabelProvenance provenance = LabelProvenance::pixel;
};

/// Multi-hot category vector; training samples carry at least one set bit.
struct CategoryLabel {
  std::vector<std::uint8_t> bits;

  int num_categories() const { return static_cast<int>(bits.size()); }
  int count() const {
    int n = 0;
    for (auto b : bits) n += b;
    return n;
  }

  std::uint32_t packed() const {
    std::uint32_t p = 0;
    for (std::size_t k = 0; k < bits.size(); ++k)
      if (bits[k]) p |= 1u << k;
    return p;
  }
  static CategoryLabel from_packed(std::uint32_t p, int num_categories) {
    CategoryLabel c;
    c.bits.assign(static_cast<std::size_t>(num_categories), 0);
    for (int k = 0; k < num_categories; ++k)
      if (p & (1u << k)) c.bits[static_cast<std::size_t>(k)] = 1;
    return c;
  }
};

/// One dataset entry. gt_mask exists for evaluation only and never feeds training.
struct Sample {
  ImageRGB image;
  CategoryLabel category;
  BinaryMask gt_mask;
};

inline void check_same_dims(int h1, int w1, int h2, int w2, const char* what) {
  if (h1 != h2 || w1 != w2)
    throw_shape(std::string(what) + ": dimension mismatch " + std::to_string(h1) + "x" +
                std::to_string(w1) + " vs " + std::to_string(h2) + "x" + std::to_string(w2));
}

inline bool in_unit_range(const ScoreMap& m) {
  for (double v : m.data)
    if (!(v >= 0.0 && v <= 1.0)) return false;
  return true;
}

inline bool is_binary(const BinaryMask& m) {
  for (auto v : m.data)
    if (v != 0 && v != 1) return false;
  return true;
}

}  // namespace wsod::core
