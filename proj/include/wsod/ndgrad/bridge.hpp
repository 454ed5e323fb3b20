// Copyright (c) 2026 wsod contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>

#include "wsod/core/types.hpp"
#include "wsod/ndgrad/tensor.hpp"

// Conversions between the image-domain types (64-bit) and graph tensors
// (training precision T).

namespace wsod::ndgrad {

template <typename T>
inline Tensor<T> image_tensor(const core::ImageRGB& img) {
  Tensor<T> t({3, img.height, img.width});
  for (std::size_t i = 0; i < img.data.size(); ++i) t.value[i] = static_cast<T>(img.data[i]);
  return t;
}

template <typename T>
inline Tensor<T> map_tensor(const core::ScoreMap& m) {
  Tensor<T> t({1, m.height, m.width});
  for (std::size_t i = 0; i < m.data.size(); ++i) t.value[i] = static_cast<T>(m.data[i]);
  return t;
}

/// A (1,H,W) or (C,H,W) tensor's first channel as a clamped score map.
template <typename T>
inline core::ScoreMap score_map(const Tensor<T>& t) {
  require_rank(t.shape, 3, "score_map");
  core::ScoreMap m(chw_h(t.shape), chw_w(t.shape));
  for (std::size_t i = 0; i < m.data.size(); ++i)
    m.data[i] = std::clamp(static_cast<double>(t.value[i]), 0.0, 1.0);
  return m;
}

}  // namespace wsod::ndgrad
