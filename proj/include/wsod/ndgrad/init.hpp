// Copyright (c) 2026 wsod contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <vector>

#include "wsod/ndgrad/tensor.hpp"

namespace wsod::ndgrad {

/// Fan-in/fan-out for the shapes in use: rank-4 conv kernels (Co,Ci,kh,kw),
/// rank-2 channel mixers (Co,Ci), rank-1 vectors.
inline std::pair<double, double> fans(const std::vector<int>& shape) {
  if (shape.size() == 4) {
    const double rf = static_cast<double>(shape[2]) * shape[3];
    return {shape[1] * rf, shape[0] * rf};
  }
  if (shape.size() == 2) return {shape[1], shape[0]};
  if (shape.size() == 1) return {shape[0], shape[0]};
  throw_shape("fans: unsupported rank " + shape_str(shape));
}

/// Uniform Xavier/Glorot initialization: U(-a, a), a = sqrt(6/(fan_in+fan_out)).
template <typename T>
inline Tensor<T> xavier_init(const std::vector<int>& shape, std::uint64_t seed) {
  auto [fin, fout] = fans(shape);
  const double a = std::sqrt(6.0 / (fin + fout));
  Tensor<T> t(shape);
  Rng rng(seed);
  for (auto& v : t.value) v = static_cast<T>(rng.uniform(-a, a));
  return t;
}

}  // namespace wsod::ndgrad
