// Copyright (c) 2026 wsod contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "wsod/common.hpp"

namespace wsod::ndgrad {

inline std::size_t shape_count(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw_shape("tensor dims must be positive");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

inline std::string shape_str(const std::vector<int>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
  return s + "]";
}

/// Dense tensor with an optional gradient buffer of identical shape.
template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> value;
  std::vector<T> grad;  // empty unless requires_grad
  bool requires_grad = false;

  Tensor() = default;
  Tensor(std::vector<int> s, T fill = T(0)) : shape(std::move(s)) {
    value.assign(shape_count(shape), fill);
  }

  std::size_t count() const { return value.size(); }

  void set_requires_grad(bool on) {
    requires_grad = on;
    if (on)
      grad.assign(value.size(), T(0));
    else
      grad.clear();
  }

  void zero_grad() {
    if (requires_grad) grad.assign(value.size(), T(0));
  }

  bool values_finite() const {
    for (T v : value)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }
};

// Channel-major (C, H, W) helpers for the rank-3 tensors the networks use.
inline int chw_c(const std::vector<int>& s) { return s.at(0); }
inline int chw_h(const std::vector<int>& s) { return s.at(1); }
inline int chw_w(const std::vector<int>& s) { return s.at(2); }

inline void require_rank(const std::vector<int>& s, std::size_t rank, const char* what) {
  if (s.size() != rank)
    throw_shape(std::string(what) + ": expected rank " + std::to_string(rank) + ", got " +
                shape_str(s));
}

}  // namespace wsod::ndgrad
