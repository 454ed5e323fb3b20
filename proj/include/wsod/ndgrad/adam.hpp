// Copyright (c) 2026 wsod contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <vector>

#include "wsod/common.hpp"

namespace wsod::ndgrad {

/// First/second moment state for one parameter tensor.
template <typename T>
struct AdamState {
  std::vector<T> m, v;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Standard bias-corrected Adam update. Rejects non-finite gradients before
/// touching any state, so a poisoned step leaves parameters unchanged.
template <typename T>
inline void adam_step(std::vector<T>& param, const std::vector<T>& grad, AdamState<T>& st,
                      double lr) {
  if (param.size() != grad.size()) throw_shape("adam_step: param/grad size mismatch");
  if (st.m.empty()) st.m.assign(param.size(), T(0));
  if (st.v.empty()) st.v.assign(param.size(), T(0));
  if (st.m.size() != param.size() || st.v.size() != param.size())
    throw_shape("adam_step: moment/param size mismatch");
  for (T g : grad)
    if (!std::isfinite(static_cast<double>(g)))
      throw_numeric("adam_step: non-finite gradient, update aborted");

  st.step += 1;
  const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  const T b1 = static_cast<T>(st.beta1), b2 = static_cast<T>(st.beta2);
  for (std::size_t i = 0; i < param.size(); ++i) {
    st.m[i] = b1 * st.m[i] + (T(1) - b1) * grad[i];
    st.v[i] = b2 * st.v[i] + (T(1) - b2) * grad[i] * grad[i];
    const double mhat = static_cast<double>(st.m[i]) / bc1;
    const double vhat = static_cast<double>(st.v[i]) / bc2;
    param[i] -= static_cast<T>(lr * mhat / (std::sqrt(vhat) + st.eps));
  }
}

}  // namespace wsod::ndgrad
