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

// Fully connected two-label CRF with mean-field inference. Pairwise
// potentials combine an appearance kernel (position + color) and a
// smoothness kernel (position only) under Potts compatibility. Message
// passing is exact O(N^2), sized for small images.

namespace wsod::refine {

struct CrfParams {
  double w1 = 4.0;          // appearance kernel weight
  double w2 = 3.0;          // smoothness kernel weight
  double theta_alpha = 49.0;  // appearance spatial bandwidth, pixels
  double theta_beta = 0.2;    // appearance color bandwidth, channel units
  double theta_gamma = 3.0;   // smoothness spatial bandwidth, pixels
  int iterations = 5;
  int max_pixels = 96 * 96;   // exact message passing budget
};

// Per-iteration foreground/background marginals, for inspection in tests.
struct CrfTrace {
  std::vector<std::vector<double>> fg;
  std::vector<std::vector<double>> bg;
};

inline core::ScoreMap crf_refine(const core::ImageRGB& img,
                                 const core::ScoreMap& map,
                                 const CrfParams& params = {},
                                 CrfTrace* trace = nullptr) {
  if (img.height != map.height || img.width != map.width)
    throw_shape("crf_refine: image " + std::to_string(img.height) + "x" +
                std::to_string(img.width) + " vs map " +
                std::to_string(map.height) + "x" + std::to_string(map.width));
  if (params.w1 < 0.0 || params.w2 < 0.0)
    throw_config("crf_refine: kernel weights must be >= 0");
  if (params.theta_alpha <= 0.0 || params.theta_beta <= 0.0 ||
      params.theta_gamma <= 0.0)
    throw_config("crf_refine: bandwidths must be positive");
  if (params.iterations < 1)
    throw_config("crf_refine: iterations must be >= 1");
  const int h = img.height, w = img.width;
  const std::size_t n = static_cast<std::size_t>(h) * w;
  if (n > static_cast<std::size_t>(params.max_pixels))
    throw_capacity("crf_refine: " + std::to_string(h) + "x" +
                   std::to_string(w) + " exceeds the exact-inference budget of " +
                   std::to_string(params.max_pixels) +
                   " pixels; downscale the input");

  // Unaries from the clamped foreground probability.
  std::vector<double> u_fg(n), u_bg(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double p = std::min(1.0 - 1e-6, std::max(1e-6, map.data[i]));
    u_fg[i] = -std::log(p);
    u_bg[i] = -std::log(1.0 - p);
  }

  // Symmetric pairwise kernel, strictly upper-triangular storage in float.
  const double inv_a = 1.0 / (2.0 * params.theta_alpha * params.theta_alpha);
  const double inv_b = 1.0 / (2.0 * params.theta_beta * params.theta_beta);
  const double inv_g = 1.0 / (2.0 * params.theta_gamma * params.theta_gamma);
  const double* cr = img.plane(0);
  const double* cg = img.plane(1);
  const double* cb = img.plane(2);
  std::vector<float> kernel;
  kernel.resize(n * (n - 1) / 2);
  {
    std::size_t idx = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double yi = static_cast<double>(i / static_cast<std::size_t>(w));
      const double xi = static_cast<double>(i % static_cast<std::size_t>(w));
      for (std::size_t j = i + 1; j < n; ++j, ++idx) {
        const double dy = yi - static_cast<double>(j / static_cast<std::size_t>(w));
        const double dx = xi - static_cast<double>(j % static_cast<std::size_t>(w));
        const double ds = dy * dy + dx * dx;
        const double drr = cr[i] - cr[j];
        const double dgg = cg[i] - cg[j];
        const double dbb = cb[i] - cb[j];
        const double dc = drr * drr + dgg * dgg + dbb * dbb;
        const double k = params.w1 * std::exp(-ds * inv_a - dc * inv_b) +
                         params.w2 * std::exp(-ds * inv_g);
        kernel[idx] = static_cast<float>(k);
      }
    }
  }

  // Initial marginals: softmax of the negated unaries.
  std::vector<double> q_fg(n), q_bg(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = std::exp(-u_fg[i]);
    const double b = std::exp(-u_bg[i]);
    q_fg[i] = a / (a + b);
    q_bg[i] = b / (a + b);
  }
  if (trace) {
    trace->fg.push_back(q_fg);
    trace->bg.push_back(q_bg);
  }

  std::vector<double> m_fg(n), m_bg(n);
  for (int it = 0; it < params.iterations; ++it) {
    std::fill(m_fg.begin(), m_fg.end(), 0.0);
    std::fill(m_bg.begin(), m_bg.end(), 0.0);
    std::size_t idx = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j, ++idx) {
        const double k = static_cast<double>(kernel[idx]);
        m_fg[i] += k * q_fg[j];
        m_fg[j] += k * q_fg[i];
        m_bg[i] += k * q_bg[j];
        m_bg[j] += k * q_bg[i];
      }
    // Potts compatibility: the penalty for label l is the mass of the other
    // label in the neighborhood.
    for (std::size_t i = 0; i < n; ++i) {
      const double a = -u_fg[i] - m_bg[i];
      const double b = -u_bg[i] - m_fg[i];
      const double mx = std::max(a, b);
      const double ea = std::exp(a - mx);
      const double eb = std::exp(b - mx);
      q_fg[i] = ea / (ea + eb);
      q_bg[i] = eb / (ea + eb);
    }
    if (trace) {
      trace->fg.push_back(q_fg);
      trace->bg.push_back(q_bg);
    }
  }

  core::ScoreMap out(h, w);
  for (std::size_t i = 0; i < n; ++i)
    out.data[i] = std::min(1.0, std::max(0.0, q_fg[i]));
  return out;
}

}  // namespace wsod::refine
