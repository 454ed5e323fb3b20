// Copyright (c) 2026 wsod contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "wsod/common.hpp"
#include "wsod/core/types.hpp"

// Saliency evaluation suite: mean absolute error, F-measure, structure
// measure, enhanced-alignment measure, and weighted F-measure, plus a
// batch aggregator that produces per-image values and their means.
//
// Conventions (documented because the literature varies):
//   - Adaptive binarization threshold is min(2 * mean(pred), 1); pixels
//     strictly greater than the threshold become foreground.
//   - Degenerate ground truths (all background / all foreground) fall back
//     to the conventions of the metrics' reference implementations.
//   - All results are clamped to [0, 1].

namespace wsod::metrics {

constexpr double kEps = std::numeric_limits<double>::epsilon();

enum class FPolicy { adaptive, max_over_thresholds };

inline const char* f_policy_name(FPolicy p) {
  return p == FPolicy::adaptive ? "adaptive" : "max_over_thresholds";
}

namespace detail {

inline void require_same_dims(const core::ScoreMap& pred,
                              const core::BinaryMask& gt,
                              const char* who) {
  if (pred.height != gt.height || pred.width != gt.width) {
    throw_shape(std::string(who) + ": pred is " +
                      std::to_string(pred.height) + "x" + std::to_string(pred.width) +
                      " but gt is " + std::to_string(gt.height) + "x" +
                      std::to_string(gt.width));
  }
  if (pred.height <= 0 || pred.width <= 0) {
    throw_shape(std::string(who) + ": empty map");
  }
}

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

inline double map_mean(const core::ScoreMap& m) {
  double s = 0.0;
  for (double x : m.data) s += x;
  return s / static_cast<double>(m.data.size());
}

inline double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

// Binarize at the adaptive threshold min(2*mean, 1), strictly greater-than.
inline std::vector<std::uint8_t> adaptive_binarize(const core::ScoreMap& m) {
  const double thr = std::min(2.0 * map_mean(m), 1.0);
  std::vector<std::uint8_t> out(m.data.size());
  for (std::size_t i = 0; i < m.data.size(); ++i)
    out[i] = m.data[i] > thr ? 1 : 0;
  return out;
}

inline double f_from_counts(double tp, double fp, double fn, double beta2) {
  if (tp <= 0.0) return 0.0;
  const double p = tp / (tp + fp);
  const double r = tp / (tp + fn);
  return (1.0 + beta2) * p * r / (beta2 * p + r);
}

// Mean/“sample” standard deviation (N-1 denominator, 0 for a single value)
// over pred values selected by sel==keep.
struct MaskedStats {
  double mean = 0.0;
  double sd = 0.0;
  std::size_t n = 0;
};

inline MaskedStats masked_stats(const core::ScoreMap& pred,
                                const std::vector<std::uint8_t>& sel,
                                std::uint8_t keep) {
  MaskedStats st;
  double s = 0.0;
  for (std::size_t i = 0; i < pred.data.size(); ++i)
    if (sel[i] == keep) {
      s += pred.data[i];
      ++st.n;
    }
  if (st.n == 0) return st;
  st.mean = s / static_cast<double>(st.n);
  if (st.n > 1) {
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.data.size(); ++i)
      if (sel[i] == keep) {
        const double d = pred.data[i] - st.mean;
        acc += d * d;
      }
    st.sd = std::sqrt(acc / static_cast<double>(st.n - 1));
  }
  return st;
}

// Similarity of a masked prediction region to an ideal constant-1 region:
// 2*mu / (mu^2 + 1 + sd).
inline double object_score(const core::ScoreMap& pred,
                           const std::vector<std::uint8_t>& sel,
                           std::uint8_t keep) {
  const MaskedStats st = masked_stats(pred, sel, keep);
  if (st.n == 0) return 0.0;
  return 2.0 * st.mean / (st.mean * st.mean + 1.0 + st.sd + kEps);
}

// Structural similarity between a prediction block and a binary block,
// following the region term of the structure measure: sample statistics with
// N-1 normalization; alpha = 4*mx*my*cov, beta = (mx^2+my^2)(vx+vy);
// alpha!=0 -> alpha/(beta+eps); alpha==beta==0 -> 1; else 0.
struct Block {
  int y0 = 0, y1 = 0, x0 = 0, x1 = 0;  // half-open
  std::size_t count() const {
    return static_cast<std::size_t>(std::max(0, y1 - y0)) *
           static_cast<std::size_t>(std::max(0, x1 - x0));
  }
};

inline double region_ssim(const core::ScoreMap& pred,
                          const core::BinaryMask& gt, const Block& b) {
  const std::size_t n = b.count();
  if (n == 0) return 0.0;
  double sx = 0.0, sy = 0.0;
  for (int y = b.y0; y < b.y1; ++y)
    for (int x = b.x0; x < b.x1; ++x) {
      sx += pred.at(y, x);
      sy += gt.at(y, x) ? 1.0 : 0.0;
    }
  const double nd = static_cast<double>(n);
  const double mx = sx / nd, my = sy / nd;
  double vx = 0.0, vy = 0.0, cov = 0.0;
  for (int y = b.y0; y < b.y1; ++y)
    for (int x = b.x0; x < b.x1; ++x) {
      const double dx = pred.at(y, x) - mx;
      const double dy = (gt.at(y, x) ? 1.0 : 0.0) - my;
      vx += dx * dx;
      vy += dy * dy;
      cov += dx * dy;
    }
  const double denom = nd - 1.0 + kEps;
  vx /= denom;
  vy /= denom;
  cov /= denom;
  const double a = 4.0 * mx * my * cov;
  const double bterm = (mx * mx + my * my) * (vx + vy);
  if (a != 0.0) return a / (bterm + kEps);
  return bterm == 0.0 ? 1.0 : 0.0;
}

// Foreground centroid with 1-based rounding, mirroring the reference
// convention of the structure measure: X = round(sum(col_1based * g)/area).
// Returned as 1-based (cx, cy); callers slice [0, cy) x [0, cx) etc. in
// 0-based terms via y0 = cy, x0 = cx.
inline void gt_centroid_1based(const core::BinaryMask& gt, int& cx, int& cy) {
  long long area = 0, sx = 0, sy = 0;
  for (int y = 0; y < gt.height; ++y)
    for (int x = 0; x < gt.width; ++x)
      if (gt.at(y, x)) {
        ++area;
        sx += x + 1;
        sy += y + 1;
      }
  if (area == 0) {
    cx = (gt.width + 1) / 2;
    cy = (gt.height + 1) / 2;
    return;
  }
  cx = static_cast<int>(std::llround(static_cast<double>(sx) /
                                     static_cast<double>(area)));
  cy = static_cast<int>(std::llround(static_cast<double>(sy) /
                                     static_cast<double>(area)));
  cx = std::min(std::max(cx, 1), gt.width);
  cy = std::min(std::max(cy, 1), gt.height);
}

// Brute-force Euclidean distance transform: for every pixel, the distance to
// the nearest foreground pixel of gt and that pixel's linear index (row-major,
// ties broken by the smallest index). Requires at least one foreground pixel.
inline void distance_to_foreground(const core::BinaryMask& gt,
                                   std::vector<double>& dist,
                                   std::vector<std::size_t>& nearest) {
  const std::size_t n = gt.data.size();
  dist.assign(n, 0.0);
  nearest.assign(n, 0);
  std::vector<int> fy, fx;
  std::vector<std::size_t> fidx;
  for (int y = 0; y < gt.height; ++y)
    for (int x = 0; x < gt.width; ++x)
      if (gt.at(y, x)) {
        fy.push_back(y);
        fx.push_back(x);
        fidx.push_back(static_cast<std::size_t>(y) *
                           static_cast<std::size_t>(gt.width) +
                       static_cast<std::size_t>(x));
      }
  for (int y = 0; y < gt.height; ++y)
    for (int x = 0; x < gt.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) *
                                static_cast<std::size_t>(gt.width) +
                            static_cast<std::size_t>(x);
      if (gt.data[i]) {
        dist[i] = 0.0;
        nearest[i] = i;
        continue;
      }
      long long best = std::numeric_limits<long long>::max();
      std::size_t bi = 0;
      for (std::size_t k = 0; k < fidx.size(); ++k) {
        const long long dy = y - fy[k];
        const long long dx = x - fx[k];
        const long long d2 = dy * dy + dx * dx;
        if (d2 < best) {
          best = d2;
          bi = fidx[k];
        }
      }
      dist[i] = std::sqrt(static_cast<double>(best));
      nearest[i] = bi;
    }
}

// Normalized 7x7 Gaussian kernel with sigma = 5.
inline std::vector<double> gaussian7x7_sigma5() {
  std::vector<double> k(49);
  double s = 0.0;
  for (int y = -3; y <= 3; ++y)
    for (int x = -3; x <= 3; ++x) {
      const double v = std::exp(-(y * y + x * x) / (2.0 * 25.0));
      k[static_cast<std::size_t>((y + 3) * 7 + (x + 3))] = v;
      s += v;
    }
  for (double& v : k) v /= s;
  return k;
}

}  // namespace detail

// Mean absolute error between a prediction and a binary ground truth.
inline double mae(const core::ScoreMap& pred, const core::BinaryMask& gt) {
  detail::require_same_dims(pred, gt, "mae");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.data.size(); ++i)
    s += std::abs(pred.data[i] - (gt.data[i] ? 1.0 : 0.0));
  return s / static_cast<double>(pred.data.size());
}

// F-measure with beta^2 weighting of precision. The adaptive policy
// binarizes at min(2*mean, 1) (strict >); the sweep policy takes the maximum
// over 255 evenly spaced thresholds i/256, i = 1..255. An all-background
// ground truth falls back to 1 - mean(pred).
inline double f_measure(const core::ScoreMap& pred, const core::BinaryMask& gt,
                        double beta2 = 0.3,
                        FPolicy policy = FPolicy::adaptive) {
  detail::require_same_dims(pred, gt, "f_measure");
  if (gt.count_ones() == 0)
    return detail::clamp01(1.0 - detail::map_mean(pred));
  if (policy == FPolicy::adaptive) {
    const std::vector<std::uint8_t> b = detail::adaptive_binarize(pred);
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < b.size(); ++i) {
      if (b[i] && gt.data[i]) tp += 1.0;
      if (b[i] && !gt.data[i]) fp += 1.0;
      if (!b[i] && gt.data[i]) fn += 1.0;
    }
    return detail::f_from_counts(tp, fp, fn, beta2);
  }
  double best = 0.0;
  for (int t = 1; t <= 255; ++t) {
    const double thr = static_cast<double>(t) / 256.0;
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
      const bool b = pred.data[i] > thr;
      if (b && gt.data[i]) tp += 1.0;
      if (b && !gt.data[i]) fp += 1.0;
      if (!b && gt.data[i]) fn += 1.0;
    }
    best = std::max(best, detail::f_from_counts(tp, fp, fn, beta2));
  }
  return best;
}

// Structure measure: alpha-weighted blend of an object-level term (masked
// mean/deviation similarity of foreground and background, weighted by the
// foreground fraction) and a region-level term (per-quadrant structural
// similarity around the foreground centroid, area-weighted). Degenerate
// ground truths: all background -> 1 - mean(pred); all foreground ->
// mean(pred). Result clamped to [0, 1].
inline double s_measure(const core::ScoreMap& pred, const core::BinaryMask& gt,
                        double alpha = 0.5) {
  detail::require_same_dims(pred, gt, "s_measure");
  const std::size_t ones = gt.count_ones();
  const std::size_t total = gt.data.size();
  if (ones == 0) return detail::clamp01(1.0 - detail::map_mean(pred));
  if (ones == total) return detail::clamp01(detail::map_mean(pred));

  // Object term.
  const double u = static_cast<double>(ones) / static_cast<double>(total);
  core::ScoreMap inv(pred.height, pred.width);
  for (std::size_t i = 0; i < total; ++i) inv.data[i] = 1.0 - pred.data[i];
  const double o_fg = detail::object_score(pred, gt.data, 1);
  const double o_bg = detail::object_score(inv, gt.data, 0);
  const double s_obj = u * o_fg + (1.0 - u) * o_bg;

  // Region term: quadrants around the (1-based, rounded) centroid.
  int cx = 0, cy = 0;
  detail::gt_centroid_1based(gt, cx, cy);
  const detail::Block lt{0, cy, 0, cx};
  const detail::Block rt{0, cy, cx, gt.width};
  const detail::Block lb{cy, gt.height, 0, cx};
  const detail::Block rb{cy, gt.height, cx, gt.width};
  const double nd = static_cast<double>(total);
  const double w1 = static_cast<double>(lt.count()) / nd;
  const double w2 = static_cast<double>(rt.count()) / nd;
  const double w3 = static_cast<double>(lb.count()) / nd;
  const double w4 = 1.0 - w1 - w2 - w3;
  double s_reg = 0.0;
  if (lt.count() > 0) s_reg += w1 * detail::region_ssim(pred, gt, lt);
  if (rt.count() > 0) s_reg += w2 * detail::region_ssim(pred, gt, rt);
  if (lb.count() > 0) s_reg += w3 * detail::region_ssim(pred, gt, lb);
  if (rb.count() > 0) s_reg += w4 * detail::region_ssim(pred, gt, rb);

  return detail::clamp01(alpha * s_obj + (1.0 - alpha) * s_reg);
}

// Enhanced-alignment measure: binarize the prediction adaptively, bias-center
// both binary maps, and average the enhanced alignment (1+xi)^2/4 where
// xi = 2*phi_gt*phi_pred / (phi_gt^2 + phi_pred^2 + eps). Degenerate ground
// truths: all background -> 1 - mean(binary pred); all foreground ->
// mean(binary pred).
inline double e_measure(const core::ScoreMap& pred,
                        const core::BinaryMask& gt) {
  detail::require_same_dims(pred, gt, "e_measure");
  const std::vector<std::uint8_t> b = detail::adaptive_binarize(pred);
  const std::size_t total = gt.data.size();
  double bmean = 0.0;
  for (std::uint8_t v : b) bmean += v;
  bmean /= static_cast<double>(total);
  const std::size_t ones = gt.count_ones();
  if (ones == 0) return detail::clamp01(1.0 - bmean);
  if (ones == total) return detail::clamp01(bmean);
  double gmean = static_cast<double>(ones) / static_cast<double>(total);
  double acc = 0.0;
  for (std::size_t i = 0; i < total; ++i) {
    const double pg = (gt.data[i] ? 1.0 : 0.0) - gmean;
    const double pp = static_cast<double>(b[i]) - bmean;
    const double xi = 2.0 * pg * pp / (pg * pg + pp * pp + kEps);
    const double e = (1.0 + xi) * (1.0 + xi) / 4.0;
    acc += e;
  }
  return detail::clamp01(acc / static_cast<double>(total));
}

// Weighted F-measure: extends precision/recall to real-valued predictions by
// weighting errors. False negatives are softened by a Gaussian-smoothed
// (7x7, sigma 5) error dependency within the foreground; false positives are
// discounted with exp(log(0.5)/5 * distance-to-foreground). beta^2 = 1.
// An all-background ground truth yields 0 by convention.
inline double weighted_f_measure(const core::ScoreMap& pred,
                                 const core::BinaryMask& gt) {
  detail::require_same_dims(pred, gt, "weighted_f_measure");
  if (pred.height > 128 || pred.width > 128)
    throw_capacity("weighted_f_measure: supports maps up to 128x128, got " +
                         std::to_string(pred.height) + "x" + std::to_string(pred.width));
  const std::size_t total = gt.data.size();
  const std::size_t ones = gt.count_ones();
  if (ones == 0) return 0.0;

  std::vector<double> err(total);
  for (std::size_t i = 0; i < total; ++i)
    err[i] = std::abs(pred.data[i] - (gt.data[i] ? 1.0 : 0.0));

  std::vector<double> dist;
  std::vector<std::size_t> nearest;
  detail::distance_to_foreground(gt, dist, nearest);

  // Errors outside the foreground borrow the error of the nearest foreground
  // pixel so smoothing near the boundary sees consistent values.
  std::vector<double> err_t(total);
  for (std::size_t i = 0; i < total; ++i)
    err_t[i] = gt.data[i] ? err[i] : err[nearest[i]];

  // 7x7 Gaussian smoothing with zero padding.
  const std::vector<double> k = detail::gaussian7x7_sigma5();
  std::vector<double> ea(total, 0.0);
  for (int y = 0; y < gt.height; ++y)
    for (int x = 0; x < gt.width; ++x) {
      double s = 0.0;
      for (int dy = -3; dy <= 3; ++dy)
        for (int dx = -3; dx <= 3; ++dx) {
          const int yy = y + dy, xx = x + dx;
          if (yy < 0 || yy >= gt.height || xx < 0 || xx >= gt.width) continue;
          s += k[static_cast<std::size_t>((dy + 3) * 7 + (dx + 3))] *
               err_t[static_cast<std::size_t>(yy) *
                         static_cast<std::size_t>(gt.width) +
                     static_cast<std::size_t>(xx)];
        }
      ea[static_cast<std::size_t>(y) * static_cast<std::size_t>(gt.width) +
         static_cast<std::size_t>(x)] = s;
    }

  // On foreground pixels, a smoothed error below the raw error indicates the
  // miss is near other misses; keep the smaller value.
  std::vector<double> min_e_ea(total);
  for (std::size_t i = 0; i < total; ++i)
    min_e_ea[i] = (gt.data[i] && ea[i] < err[i]) ? ea[i] : err[i];

  // Importance weights: 1 on foreground, exponential decay off it.
  const double lam = std::log(0.5) / 5.0;
  double sum_fg = 0.0, sum_bg = 0.0;
  for (std::size_t i = 0; i < total; ++i) {
    const double w = gt.data[i] ? 1.0 : 2.0 - std::exp(lam * dist[i]);
    const double ew = min_e_ea[i] * w;
    if (gt.data[i])
      sum_fg += ew;
    else
      sum_bg += ew;
  }
  const double area = static_cast<double>(ones);
  const double tpw = std::max(0.0, area - sum_fg);
  const double fpw = sum_bg;
  const double recall = 1.0 - sum_fg / area;
  const double precision = tpw / (kEps + tpw + fpw);
  double q = 2.0 * recall * precision / (kEps + recall + precision);
  if (!std::isfinite(q)) q = 0.0;
  return detail::clamp01(q);
}

// Per-image metric values plus their arithmetic means.
struct MetricsReport {
  std::string dataset_id;
  std::string threshold_policy = "adaptive";
  std::vector<double> mae_values;
  std::vector<double> f_values;
  std::vector<double> s_values;
  std::vector<double> e_values;
  std::vector<double> fw_values;
  double mean_mae = 0.0;
  double mean_f = 0.0;
  double mean_s = 0.0;
  double mean_e = 0.0;
  double mean_fw = 0.0;
};

inline MetricsReport evaluate(const std::vector<core::ScoreMap>& preds,
                              const std::vector<core::BinaryMask>& gts,
                              const std::string& dataset_id = "",
                              FPolicy policy = FPolicy::adaptive) {
  if (preds.size() != gts.size())
    throw_contract("evaluate: " + std::to_string(preds.size()) +
                         " predictions vs " + std::to_string(gts.size()) +
                         " ground truths");
  MetricsReport r;
  r.dataset_id = dataset_id;
  r.threshold_policy = f_policy_name(policy);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    r.mae_values.push_back(mae(preds[i], gts[i]));
    r.f_values.push_back(f_measure(preds[i], gts[i], 0.3, policy));
    r.s_values.push_back(s_measure(preds[i], gts[i]));
    r.e_values.push_back(e_measure(preds[i], gts[i]));
    r.fw_values.push_back(weighted_f_measure(preds[i], gts[i]));
  }
  r.mean_mae = detail::mean_of(r.mae_values);
  r.mean_f = detail::mean_of(r.f_values);
  r.mean_s = detail::mean_of(r.s_values);
  r.mean_e = detail::mean_of(r.e_values);
  r.mean_fw = detail::mean_of(r.fw_values);
  return r;
}

}  // namespace wsod::metrics
