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

// Superpixel clustering: localized k-means over (color, position) features
// with grid seeding and a connectivity-enforcement pass, plus the
// superpixel-wise refinement that replaces each pixel by its cluster mean.

namespace wsod::refine {

struct SuperpixelSegmentation {
  int height = 0;
  int width = 0;
  int num_clusters = 0;
  std::vector<int> labels;  // row-major, values in [0, num_clusters)

  int at(int y, int x) const {
    return labels[static_cast<std::size_t>(y) * width + x];
  }
};

namespace detail {

struct SlicCenter {
  double r = 0, g = 0, b = 0;  // color in 0..255 scale
  double y = 0, x = 0;         // position in pixels
  std::size_t count = 0;
};

// Connected components with 4-connectivity, visiting pixels in scan order.
inline void label_components(const std::vector<int>& labels, int h, int w,
                             std::vector<int>& comp_of,
                             std::vector<int>& comp_label,
                             std::vector<std::size_t>& comp_size) {
  comp_of.assign(static_cast<std::size_t>(h) * w, -1);
  comp_label.clear();
  comp_size.clear();
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < comp_of.size(); ++start) {
    if (comp_of[start] >= 0) continue;
    const int id = static_cast<int>(comp_label.size());
    comp_label.push_back(labels[start]);
    comp_size.push_back(0);
    stack.assign(1, start);
    comp_of[start] = id;
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      ++comp_size[static_cast<std::size_t>(id)];
      const int y = static_cast<int>(i) / w;
      const int x = static_cast<int>(i) % w;
      const int ny[4] = {y - 1, y + 1, y, y};
      const int nx[4] = {x, x, x - 1, x + 1};
      for (int k = 0; k < 4; ++k) {
        if (ny[k] < 0 || ny[k] >= h || nx[k] < 0 || nx[k] >= w) continue;
        const std::size_t j =
            static_cast<std::size_t>(ny[k]) * static_cast<std::size_t>(w) +
            static_cast<std::size_t>(nx[k]);
        if (comp_of[j] < 0 && labels[j] == labels[i]) {
          comp_of[j] = id;
          stack.push_back(j);
        }
      }
    }
  }
}

// Absorb every component that is not its label's largest component into an
// adjacent surviving cluster (largest adjacent first, ties to the smallest
// label id). Multiple passes handle orphans that only touch other orphans.
inline void enforce_connectivity(std::vector<int>& labels, int h, int w) {
  std::vector<int> comp_of, comp_label;
  std::vector<std::size_t> comp_size;
  label_components(labels, h, w, comp_of, comp_label, comp_size);

  // Major component per label: the largest, ties to the earliest in scan
  // order (component ids increase in scan order).
  const int ncomp = static_cast<int>(comp_label.size());
  std::vector<int> major_of_label;
  for (int c = 0; c < ncomp; ++c) {
    const int lbl = comp_label[static_cast<std::size_t>(c)];
    if (lbl >= static_cast<int>(major_of_label.size()))
      major_of_label.resize(static_cast<std::size_t>(lbl) + 1, -1);
    int& m = major_of_label[static_cast<std::size_t>(lbl)];
    if (m < 0 || comp_size[static_cast<std::size_t>(c)] >
                     comp_size[static_cast<std::size_t>(m)])
      m = c;
  }
  std::vector<std::uint8_t> is_major(static_cast<std::size_t>(ncomp), 0);
  for (int m : major_of_label)
    if (m >= 0) is_major[static_cast<std::size_t>(m)] = 1;

  // Pixels of each component, gathered once.
  std::vector<std::vector<std::size_t>> members(
      static_cast<std::size_t>(ncomp));
  for (std::size_t i = 0; i < comp_of.size(); ++i)
    members[static_cast<std::size_t>(comp_of[i])].push_back(i);

  // Cluster sizes count only pixels currently attached to a major component.
  std::vector<std::size_t> cluster_size(major_of_label.size(), 0);
  for (int c = 0; c < ncomp; ++c)
    if (is_major[static_cast<std::size_t>(c)])
      cluster_size[static_cast<std::size_t>(
          comp_label[static_cast<std::size_t>(c)])] +=
          comp_size[static_cast<std::size_t>(c)];

  std::vector<int> orphans;
  for (int c = 0; c < ncomp; ++c)
    if (!is_major[static_cast<std::size_t>(c)]) orphans.push_back(c);

  while (!orphans.empty()) {
    std::vector<int> deferred;
    bool progress = false;
    for (const int c : orphans) {
      // Find adjacent major clusters.
      long long best_label = -1;
      std::size_t best_size = 0;
      for (const std::size_t i : members[static_cast<std::size_t>(c)]) {
        const int y = static_cast<int>(i) / w;
        const int x = static_cast<int>(i) % w;
        const int ny[4] = {y - 1, y + 1, y, y};
        const int nx[4] = {x, x, x - 1, x + 1};
        for (int k = 0; k < 4; ++k) {
          if (ny[k] < 0 || ny[k] >= h || nx[k] < 0 || nx[k] >= w) continue;
          const std::size_t j =
              static_cast<std::size_t>(ny[k]) * static_cast<std::size_t>(w) +
              static_cast<std::size_t>(nx[k]);
          const int cj = comp_of[j];
          if (!is_major[static_cast<std::size_t>(cj)]) continue;
          const int lj = comp_label[static_cast<std::size_t>(cj)];
          const std::size_t sj = cluster_size[static_cast<std::size_t>(lj)];
          if (sj > best_size ||
              (sj == best_size && (best_label < 0 || lj < best_label))) {
            best_size = sj;
            best_label = lj;
          }
        }
      }
      if (best_label < 0) {
        deferred.push_back(c);
        continue;
      }
      progress = true;
      const int target = major_of_label[static_cast<std::size_t>(best_label)];
      for (const std::size_t i : members[static_cast<std::size_t>(c)]) {
        labels[i] = static_cast<int>(best_label);
        comp_of[i] = target;
      }
      auto& tm = members[static_cast<std::size_t>(target)];
      tm.insert(tm.end(), members[static_cast<std::size_t>(c)].begin(),
                members[static_cast<std::size_t>(c)].end());
      cluster_size[static_cast<std::size_t>(best_label)] +=
          members[static_cast<std::size_t>(c)].size();
      members[static_cast<std::size_t>(c)].clear();
    }
    if (!progress && !deferred.empty())
      throw_contract("slic: connectivity enforcement failed to converge");
    orphans.swap(deferred);
  }
}

}  // namespace detail

inline SuperpixelSegmentation slic(const core::ImageRGB& img, int k,
                                   double compactness = 10.0, int iters = 10) {
  const int h = img.height, w = img.width;
  const std::size_t total = static_cast<std::size_t>(h) * w;
  if (k < 1) throw_config("slic: K must be >= 1");
  if (static_cast<std::size_t>(k) > total)
    throw_config("slic: K = " + std::to_string(k) + " exceeds pixel count " +
                 std::to_string(total));
  if (compactness <= 0.0) throw_config("slic: compactness must be positive");
  if (iters < 1) throw_config("slic: iterations must be >= 1");

  const double s = std::sqrt(static_cast<double>(total) / k);
  const int ny = std::max(1, static_cast<int>(std::llround(h / s)));
  const int nx = std::max(1, static_cast<int>(std::llround(w / s)));

  std::vector<detail::SlicCenter> centers;
  centers.reserve(static_cast<std::size_t>(ny) * nx);
  for (int gy = 0; gy < ny; ++gy)
    for (int gx = 0; gx < nx; ++gx) {
      const int py = std::min(
          h - 1, static_cast<int>((gy + 0.5) * h / ny));
      const int px = std::min(
          w - 1, static_cast<int>((gx + 0.5) * w / nx));
      detail::SlicCenter c;
      c.r = 255.0 * img.at(0, py, px);
      c.g = 255.0 * img.at(1, py, px);
      c.b = 255.0 * img.at(2, py, px);
      c.y = py;
      c.x = px;
      centers.push_back(c);
    }

  const double spatial = compactness / s;  // weight per pixel of distance
  std::vector<int> labels(total, -1);
  std::vector<double> best(total, std::numeric_limits<double>::infinity());
  const int win = static_cast<int>(std::ceil(s));

  for (int it = 0; it < iters; ++it) {
    std::fill(best.begin(), best.end(),
              std::numeric_limits<double>::infinity());
    std::fill(labels.begin(), labels.end(), -1);
    for (std::size_t ci = 0; ci < centers.size(); ++ci) {
      const detail::SlicCenter& c = centers[ci];
      const int y0 = std::max(0, static_cast<int>(std::lround(c.y)) - win);
      const int y1 = std::min(h - 1, static_cast<int>(std::lround(c.y)) + win);
      const int x0 = std::max(0, static_cast<int>(std::lround(c.x)) - win);
      const int x1 = std::min(w - 1, static_cast<int>(std::lround(c.x)) + win);
      for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
          const std::size_t i =
              static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + x;
          const double dr = 255.0 * img.at(0, y, x) - c.r;
          const double dg = 255.0 * img.at(1, y, x) - c.g;
          const double db = 255.0 * img.at(2, y, x) - c.b;
          const double dy = (y - c.y) * spatial;
          const double dx = (x - c.x) * spatial;
          const double d = dr * dr + dg * dg + db * db + dy * dy + dx * dx;
          if (d < best[i]) {
            best[i] = d;
            labels[i] = static_cast<int>(ci);
          }
        }
    }
    // Pixels outside every search window: nearest center globally.
    for (std::size_t i = 0; i < total; ++i) {
      if (labels[i] >= 0) continue;
      const int y = static_cast<int>(i) / w;
      const int x = static_cast<int>(i) % w;
      for (std::size_t ci = 0; ci < centers.size(); ++ci) {
        const detail::SlicCenter& c = centers[ci];
        const double dr = 255.0 * img.at(0, y, x) - c.r;
        const double dg = 255.0 * img.at(1, y, x) - c.g;
        const double db = 255.0 * img.at(2, y, x) - c.b;
        const double dy = (y - c.y) * spatial;
        const double dx = (x - c.x) * spatial;
        const double d = dr * dr + dg * dg + db * db + dy * dy + dx * dx;
        if (d < best[i]) {
          best[i] = d;
          labels[i] = static_cast<int>(ci);
        }
      }
    }
    // Recenter.
    std::vector<detail::SlicCenter> acc(centers.size());
    for (std::size_t i = 0; i < total; ++i) {
      const int y = static_cast<int>(i) / w;
      const int x = static_cast<int>(i) % w;
      detail::SlicCenter& a = acc[static_cast<std::size_t>(labels[i])];
      a.r += 255.0 * img.at(0, y, x);
      a.g += 255.0 * img.at(1, y, x);
      a.b += 255.0 * img.at(2, y, x);
      a.y += y;
      a.x += x;
      ++a.count;
    }
    for (std::size_t ci = 0; ci < centers.size(); ++ci) {
      if (acc[ci].count == 0) continue;  // keep a starved center in place
      const double n = static_cast<double>(acc[ci].count);
      centers[ci].r = acc[ci].r / n;
      centers[ci].g = acc[ci].g / n;
      centers[ci].b = acc[ci].b / n;
      centers[ci].y = acc[ci].y / n;
      centers[ci].x = acc[ci].x / n;
    }
  }

  detail::enforce_connectivity(labels, h, w);

  // Compact surviving labels, preserving ascending id order.
  std::vector<int> remap(centers.size(), -1);
  int next_id = 0;
  std::vector<std::uint8_t> seen(centers.size(), 0);
  for (int lbl : labels) seen[static_cast<std::size_t>(lbl)] = 1;
  for (std::size_t ci = 0; ci < centers.size(); ++ci)
    if (seen[ci]) remap[ci] = next_id++;
  SuperpixelSegmentation seg;
  seg.height = h;
  seg.width = w;
  seg.num_clusters = next_id;
  seg.labels.resize(total);
  for (std::size_t i = 0; i < total; ++i)
    seg.labels[i] = remap[static_cast<std::size_t>(labels[i])];
  return seg;
}

// Replace every pixel by the mean score of its superpixel.
inline core::ScoreMap superpixel_refine(const core::ScoreMap& map,
                                        const SuperpixelSegmentation& seg) {
  if (map.height != seg.height || map.width != seg.width)
    throw_shape("superpixel_refine: map " + std::to_string(map.height) + "x" +
                std::to_string(map.width) + " vs segmentation " +
                std::to_string(seg.height) + "x" + std::to_string(seg.width));
  const std::size_t nc = static_cast<std::size_t>(seg.num_clusters);
  std::vector<double> sum(nc, 0.0);
  std::vector<double> first(nc, 0.0);
  std::vector<std::uint8_t> uniform(nc, 1);
  std::vector<std::size_t> cnt(nc, 0);
  for (std::size_t i = 0; i < map.data.size(); ++i) {
    const int lbl = seg.labels[i];
    if (lbl < 0 || lbl >= seg.num_clusters)
      throw_contract("superpixel_refine: label out of range");
    const std::size_t c = static_cast<std::size_t>(lbl);
    if (cnt[c] == 0)
      first[c] = map.data[i];
    else if (map.data[i] != first[c])
      uniform[c] = 0;
    sum[c] += map.data[i];
    ++cnt[c];
  }
  std::vector<double> mean(nc, 0.0);
  for (std::size_t c = 0; c < nc; ++c) {
    if (cnt[c] == 0) throw_contract("superpixel_refine: empty cluster");
    // A cluster whose values are already identical keeps that exact value,
    // which makes the refinement idempotent bit-for-bit.
    mean[c] = uniform[c] ? first[c] : sum[c] / static_cast<double>(cnt[c]);
  }
  core::ScoreMap out(map.height, map.width);
  for (std::size_t i = 0; i < map.data.size(); ++i)
    out.data[i] = mean[static_cast<std::size_t>(seg.labels[i])];
  return out;
}

}  // namespace wsod::refine
