// Copyright (c) 2026 wsod contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "wsod/core/png.hpp"
#include "wsod/core/types.hpp"

// On-disk dataset layout: a manifest.json array of records
//   {"image_path": ..., "gt_path": ..., "category_bits": ...}
// with paths relative to the manifest's directory. Images and ground-truth
// masks are stored as 8-bit PNGs.

namespace wsod::core {

struct ManifestEntry {
  std::string image_path;
  std::string gt_path;
  std::uint32_t category_bits = 0;
};

inline std::string sample_stem(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%05d", index);
  return buf;
}

/// Writes images/, masks/ and manifest.json under dir; returns the manifest path.
inline std::string save_dataset(const std::string& dir, const std::vector<Sample>& samples) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "images");
  fs::create_directories(fs::path(dir) / "masks");
  nlohmann::ordered_json man = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const std::string stem = sample_stem(static_cast<int>(i));
    const std::string img_rel = "images/" + stem + ".png";
    const std::string gt_rel = "masks/" + stem + ".png";
    png::write_image((fs::path(dir) / img_rel).string(), samples[i].image);
    png::write_mask((fs::path(dir) / gt_rel).string(), samples[i].gt_mask);
    man.push_back({{"image_path", img_rel},
                   {"gt_path", gt_rel},
                   {"category_bits", samples[i].category.packed()}});
  }
  const std::string man_path = (fs::path(dir) / "manifest.json").string();
  std::ofstream f(man_path, std::ios::trunc);
  if (!f) throw_io("cannot write " + man_path);
  f << man.dump(2) << "\n";
  return man_path;
}

inline std::vector<ManifestEntry> read_manifest(const std::string& manifest_path) {
  std::ifstream f(manifest_path);
  if (!f) throw_io("cannot open " + manifest_path);
  nlohmann::json man;
  try {
    f >> man;
  } catch (const nlohmann::json::exception& e) {
    throw_io("bad manifest " + manifest_path + ": " + e.what());
  }
  if (!man.is_array()) throw_io("manifest must be a JSON array: " + manifest_path);
  std::vector<ManifestEntry> out;
  out.reserve(man.size());
  for (const auto& rec : man) {
    if (!rec.contains("image_path") || !rec.contains("category_bits"))
      throw_io("manifest record missing image_path/category_bits: " + manifest_path);
    ManifestEntry e;
    e.image_path = rec.at("image_path").get<std::string>();
    if (rec.contains("gt_path")) e.gt_path = rec.at("gt_path").get<std::string>();
    e.category_bits = rec.at("category_bits").get<std::uint32_t>();
    out.push_back(std::move(e));
  }
  return out;
}

/// Loads samples named by a manifest; gt masks are optional in the records.
/// num_categories = 0 infers the vector width from the highest bit present.
inline std::vector<Sample> load_dataset(const std::string& manifest_path, int num_categories = 0) {
  namespace fs = std::filesystem;
  const fs::path root = fs::path(manifest_path).parent_path();
  const auto entries = read_manifest(manifest_path);
  if (num_categories <= 0) {
    std::uint32_t all = 0;
    for (const auto& e : entries) all |= e.category_bits;
    num_categories = 1;
    while (all >> num_categories) ++num_categories;
  }
  std::vector<Sample> out;
  for (const auto& e : entries) {
    Sample s;
    s.image = png::read_image((root / e.image_path).string());
    if (!e.gt_path.empty()) {
      s.gt_mask = png::read_mask((root / e.gt_path).string());
      check_same_dims(s.gt_mask.height, s.gt_mask.width, s.image.height, s.image.width,
                      "gt mask vs image");
    }
    s.category = CategoryLabel::from_packed(e.category_bits, num_categories);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace wsod::core
