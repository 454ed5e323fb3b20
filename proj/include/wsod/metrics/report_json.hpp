// Copyright (c) 2026 wsod contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "json.hpp"
#include "wsod/metrics/metrics.hpp"

namespace wsod::metrics {

inline nlohmann::ordered_json report_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["dataset_id"] = r.dataset_id;
  j["threshold_policy"] = r.threshold_policy;
  j["count"] = r.mae_values.size();
  j["mean"] = {{"mae", r.mean_mae},
               {"f_measure", r.mean_f},
               {"s_measure", r.mean_s},
               {"e_measure", r.mean_e},
               {"weighted_f", r.mean_fw}};
  j["per_image"] = {{"mae", r.mae_values},
                    {"f_measure", r.f_values},
                    {"s_measure", r.s_values},
                    {"e_measure", r.e_values},
                    {"weighted_f", r.fw_values}};
  return j;
}

inline std::string report_csv(const MetricsReport& r) {
  std::string out = "index,mae,f_measure,s_measure,e_measure,weighted_f\n";
  for (std::size_t i = 0; i < r.mae_values.size(); ++i) {
    out += std::to_string(i) + "," + std::to_string(r.mae_values[i]) + "," +
           std::to_string(r.f_values[i]) + "," + std::to_string(r.s_values[i]) +
           "," + std::to_string(r.e_values[i]) + "," +
           std::to_string(r.fw_values[i]) + "\n";
  }
  return out;
}

}  // namespace wsod::metrics
