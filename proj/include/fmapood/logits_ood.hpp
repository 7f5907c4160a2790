// Copyright 2026 The fmapood Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "fmapood/fmap.hpp"
#include "fmapood/tensor_io.hpp"

namespace fmapood {

enum class LogitsMethod { Msp, Energy, Odin };
std::string_view to_string(LogitsMethod m);
LogitsMethod parse_logits_method(std::string_view name);

enum class ThresholdGranularity { Global, PerClass };
std::string_view to_string(ThresholdGranularity g);
ThresholdGranularity parse_granularity(std::string_view name);

struct LogitsMethodConfig {
  LogitsMethod method = LogitsMethod::Msp;
  // Unset means 1000 for ODIN and 1 otherwise.
  std::optional<double> temperature;
  double target_tpr = 0.95;
  ThresholdGranularity granularity = ThresholdGranularity::Global;
  // PerClass: classes with fewer samples use the global record.
  std::uint32_t min_samples_per_class = 20;

  double effective_temperature() const;
  void validate() const;
};

// All scores are oriented so that higher means more in-distribution.
double msp_score(std::span<const float> logits);
double energy_score(std::span<const float> logits);
double odin_score(std::span<const float> logits, double temperature);
double logits_score(std::span<const float> logits, const LogitsMethodConfig& cfg);

struct ThresholdRecord {
  double threshold = 0.0;
  double id_score_min = 0.0;
  double id_score_max = 0.0;
  std::size_t sample_count = 0;
};

struct LogitsCalibration {
  LogitsMethodConfig config;
  ThresholdRecord global;
  std::vector<std::optional<ThresholdRecord>> per_class;  // PerClass only

  const ThresholdRecord& record(std::uint32_t class_id) const;
};

/// Calibrates from raw ID scores and their classes. tau is the
/// (1 - target_tpr) quantile, so the high ID side keeps target_tpr of them.
LogitsCalibration calibrate_scores(std::span<const double> scores,
                                   std::span<const std::uint32_t> classes,
                                   std::uint32_t num_classes, const LogitsMethodConfig& cfg);

/// Calibrates on the correct-prediction population of a manifest.
LogitsCalibration calibrate_logits(const DatasetManifest& manifest, const LogitsMethodConfig& cfg,
                                   double iou_match_threshold = 0.5);

/// ID when score >= tau.
OodVerdict classify_logits(const Detection& det, std::size_t detection_index,
                           const LogitsCalibration& calibration);

}  // namespace fmapood
