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
#include <string>
#include <vector>

#include "fmapood/clustering.hpp"
#include "fmapood/distance.hpp"
#include "fmapood/roi_align.hpp"
#include "fmapood/sdr.hpp"
#include "fmapood/tensor_io.hpp"

namespace fmapood {

struct FitConfig {
  double iou_match_threshold = 0.5;
  double target_tpr = 0.95;
  Distance distance = Distance::L2;
  ClusterSpec cluster;
  RoiAlignConfig roi;
  std::optional<SdrConfig> sdr;
  std::uint32_t min_samples_per_cell = 20;
  unsigned threads = 1;

  void validate() const;
};

/// Where a cell's threshold came from.
enum class ThresholdSource { Cell, Class, Global };
std::string_view to_string(ThresholdSource s);

struct CellModel {
  Points centroids;
  double threshold = 0.0;
  // Extrema of the ID score population the threshold was taken from.
  double id_score_min = 0.0;
  double id_score_max = 0.0;
  std::size_t sample_count = 0;
  ThresholdSource source = ThresholdSource::Global;
  ClusterMethod method_used = ClusterMethod::One;
  std::optional<double> silhouette;
  std::size_t noise_count = 0;
};

/// Fitted per-(stride, class) centroids and thresholds. Immutable once
/// fitted; safe to share across threads.
class CentroidBank {
 public:
  CentroidBank() = default;
  CentroidBank(std::uint32_t num_classes, std::uint32_t stride_count, Distance distance,
               RoiAlignConfig roi);

  std::uint32_t num_classes() const { return num_classes_; }
  std::uint32_t stride_count() const { return stride_count_; }
  Distance distance() const { return distance_; }
  const RoiAlignConfig& roi() const { return roi_; }

  const CellModel& cell(std::uint32_t stride_index, std::uint32_t class_id) const;
  CellModel& cell(std::uint32_t stride_index, std::uint32_t class_id);

  /// Per-class pooled threshold and extrema; nullopt when the class had too
  /// few samples and falls back to the global record.
  struct PooledRecord {
    double threshold = 0.0;
    double id_score_min = 0.0;
    double id_score_max = 0.0;
    std::size_t sample_count = 0;
  };
  std::vector<std::optional<PooledRecord>>& class_records() { return class_records_; }
  const std::vector<std::optional<PooledRecord>>& class_records() const { return class_records_; }
  PooledRecord& global_record() { return global_; }
  const PooledRecord& global_record() const { return global_; }

  /// Reducers indexed by stride_index - 1; empty when SDR is off.
  std::vector<Reducer>& reducers() { return reducers_; }
  const std::vector<Reducer>& reducers() const { return reducers_; }
  bool uses_sdr() const { return !reducers_.empty(); }

  /// RoIAlign features of a box on a stride, passed through that stride's
  /// reducer when present.
  std::vector<float> features(const StrideFeatureMaps& maps, const BoundingBox& box,
                              std::uint32_t stride_index) const;
  std::vector<float> project(std::span<const float> raw, std::uint32_t stride_index) const;

  /// Minimum distance to the centroids of (stride, class). A cell without
  /// centroids scores +inf.
  double score(std::span<const float> features, std::uint32_t class_id,
               std::uint32_t stride_index) const;

  double threshold(std::uint32_t stride_index, std::uint32_t class_id) const {
    return cell(stride_index, class_id).threshold;
  }

 private:
  std::uint32_t num_classes_ = 0;
  std::uint32_t stride_count_ = 0;
  Distance distance_ = Distance::L2;
  RoiAlignConfig roi_;
  std::vector<CellModel> cells_;  // (stride_index - 1) * num_classes + class_id
  std::vector<std::optional<PooledRecord>> class_records_;
  PooledRecord global_;
  std::vector<Reducer> reducers_;
};

struct CorrectPrediction {
  std::size_t image_index = 0;
  std::size_t detection_index = 0;
  std::uint32_t class_id = 0;
  std::size_t gt_index = 0;
};

/// Greedy one-to-one matching in descending confidence: a detection is
/// correct when an unmatched ground-truth box of its class overlaps it with
/// IoU >= iou_threshold. No confidence floor is applied.
std::vector<CorrectPrediction> collect_correct_predictions(const DatasetManifest& manifest,
                                                           double iou_threshold);

/// Linear interpolation between order statistics (q in [0,1]).
double quantile_linear(std::vector<double> values, double q);

struct OodVerdict {
  std::size_t detection_index = 0;
  double score = 0.0;
  double threshold_used = 0.0;
  bool is_ood = false;
  std::string method_tag;
};

struct FitSummary {
  std::size_t correct_predictions = 0;
  std::size_t cell_fallbacks = 0;
  std::size_t class_fallbacks = 0;
};

/// Characterises the ID population of `dataset` and calibrates thresholds.
CentroidBank fit(const Dataset& dataset, const FitConfig& cfg, FitSummary* summary = nullptr);

/// Scores one detection and applies the inclusive ID rule score <= threshold.
OodVerdict classify(const Detection& det, std::size_t detection_index,
                    const StrideFeatureMaps& maps, const CentroidBank& bank);

}  // namespace fmapood
