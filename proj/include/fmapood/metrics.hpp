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
#include <vector>

#include "fmapood/tensor_io.hpp"

namespace fmapood {

double iou(const BoundingBox& a, const BoundingBox& b);

/// A scored box emitted by the pipeline for one image.
struct ScoredBox {
  BoundingBox box;
  double score = 0.0;       // ranking score, higher ranks first
  std::int32_t class_id = 0;  // -1 for unknown-flagged boxes
};

struct MatchResult {
  std::vector<std::optional<std::size_t>> matched_gt;  // per prediction
  std::vector<bool> is_tp;                             // per prediction
  std::vector<bool> gt_covered;                        // per ground truth
  double iou_threshold = 0.5;
};

/// Greedy matching in descending score: each prediction takes the unmatched
/// ground truth (restricted to `class_filter`) with the highest IoU, provided
/// IoU >= threshold. Ties in score keep input order.
MatchResult match(std::span<const ScoredBox> predictions,
                  std::span<const GroundTruthObject> ground_truth, double iou_threshold,
                  std::optional<std::int32_t> class_filter);

/// One image worth of predictions and ground truth.
struct Scene {
  std::vector<ScoredBox> predictions;
  std::vector<GroundTruthObject> ground_truth;
};

/// Ranked TP/FP flags pooled over scenes plus the ground-truth count.
struct RankedOutcomes {
  std::vector<std::pair<double, bool>> ranked;  // (score, is_tp), input order per scene
  std::size_t gt_count = 0;
};

RankedOutcomes collect_outcomes(std::span<const Scene> scenes, std::int32_t class_id,
                                double iou_threshold = 0.5);

/// Every-point interpolated AP from ranked outcomes. nullopt with no ground
/// truth.
std::optional<double> average_precision(const RankedOutcomes& outcomes);

/// AP of one class over scenes (predictions filtered to that class).
std::optional<double> average_precision(std::span<const Scene> scenes, std::int32_t class_id,
                                        double iou_threshold = 0.5);

struct UnknownCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

struct UnknownMetrics {
  std::optional<double> u_ap;
  std::optional<double> u_pre;
  std::optional<double> u_rec;
  std::optional<double> u_f1;
  UnknownCounts counts;
};

/// Harmonic mean; 0 when both rates are 0.
double f1_score(double precision, double recall);
UnknownMetrics unknown_rates(const UnknownCounts& counts);

/// Scenes hold unknown-flagged boxes (class -1) and full ground truth; only
/// unknown ground truth is matched.
UnknownMetrics unknown_metrics(std::span<const Scene> scenes, double iou_threshold = 0.5);

enum class AoseMode { GroundTruth, Prediction };

/// Unknown objects covered (IoU >= threshold) by known-class predictions.
/// GroundTruth mode counts each unknown object at most once; Prediction mode
/// counts predictions that land on some unknown object.
std::size_t a_ose(std::span<const Scene> known_scenes, double iou_threshold = 0.5,
                  AoseMode mode = AoseMode::GroundTruth);

/// Closed-set over open-set precision minus one at the score cutoff reaching
/// `recall_level` on known objects. nullopt when unreachable or undefined.
std::optional<double> wilderness_impact(std::span<const Scene> known_scenes,
                                        double recall_level = 0.8, double iou_threshold = 0.5);

struct ParetoPoint {
  double map = 0.0;
  double u_f1_sum = 0.0;
};

/// Indices of the non-dominated points (maximising both coordinates), ordered
/// by map descending with ties in input order.
std::vector<std::size_t> pareto_front(std::span<const ParetoPoint> points);

struct EvalReport {
  std::optional<double> map_known;
  std::vector<std::optional<double>> per_class_ap;
  UnknownMetrics unknown;
  std::size_t a_ose = 0;
  std::optional<double> wi;
  std::size_t known_gt = 0;
  std::size_t unknown_gt = 0;
};

/// Full metric suite. `known` scenes hold the predictions kept as known
/// classes, `unknown` scenes the unknown-flagged boxes; both carry the same
/// ground truth.
EvalReport evaluate(std::span<const Scene> known, std::span<const Scene> unknown,
                    std::uint32_t num_classes, double wi_recall_level = 0.8,
                    AoseMode aose_mode = AoseMode::GroundTruth);

}  // namespace fmapood
