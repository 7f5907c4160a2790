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

#include "fmapood/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fmapood/errors.hpp"

namespace fmapood {

std::string_view to_string(FusionStrategy s) {
  switch (s) {
    case FusionStrategy::And: return "and";
    case FusionStrategy::Or: return "or";
    case FusionStrategy::Score: return "score";
  }
  return "and";
}

FusionStrategy parse_fusion_strategy(std::string_view name) {
  if (name == "and" || name == "AND") return FusionStrategy::And;
  if (name == "or" || name == "OR") return FusionStrategy::Or;
  if (name == "score" || name == "SCORE") return FusionStrategy::Score;
  raise(ErrorKind::Config, "unknown fusion strategy '" + std::string(name) + "'");
}

bool fuse_hard(const OodVerdict& a, const OodVerdict& b, FusionStrategy strategy) {
  if (a.detection_index != b.detection_index) {
    raise(ErrorKind::Data, "fusing verdicts of detections " + std::to_string(a.detection_index) +
                               " and " + std::to_string(b.detection_index));
  }
  switch (strategy) {
    case FusionStrategy::And: return a.is_ood && b.is_ood;
    case FusionStrategy::Or: return a.is_ood || b.is_ood;
    case FusionStrategy::Score: break;
  }
  raise(ErrorKind::Config, "SCORE fusion needs raw scores, not verdicts");
}

double fusion_score(double raw, const ScoreRecord& record, Orientation orientation) {
  if (!std::isfinite(record.threshold) || !std::isfinite(record.id_score_min) ||
      !std::isfinite(record.id_score_max)) {
    raise(ErrorKind::Fit, "fusion record lacks finite threshold and extrema");
  }
  double s = raw;
  double tau = record.threshold;
  double best = record.id_score_max;
  double worst = record.id_score_min;
  if (orientation == Orientation::LowIsId) {
    s = -raw;
    tau = -record.threshold;
    best = -record.id_score_min;
    worst = -record.id_score_max;
  }
  if (s == tau) return 0.0;
  if (s > tau) {
    const double span = best - tau;
    if (!(span > 0.0)) return 1.0;
    return std::clamp((s - tau) / span, 0.0, 1.0);
  }
  const double span = tau - worst;
  if (!(span > 0.0)) return -1.0;
  return std::clamp(-(tau - s) / span, -1.0, 0.0);
}

bool fuse_score(double a_raw, const ScoreRecord& a_record, Orientation a_orientation,
                double b_raw, const ScoreRecord& b_record, Orientation b_orientation) {
  const double sum =
      fusion_score(a_raw, a_record, a_orientation) + fusion_score(b_raw, b_record, b_orientation);
  return sum <= 0.0;
}

}  // namespace fmapood
