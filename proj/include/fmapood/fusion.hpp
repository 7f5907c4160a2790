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

#include <string_view>

#include "fmapood/fmap.hpp"

namespace fmapood {

enum class FusionStrategy { And, Or, Score };
std::string_view to_string(FusionStrategy s);
FusionStrategy parse_fusion_strategy(std::string_view name);

/// Which side of a raw score is in-distribution.
enum class Orientation { LowIsId, HighIsId };

/// Calibration record of one method for one detection: its threshold and the
/// extrema of the ID population the threshold came from.
struct ScoreRecord {
  double threshold = 0.0;
  double id_score_min = 0.0;
  double id_score_max = 0.0;
};

/// Hard fusion of two verdicts for the same detection.
bool fuse_hard(const OodVerdict& a, const OodVerdict& b, FusionStrategy strategy);

/// Piece-wise linear map of a raw score into [-1, 1]; 0 at the threshold,
/// +1 at the best ID extremum, -1 at the worst.
double fusion_score(double raw, const ScoreRecord& record, Orientation orientation);

/// Soft fusion: OoD when the summed fusion scores are <= 0.
bool fuse_score(double a_raw, const ScoreRecord& a_record, Orientation a_orientation,
                double b_raw, const ScoreRecord& b_record, Orientation b_orientation);

}  // namespace fmapood
