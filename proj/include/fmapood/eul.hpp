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

#include "fmapood/fmap.hpp"
#include "fmapood/tensor_io.hpp"

namespace fmapood {

struct EulConfig {
  std::uint32_t otsu_depth = 2;
  std::uint32_t connectivity = 8;  // 4 or 8
  std::uint32_t top_k = 5;
  std::uint32_t min_region_pixels = 4;
  double suppress_iou = 0.5;

  void validate() const;
};

struct UnknownProposal {
  BoundingBox box;
  double entropy = 1.0;
  std::uint32_t source_threshold_level = 1;  // 1-based index into the Otsu thresholds
};

/// Per-pixel mean absolute deviation across channels of a C x H x W map.
/// Returns an H x W tensor.
Tensor saliency_map(const Tensor& fmap);

/// Histogram layout shared by the Otsu search and its callers.
struct OtsuResult {
  double threshold = 0.0;  // min + bin * bin_width
  std::uint32_t bin = 0;   // first bin of the upper class, in [1, 255]
  double min = 0.0;
  double bin_width = 0.0;
};

inline constexpr std::uint32_t kOtsuBins = 256;

/// Otsu threshold over a 256-bin histogram spanning [min, max]. Ties go to
/// the lower bin. Throws DegenerateMap on constant input.
OtsuResult otsu(std::span<const float> values);
double otsu_threshold(std::span<const float> values);

/// Thresholds in ascending order, each found on the values at or above the
/// previous one. Stops early on a degenerate or small (< 16) population.
std::vector<double> recursive_otsu(std::span<const float> values, std::uint32_t depth);

/// Component boxes of a row-major binary map in image coordinates, in raster
/// order of each component's first pixel.
std::vector<BoundingBox> regions_to_boxes(const std::vector<std::uint8_t>& binary,
                                          std::uint32_t height, std::uint32_t width,
                                          std::uint32_t connectivity,
                                          std::uint32_t min_region_pixels,
                                          std::uint32_t downsample_factor);

/// Normalised entropy -sum d* log_n d* of a distance vector, n = its length.
/// nullopt when the distances sum to zero; 0 for a single entry.
std::optional<double> normalized_entropy(std::span<const double> distances);

/// Entropy-ranked unknown proposals from candidate boxes (ascending H, at
/// most top_k). Boxes overlapping any detection at IoU >= suppress_iou are
/// dropped first.
std::vector<UnknownProposal> rank_proposals(std::span<const UnknownProposal> candidates,
                                            const StrideFeatureMaps& maps,
                                            std::span<const Detection> detections,
                                            const CentroidBank& bank, const EulConfig& cfg);

/// Full proposal pipeline on one image.
std::vector<UnknownProposal> eul_propose(const StrideFeatureMaps& maps,
                                         std::span<const Detection> detections,
                                         const CentroidBank& bank, const EulConfig& cfg);

}  // namespace fmapood
