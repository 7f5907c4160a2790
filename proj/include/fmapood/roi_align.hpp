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
#include <vector>

#include "fmapood/tensor_io.hpp"

namespace fmapood {

struct RoiAlignConfig {
  std::uint32_t output_height = 1;
  std::uint32_t output_width = 1;
  std::uint32_t sampling_ratio = 2;  // samples per bin per axis
  bool aligned = true;               // shift by half a pixel before scaling

  void validate() const;
};

/// RoIAlign over a C x H x W map. Returns C * out_h * out_w values laid out
/// channel-major. `spatial_scale` maps image coordinates onto the map
/// (1 / downsample factor). The box is used as given; callers clip.
std::vector<float> roi_align(const Tensor& fmap, const BoundingBox& box,
                             float spatial_scale, const RoiAlignConfig& cfg = {});

/// Clips a box to [0, width] x [0, height].
BoundingBox clip_box(const BoundingBox& box, float width, float height);

/// Features of a detection, pooled from the map of the stride it came from.
std::vector<float> extract_detection_features(const StrideFeatureMaps& maps,
                                              const Detection& det,
                                              const RoiAlignConfig& cfg = {});

/// Same pooling for an arbitrary box on a given stride.
std::vector<float> extract_box_features(const StrideFeatureMaps& maps,
                                        const BoundingBox& box,
                                        std::uint32_t stride_index,
                                        const RoiAlignConfig& cfg = {});

}  // namespace fmapood
