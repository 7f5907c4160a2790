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

#include "fmapood/roi_align.hpp"

#include <algorithm>
#include <cmath>

#include "fmapood/errors.hpp"

namespace fmapood {

namespace {

// Bilinear read with the Mask R-CNN border convention: samples more than one
// pixel outside the map contribute zero, samples in the border band clamp.
double bilinear(const float* plane, int height, int width, double y, double x) {
  if (y < -1.0 || y > height || x < -1.0 || x > width) return 0.0;
  y = std::max(y, 0.0);
  x = std::max(x, 0.0);

  int y_low = static_cast<int>(y);
  int x_low = static_cast<int>(x);
  int y_high;
  int x_high;
  if (y_low >= height - 1) {
    y_high = y_low = height - 1;
    y = y_low;
  } else {
    y_high = y_low + 1;
  }
  if (x_low >= width - 1) {
    x_high = x_low = width - 1;
    x = x_low;
  } else {
    x_high = x_low + 1;
  }

  const double ly = y - y_low;
  const double lx = x - x_low;
  const double hy = 1.0 - ly;
  const double hx = 1.0 - lx;
  return hy * hx * plane[y_low * width + x_low] + hy * lx * plane[y_low * width + x_high] +
         ly * hx * plane[y_high * width + x_low] + ly * lx * plane[y_high * width + x_high];
}

}  // namespace

void RoiAlignConfig::validate() const {
  if (output_height < 1 || output_width < 1) raise(ErrorKind::Config, "RoIAlign output size must be >= 1x1");
  if (sampling_ratio < 1) raise(ErrorKind::Config, "RoIAlign sampling_ratio must be >= 1");
}

std::vector<float> roi_align(const Tensor& fmap, const BoundingBox& box, float spatial_scale,
                             const RoiAlignConfig& cfg) {
  cfg.validate();
  if (fmap.ndim() != 3) raise(ErrorKind::Data, "RoIAlign expects a C x H x W tensor");
  const int channels = static_cast<int>(fmap.channels());
  const int height = static_cast<int>(fmap.height());
  const int width = static_cast<int>(fmap.width());

  const double offset = cfg.aligned ? 0.5 : 0.0;
  const double start_x = double(box.x_min) * spatial_scale - offset;
  const double start_y = double(box.y_min) * spatial_scale - offset;
  const double end_x = double(box.x_max) * spatial_scale - offset;
  const double end_y = double(box.y_max) * spatial_scale - offset;
  const double roi_w = end_x - start_x;
  const double roi_h = end_y - start_y;
  if (!(roi_w > 0.0) || !(roi_h > 0.0)) {
    raise(ErrorKind::DegenerateBox, "box maps to a zero or negative area on the feature map");
  }

  const int out_h = static_cast<int>(cfg.output_height);
  const int out_w = static_cast<int>(cfg.output_width);
  const int n = static_cast<int>(cfg.sampling_ratio);
  const double bin_h = roi_h / out_h;
  const double bin_w = roi_w / out_w;
  const double inv_count = 1.0 / (n * n);

  std::vector<float> out(static_cast<std::size_t>(channels) * out_h * out_w);
  for (int c = 0; c < channels; ++c) {
    const float* plane = fmap.data.data() + static_cast<std::size_t>(c) * height * width;
    for (int ph = 0; ph < out_h; ++ph) {
      for (int pw = 0; pw < out_w; ++pw) {
        double acc = 0.0;
        for (int iy = 0; iy < n; ++iy) {
          const double y = start_y + ph * bin_h + (iy + 0.5) * bin_h / n;
          for (int ix = 0; ix < n; ++ix) {
            const double x = start_x + pw * bin_w + (ix + 0.5) * bin_w / n;
            acc += bilinear(plane, height, width, y, x);
          }
        }
        out[(static_cast<std::size_t>(c) * out_h + ph) * out_w + pw] =
            static_cast<float>(acc * inv_count);
      }
    }
  }
  return out;
}

BoundingBox clip_box(const BoundingBox& box, float width, float height) {
  return {std::clamp(box.x_min, 0.0F, width), std::clamp(box.y_min, 0.0F, height),
          std::clamp(box.x_max, 0.0F, width), std::clamp(box.y_max, 0.0F, height)};
}

std::vector<float> extract_box_features(const StrideFeatureMaps& maps, const BoundingBox& box,
                                        std::uint32_t stride_index, const RoiAlignConfig& cfg) {
  const auto* level = maps.find(stride_index);
  if (level == nullptr) {
    raise(ErrorKind::Data, "image '" + maps.image_id + "' has no stride " +
                               std::to_string(stride_index));
  }
  BoundingBox clipped = box;
  if (maps.image_width > 0 && maps.image_height > 0) {
    clipped = clip_box(box, static_cast<float>(maps.image_width),
                       static_cast<float>(maps.image_height));
  }
  return roi_align(level->tensor, clipped, 1.0F / static_cast<float>(level->downsample_factor),
                   cfg);
}

std::vector<float> extract_detection_features(const StrideFeatureMaps& maps,
                                              const Detection& det, const RoiAlignConfig& cfg) {
  return extract_box_features(maps, det.box, det.stride_index, cfg);
}

}  // namespace fmapood
