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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fmapood {

/// Dense row-major float32 tensor.
struct Tensor {
  std::vector<std::uint32_t> shape;
  std::vector<float> data;

  Tensor() = default;
  Tensor(std::vector<std::uint32_t> dims, std::vector<float> values);
  /// Zero-filled tensor of the given shape.
  explicit Tensor(std::vector<std::uint32_t> dims);

  std::size_t ndim() const { return shape.size(); }
  std::size_t size() const { return data.size(); }

  // C x H x W accessors; only meaningful for rank-3 tensors.
  std::uint32_t channels() const { return shape.at(0); }
  std::uint32_t height() const { return shape.at(1); }
  std::uint32_t width() const { return shape.at(2); }
  float at(std::size_t c, std::size_t y, std::size_t x) const {
    return data[(c * shape[1] + y) * shape[2] + x];
  }
  float& at(std::size_t c, std::size_t y, std::size_t x) {
    return data[(c * shape[1] + y) * shape[2] + x];
  }

  bool operator==(const Tensor&) const = default;
};

/// Number of elements implied by a shape; 0 for an empty shape.
std::size_t element_count(std::span<const std::uint32_t> shape);

struct BoundingBox {
  float x_min = 0.0F;
  float y_min = 0.0F;
  float x_max = 0.0F;
  float y_max = 0.0F;

  float width() const { return x_max - x_min; }
  float height() const { return y_max - y_min; }
  bool valid() const {
    return x_min >= 0.0F && y_min >= 0.0F && x_min < x_max && y_min < y_max;
  }
  bool operator==(const BoundingBox&) const = default;
};

struct Detection {
  BoundingBox box;
  std::uint32_t class_id = 0;
  float confidence = 0.0F;
  std::uint32_t stride_index = 1;
  std::vector<float> logits;  // pre-activation class outputs, one per class

  bool operator==(const Detection&) const = default;
};

/// Ground truth object; class_id -1 marks an unknown object.
struct GroundTruthObject {
  static constexpr std::int32_t kUnknown = -1;

  BoundingBox box;
  std::int32_t class_id = 0;

  bool is_unknown() const { return class_id == kUnknown; }
  bool operator==(const GroundTruthObject&) const = default;
};

struct StrideEntry {
  std::uint32_t stride_index = 1;
  std::uint32_t downsample_factor = 1;
  std::string tensor_path;  // relative to the manifest directory

  bool operator==(const StrideEntry&) const = default;
};

struct ImageRecord {
  std::string image_id;
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<StrideEntry> strides;
  std::vector<Detection> detections;
  std::vector<GroundTruthObject> ground_truth;

  bool operator==(const ImageRecord&) const = default;
};

struct DatasetManifest {
  std::string name;
  std::uint32_t num_classes = 0;
  std::uint32_t stride_count = 0;
  std::vector<ImageRecord> images;

  bool operator==(const DatasetManifest&) const = default;
};

/// Feature maps of one image, ordered by stride index (stride 1 first, which
/// has the largest spatial extent).
struct StrideFeatureMaps {
  struct Level {
    std::uint32_t stride_index = 1;
    std::uint32_t downsample_factor = 1;
    Tensor tensor;  // C x H x W

    bool operator==(const Level&) const = default;
  };

  std::string image_id;
  std::uint32_t image_width = 0;
  std::uint32_t image_height = 0;
  std::vector<Level> per_stride;

  /// nullptr when the stride is absent.
  const Level* find(std::uint32_t stride_index) const;
  const Level& highest_resolution() const;

  bool operator==(const StrideFeatureMaps&) const = default;
};

/// A manifest together with its loaded feature maps; maps[i] belongs to
/// manifest.images[i]. Immutable once built.
struct Dataset {
  DatasetManifest manifest;
  std::vector<StrideFeatureMaps> maps;

  std::size_t size() const { return manifest.images.size(); }
};

inline constexpr char kTensorMagic[4] = {'F', 'M', 'A', 'P'};
inline constexpr std::uint8_t kTensorVersion = 0x01;

void write_tensor(const std::filesystem::path& path, const Tensor& tensor);
Tensor read_tensor(const std::filesystem::path& path);

// In-memory forms of the same container, used by the file functions.
std::vector<std::uint8_t> encode_tensor(const Tensor& tensor);
Tensor decode_tensor(std::span<const std::uint8_t> bytes,
                     const std::string& origin = "<memory>");

/// Parses and validates a manifest, including every referenced tensor file.
DatasetManifest load_manifest(const std::filesystem::path& path);
/// Same validation as load_manifest, keeping the decoded feature maps.
Dataset load_dataset(const std::filesystem::path& path);

/// Validates manifest invariants that do not need the tensor files.
void validate_manifest(const DatasetManifest& manifest);
/// Validates that maps agree with the manifest's stride declarations.
void validate_maps(const DatasetManifest& manifest,
                   std::span<const StrideFeatureMaps> maps);

/// Writes the manifest JSON. Tensor paths are written as stored.
void save_manifest(const std::filesystem::path& path,
                   const DatasetManifest& manifest);
/// Writes every tensor under `directory` and the manifest next to them;
/// tensor paths in the saved manifest are rewritten to
/// "tensors/<image_id>_s<stride>.fmap". Returns the manifest path.
std::filesystem::path save_dataset(const std::filesystem::path& directory,
                                   const Dataset& dataset,
                                   const std::string& manifest_name =
                                       "manifest.json");

}  // namespace fmapood
