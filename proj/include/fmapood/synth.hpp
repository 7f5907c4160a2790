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
#include <string>
#include <vector>

#include "fmapood/tensor_io.hpp"

namespace fmapood {

/// Synthetic open-world scenes. Images are tiled into square slots; every
/// object occupies one slot and its box spans 2 x 2 cells of its stride, so
/// a 1 x 1 RoIAlign over the box reads back exactly the painted vector.
struct SynthConfig {
  std::uint32_t num_classes = 5;
  std::uint32_t stride_count = 3;
  std::vector<std::uint32_t> channels = {8, 16, 32};
  std::vector<std::uint32_t> downsample_factors = {8, 16, 32};
  std::uint32_t image_size = 256;
  std::uint32_t slot_size = 64;
  std::uint32_t images = 200;
  std::uint32_t min_objects = 1;
  std::uint32_t max_objects = 6;
  // Means per (stride, class); generated from the seed when empty.
  std::vector<std::vector<std::vector<float>>> id_cluster_means;  // [(s-1)*C + c][m]
  std::uint32_t clusters_per_cell = 1;
  double mean_scale = 4.0;
  double id_sigma = 1.0;
  double ood_shift = 8.0;  // in units of id_sigma
  double unknown_fraction = 0.2;
  double label_noise = 0.0;
  double background_fp_rate = 0.0;  // expected false detections per image
  double background_sigma = 0.05;
  std::string name = "synth";
  std::uint64_t seed = 0;

  void validate() const;
};

/// Means used by generate(); either the configured ones or seeded draws.
std::vector<std::vector<std::vector<float>>> resolve_means(const SynthConfig& cfg);

/// In-memory dataset; save with save_dataset().
Dataset generate(const SynthConfig& cfg, unsigned threads = 1);

struct PlantConfig {
  std::uint32_t num_classes = 5;
  std::vector<std::uint32_t> channels = {8, 16, 32};
  std::vector<std::uint32_t> downsample_factors = {8, 16, 32};
  std::uint32_t image_size = 128;
  std::uint32_t blobs = 1;
  std::uint32_t min_blob_cells = 3;
  std::uint32_t max_blob_cells = 5;
  double blob_amplitude = 3.0;
  double background_sigma = 0.01;
  std::uint64_t seed = 0;

  void validate() const;
};

/// One image whose highest-resolution map is near-flat except for constant
/// high-dispersion blobs; each blob is an unknown ground-truth object and
/// no detection covers it.
Dataset plant_eul_scene(const PlantConfig& cfg);

}  // namespace fmapood
