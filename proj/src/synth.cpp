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

#include "fmapood/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <spdlog/fmt/fmt.h>

#include "fmapood/errors.hpp"
#include "fmapood/parallel.hpp"

namespace fmapood {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

void check_strides(std::uint32_t stride_count, const std::vector<std::uint32_t>& channels,
                   const std::vector<std::uint32_t>& factors, std::uint32_t image_size) {
  if (stride_count < 1) raise(ErrorKind::Config, "synth: stride_count must be >= 1");
  if (channels.size() != stride_count || factors.size() != stride_count) {
    raise(ErrorKind::Config, "synth: channels and downsample_factors need one entry per stride");
  }
  for (std::size_t s = 0; s < factors.size(); ++s) {
    if (channels[s] == 0) raise(ErrorKind::Config, "synth: channel counts must be >= 1");
    if (factors[s] == 0 || image_size % factors[s] != 0) {
      raise(ErrorKind::Config, "synth: image_size must be a multiple of every downsample factor");
    }
    if (s > 0 && factors[s] <= factors[s - 1]) {
      raise(ErrorKind::Config, "synth: downsample factors must increase with stride");
    }
  }
}

std::vector<float> gaussian_vector(std::mt19937_64& rng, std::size_t dim, double sigma) {
  std::normal_distribution<double> n(0.0, sigma);
  std::vector<float> v(dim);
  for (auto& x : v) x = static_cast<float>(n(rng));
  return v;
}

std::vector<float> unit_vector(std::mt19937_64& rng, std::size_t dim) {
  for (;;) {
    auto v = gaussian_vector(rng, dim, 1.0);
    double norm = 0.0;
    for (float x : v) norm += static_cast<double>(x) * x;
    norm = std::sqrt(norm);
    if (norm < 1e-8) continue;
    for (auto& x : v) x = static_cast<float>(x / norm);
    return v;
  }
}

void fill_noise(Tensor& t, std::mt19937_64& rng, double sigma) {
  std::normal_distribution<double> n(0.0, sigma);
  for (auto& x : t.data) x = static_cast<float>(n(rng));
}

// Writes `v` over cells [x0, x0 + w) x [y0, y0 + h) of every channel.
void paint(Tensor& t, const std::vector<float>& v, std::uint32_t x0, std::uint32_t y0,
           std::uint32_t w, std::uint32_t h) {
  for (std::uint32_t c = 0; c < t.channels(); ++c) {
    for (std::uint32_t y = y0; y < std::min(y0 + h, t.height()); ++y) {
      for (std::uint32_t x = x0; x < std::min(x0 + w, t.width()); ++x) t.at(c, y, x) = v[c];
    }
  }
}

float sigmoid(float z) { return 1.0F / (1.0F + std::exp(-z)); }

std::vector<StrideEntry> stride_entries(const std::string& image_id,
                                        const std::vector<std::uint32_t>& factors) {
  std::vector<StrideEntry> out;
  for (std::uint32_t s = 0; s < factors.size(); ++s) {
    out.push_back({s + 1, factors[s], fmt::format("tensors/{}_s{}.fmap", image_id, s + 1)});
  }
  return out;
}

}  // namespace

void SynthConfig::validate() const {
  if (num_classes < 2) raise(ErrorKind::Config, "synth: num_classes must be >= 2");
  check_strides(stride_count, channels, downsample_factors, image_size);
  if (slot_size == 0 || image_size % slot_size != 0) {
    raise(ErrorKind::Config, "synth: image_size must be a multiple of slot_size");
  }
  for (auto f : downsample_factors) {
    if (slot_size % f != 0 || slot_size < 2 * f) {
      raise(ErrorKind::Config, "synth: slot_size must hold a 2 x 2 cell box at every stride");
    }
  }
  const std::uint32_t slots = (image_size / slot_size) * (image_size / slot_size);
  if (min_objects > max_objects || max_objects > slots) {
    raise(ErrorKind::Config, fmt::format("synth: need min_objects <= max_objects <= {}", slots));
  }
  if (images == 0) raise(ErrorKind::Config, "synth: images must be >= 1");
  if (clusters_per_cell == 0) raise(ErrorKind::Config, "synth: clusters_per_cell must be >= 1");
  if (!(id_sigma > 0.0)) raise(ErrorKind::Config, "synth: id_sigma must be > 0");
  if (!(ood_shift >= 0.0)) raise(ErrorKind::Config, "synth: ood_shift must be >= 0");
  if (!(mean_scale >= 0.0) || !(background_sigma >= 0.0) || !(background_fp_rate >= 0.0)) {
    raise(ErrorKind::Config, "synth: scales and rates must be >= 0");
  }
  for (double p : {unknown_fraction, label_noise}) {
    if (!(p >= 0.0 && p <= 1.0)) {
      raise(ErrorKind::Config, "synth: unknown_fraction and label_noise must lie in [0, 1]");
    }
  }
  if (!id_cluster_means.empty()) {
    if (id_cluster_means.size() != static_cast<std::size_t>(num_classes) * stride_count) {
      raise(ErrorKind::Config, "synth: id_cluster_means needs one list per (stride, class)");
    }
    for (std::size_t i = 0; i < id_cluster_means.size(); ++i) {
      const auto dim = channels[i / num_classes];
      if (id_cluster_means[i].empty()) raise(ErrorKind::Config, "synth: empty mean list");
      for (const auto& m : id_cluster_means[i]) {
        if (m.size() != dim) raise(ErrorKind::Config, "synth: mean length must match channels");
      }
    }
  }
}

std::vector<std::vector<std::vector<float>>> resolve_means(const SynthConfig& cfg) {
  if (!cfg.id_cluster_means.empty()) return cfg.id_cluster_means;
  std::mt19937_64 rng(splitmix64(cfg.seed ^ 0x6D65616E73ULL));
  std::vector<std::vector<std::vector<float>>> means;
  for (std::uint32_t s = 0; s < cfg.stride_count; ++s) {
    for (std::uint32_t c = 0; c < cfg.num_classes; ++c) {
      std::vector<std::vector<float>> cell;
      for (std::uint32_t m = 0; m < cfg.clusters_per_cell; ++m) {
        cell.push_back(gaussian_vector(rng, cfg.channels[s], cfg.mean_scale));
      }
      means.push_back(std::move(cell));
    }
  }
  return means;
}

Dataset generate(const SynthConfig& cfg, unsigned threads) {
  cfg.validate();
  const auto means = resolve_means(cfg);
  const std::uint32_t C = cfg.num_classes;
  const std::uint32_t Z = cfg.stride_count;
  const std::uint32_t per_row = cfg.image_size / cfg.slot_size;
  const std::uint32_t slots = per_row * per_row;

  Dataset ds;
  ds.manifest.name = cfg.name;
  ds.manifest.num_classes = C;
  ds.manifest.stride_count = Z;
  ds.manifest.images.resize(cfg.images);
  ds.maps.resize(cfg.images);

  parallel_for(cfg.images, threads, [&](std::size_t i) {
    std::mt19937_64 rng(splitmix64(cfg.seed * 0x100000001B3ULL + i + 1));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::string id = fmt::format("img_{:05d}", i);

    StrideFeatureMaps maps;
    maps.image_id = id;
    maps.image_width = maps.image_height = cfg.image_size;
    for (std::uint32_t s = 0; s < Z; ++s) {
      const std::uint32_t g = cfg.image_size / cfg.downsample_factors[s];
      Tensor t({cfg.channels[s], g, g});
      fill_noise(t, rng, cfg.background_sigma);
      maps.per_stride.push_back({s + 1, cfg.downsample_factors[s], std::move(t)});
    }

    ImageRecord rec;
    rec.image_id = id;
    rec.width = rec.height = cfg.image_size;
    rec.strides = stride_entries(id, cfg.downsample_factors);

    std::vector<std::uint32_t> slot_order(slots);
    std::iota(slot_order.begin(), slot_order.end(), 0U);
    std::shuffle(slot_order.begin(), slot_order.end(), rng);
    const auto n_obj = std::uniform_int_distribution<std::uint32_t>(cfg.min_objects, cfg.max_objects)(rng);
    const auto n_bg = std::min<std::uint32_t>(
        std::poisson_distribution<std::uint32_t>(cfg.background_fp_rate)(rng), slots - n_obj);

    auto place = [&](std::uint32_t slot, std::uint32_t stride) {
      const std::uint32_t f = cfg.downsample_factors[stride - 1];
      const std::uint32_t span = cfg.slot_size / f - 2;
      const auto ox = std::uniform_int_distribution<std::uint32_t>(0, span)(rng);
      const auto oy = std::uniform_int_distribution<std::uint32_t>(0, span)(rng);
      const float x0 = static_cast<float>((slot % per_row) * cfg.slot_size + ox * f);
      const float y0 = static_cast<float>((slot / per_row) * cfg.slot_size + oy * f);
      return BoundingBox{x0, y0, x0 + 2.0F * f, y0 + 2.0F * f};
    };
    auto draw_feature = [&](std::uint32_t stride, std::uint32_t cls, bool unknown) {
      const auto& cell = means[static_cast<std::size_t>(stride - 1) * C + cls];
      const auto m = std::uniform_int_distribution<std::size_t>(0, cell.size() - 1)(rng);
      auto v = gaussian_vector(rng, cell[m].size(), cfg.id_sigma);
      for (std::size_t d = 0; d < v.size(); ++d) v[d] += cell[m][d];
      if (unknown) {
        const auto u = unit_vector(rng, v.size());
        for (std::size_t d = 0; d < v.size(); ++d) {
          v[d] += static_cast<float>(cfg.ood_shift * cfg.id_sigma * u[d]);
        }
      }
      return v;
    };
    auto paint_box = [&](std::uint32_t stride, const BoundingBox& box, const std::vector<float>& v) {
      auto& level = maps.per_stride[stride - 1];
      const std::uint32_t f = level.downsample_factor;
      const auto x0 = static_cast<std::uint32_t>(box.x_min) / f;
      const auto y0 = static_cast<std::uint32_t>(box.y_min) / f;
      const auto w = std::max(1U, static_cast<std::uint32_t>(box.width()) / f);
      const auto h = std::max(1U, static_cast<std::uint32_t>(box.height()) / f);
      paint(level.tensor, v, x0, y0, w, h);
    };
    auto make_logits = [&](std::uint32_t detected, double hi_mean, double hi_sd, double lo_mean,
                           double lo_sd) {
      std::vector<float> z(C);
      for (auto& x : z) x = static_cast<float>(lo_mean + lo_sd * normal(rng));
      z[detected] = static_cast<float>(hi_mean + hi_sd * normal(rng));
      // The detected class carries the largest output.
      const float top = *std::max_element(z.begin(), z.end());
      if (z[detected] < top) std::swap(z[detected], *std::max_element(z.begin(), z.end()));
      return z;
    };

    for (std::uint32_t k = 0; k < n_obj; ++k) {
      const bool unknown = unif(rng) < cfg.unknown_fraction;
      const auto cls = std::uniform_int_distribution<std::uint32_t>(0, C - 1)(rng);
      const auto stride = std::uniform_int_distribution<std::uint32_t>(1, Z)(rng);
      const BoundingBox box = place(slot_order[k], stride);
      paint_box(stride, box, draw_feature(stride, cls, unknown));
      if (stride != 1) paint_box(1, box, draw_feature(1, cls, unknown));

      rec.ground_truth.push_back({box, unknown ? GroundTruthObject::kUnknown
                                               : static_cast<std::int32_t>(cls)});
      Detection det;
      det.box = box;
      det.stride_index = stride;
      det.class_id = cls;
      if (!unknown && unif(rng) < cfg.label_noise) {
        det.class_id = (cls + std::uniform_int_distribution<std::uint32_t>(1, C - 1)(rng)) % C;
      }
      det.logits = unknown ? make_logits(det.class_id, -1.2, 0.5, -1.5, 0.5)
                           : make_logits(det.class_id, 2.0, 1.5, -4.0, 1.0);
      det.confidence = sigmoid(det.logits[det.class_id]);
      rec.detections.push_back(std::move(det));
    }
    for (std::uint32_t k = 0; k < n_bg; ++k) {
      Detection det;
      det.stride_index = std::uniform_int_distribution<std::uint32_t>(1, Z)(rng);
      det.box = place(slot_order[n_obj + k], det.stride_index);
      det.class_id = std::uniform_int_distribution<std::uint32_t>(0, C - 1)(rng);
      det.logits = make_logits(det.class_id, -3.0, 1.0, -4.0, 1.0);
      det.confidence = sigmoid(det.logits[det.class_id]);
      rec.detections.push_back(std::move(det));
    }
    ds.manifest.images[i] = std::move(rec);
    ds.maps[i] = std::move(maps);
  });
  return ds;
}

void PlantConfig::validate() const {
  if (num_classes < 1) raise(ErrorKind::Config, "plant: num_classes must be >= 1");
  check_strides(static_cast<std::uint32_t>(channels.size()), channels, downsample_factors, image_size);
  const std::uint32_t grid = image_size / downsample_factors[0];
  if (blobs > 4) raise(ErrorKind::Config, "plant: at most 4 blobs (one per quadrant)");
  if (min_blob_cells < 1 || min_blob_cells > max_blob_cells || max_blob_cells + 2 > grid / 2) {
    raise(ErrorKind::Config, "plant: blob size must fit a quadrant with a one-cell margin");
  }
  if (!(blob_amplitude > 0.0) || !(background_sigma >= 0.0)) {
    raise(ErrorKind::Config, "plant: blob_amplitude must be > 0 and background_sigma >= 0");
  }
}

Dataset plant_eul_scene(const PlantConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(splitmix64(cfg.seed ^ 0x706C616E74ULL));
  const auto Z = static_cast<std::uint32_t>(cfg.channels.size());
  const std::string id = fmt::format("planted_{}", cfg.seed);

  Dataset ds;
  ds.manifest.name = "planted";
  ds.manifest.num_classes = cfg.num_classes;
  ds.manifest.stride_count = Z;
  StrideFeatureMaps maps;
  maps.image_id = id;
  maps.image_width = maps.image_height = cfg.image_size;
  for (std::uint32_t s = 0; s < Z; ++s) {
    const std::uint32_t g = cfg.image_size / cfg.downsample_factors[s];
    Tensor t({cfg.channels[s], g, g});
    fill_noise(t, rng, cfg.background_sigma);
    maps.per_stride.push_back({s + 1, cfg.downsample_factors[s], std::move(t)});
  }
  ImageRecord rec;
  rec.image_id = id;
  rec.width = rec.height = cfg.image_size;
  rec.strides = stride_entries(id, cfg.downsample_factors);

  const std::uint32_t f = cfg.downsample_factors[0];
  const std::uint32_t half = cfg.image_size / f / 2;
  std::vector<std::uint32_t> quadrants = {0, 1, 2, 3};
  std::shuffle(quadrants.begin(), quadrants.end(), rng);
  for (std::uint32_t b = 0; b < cfg.blobs; ++b) {
    std::uniform_int_distribution<std::uint32_t> size(cfg.min_blob_cells, cfg.max_blob_cells);
    const std::uint32_t w = size(rng);
    const std::uint32_t h = size(rng);
    // One-cell margin on both sides keeps blobs in different quadrants apart.
    const auto x0 = (quadrants[b] % 2) * half + std::uniform_int_distribution<std::uint32_t>(1, half - w - 1)(rng);
    const auto y0 = (quadrants[b] / 2) * half + std::uniform_int_distribution<std::uint32_t>(1, half - h - 1)(rng);
    paint(maps.per_stride[0].tensor, gaussian_vector(rng, cfg.channels[0], cfg.blob_amplitude), x0,
          y0, w, h);
    const BoundingBox box{static_cast<float>(x0 * f), static_cast<float>(y0 * f),
                          static_cast<float>((x0 + w) * f), static_cast<float>((y0 + h) * f)};
    rec.ground_truth.push_back({box, GroundTruthObject::kUnknown});
  }
  ds.manifest.images.push_back(std::move(rec));
  ds.maps.push_back(std::move(maps));
  return ds;
}

}  // namespace fmapood
