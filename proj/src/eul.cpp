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

#include "fmapood/eul.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

#include <spdlog/spdlog.h>

#include "fmapood/errors.hpp"
#include "fmapood/metrics.hpp"

namespace fmapood {

void EulConfig::validate() const {
  if (otsu_depth < 1) raise(ErrorKind::Config, "eul.otsu_depth must be >= 1");
  if (connectivity != 4 && connectivity != 8) raise(ErrorKind::Config, "eul.connectivity must be 4 or 8");
  if (top_k < 1) raise(ErrorKind::Config, "eul.top_k must be >= 1");
  if (!(suppress_iou > 0.0 && suppress_iou <= 1.0)) {
    raise(ErrorKind::Config, "eul.suppress_iou must lie in (0, 1]");
  }
}

Tensor saliency_map(const Tensor& fmap) {
  if (fmap.ndim() != 3) raise(ErrorKind::Data, "saliency needs a C x H x W map");
  const std::uint32_t C = fmap.channels();
  const std::uint32_t H = fmap.height();
  const std::uint32_t W = fmap.width();
  Tensor out({H, W});
  if (C == 1) {
    spdlog::warn("saliency: single-channel map has zero deviation everywhere");
    return out;
  }
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  std::vector<double> mean(plane, 0.0);
  for (std::uint32_t c = 0; c < C; ++c) {
    const float* p = fmap.data.data() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) mean[i] += p[i];
  }
  for (auto& m : mean) m /= C;
  std::vector<double> mad(plane, 0.0);
  for (std::uint32_t c = 0; c < C; ++c) {
    const float* p = fmap.data.data() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) mad[i] += std::abs(p[i] - mean[i]);
  }
  for (std::size_t i = 0; i < plane; ++i) out.data[i] = static_cast<float>(mad[i] / C);
  return out;
}

OtsuResult otsu(std::span<const float> values) {
  if (values.empty()) raise(ErrorKind::DegenerateMap, "empty map");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (!(hi > lo)) raise(ErrorKind::DegenerateMap, "constant map has no Otsu threshold");
  const double width = (hi - lo) / kOtsuBins;

  std::array<std::uint64_t, kOtsuBins> hist{};
  for (float v : values) {
    const auto b = static_cast<std::uint32_t>(
        std::min<double>(kOtsuBins - 1, std::floor((static_cast<double>(v) - lo) / width)));
    ++hist[b];
  }
  const std::uint64_t n = values.size();
  std::uint64_t total_sum = 0;
  for (std::uint32_t b = 0; b < kOtsuBins; ++b) total_sum += b * hist[b];

  // Between-class variance up to the constant 1/n^2:
  // (n1*S0 - n0*S1)^2 / (n0*n1), compared by cross-multiplication.
  const bool exact = n <= (std::uint64_t{1} << 18);
  unsigned __int128 best_num = 0;
  unsigned __int128 best_den = 1;
  long double best_ld = -1.0L;
  std::uint32_t best_k = 0;
  std::uint64_t n0 = 0;
  std::uint64_t s0 = 0;
  for (std::uint32_t k = 1; k < kOtsuBins; ++k) {
    n0 += hist[k - 1];
    s0 += (k - 1) * hist[k - 1];
    const std::uint64_t n1 = n - n0;
    const std::uint64_t s1 = total_sum - s0;
    if (n0 == 0 || n1 == 0) continue;
    const std::uint64_t a = n1 * s0;
    const std::uint64_t b = n0 * s1;
    const std::uint64_t diff = a > b ? a - b : b - a;
    if (exact) {
      const unsigned __int128 num = static_cast<unsigned __int128>(diff) * diff;
      const unsigned __int128 den = static_cast<unsigned __int128>(n0) * n1;
      if (best_k == 0 || num * best_den > best_num * den) {
        best_num = num;
        best_den = den;
        best_k = k;
      }
    } else {
      const long double v = static_cast<long double>(diff) * diff / (static_cast<long double>(n0) * n1);
      if (best_k == 0 || v > best_ld) {
        best_ld = v;
        best_k = k;
      }
    }
  }
  if (best_k == 0) raise(ErrorKind::DegenerateMap, "no split separates the histogram");
  return {lo + best_k * width, best_k, lo, width};
}

double otsu_threshold(std::span<const float> values) { return otsu(values).threshold; }

std::vector<double> recursive_otsu(std::span<const float> values, std::uint32_t depth) {
  if (depth < 1) raise(ErrorKind::Config, "Otsu depth must be >= 1");
  std::vector<double> out{otsu_threshold(values)};
  std::vector<float> tail;
  while (out.size() < depth) {
    const double t = out.back();
    std::vector<float> next;
    for (float v : (tail.empty() ? values : std::span<const float>(tail))) {
      if (v >= t) next.push_back(v);
    }
    if (next.size() < 16) break;
    const auto [lo, hi] = std::minmax_element(next.begin(), next.end());
    if (!(*hi > *lo)) break;
    tail = std::move(next);
    out.push_back(otsu_threshold(tail));
  }
  return out;
}

std::vector<BoundingBox> regions_to_boxes(const std::vector<std::uint8_t>& binary,
                                          std::uint32_t height, std::uint32_t width,
                                          std::uint32_t connectivity,
                                          std::uint32_t min_region_pixels,
                                          std::uint32_t downsample_factor) {
  if (binary.size() != static_cast<std::size_t>(height) * width) {
    raise(ErrorKind::Data, "binary map size does not match its shape");
  }
  if (connectivity != 4 && connectivity != 8) raise(ErrorKind::Config, "connectivity must be 4 or 8");
  std::vector<bool> seen(binary.size(), false);
  std::vector<BoundingBox> boxes;
  std::deque<std::size_t> queue;
  const float f = static_cast<float>(downsample_factor);
  for (std::size_t start = 0; start < binary.size(); ++start) {
    if (!binary[start] || seen[start]) continue;
    seen[start] = true;
    queue.push_back(start);
    std::uint32_t min_r = height, min_c = width, max_r = 0, max_c = 0;
    std::size_t count = 0;
    while (!queue.empty()) {
      const std::size_t p = queue.front();
      queue.pop_front();
      ++count;
      const auto r = static_cast<std::int64_t>(p / width);
      const auto c = static_cast<std::int64_t>(p % width);
      min_r = std::min<std::uint32_t>(min_r, r);
      max_r = std::max<std::uint32_t>(max_r, r);
      min_c = std::min<std::uint32_t>(min_c, c);
      max_c = std::max<std::uint32_t>(max_c, c);
      for (std::int64_t dr = -1; dr <= 1; ++dr) {
        for (std::int64_t dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc == 0) continue;
          if (connectivity == 4 && dr != 0 && dc != 0) continue;
          const std::int64_t nr = r + dr;
          const std::int64_t nc = c + dc;
          if (nr < 0 || nc < 0 || nr >= height || nc >= width) continue;
          const auto q = static_cast<std::size_t>(nr * width + nc);
          if (binary[q] && !seen[q]) {
            seen[q] = true;
            queue.push_back(q);
          }
        }
      }
    }
    if (count < min_region_pixels) continue;
    boxes.push_back({min_c * f, min_r * f, (max_c + 1) * f, (max_r + 1) * f});
  }
  return boxes;
}

std::optional<double> normalized_entropy(std::span<const double> distances) {
  const double total = std::accumulate(distances.begin(), distances.end(), 0.0);
  if (!(total > 0.0)) return std::nullopt;
  if (distances.size() < 2) return 0.0;
  const double log_n = std::log(static_cast<double>(distances.size()));
  double h = 0.0;
  for (double d : distances) {
    const double p = d / total;
    if (p > 0.0) h -= p * std::log(p) / log_n;
  }
  return std::clamp(h, 0.0, 1.0);
}

std::vector<UnknownProposal> rank_proposals(std::span<const UnknownProposal> candidates,
                                            const StrideFeatureMaps& maps,
                                            std::span<const Detection> detections,
                                            const CentroidBank& bank, const EulConfig& cfg) {
  cfg.validate();
  const std::uint32_t stride = maps.highest_resolution().stride_index;
  std::vector<std::uint32_t> classes;
  for (std::uint32_t c = 0; c < bank.num_classes(); ++c) {
    if (!bank.cell(stride, c).centroids.empty()) classes.push_back(c);
  }
  std::vector<UnknownProposal> kept;
  if (classes.empty()) return kept;
  for (const auto& cand : candidates) {
    const bool suppressed = std::any_of(detections.begin(), detections.end(), [&](const Detection& d) {
      return iou(cand.box, d.box) >= cfg.suppress_iou;
    });
    if (suppressed) continue;
    std::vector<double> dist;
    dist.reserve(classes.size());
    try {
      const auto f = bank.features(maps, cand.box, stride);
      for (auto c : classes) dist.push_back(bank.score(f, c, stride));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::ZeroVector && e.kind() != ErrorKind::DegenerateBox) throw;
      spdlog::warn("eul: skipping proposal in {}: {}", maps.image_id, e.what());
      continue;
    }
    UnknownProposal p = cand;
    const auto h = normalized_entropy(dist);
    if (!h) spdlog::warn("eul: proposal in {} sits on every class centroid; H set to 1", maps.image_id);
    p.entropy = h.value_or(1.0);
    kept.push_back(p);
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.entropy < b.entropy; });
  if (kept.size() > cfg.top_k) kept.resize(cfg.top_k);
  return kept;
}

std::vector<UnknownProposal> eul_propose(const StrideFeatureMaps& maps,
                                         std::span<const Detection> detections,
                                         const CentroidBank& bank, const EulConfig& cfg) {
  cfg.validate();
  const auto& level = maps.highest_resolution();
  const Tensor sal = saliency_map(level.tensor);
  std::vector<double> thresholds;
  try {
    thresholds = recursive_otsu(sal.data, cfg.otsu_depth);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::DegenerateMap) throw;
    return {};
  }
  const std::uint32_t H = level.tensor.height();
  const std::uint32_t W = level.tensor.width();
  std::vector<UnknownProposal> candidates;
  std::vector<std::uint8_t> binary(sal.size());
  for (std::size_t t = 0; t < thresholds.size(); ++t) {
    for (std::size_t i = 0; i < sal.size(); ++i) binary[i] = sal.data[i] >= thresholds[t] ? 1 : 0;
    for (auto box : regions_to_boxes(binary, H, W, cfg.connectivity, cfg.min_region_pixels,
                                     level.downsample_factor)) {
      box = clip_box(box, static_cast<float>(maps.image_width), static_cast<float>(maps.image_height));
      if (!box.valid()) continue;
      const bool duplicate = std::any_of(candidates.begin(), candidates.end(),
                                         [&](const UnknownProposal& p) { return p.box == box; });
      if (duplicate) continue;
      candidates.push_back({box, 1.0, static_cast<std::uint32_t>(t + 1)});
    }
  }
  return rank_proposals(candidates, maps, detections, bank, cfg);
}

}  // namespace fmapood
