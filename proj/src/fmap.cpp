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

#include "fmapood/fmap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <spdlog/spdlog.h>

#include "fmapood/errors.hpp"
#include "fmapood/metrics.hpp"
#include "fmapood/parallel.hpp"

namespace fmapood {

void FitConfig::validate() const {
  if (!(iou_match_threshold > 0.0 && iou_match_threshold < 1.0)) {
    raise(ErrorKind::Config, "iou_match_threshold must lie in (0, 1)");
  }
  if (!(target_tpr > 0.0 && target_tpr < 1.0)) {
    raise(ErrorKind::Config, "target_tpr must lie in (0, 1)");
  }
  if (min_samples_per_cell == 0) raise(ErrorKind::Config, "min_samples_per_cell must be >= 1");
  cluster.validate();
  roi.validate();
}

std::string_view to_string(ThresholdSource s) {
  switch (s) {
    case ThresholdSource::Cell: return "cell";
    case ThresholdSource::Class: return "class";
    case ThresholdSource::Global: return "global";
  }
  return "global";
}

CentroidBank::CentroidBank(std::uint32_t num_classes, std::uint32_t stride_count,
                           Distance distance, RoiAlignConfig roi)
    : num_classes_(num_classes),
      stride_count_(stride_count),
      distance_(distance),
      roi_(roi),
      cells_(static_cast<std::size_t>(num_classes) * stride_count),
      class_records_(num_classes) {
  if (num_classes == 0 || stride_count == 0) {
    raise(ErrorKind::Config, "centroid bank needs at least one class and one stride");
  }
}

const CellModel& CentroidBank::cell(std::uint32_t stride_index, std::uint32_t class_id) const {
  if (stride_index < 1 || stride_index > stride_count_ || class_id >= num_classes_) {
    raise(ErrorKind::Data, "cell (stride " + std::to_string(stride_index) + ", class " +
                               std::to_string(class_id) + ") outside the bank");
  }
  return cells_[static_cast<std::size_t>(stride_index - 1) * num_classes_ + class_id];
}

CellModel& CentroidBank::cell(std::uint32_t stride_index, std::uint32_t class_id) {
  return const_cast<CellModel&>(std::as_const(*this).cell(stride_index, class_id));
}

std::vector<float> CentroidBank::project(std::span<const float> raw,
                                         std::uint32_t stride_index) const {
  if (reducers_.empty()) return {raw.begin(), raw.end()};
  if (stride_index < 1 || stride_index > reducers_.size()) {
    raise(ErrorKind::Data, "no reducer for stride " + std::to_string(stride_index));
  }
  const Reducer& r = reducers_[stride_index - 1];
  if (r.empty()) return {raw.begin(), raw.end()};
  return r.transform(raw);
}

std::vector<float> CentroidBank::features(const StrideFeatureMaps& maps, const BoundingBox& box,
                                          std::uint32_t stride_index) const {
  auto raw = extract_box_features(maps, box, stride_index, roi_);
  return project(raw, stride_index);
}

double CentroidBank::score(std::span<const float> features, std::uint32_t class_id,
                           std::uint32_t stride_index) const {
  const CellModel& m = cell(stride_index, class_id);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& c : m.centroids) {
    if (c.size() != features.size()) {
      raise(ErrorKind::Data, "feature length " + std::to_string(features.size()) +
                                 " does not match centroid length " + std::to_string(c.size()));
    }
    best = std::min(best, fmapood::distance(features, c, distance_));
  }
  return best;
}

std::vector<CorrectPrediction> collect_correct_predictions(const DatasetManifest& manifest,
                                                           double iou_threshold) {
  std::vector<CorrectPrediction> out;
  for (std::size_t i = 0; i < manifest.images.size(); ++i) {
    const ImageRecord& img = manifest.images[i];
    std::vector<std::size_t> order(img.detections.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return img.detections[a].confidence > img.detections[b].confidence;
    });
    std::vector<bool> taken(img.ground_truth.size(), false);
    for (std::size_t d : order) {
      const Detection& det = img.detections[d];
      double best_iou = -1.0;
      std::size_t best_gt = 0;
      for (std::size_t g = 0; g < img.ground_truth.size(); ++g) {
        const auto& gt = img.ground_truth[g];
        if (taken[g] || gt.class_id != static_cast<std::int32_t>(det.class_id)) continue;
        const double v = iou(det.box, gt.box);
        if (v > best_iou) {
          best_iou = v;
          best_gt = g;
        }
      }
      if (best_iou >= iou_threshold) {
        taken[best_gt] = true;
        out.push_back({i, d, det.class_id, best_gt});
      }
    }
  }
  return out;
}

double quantile_linear(std::vector<double> values, double q) {
  if (values.empty()) raise(ErrorKind::Data, "quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) raise(ErrorKind::Config, "quantile level must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0 || lo == hi) return values[lo];
  return values[lo] + frac * (values[hi] - values[lo]);
}

namespace {

struct Sample {
  std::uint32_t stride = 1;
  std::uint32_t class_id = 0;
  std::vector<float> feature;
};

CentroidBank::PooledRecord pooled(const std::vector<double>& scores, double tpr) {
  CentroidBank::PooledRecord r;
  r.threshold = quantile_linear(scores, tpr);
  const auto [mn, mx] = std::minmax_element(scores.begin(), scores.end());
  r.id_score_min = *mn;
  r.id_score_max = *mx;
  r.sample_count = scores.size();
  return r;
}

bool is_zero(const std::vector<float>& v) {
  return std::all_of(v.begin(), v.end(), [](float x) { return x == 0.0F; });
}

}  // namespace

CentroidBank fit(const Dataset& dataset, const FitConfig& cfg, FitSummary* summary) {
  cfg.validate();
  const DatasetManifest& man = dataset.manifest;
  if (dataset.maps.size() != man.images.size()) {
    raise(ErrorKind::Data, "dataset has " + std::to_string(dataset.maps.size()) +
                               " feature-map sets for " + std::to_string(man.images.size()) +
                               " images");
  }
  const auto correct = collect_correct_predictions(man, cfg.iou_match_threshold);
  if (correct.empty()) raise(ErrorKind::Fit, "no correct predictions in the fit dataset");

  CentroidBank bank(man.num_classes, man.stride_count, cfg.distance, cfg.roi);
  const std::uint32_t C = man.num_classes;
  const std::uint32_t Z = man.stride_count;

  std::vector<Sample> samples(correct.size());
  parallel_for(correct.size(), cfg.threads, [&](std::size_t i) {
    const auto& cp = correct[i];
    const Detection& det = man.images[cp.image_index].detections[cp.detection_index];
    samples[i] = {det.stride_index, det.class_id,
                  extract_box_features(dataset.maps[cp.image_index], det.box, det.stride_index,
                                       cfg.roi)};
  });
  spdlog::debug("fit: {} correct predictions", samples.size());

  if (cfg.sdr) {
    bank.reducers().resize(Z);
    parallel_for(Z, cfg.threads, [&](std::size_t s) {
      Points feats;
      std::vector<std::uint32_t> labels;
      for (const auto& smp : samples) {
        if (smp.stride != s + 1) continue;
        feats.push_back(smp.feature);
        labels.push_back(smp.class_id);
      }
      if (feats.empty()) return;  // stride unused; features pass through unchanged
      SdrConfig sc = *cfg.sdr;
      sc.seed = cfg.sdr->seed + s;
      try {
        bank.reducers()[s] = train_reducer(feats, labels, sc);
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::Triplet || e.kind() == ErrorKind::Divergence) {
          raise(ErrorKind::Fit, "reducer for stride " + std::to_string(s + 1) + ": " + e.what());
        }
        throw;
      }
    });
    for (auto& smp : samples) smp.feature = bank.project(smp.feature, smp.stride);
  }

  if (cfg.distance == Distance::Cosine) {
    const auto before = samples.size();
    std::erase_if(samples, [](const Sample& s) { return is_zero(s.feature); });
    if (samples.size() != before) {
      spdlog::warn("fit: dropped {} zero feature vectors under cosine distance",
                   before - samples.size());
    }
    if (samples.empty()) raise(ErrorKind::Fit, "every fit feature vector is zero");
  }

  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(C) * Z);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    members[static_cast<std::size_t>(samples[i].stride - 1) * C + samples[i].class_id].push_back(i);
  }

  parallel_for(members.size(), cfg.threads, [&](std::size_t idx) {
    const auto& mem = members[idx];
    if (mem.empty()) return;
    const auto stride = static_cast<std::uint32_t>(idx / C + 1);
    const auto cls = static_cast<std::uint32_t>(idx % C);
    Points pts;
    pts.reserve(mem.size());
    for (auto m : mem) pts.push_back(samples[m].feature);
    ClusterSpec spec = cfg.cluster;
    spec.seed = cfg.cluster.seed + idx;
    ClusterResult res;
    try {
      res = fit_clusters(pts, spec, cfg.distance);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::InsufficientSamples && e.kind() != ErrorKind::AllNoise) throw;
      spdlog::debug("fit: cell ({}, {}) falls back to one centroid: {}", stride, cls, e.what());
      spec.method = ClusterMethod::One;
      res = fit_clusters(pts, spec, cfg.distance);
    }
    CellModel& cm = bank.cell(stride, cls);
    cm.centroids = std::move(res.centroids);
    cm.method_used = res.method_used;
    cm.silhouette = res.silhouette;
    cm.noise_count = static_cast<std::size_t>(
        std::count(res.assignments.begin(), res.assignments.end(), -1));
    cm.sample_count = mem.size();
  });

  std::vector<double> scores(samples.size());
  parallel_for(samples.size(), cfg.threads, [&](std::size_t i) {
    scores[i] = bank.score(samples[i].feature, samples[i].class_id, samples[i].stride);
  });

  bank.global_record() = pooled(scores, cfg.target_tpr);
  std::vector<std::vector<double>> per_class(C);
  for (std::size_t i = 0; i < samples.size(); ++i) per_class[samples[i].class_id].push_back(scores[i]);
  FitSummary sum;
  sum.correct_predictions = samples.size();
  for (std::uint32_t c = 0; c < C; ++c) {
    if (per_class[c].size() >= cfg.min_samples_per_cell) {
      bank.class_records()[c] = pooled(per_class[c], cfg.target_tpr);
    } else {
      ++sum.class_fallbacks;
    }
  }
  for (std::uint32_t s = 1; s <= Z; ++s) {
    for (std::uint32_t c = 0; c < C; ++c) {
      const auto& mem = members[static_cast<std::size_t>(s - 1) * C + c];
      CellModel& cm = bank.cell(s, c);
      CentroidBank::PooledRecord rec;
      if (mem.size() >= cfg.min_samples_per_cell) {
        std::vector<double> cs;
        cs.reserve(mem.size());
        for (auto m : mem) cs.push_back(scores[m]);
        rec = pooled(cs, cfg.target_tpr);
        cm.source = ThresholdSource::Cell;
      } else {
        ++sum.cell_fallbacks;
        if (bank.class_records()[c]) {
          rec = *bank.class_records()[c];
          cm.source = ThresholdSource::Class;
        } else {
          rec = bank.global_record();
          cm.source = ThresholdSource::Global;
        }
      }
      cm.threshold = rec.threshold;
      cm.id_score_min = rec.id_score_min;
      cm.id_score_max = rec.id_score_max;
    }
  }
  spdlog::info("fit: {} samples, {} cell fallbacks, {} class fallbacks", sum.correct_predictions,
               sum.cell_fallbacks, sum.class_fallbacks);
  if (summary) *summary = sum;
  return bank;
}

OodVerdict classify(const Detection& det, std::size_t detection_index,
                    const StrideFeatureMaps& maps, const CentroidBank& bank) {
  OodVerdict v;
  v.detection_index = detection_index;
  v.method_tag = "fmap";
  v.threshold_used = bank.threshold(det.stride_index, det.class_id);
  try {
    const auto f = bank.features(maps, det.box, det.stride_index);
    v.score = bank.score(f, det.class_id, det.stride_index);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::ZeroVector) throw;
    spdlog::warn("classify: zero feature vector for detection {} of {}; flagged OoD",
                 detection_index, maps.image_id);
    v.score = std::numeric_limits<double>::infinity();
  }
  v.is_ood = !(v.score <= v.threshold_used);
  return v;
}

}  // namespace fmapood
