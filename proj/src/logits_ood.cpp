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

#include "fmapood/logits_ood.hpp"

#include <algorithm>
#include <cmath>

#include "fmapood/errors.hpp"

namespace fmapood {

std::string_view to_string(LogitsMethod m) {
  switch (m) {
    case LogitsMethod::Msp: return "msp";
    case LogitsMethod::Energy: return "energy";
    case LogitsMethod::Odin: return "odin";
  }
  return "msp";
}

LogitsMethod parse_logits_method(std::string_view name) {
  if (name == "msp") return LogitsMethod::Msp;
  if (name == "energy") return LogitsMethod::Energy;
  if (name == "odin") return LogitsMethod::Odin;
  raise(ErrorKind::Config, "unknown logits method '" + std::string(name) + "'");
}

std::string_view to_string(ThresholdGranularity g) {
  return g == ThresholdGranularity::Global ? "global" : "per_class";
}

ThresholdGranularity parse_granularity(std::string_view name) {
  if (name == "global") return ThresholdGranularity::Global;
  if (name == "per_class") return ThresholdGranularity::PerClass;
  raise(ErrorKind::Config, "unknown threshold granularity '" + std::string(name) + "'");
}

double LogitsMethodConfig::effective_temperature() const {
  if (temperature) return *temperature;
  return method == LogitsMethod::Odin ? 1000.0 : 1.0;
}

void LogitsMethodConfig::validate() const {
  const double t = effective_temperature();
  if (!(t > 0.0) || !std::isfinite(t)) raise(ErrorKind::Config, "temperature must be > 0");
  if (!(target_tpr > 0.0 && target_tpr < 1.0)) {
    raise(ErrorKind::Config, "target_tpr must lie in (0, 1)");
  }
}

namespace {

void check_finite(std::span<const float> logits) {
  if (logits.empty()) raise(ErrorKind::Data, "empty logit vector");
  for (float v : logits) {
    if (!std::isfinite(v)) raise(ErrorKind::Data, "non-finite logit");
  }
}

double max_softmax(std::span<const float> logits, double temperature) {
  check_finite(logits);
  double mx = -INFINITY;
  for (float v : logits) mx = std::max(mx, static_cast<double>(v) / temperature);
  double denom = 0.0;
  for (float v : logits) denom += std::exp(static_cast<double>(v) / temperature - mx);
  // The largest term contributes exp(0) = 1 to the numerator.
  return 1.0 / denom;
}

}  // namespace

double msp_score(std::span<const float> logits) { return max_softmax(logits, 1.0); }

double odin_score(std::span<const float> logits, double temperature) {
  if (!(temperature > 0.0)) raise(ErrorKind::Config, "ODIN temperature must be > 0");
  return max_softmax(logits, temperature);
}

double energy_score(std::span<const float> logits) {
  check_finite(logits);
  double mx = -INFINITY;
  for (float v : logits) mx = std::max(mx, static_cast<double>(v));
  double acc = 0.0;
  for (float v : logits) acc += std::exp(static_cast<double>(v) - mx);
  return mx + std::log(acc);
}

double logits_score(std::span<const float> logits, const LogitsMethodConfig& cfg) {
  switch (cfg.method) {
    case LogitsMethod::Msp: return msp_score(logits);
    case LogitsMethod::Energy: return energy_score(logits);
    case LogitsMethod::Odin: return odin_score(logits, cfg.effective_temperature());
  }
  return msp_score(logits);
}

const ThresholdRecord& LogitsCalibration::record(std::uint32_t class_id) const {
  if (class_id < per_class.size() && per_class[class_id]) return *per_class[class_id];
  return global;
}

namespace {

ThresholdRecord make_record(const std::vector<double>& scores, double tpr) {
  ThresholdRecord r;
  r.threshold = quantile_linear(scores, 1.0 - tpr);
  const auto [mn, mx] = std::minmax_element(scores.begin(), scores.end());
  r.id_score_min = *mn;
  r.id_score_max = *mx;
  r.sample_count = scores.size();
  return r;
}

}  // namespace

LogitsCalibration calibrate_scores(std::span<const double> scores,
                                   std::span<const std::uint32_t> classes,
                                   std::uint32_t num_classes, const LogitsMethodConfig& cfg) {
  cfg.validate();
  if (scores.empty()) raise(ErrorKind::Fit, "no ID scores to calibrate on");
  if (scores.size() != classes.size()) raise(ErrorKind::Data, "scores and classes differ in length");
  LogitsCalibration cal;
  cal.config = cfg;
  cal.global = make_record({scores.begin(), scores.end()}, cfg.target_tpr);
  if (cfg.granularity == ThresholdGranularity::PerClass) {
    std::vector<std::vector<double>> by_class(num_classes);
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (classes[i] >= num_classes) raise(ErrorKind::Data, "class id out of range");
      by_class[classes[i]].push_back(scores[i]);
    }
    cal.per_class.resize(num_classes);
    for (std::uint32_t c = 0; c < num_classes; ++c) {
      if (!by_class[c].empty() && by_class[c].size() >= cfg.min_samples_per_class) {
        cal.per_class[c] = make_record(by_class[c], cfg.target_tpr);
      }
    }
  }
  return cal;
}

LogitsCalibration calibrate_logits(const DatasetManifest& manifest, const LogitsMethodConfig& cfg,
                                   double iou_match_threshold) {
  cfg.validate();
  const auto correct = collect_correct_predictions(manifest, iou_match_threshold);
  std::vector<double> scores;
  std::vector<std::uint32_t> classes;
  scores.reserve(correct.size());
  classes.reserve(correct.size());
  for (const auto& cp : correct) {
    const Detection& det = manifest.images[cp.image_index].detections[cp.detection_index];
    scores.push_back(logits_score(det.logits, cfg));
    classes.push_back(det.class_id);
  }
  return calibrate_scores(scores, classes, manifest.num_classes, cfg);
}

OodVerdict classify_logits(const Detection& det, std::size_t detection_index,
                           const LogitsCalibration& calibration) {
  OodVerdict v;
  v.detection_index = detection_index;
  v.method_tag = std::string(to_string(calibration.config.method));
  v.score = logits_score(det.logits, calibration.config);
  v.threshold_used = calibration.record(det.class_id).threshold;
  v.is_ood = v.score < v.threshold_used;
  return v;
}

}  // namespace fmapood
