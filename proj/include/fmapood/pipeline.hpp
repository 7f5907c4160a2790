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
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fmapood/eul.hpp"
#include "fmapood/fmap.hpp"
#include "fmapood/fusion.hpp"
#include "fmapood/logits_ood.hpp"
#include "fmapood/metrics.hpp"
#include "fmapood/serialization.hpp"

namespace fmapood {

struct FusionSpec {
  FusionStrategy strategy = FusionStrategy::And;
  std::string method_a = "fmap";
  std::string method_b = "msp";
};

/// Declarative description of one run. Relative paths resolve against
/// base_dir (the directory of the config file).
struct RunConfig {
  std::filesystem::path base_dir;
  std::string fit_manifest;
  std::vector<std::string> eval_manifests;
  std::string method = "fmap";  // fmap | msp | energy | odin | fusion
  FitConfig fit;
  std::optional<EulConfig> eul;
  LogitsMethodConfig logits;
  FusionSpec fusion;
  std::vector<double> confidence_thresholds = {0.001, 0.005, 0.01, 0.05, 0.1, 0.15};
  double wi_recall = 0.8;
  AoseMode aose_mode = AoseMode::GroundTruth;
  std::string out_dir = "out";
  std::optional<std::string> bank_path;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  json runs = json::array();  // merge patches for sweep
  json document;              // the source document, patches apply to it

  std::filesystem::path resolve(const std::string& p) const;
  /// Methods whose verdicts the run needs (one, or the fusion pair).
  std::vector<std::string> components() const;
  bool needs_fmap() const;
  void validate() const;
};

RunConfig run_config_from_json(const json& doc, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

/// Command-line overrides; unset fields keep the config values.
struct RunOptions {
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<std::string> bank_path;
};

/// Applies overrides to the document and re-parses it, so that the seed
/// reaches every seeded component.
RunConfig apply_options(const RunConfig& cfg, const RunOptions& opts);

struct FittedModels {
  std::optional<CentroidBank> fmap;
  std::map<LogitsMethod, LogitsCalibration> logits;
  FitSummary summary;
};

FittedModels fit_models(const Dataset& fit_set, const RunConfig& cfg);
json to_json(const FittedModels& models, const RunConfig& cfg);
FittedModels models_from_json(const json& j, const std::string& where = "bank");

/// Threshold-independent per-image work: verdicts for every detection and,
/// with EUL on, entropy-ranked candidates before suppression.
struct ImageVerdicts {
  std::vector<bool> is_ood;
  std::vector<double> unknown_rank;  // ranking score if flagged unknown
  std::vector<UnknownProposal> proposals;
};

std::vector<ImageVerdicts> score_dataset(const Dataset& ds, const FittedModels& models,
                                         const RunConfig& cfg);

/// Known and unknown scenes of a dataset at one confidence threshold.
struct SceneSplit {
  std::vector<Scene> known;
  std::vector<Scene> unknown;
};
SceneSplit split_scenes(const Dataset& ds, const std::vector<ImageVerdicts>& verdicts,
                        const RunConfig& cfg, double threshold);

struct ThresholdResult {
  double threshold = 0.0;
  std::vector<EvalReport> per_dataset;
  std::optional<double> u_f1_sum;
};

std::vector<ThresholdResult> evaluate_run(const std::vector<const Dataset*>& eval_sets,
                                          const FittedModels& models, const RunConfig& cfg);

/// Sum of U-F1 over the two evaluation sets, or the single set's U-F1.
std::optional<double> u_f1_sum(const std::vector<EvalReport>& reports);

void cmd_fit(const RunConfig& cfg);
void cmd_eval(const RunConfig& cfg);
void cmd_sweep(const RunConfig& cfg);

/// Synthetic data generation. The document holds "out_dir", "seed",
/// "base" (synth config) and optional "datasets" (patches, each with a
/// "name"); every dataset shares the base class means.
void cmd_synth(const json& doc, const std::filesystem::path& base_dir, const RunOptions& opts);

inline const std::vector<std::string> kSweepColumns = {
    "method", "distance", "cluster", "sdr", "eul", "fusion", "conf_threshold", "mAP",
    "U-AP",   "U-PRE",    "U-REC",   "U-F1", "A-OSE", "WI", "U-F1_SUM", "status"};

}  // namespace fmapood
