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

#include <filesystem>
#include <string>

#include "json.hpp"

#include "fmapood/eul.hpp"
#include "fmapood/fmap.hpp"
#include "fmapood/logits_ood.hpp"
#include "fmapood/metrics.hpp"
#include "fmapood/sdr.hpp"
#include "fmapood/synth.hpp"

namespace fmapood {

using nlohmann::json;

// Config readers fill unspecified keys with defaults and reject unknown keys
// with a ConfigError naming the offending path.
RoiAlignConfig roi_config_from_json(const json& j, const std::string& where = "roi");
ClusterSpec cluster_spec_from_json(const json& j, const std::string& where = "cluster");
SdrConfig sdr_config_from_json(const json& j, const std::string& where = "sdr");
FitConfig fit_config_from_json(const json& j, const std::string& where = "fit");
EulConfig eul_config_from_json(const json& j, const std::string& where = "eul");
LogitsMethodConfig logits_config_from_json(const json& j, const std::string& where = "logits");
SynthConfig synth_config_from_json(const json& j, const std::string& where = "synth");

json to_json(const RoiAlignConfig& c);
json to_json(const ClusterSpec& c);
json to_json(const SdrConfig& c);
json to_json(const FitConfig& c);
json to_json(const EulConfig& c);
json to_json(const LogitsMethodConfig& c);
json to_json(const SynthConfig& c);

json to_json(const Reducer& r);
Reducer reducer_from_json(const json& j, const std::string& where = "reducer");

json to_json(const CentroidBank& bank);
CentroidBank bank_from_json(const json& j, const std::string& where = "fmap");

json to_json(const ThresholdRecord& r);
json to_json(const LogitsCalibration& c);
LogitsCalibration calibration_from_json(const json& j, const std::string& where = "logits");

/// Optional doubles serialise as null when absent.
json to_json(const EvalReport& r);

json read_json_file(const std::filesystem::path& path);
/// Writes `j` indented by two spaces with a trailing newline.
void write_json_file(const std::filesystem::path& path, const json& j);

}  // namespace fmapood
