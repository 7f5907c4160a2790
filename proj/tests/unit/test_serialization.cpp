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


#include <cmath>
#include <fstream>
#include <limits>

#include "doctest.h"
#include "fmapood/errors.hpp"
#include "fmapood/serialization.hpp"
#include "fmapood/synth.hpp"
#include "helpers.hpp"

using namespace fmapood;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::Internal;
}

Dataset small_set(std::uint64_t seed) {
  SynthConfig s;
  s.images = 80;
  s.num_classes = 3;
  s.seed = seed;
  return generate(s);
}

}  // namespace

TEST_CASE("bank JSON round-trip preserves scores and thresholds") {
  const Dataset ds = small_set(3);
  FitConfig cfg;
  cfg.distance = Distance::Cosine;
  cfg.cluster.method = ClusterMethod::KMeans;
  cfg.cluster.k_grid = {2, 3};
  cfg.min_samples_per_cell = 5;
  SdrConfig sdr;
  sdr.out_dim = 4;
  sdr.hidden_dims = {8};
  sdr.epochs = 2;
  cfg.sdr = sdr;
  const CentroidBank bank = fit(ds, cfg);
  REQUIRE(bank.uses_sdr());

  const json j = to_json(bank);
  const CentroidBank back = bank_from_json(json::parse(j.dump()));
  CHECK(to_json(back) == j);
  for (std::size_t i = 0; i < 10; ++i) {
    const auto& rec = ds.manifest.images[i];
    for (std::size_t k = 0; k < rec.detections.size(); ++k) {
      const auto& d = rec.detections[k];
      const auto fa = bank.features(ds.maps[i], d.box, d.stride_index);
      const auto fb = back.features(ds.maps[i], d.box, d.stride_index);
      CHECK(fa == fb);
      CHECK(bank.score(fa, d.class_id, d.stride_index) == back.score(fb, d.class_id, d.stride_index));
    }
  }
  for (std::uint32_t s = 1; s <= 3; ++s) {
    for (std::uint32_t c = 0; c < 3; ++c) CHECK(bank.threshold(s, c) == back.threshold(s, c));
  }
}

TEST_CASE("reducer JSON round-trip") {
  const Reducer r = Reducer::initialized(6, {5}, 3, 11);
  const Reducer back = reducer_from_json(json::parse(to_json(r).dump()));
  const std::vector<float> x = {0.1F, -2.0F, 3.5F, 0.0F, 1.0F, -0.25F};
  CHECK(r.transform(x) == back.transform(x));
  json bad = to_json(r);
  bad["layers"][0]["weights"].erase(0);
  CHECK(kind_of([&] { reducer_from_json(bad); }) == ErrorKind::Format);
}

TEST_CASE("logits calibration round-trip") {
  LogitsMethodConfig cfg;
  cfg.method = LogitsMethod::Energy;
  cfg.granularity = ThresholdGranularity::PerClass;
  cfg.min_samples_per_class = 3;
  const std::vector<double> scores = {0.1, 0.4, 0.3, 0.9, 0.8, 0.7, 0.2};
  const std::vector<std::uint32_t> classes = {0, 0, 0, 1, 1, 1, 1};
  const auto cal = calibrate_scores(scores, classes, 3, cfg);
  const auto back = calibration_from_json(json::parse(to_json(cal).dump()));
  CHECK(to_json(back) == to_json(cal));
  CHECK(back.record(0).threshold == cal.record(0).threshold);
  CHECK(back.record(2).threshold == cal.global.threshold);
}

TEST_CASE("config readers round-trip and reject unknown keys") {
  FitConfig f;
  f.distance = Distance::L1;
  f.cluster.method = ClusterMethod::Density;
  f.target_tpr = 0.9;
  json fj = to_json(f);
  fj.erase("sdr");
  CHECK(to_json(fit_config_from_json(fj)).dump() == to_json(f).dump());

  SynthConfig s;
  s.ood_shift = 3.5;
  s.name = "x";
  CHECK(to_json(synth_config_from_json(to_json(s))) == to_json(s));

  EulConfig e;
  e.connectivity = 4;
  CHECK(to_json(eul_config_from_json(to_json(e))) == to_json(e));

  SdrConfig sdr;
  sdr.hidden_dims = {7, 3};
  CHECK(to_json(sdr_config_from_json(to_json(sdr))) == to_json(sdr));

  LogitsMethodConfig l;
  l.method = LogitsMethod::Odin;
  l.temperature = 10.0;
  CHECK(to_json(logits_config_from_json(to_json(l))) == to_json(l));

  try {
    fit_config_from_json(json{{"distanse", "l2"}}, "config.fit");
    FAIL("accepted an unknown key");
  } catch (const Error& err) {
    CHECK(err.kind() == ErrorKind::Config);
    CHECK(std::string(err.what()).find("distanse") != std::string::npos);
  }
  CHECK(kind_of([] { eul_config_from_json(json{{"connectivity", 6}}); }) == ErrorKind::Config);
  CHECK(kind_of([] { cluster_spec_from_json(json{{"method", "spectral"}}); }) == ErrorKind::Config);
  CHECK(kind_of([] { synth_config_from_json(json{{"images", "many"}}); }) == ErrorKind::Config);
}

TEST_CASE("eval report serialises absent values as null") {
  EvalReport r;
  r.per_class_ap = {0.5, std::nullopt};
  r.a_ose = 3;
  const json j = to_json(r);
  CHECK(j["mAP"].is_null());
  CHECK(j["U-F1"].is_null());
  CHECK(j["WI"].is_null());
  CHECK(j["per_class_ap"][0] == 0.5);
  CHECK(j["per_class_ap"][1].is_null());
  CHECK(j["A-OSE"] == 3);
}

TEST_CASE("json files") {
  fmo_test::TempDir dir("ser");
  const json j = {{"a", 1}, {"b", {1.5, 2.5}}};
  write_json_file(dir.path() / "x.json", j);
  CHECK(read_json_file(dir.path() / "x.json") == j);
  CHECK(kind_of([&] { read_json_file(dir.path() / "missing.json"); }) == ErrorKind::Io);
  {
    std::ofstream(dir.path() / "bad.json") << "{\"a\": ";
  }
  CHECK(kind_of([&] { read_json_file(dir.path() / "bad.json"); }) == ErrorKind::Format);
}
