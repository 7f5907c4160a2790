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


// The 20-image hand-built evaluation fixture and the values frozen from the
// Python reference evaluator in tests/oracles/metrics_reference.py.
#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "fmapood/metrics.hpp"
#include "fmapood/serialization.hpp"

namespace fmo_fixture {

struct MetricsFixture {
  std::uint32_t num_classes = 0;
  std::vector<fmapood::Scene> known;
  std::vector<fmapood::Scene> unknown;
};

inline fmapood::BoundingBox box_from(const fmapood::json& j) {
  return {j[0].get<float>(), j[1].get<float>(), j[2].get<float>(), j[3].get<float>()};
}

inline MetricsFixture load_metrics_fixture() {
  const auto doc = fmapood::read_json_file(std::string(FMO_FIXTURE_DIR) + "/metrics_fixture.json");
  MetricsFixture f;
  f.num_classes = doc.at("num_classes").get<std::uint32_t>();
  for (const auto& im : doc.at("images")) {
    std::vector<fmapood::GroundTruthObject> gt;
    for (const auto& g : im.at("ground_truth")) gt.push_back({box_from(g.at("box")), g.at("class_id").get<int>()});
    auto preds = [](const fmapood::json& arr) {
      std::vector<fmapood::ScoredBox> out;
      for (const auto& p : arr) {
        out.push_back({box_from(p.at("box")), p.at("score").get<double>(), p.at("class_id").get<int>()});
      }
      return out;
    };
    f.known.push_back({preds(im.at("known")), gt});
    f.unknown.push_back({preds(im.at("unknown")), gt});
  }
  return f;
}

struct Expected {
  std::vector<double> per_class_ap{0.6318401405357927, 0.47266313932980597, 0.2997755331088664};
  double map = 0.4680929376581551;
  std::size_t tp = 8, fp = 12, fn = 16;
  double u_pre = 0.4;
  double u_rec = 0.3333333333333333;
  double u_f1 = 0.3636363636363636;
  double u_ap = 0.17566137566137563;
  std::size_t a_ose = 12;
  double wi = 0.13698630136986312;
};

// Largest absolute deviation from the frozen values; infinity when a value is
// missing or a count differs.
inline double fixture_deviation(const fmapood::EvalReport& r, const Expected& e = {}) {
  double dev = 0.0;
  auto cmp = [&](const std::optional<double>& got, double want) {
    dev = got ? std::max(dev, std::abs(*got - want)) : INFINITY;
  };
  for (std::size_t c = 0; c < e.per_class_ap.size(); ++c) {
    cmp(c < r.per_class_ap.size() ? r.per_class_ap[c] : std::nullopt, e.per_class_ap[c]);
  }
  cmp(r.map_known, e.map);
  cmp(r.unknown.u_pre, e.u_pre);
  cmp(r.unknown.u_rec, e.u_rec);
  cmp(r.unknown.u_f1, e.u_f1);
  cmp(r.unknown.u_ap, e.u_ap);
  cmp(r.wi, e.wi);
  if (r.unknown.counts.tp != e.tp || r.unknown.counts.fp != e.fp || r.unknown.counts.fn != e.fn ||
      r.a_ose != e.a_ose) {
    dev = INFINITY;
  }
  return dev;
}

}  // namespace fmo_fixture
