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


// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Usage: fmapood_acceptance SCRATCH_DIR

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <spdlog/fmt/fmt.h>
#include <spdlog/spdlog.h>

#include "../unit/metrics_fixture.hpp"
#include "../unit/oracles.hpp"
#include "fmapood/errors.hpp"
#include "fmapood/eul.hpp"
#include "fmapood/fmap.hpp"
#include "fmapood/fusion.hpp"
#include "fmapood/logits_ood.hpp"
#include "fmapood/metrics.hpp"
#include "fmapood/pipeline.hpp"
#include "fmapood/roi_align.hpp"
#include "fmapood/sdr.hpp"
#include "fmapood/synth.hpp"

using namespace fmapood;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

fs::path g_scratch;

// ---- calibration ----------------------------------------------------------

// Per-cell ID fraction among correct predictions.
struct CellTally {
  std::size_t id = 0;
  std::size_t total = 0;
};

std::map<std::pair<std::uint32_t, std::uint32_t>, CellTally> tally_cells(const Dataset& ds,
                                                                         const CentroidBank& bank) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, CellTally> cells;
  for (const auto& cp : collect_correct_predictions(ds.manifest, 0.5)) {
    const auto& det = ds.manifest.images[cp.image_index].detections[cp.detection_index];
    const auto v = classify(det, cp.detection_index, ds.maps[cp.image_index], bank);
    auto& t = cells[{det.stride_index, det.class_id}];
    t.id += v.is_ood ? 0 : 1;
    ++t.total;
  }
  return cells;
}

SynthConfig calibration_synth(std::uint64_t seed, std::uint32_t images) {
  SynthConfig s;
  s.num_classes = 5;
  s.stride_count = 3;
  s.images = images;
  s.min_objects = 10;
  s.max_objects = 16;
  s.unknown_fraction = 0.0;
  s.seed = seed;
  return s;
}

Outcome calibration() {
  const auto t0 = Clock::now();
  SynthConfig s = calibration_synth(101, 1400);
  s.id_cluster_means = resolve_means(s);
  const Dataset ds = generate(s);
  FitConfig fc;
  fc.distance = Distance::L2;
  const CentroidBank bank = fit(ds, fc);

  std::size_t min_n = SIZE_MAX;
  double worst = 0.0;
  for (const auto& [cell, t] : tally_cells(ds, bank)) {
    min_n = std::min(min_n, t.total);
    worst = std::max(worst, std::abs(static_cast<double>(t.id) / t.total - 0.95));
  }
  const double fit_seconds = seconds_since(t0);

  // Pooled check on an independent draw with the same means.
  SynthConfig h = s;
  h.seed = 202;
  h.images = 500;
  const Dataset held = generate(h);
  std::size_t hid = 0, htotal = 0;
  for (const auto& [cell, t] : tally_cells(held, bank)) {
    hid += t.id;
    htotal += t.total;
  }
  const double held_frac = static_cast<double>(hid) / htotal;
  const double total_seconds = seconds_since(t0);

  Outcome o;
  o.pass = min_n >= 1000 && worst <= 0.015 && htotal >= 5000 && std::abs(held_frac - 0.95) <= 0.015 &&
           total_seconds < 30.0;
  o.detail = fmt::format(
      "15 cells, min n {}, max |ID fraction - 0.95| {:.4f}; held-out pooled {:.4f} over {}; {:.1f} s "
      "(fit population {:.1f} s)",
      min_n, worst, held_frac, htotal, total_seconds, fit_seconds);
  return o;
}

// ---- separation -----------------------------------------------------------

Outcome separation() {
  const auto t0 = Clock::now();
  SynthConfig base = calibration_synth(303, 600);
  base.id_cluster_means = resolve_means(base);
  const Dataset fit_set = generate(base);
  const RunConfig cfg = run_config_from_json(
      json{{"method", "fmap"},
           {"fit", {{"distance", "l2"}, {"cluster", {{"method", "one"}}}}},
           {"confidence_thresholds", {0.001}}},
      ".");
  const FittedModels models = fit_models(fit_set, cfg);

  auto unknown_recall = [&](double shift, std::uint64_t seed, std::size_t& n_unknown) {
    SynthConfig m = base;
    m.ood_shift = shift;
    m.unknown_fraction = 0.5;
    m.images = 400;
    m.seed = seed;
    const Dataset mixed = generate(m);
    const EvalReport r = evaluate_run({&mixed}, models, cfg)[0].per_dataset[0];
    n_unknown = r.unknown_gt;
    return r.unknown.u_rec.value_or(-1.0);
  };
  std::size_t n8 = 0, n0 = 0;
  const double rec8 = unknown_recall(8.0, 404, n8);
  const double rec0 = unknown_recall(0.0, 505, n0);
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = rec8 >= 0.9 && rec0 >= 0.03 && rec0 <= 0.08 && n8 >= 2000 && n0 >= 2000 && secs < 60.0;
  o.detail = fmt::format("U-REC {:.4f} at shift 8 ({} unknowns), {:.4f} at shift 0 ({} unknowns); {:.1f} s",
                         rec8, n8, rec0, n0, secs);
  return o;
}

// ---- RoIAlign -------------------------------------------------------------

Outcome roi_align_oracle() {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<float> val(-5.0F, 5.0F);
  double worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const std::uint32_t c = 1 + rng() % 3, h = 1 + rng() % 8, w = 1 + rng() % 8;
    Tensor t({c, h, w});
    for (auto& v : t.data) v = val(rng);
    const float scale = 1.0F / static_cast<float>(1U << (rng() % 4));
    std::uniform_real_distribution<float> px(-1.5F / scale, (static_cast<float>(w) + 1.5F) / scale);
    std::uniform_real_distribution<float> py(-1.5F / scale, (static_cast<float>(h) + 1.5F) / scale);
    float x0 = px(rng), x1 = px(rng), y0 = py(rng), y1 = py(rng);
    if (x1 < x0) std::swap(x0, x1);
    if (y1 < y0) std::swap(y0, y1);
    x1 += 0.05F / scale;
    y1 += 0.05F / scale;
    RoiAlignConfig cfg;
    cfg.output_height = 1 + rng() % 3;
    cfg.output_width = 1 + rng() % 3;
    cfg.sampling_ratio = 1 + rng() % 3;
    cfg.aligned = rng() % 4 != 0;
    const BoundingBox b{x0, y0, x1, y1};
    const auto got = roi_align(t, b, scale, cfg);
    const auto want = fmo_oracle::roi_align(t, b, scale, cfg);
    if (got.size() != want.size()) return {false, fmt::format("case {}: length mismatch", trial)};
    for (std::size_t i = 0; i < got.size(); ++i) {
      worst = std::max(worst, std::abs(static_cast<double>(got[i]) - want[i]));
    }
  }
  return {worst <= 1e-5, fmt::format("500 cases, max abs deviation {:.3g}", worst)};
}

// ---- Otsu -----------------------------------------------------------------

Outcome otsu_oracle() {
  std::mt19937_64 rng(11);
  int mismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<float> v(6 + rng() % 59);
    do {
      switch (trial % 3) {
        case 0: {
          std::uniform_real_distribution<float> u(-10.0F, 10.0F);
          for (auto& x : v) x = u(rng);
          break;
        }
        case 1: {
          std::normal_distribution<float> n(0.0F, 1.0F);
          for (auto& x : v) x = n(rng) + (rng() % 2 ? 6.0F : 0.0F);
          break;
        }
        default:
          for (auto& x : v) x = static_cast<float>(rng() % 7);
      }
    } while (*std::min_element(v.begin(), v.end()) == *std::max_element(v.begin(), v.end()));
    const auto r = otsu(v);
    const auto o = fmo_oracle::otsu(v);
    mismatches += (r.bin != o.bin || r.threshold != o.threshold) ? 1 : 0;
  }
  return {mismatches == 0, fmt::format("200 maps of 6-64 values, {} mismatches", mismatches)};
}

// ---- connected components -------------------------------------------------

Outcome components_oracle() {
  std::mt19937_64 rng(13);
  int mismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int h = 1 + static_cast<int>(rng() % 32), w = 1 + static_cast<int>(rng() % 32);
    const double density = std::uniform_real_distribution<double>(0.1, 0.7)(rng);
    std::vector<std::uint8_t> m(static_cast<std::size_t>(h * w));
    for (auto& x : m) x = std::uniform_real_distribution<double>(0, 1)(rng) < density;
    for (std::uint32_t conn : {4U, 8U}) {
      const auto got = regions_to_boxes(m, h, w, conn, 1, 1);
      const auto want = fmo_oracle::components(m, h, w, static_cast<int>(conn));
      bool same = got.size() == want.size();
      for (std::size_t i = 0; same && i < got.size(); ++i) {
        const BoundingBox b{static_cast<float>(want[i].min_c), static_cast<float>(want[i].min_r),
                            static_cast<float>(want[i].max_c + 1), static_cast<float>(want[i].max_r + 1)};
        same = got[i] == b;
      }
      mismatches += same ? 0 : 1;
    }
  }
  return {mismatches == 0, fmt::format("200 maps up to 32x32, 4- and 8-connectivity, {} mismatches", mismatches)};
}

// ---- entropy --------------------------------------------------------------

Outcome entropy() {
  double uniform_dev = 0.0, delta_max = 0.0;
  for (int c = 2; c <= 50; ++c) {
    const std::vector<double> u(c, 1.0 / c);
    uniform_dev = std::max(uniform_dev, std::abs(normalized_entropy(u).value_or(NAN) - 1.0));
    std::vector<double> d(c, 0.0);
    d[static_cast<std::size_t>(c - 1)] = 1.0;
    delta_max = std::max(delta_max, normalized_entropy(d).value_or(INFINITY));
    std::fill(d.begin(), d.end(), 1e-12);
    d[0] = 1.0;
    delta_max = std::max(delta_max, normalized_entropy(d).value_or(INFINITY));
  }
  return {uniform_dev <= 1e-9 && delta_max <= 1e-6,
          fmt::format("C in 2..50: max |H_uniform - 1| {:.3g}, max H_delta {:.3g}", uniform_dev, delta_max)};
}

// ---- EUL ------------------------------------------------------------------

Outcome eul_planted() {
  SynthConfig s;
  s.images = 80;
  s.seed = 21;
  const Dataset fit_set = generate(s);
  json doc = {{"method", "fmap"}, {"confidence_thresholds", {0.5}}};
  const RunConfig plain = run_config_from_json(doc, ".");
  doc["eul"] = {{"top_k", 1}};
  const RunConfig with_eul = run_config_from_json(doc, ".");
  const FittedModels m_plain = fit_models(fit_set, plain);
  const FittedModels m_eul = fit_models(fit_set, with_eul);

  int recovered = 0, paired_ok = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    PlantConfig pc;
    pc.blobs = 1;
    pc.seed = seed;
    const Dataset scene = plant_eul_scene(pc);
    const auto& gt = scene.manifest.images[0].ground_truth[0].box;
    const auto props = eul_propose(scene.maps[0], {}, *m_eul.fmap, with_eul.eul.value());
    if (props.size() == 1 && iou(props[0].box, gt) >= 0.5) ++recovered;
    const auto r0 = evaluate_run({&scene}, m_plain, plain)[0].per_dataset[0];
    const auto r1 = evaluate_run({&scene}, m_eul, with_eul)[0].per_dataset[0];
    if (r0.unknown.u_rec && r1.unknown.u_rec && *r1.unknown.u_rec >= *r0.unknown.u_rec) ++paired_ok;
  }
  return {recovered >= 95 && paired_ok == 100,
          fmt::format("{}/100 planted blobs recovered at IoU >= 0.5 with top_k 1; "
                      "U-REC(with) >= U-REC(without) on {}/100 scenes",
                      recovered, paired_ok)};
}

// ---- SDR ------------------------------------------------------------------

Outcome sdr() {
  double worst_grad = 0.0;
  std::size_t params = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto g = fmo_oracle::gradient_check(5, 4, 2, seed);
    worst_grad = std::max(worst_grad, g.max_rel_error);
    params = g.parameters;
  }

  std::mt19937_64 rng(5);
  std::normal_distribution<float> n(0.0F, 3.0F);
  double min_loss = INFINITY;
  for (int trial = 0; trial < 200; ++trial) {
    const auto net = Reducer::initialized(6, {5}, 3, rng());
    Points x(8, std::vector<float>(6));
    for (auto& p : x)
      for (auto& v : p) v = n(rng);
    std::vector<Triplet> ts;
    for (int k = 0; k < 6; ++k) ts.push_back({rng() % 8, rng() % 8, rng() % 8});
    const double margin = std::uniform_real_distribution<double>(0.0, 2.0)(rng);
    min_loss = std::min(min_loss, triplet_loss(net, x, ts, margin));
  }

  auto separable = [](std::size_t per, std::uint64_t seed, Points& x, std::vector<std::uint32_t>& y) {
    std::mt19937_64 r(seed);
    std::normal_distribution<float> g(0.0F, 1.0F);
    for (std::uint32_t c = 0; c < 2; ++c) {
      for (std::size_t i = 0; i < per; ++i) {
        std::vector<float> p(64);
        for (auto& v : p) v = g(r);
        p[0] += c == 0 ? -4.0F : 4.0F;
        x.push_back(p);
        y.push_back(c);
      }
    }
  };
  Points x, hx;
  std::vector<std::uint32_t> y, hy;
  separable(150, 1, x, y);
  separable(60, 77, hx, hy);
  SdrConfig cfg;
  cfg.out_dim = 2;  // other settings at their defaults
  cfg.seed = 4;
  const Reducer net = train_reducer(x, y, cfg);
  Points e;
  for (const auto& p : hx) e.push_back(net.transform(p));
  double inter = 0, intra = 0;
  std::size_t ni = 0, na = 0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    for (std::size_t j = i + 1; j < e.size(); ++j) {
      const double d = distance(e[i], e[j], Distance::L2);
      (hy[i] == hy[j] ? intra : inter) += d;
      ++(hy[i] == hy[j] ? na : ni);
    }
  }
  const double ratio = (inter / ni) / (intra / na);
  return {worst_grad <= 1e-4 && min_loss >= 0.0 && ratio >= 3.0,
          fmt::format("gradient max rel error {:.3g} over {} parameters x 10 nets; min loss {:.3g} over 200 "
                      "draws; held-out embedding ratio {:.2f}",
                      worst_grad, params, min_loss, ratio)};
}

// ---- metrics --------------------------------------------------------------

Outcome metrics() {
  const std::vector<GroundTruthObject> gt = {{{0, 0, 10, 10}, 0}, {{20, 20, 30, 30}, 0}};
  const std::vector<Scene> three = {
      {{{{0, 0, 10, 10}, 0.9, 0}, {{50, 50, 60, 60}, 0.8, 0}, {{20, 20, 30, 30}, 0.7, 0}}, gt}};
  const auto ap = average_precision(three, 0);
  const bool ap_exact = ap && *ap == 5.0 / 6.0;

  const auto fx = fmo_fixture::load_metrics_fixture();
  const EvalReport r = evaluate(fx.known, fx.unknown, fx.num_classes);
  const double dev = fmo_fixture::fixture_deviation(r);

  std::mt19937_64 rng(17);
  double f1_dev = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    UnknownCounts c{rng() % 500, rng() % 500, rng() % 500};
    if (c.tp + c.fn == 0) c.fn = 1;
    const auto m = unknown_rates(c);
    const double want = 2.0 * c.tp / (2.0 * c.tp + c.fp + c.fn);
    if (!m.u_f1) {
      f1_dev = INFINITY;
      continue;
    }
    f1_dev = std::max(f1_dev, std::abs(*m.u_f1 - want));
    if (m.u_pre && m.u_rec && (*m.u_pre + *m.u_rec) > 0) {
      const double hm = 2 * *m.u_pre * *m.u_rec / (*m.u_pre + *m.u_rec);
      f1_dev = std::max(f1_dev, std::abs(*m.u_f1 - hm));
    }
  }
  return {ap_exact && dev <= 1e-9 && f1_dev <= 1e-12,
          fmt::format("AP {} (5/6 exact: {}); 20-image fixture max deviation {:.3g}; "
                      "U-F1 identity max deviation {:.3g} over 1000 triples",
                      ap ? fmt::format("{:.17g}", *ap) : "absent", ap_exact, dev, f1_dev)};
}

// ---- fusion ---------------------------------------------------------------

Outcome fusion() {
  auto verdict = [](bool ood) {
    OodVerdict v;
    v.is_ood = ood;
    return v;
  };
  int table_ok = 0;
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      table_ok += fuse_hard(verdict(a), verdict(b), FusionStrategy::And) == (a && b);
      table_ok += fuse_hard(verdict(a), verdict(b), FusionStrategy::Or) == (a || b);
    }
  }
  const ScoreRecord hi{0.5, 0.2, 0.9};
  const ScoreRecord lo{10.0, 0.0, 20.0};
  int boundary_ok = 0;
  boundary_ok += fuse_score(0.5, hi, Orientation::HighIsId, 10.0, lo, Orientation::LowIsId);
  boundary_ok += fusion_score(0.5, hi, Orientation::HighIsId) == 0.0;
  boundary_ok += fusion_score(10.0, lo, Orientation::LowIsId) == 0.0;
  boundary_ok += fusion_score(0.9, hi, Orientation::HighIsId) == 1.0;
  boundary_ok += fusion_score(0.2, hi, Orientation::HighIsId) == -1.0;
  boundary_ok += fusion_score(100.0, hi, Orientation::HighIsId) == 1.0;
  boundary_ok += fusion_score(-100.0, hi, Orientation::HighIsId) == -1.0;
  boundary_ok += fusion_score(0.0, lo, Orientation::LowIsId) == 1.0;
  boundary_ok += fusion_score(-5.0, lo, Orientation::LowIsId) == 1.0;
  boundary_ok += fusion_score(20.0, lo, Orientation::LowIsId) == -1.0;
  boundary_ok += fusion_score(1e12, lo, Orientation::LowIsId) == -1.0;
  return {table_ok == 8 && boundary_ok == 11,
          fmt::format("truth tables {}/8; SCORE boundary and clipping cases {}/11", table_ok, boundary_ok)};
}

// ---- logits ---------------------------------------------------------------

Outcome logits() {
  std::mt19937_64 rng(19);
  int odin_mismatch = 0;
  std::normal_distribution<float> n(0.0F, 5.0F);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<float> z(2 + rng() % 49);
    for (auto& v : z) v = n(rng);
    odin_mismatch += odin_score(z, 1.0) != msp_score(z);
  }

  double energy_dev = 0.0;
  std::uniform_real_distribution<float> big(-1000.0F, 1000.0F);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<float> z(2 + rng() % 49);
    for (auto& v : z) v = big(rng);
    if (trial % 2 == 0) {
      for (auto& v : z) v = std::copysign(1000.0F, v) - std::abs(v) * 1e-3F;
    }
    long double acc = 0.0L;
    for (float v : z) acc += std::exp(static_cast<long double>(v));
    const long double want = std::log(acc);
    energy_dev = std::max(energy_dev, static_cast<double>(std::abs(energy_score(z) - want)));
  }

  double shift_dev = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<float> z(2 + rng() % 49);
    // Grid values and integer shifts keep the shifted floats exact.
    for (auto& v : z) v = static_cast<float>(static_cast<int>(rng() % 2049) - 1024) / 64.0F;
    const float c = static_cast<float>(static_cast<int>(rng() % 201) - 100);
    std::vector<float> zc(z);
    for (auto& v : zc) v += c;
    shift_dev = std::max(shift_dev, std::abs(msp_score(zc) - msp_score(z)));
    shift_dev = std::max(shift_dev, std::abs(odin_score(zc, 1000.0) - odin_score(z, 1000.0)));
    shift_dev = std::max(shift_dev, std::abs(odin_score(zc, 3.5) - odin_score(z, 3.5)));
  }
  return {odin_mismatch == 0 && energy_dev <= 1e-9 && shift_dev <= 1e-12,
          fmt::format("odin(T=1) != msp on {}/1000 vectors; energy max deviation {:.3g} at |z| <= 1000; "
                      "shift invariance max deviation {:.3g}",
                      odin_mismatch, energy_dev, shift_dev)};
}

// ---- Pareto ---------------------------------------------------------------

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out(1);
  for (char ch : line) {
    if (ch == ',') {
      out.emplace_back();
    } else if (ch != '\r') {
      out.back() += ch;
    }
  }
  return out;
}

Outcome pareto() {
  std::mt19937_64 rng(23);
  int random_mismatch = 0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ParetoPoint> pts(100);
    // Coarse grid so that ties and duplicates occur.
    for (auto& p : pts) p = {static_cast<double>(rng() % 30) / 30.0, static_cast<double>(rng() % 30) / 15.0};
    std::vector<std::size_t> want;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      bool dominated = false;
      for (std::size_t j = 0; j < pts.size() && !dominated; ++j) {
        dominated = pts[j].map >= pts[i].map && pts[j].u_f1_sum >= pts[i].u_f1_sum &&
                    (pts[j].map > pts[i].map || pts[j].u_f1_sum > pts[i].u_f1_sum);
      }
      if (!dominated) want.push_back(i);
    }
    std::stable_sort(want.begin(), want.end(),
                     [&](std::size_t a, std::size_t b) { return pts[a].map > pts[b].map; });
    random_mismatch += pareto_front(pts) != want;
  }

  std::ifstream in(std::string(FMO_FIXTURE_DIR) + "/appendix_a.csv");
  std::string line;
  std::getline(in, line);
  const auto header = split_csv(line);
  auto col = [&](const std::string& name) {
    return static_cast<std::size_t>(std::find(header.begin(), header.end(), name) - header.begin());
  };
  const std::size_t map_c = col("mix_mAP"), ood_c = col("ood_U-F1"), mix_c = col("mix_U-F1");
  std::vector<ParetoPoint> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    rows.push_back({std::stod(f.at(map_c)), std::stod(f.at(ood_c)) + std::stod(f.at(mix_c))});
  }
  std::set<std::size_t> front;
  for (auto i : pareto_front(rows)) front.insert(i + 1);
  const std::set<std::size_t> expected = {34, 36, 37, 38, 39, 40, 41, 42, 43, 44};
  std::string got;
  for (auto i : front) got += (got.empty() ? "" : " ") + std::to_string(i);
  return {random_mismatch == 0 && front == expected,
          fmt::format("random sets {}/20 equal to the pairwise oracle (100 points each); appendix rows "
                      "{{{}}} of {}",
                      20 - random_mismatch, got, rows.size())};
}

// ---- determinism ----------------------------------------------------------

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    files[fs::relative(e.path(), root).generic_string()] = ss.str();
  }
  return files;
}

Outcome determinism() {
  const json synth_doc = {
      {"out_dir", "data"},
      {"seed", 31},
      {"base", {{"images", 60}, {"num_classes", 3}}},
      {"datasets",
       {{{"name", "fitset"}, {"unknown_fraction", 0.0}},
        {{"name", "mixed"}, {"unknown_fraction", 0.4}, {"background_fp_rate", 1.0}, {"label_noise", 0.1}}}}};
  const json run_doc = {
      {"fit_manifest", "data/fitset/manifest.json"},
      {"eval_manifests", {"data/fitset/manifest.json", "data/mixed/manifest.json"}},
      {"confidence_thresholds", {0.05, 0.3}},
      {"out_dir", "out"},
      {"seed", 9},
      {"runs",
       {json{{"method", "fmap"}},
        json{{"method", "fmap"}, {"fit", {{"distance", "cosine"}, {"cluster", {{"method", "kmeans"}}}}}},
        json{{"method", "fmap"}, {"sdr", {{"out_dim", 4}, {"hidden_dims", {8}}, {"epochs", 3}}}},
        json{{"method", "odin"}, {"eul", {{"top_k", 2}}}},
        json{{"method", "fusion"}, {"fusion", {{"strategy", "SCORE"}}}}}}};

  std::vector<std::map<std::string, std::string>> snaps;
  for (const char* name : {"a", "b"}) {
    const fs::path dir = g_scratch / "determinism" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    cmd_synth(synth_doc, dir, {});
    const RunConfig cfg = run_config_from_json(run_doc, dir);
    cmd_fit(cfg);
    cmd_sweep(cfg);
    snaps.push_back(snapshot(dir));
  }
  std::size_t differing = 0, csv_json = 0;
  for (const auto& [rel, bytes] : snaps[0]) {
    const auto it = snaps[1].find(rel);
    if (it == snaps[1].end() || it->second != bytes) ++differing;
    if (rel.ends_with(".csv") || rel.ends_with(".json")) ++csv_json;
  }
  if (snaps[0].size() != snaps[1].size()) ++differing;
  const bool has_outputs = snaps[0].count("out/sweep.csv") && snaps[0].count("out/front.csv") &&
                           snaps[0].count("out/bank.json");
  return {differing == 0 && has_outputs && csv_json > 0,
          fmt::format("synth -> fit -> sweep twice: {} files ({} CSV/JSON), {} differ", snaps[0].size(),
                      csv_json, differing)};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: %s SCRATCH_DIR\n", argv[0]);
    return 2;
  }
  g_scratch = argv[1];
  fs::create_directories(g_scratch);
  spdlog::set_level(spdlog::level::warn);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"calibration", calibration},
      {"separation", separation},
      {"roi-align-oracle", roi_align_oracle},
      {"otsu-oracle", otsu_oracle},
      {"connected-components-oracle", components_oracle},
      {"entropy", entropy},
      {"eul-planted-signal", eul_planted},
      {"sdr", sdr},
      {"metrics-oracles", metrics},
      {"fusion", fusion},
      {"logits-methods", logits},
      {"pareto", pareto},
      {"determinism", determinism},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  std::printf("%zu criteria, %d failed\n", criteria.size(), failed);
  return failed == 0 ? 0 : 1;
}
