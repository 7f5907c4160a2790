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


#include <algorithm>
#include <random>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "fmapood/metrics.hpp"
#include "helpers.hpp"
#include "metrics_fixture.hpp"

using namespace fmapood;
using fmo_test::box;

namespace {

ScoredBox pred(BoundingBox b, double score, int cls = 0) { return {b, score, cls}; }

// Greedy labelling written from the definition: visit predictions from the
// highest score (earliest index on ties); each takes the free GT of its class
// with the largest IoU (earliest on ties) if that IoU reaches the threshold.
std::vector<bool> greedy_oracle(const std::vector<ScoredBox>& p, const std::vector<GroundTruthObject>& g,
                                int cls) {
  std::vector<std::vector<double>> m(p.size(), std::vector<double>(g.size()));
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = 0; j < g.size(); ++j) m[i][j] = iou(p[i].box, g[j].box);
  std::vector<bool> done(p.size(), false), used(g.size(), false), tp(p.size(), false);
  for (std::size_t step = 0; step < p.size(); ++step) {
    std::size_t pick = p.size();
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (done[i]) continue;
      if (pick == p.size() || p[i].score > p[pick].score) pick = i;
    }
    done[pick] = true;
    std::size_t best = g.size();
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (used[j] || g[j].class_id != cls) continue;
      if (best == g.size() || m[pick][j] > m[pick][best]) best = j;
    }
    if (best < g.size() && m[pick][best] >= 0.5) {
      used[best] = true;
      tp[pick] = true;
    }
  }
  return tp;
}

bool dominates(const ParetoPoint& a, const ParetoPoint& b) {
  return a.map >= b.map && a.u_f1_sum >= b.u_f1_sum && (a.map > b.map || a.u_f1_sum > b.u_f1_sum);
}

std::vector<std::size_t> front_oracle(const std::vector<ParetoPoint>& pts) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    bool dom = false;
    for (std::size_t j = 0; j < pts.size() && !dom; ++j) dom = j != i && dominates(pts[j], pts[i]);
    if (!dom) out.push_back(i);
  }
  return out;
}

}  // namespace

TEST_CASE("IoU examples") {
  CHECK(iou(box(0, 0, 2, 2), box(0, 0, 2, 2)) == 1.0);
  CHECK(iou(box(0, 0, 1, 1), box(2, 2, 3, 3)) == 0.0);
  CHECK(iou(box(0, 0, 1, 1), box(0.5F, 0, 1.5F, 1)) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("matching examples") {
  const std::vector<GroundTruthObject> gt = {{box(0, 0, 10, 10), 0}};
  // IoU 0.6
  const auto m1 = match(std::vector<ScoredBox>{pred(box(0, 0, 10, 6), 0.5)}, gt, 0.5, 0);
  CHECK(m1.is_tp[0]);
  const std::vector<ScoredBox> two = {pred(box(0, 0, 10, 10), 0.4), pred(box(0, 0, 10, 9), 0.9)};
  const auto m2 = match(two, gt, 0.5, 0);
  CHECK_FALSE(m2.is_tp[0]);
  CHECK(m2.is_tp[1]);
  CHECK(m2.gt_covered[0]);
}

TEST_CASE("matching agrees with the greedy oracle on random scenes") {
  std::mt19937_64 rng(41);
  std::uniform_int_distribution<int> coord(0, 20);
  std::uniform_int_distribution<int> size(3, 10);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<GroundTruthObject> g;
    std::vector<ScoredBox> p;
    const int ng = 1 + static_cast<int>(rng() % 5);
    const int np = 1 + static_cast<int>(rng() % 5);
    for (int i = 0; i < ng; ++i) {
      const float x = coord(rng), y = coord(rng);
      g.push_back({box(x, y, x + size(rng), y + size(rng)), static_cast<int>(rng() % 2)});
    }
    for (int i = 0; i < np; ++i) {
      const auto& src = g[rng() % g.size()].box;
      const float dx = static_cast<float>(static_cast<int>(rng() % 5) - 2);
      p.push_back(pred(box(std::max(0.0F, src.x_min + dx), src.y_min, src.x_max + dx + 1, src.y_max),
                       static_cast<double>(rng() % 4) / 4.0, 0));
    }
    const auto m = match(p, g, 0.5, 0);
    CHECK(m.is_tp == greedy_oracle(p, g, 0));
    // One-to-one.
    std::vector<std::size_t> hit;
    for (const auto& mg : m.matched_gt)
      if (mg) hit.push_back(*mg);
    std::sort(hit.begin(), hit.end());
    CHECK(std::adjacent_find(hit.begin(), hit.end()) == hit.end());
  }
}

TEST_CASE("average precision examples") {
  const std::vector<GroundTruthObject> gt = {{box(0, 0, 10, 10), 0}, {box(20, 20, 30, 30), 0}};
  // TP, FP, TP by rank.
  std::vector<Scene> s = {{{pred(box(0, 0, 10, 10), 0.9), pred(box(50, 50, 60, 60), 0.8),
                            pred(box(20, 20, 30, 30), 0.7)},
                           gt}};
  CHECK(*average_precision(s, 0) == 5.0 / 6.0);

  std::vector<Scene> perfect = {{{pred(box(0, 0, 10, 10), 0.9), pred(box(20, 20, 30, 30), 0.8)}, gt}};
  CHECK(*average_precision(perfect, 0) == 1.0);
  std::vector<Scene> none = {{{pred(box(50, 50, 60, 60), 0.9)}, gt}};
  CHECK(*average_precision(none, 0) == 0.0);
  CHECK_FALSE(average_precision(none, 1).has_value());
}

TEST_CASE("AP properties") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> coord(0, 60);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Scene> scenes(3);
    for (auto& sc : scenes) {
      for (int i = 0; i < 4; ++i) {
        const float x = coord(rng), y = coord(rng);
        sc.ground_truth.push_back({box(x, y, x + 10, y + 10), 0});
      }
      for (int i = 0; i < 5; ++i) {
        const auto& src = sc.ground_truth[rng() % 4].box;
        const float j = static_cast<float>(rng() % 8);
        sc.predictions.push_back(pred(box(src.x_min + j, src.y_min, src.x_max + j, src.y_max),
                                      std::uniform_real_distribution<double>(0.1, 1.0)(rng)));
      }
    }
    const double ap = *average_precision(scenes, 0);
    CHECK(ap >= 0.0);
    CHECK(ap <= 1.0);
    auto warped = scenes;
    for (auto& sc : warped)
      for (auto& p : sc.predictions) p.score = std::exp(3.0 * p.score) - 7.0;
    CHECK(*average_precision(warped, 0) == doctest::Approx(ap).epsilon(1e-12));
    auto extra = scenes;
    extra[0].predictions.push_back(pred(box(200, 200, 210, 210), 0.0));
    CHECK(*average_precision(extra, 0) <= ap + 1e-12);
  }
}

TEST_CASE("unknown rates") {
  const auto m = unknown_rates({1, 1, 3});
  CHECK(*m.u_pre == 0.5);
  CHECK(*m.u_rec == 0.25);
  CHECK(*m.u_f1 == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  const auto all = unknown_rates({4, 0, 0});
  CHECK(*all.u_pre == 1.0);
  CHECK(*all.u_rec == 1.0);
  CHECK(*all.u_f1 == 1.0);

  const auto absent = unknown_rates({0, 3, 0});
  CHECK_FALSE(absent.u_rec.has_value());
  CHECK_FALSE(absent.u_f1.has_value());

  const auto nothing_flagged = unknown_rates({0, 0, 5});
  CHECK(*nothing_flagged.u_rec == 0.0);
  CHECK_FALSE(nothing_flagged.u_pre.has_value());
  CHECK(*nothing_flagged.u_f1 == 0.0);
}

TEST_CASE("U-F1 harmonic-mean identity and bound") {
  std::mt19937_64 rng(77);
  for (int i = 0; i < 1000; ++i) {
    const UnknownCounts c{rng() % 50, rng() % 50, rng() % 50};
    const auto m = unknown_rates(c);
    if (!m.u_pre || !m.u_rec) continue;
    const double p = double(c.tp) / double(c.tp + c.fp);
    const double r = double(c.tp) / double(c.tp + c.fn);
    const double want = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
    CHECK(*m.u_f1 == doctest::Approx(want).epsilon(1e-12));
    const double lo = std::min(p, r), hi = std::max(p, r);
    if (hi > 0) CHECK(*m.u_f1 <= lo * 2 / (1 + lo / hi) + 1e-12);
    if (p == r) CHECK(*m.u_f1 == doctest::Approx(p));
  }
}

TEST_CASE("A-OSE examples and monotonicity") {
  const std::vector<GroundTruthObject> gt = {{box(0, 0, 10, 10), -1}};
  CHECK(a_ose(std::vector<Scene>{{{}, gt}}) == 0);
  // IoU 0.7
  std::vector<Scene> one = {{{pred(box(0, 0, 10, 7), 0.9, 2)}, gt}};
  CHECK(a_ose(one) == 1);
  std::vector<Scene> two = {{{pred(box(0, 0, 10, 7), 0.9, 2), pred(box(0, 0, 10, 9), 0.5, 1)}, gt}};
  CHECK(a_ose(two) == 1);
  CHECK(a_ose(two, 0.5, AoseMode::Prediction) == 2);

  // Reflagging known predictions as unknown never increases A-OSE.
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Scene sc;
    for (int i = 0; i < 4; ++i) {
      const float x = static_cast<float>(rng() % 40);
      sc.ground_truth.push_back({box(x, x, x + 10, x + 10), -1});
      sc.predictions.push_back(pred(box(x, x + 1, x + 10, x + 10), 0.5, static_cast<int>(rng() % 3)));
    }
    std::size_t prev = a_ose(std::vector<Scene>{sc});
    for (auto& p : sc.predictions) {
      p.class_id = -1;
      const std::size_t now = a_ose(std::vector<Scene>{sc});
      CHECK(now <= prev);
      prev = now;
    }
  }
}

TEST_CASE("wilderness impact") {
  // 10 known GT; 8 TPs, 2 closed-set FPs, 2 FPs on unknown objects, all
  // scored above everything else; two further GT stay unreached.
  Scene sc;
  for (int i = 0; i < 10; ++i) {
    const float x = 20.0F * i;
    sc.ground_truth.push_back({box(x, 0, x + 10, 10), 0});
  }
  for (int i = 0; i < 2; ++i) {
    const float x = 20.0F * i;
    sc.ground_truth.push_back({box(x, 100, x + 10, 110), -1});
  }
  for (int i = 0; i < 8; ++i) sc.predictions.push_back(pred(sc.ground_truth[i].box, 0.9 - 0.01 * i));
  sc.predictions.push_back(pred(box(0, 300, 10, 310), 0.95));
  sc.predictions.push_back(pred(box(30, 300, 40, 310), 0.94));
  sc.predictions.push_back(pred(sc.ground_truth[10].box, 0.93));
  sc.predictions.push_back(pred(sc.ground_truth[11].box, 0.92));
  const std::vector<Scene> scenes = {sc};
  CHECK(*wilderness_impact(scenes, 0.8) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK_FALSE(wilderness_impact(scenes, 0.9).has_value());

  Scene closed = sc;
  closed.ground_truth.resize(10);
  CHECK(*wilderness_impact(std::vector<Scene>{closed}, 0.8) == 0.0);
  CHECK(*wilderness_impact(std::vector<Scene>{sc}, 0.5) >= 0.0);
}

TEST_CASE("Pareto examples") {
  const std::vector<ParetoPoint> three = {{0.5, 0.3}, {0.6, 0.2}, {0.4, 0.4}};
  auto f = pareto_front(three);
  CHECK(f == std::vector<std::size_t>{1, 0, 2});
  const std::vector<ParetoPoint> dom = {{0.5, 0.3}, {0.5, 0.2}};
  CHECK(pareto_front(dom) == std::vector<std::size_t>{0});
}

TEST_CASE("Pareto front equals the pairwise domination oracle") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 12;
    std::vector<ParetoPoint> pts(n);
    // Coarse grid so ties on either axis occur often.
    for (auto& p : pts) p = {static_cast<double>(rng() % 5) / 4, static_cast<double>(rng() % 5) / 4};
    auto got = pareto_front(pts);
    for (std::size_t i = 1; i < got.size(); ++i) CHECK(pts[got[i - 1]].map >= pts[got[i]].map);
    std::sort(got.begin(), got.end());
    CHECK(got == front_oracle(pts));
    for (std::size_t i = 0; i < n; ++i) {
      if (std::binary_search(got.begin(), got.end(), i)) continue;
      CHECK(std::any_of(got.begin(), got.end(), [&](std::size_t k) { return dominates(pts[k], pts[i]); }));
    }
  }
}

TEST_CASE("20-image fixture matches the reference evaluator") {
  const auto fx = fmo_fixture::load_metrics_fixture();
  REQUIRE(fx.known.size() == 20);
  const auto r = evaluate(fx.known, fx.unknown, fx.num_classes);
  CHECK(fmo_fixture::fixture_deviation(r) <= 1e-9);
}
