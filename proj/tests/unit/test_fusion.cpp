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
#include <random>
#include <limits>

#include "doctest.h"
#include "fmapood/errors.hpp"
#include "fmapood/fusion.hpp"

using namespace fmapood;

namespace {

OodVerdict verdict(bool ood, std::size_t idx = 0) {
  OodVerdict v;
  v.detection_index = idx;
  v.is_ood = ood;
  return v;
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::Internal;
}

}  // namespace

TEST_CASE("AND / OR truth tables") {
  const bool table[4][4] = {
      // a_ood, b_ood, and, or
      {false, false, false, false},
      {false, true, false, true},
      {true, false, false, true},
      {true, true, true, true},
  };
  for (const auto& row : table) {
    CHECK(fuse_hard(verdict(row[0]), verdict(row[1]), FusionStrategy::And) == row[2]);
    CHECK(fuse_hard(verdict(row[0]), verdict(row[1]), FusionStrategy::Or) == row[3]);
  }
}

TEST_CASE("hard fusion rejects mismatched detections and SCORE") {
  CHECK(kind_of([] { fuse_hard(verdict(true, 1), verdict(true, 2), FusionStrategy::And); }) ==
        ErrorKind::Data);
  CHECK(kind_of([] { fuse_hard(verdict(true), verdict(true), FusionStrategy::Score); }) ==
        ErrorKind::Config);
}

TEST_CASE("fusion score pivots, extremes and clipping") {
  // High-is-ID record: tau 0.5, ID scores in [0.2, 0.9].
  const ScoreRecord hi{0.5, 0.2, 0.9};
  CHECK(fusion_score(0.5, hi, Orientation::HighIsId) == 0.0);
  CHECK(fusion_score(0.9, hi, Orientation::HighIsId) == doctest::Approx(1.0));
  CHECK(fusion_score(5.0, hi, Orientation::HighIsId) == 1.0);
  CHECK(fusion_score(0.2, hi, Orientation::HighIsId) == doctest::Approx(-1.0));
  CHECK(fusion_score(-7.0, hi, Orientation::HighIsId) == -1.0);
  CHECK(fusion_score(0.7, hi, Orientation::HighIsId) == doctest::Approx(0.5));

  // Low-is-ID (distance): tau 10, worst ID score 20, best 0.
  const ScoreRecord lo{10.0, 0.0, 20.0};
  CHECK(fusion_score(15.0, lo, Orientation::LowIsId) == doctest::Approx(-0.5));
  CHECK(fusion_score(10.0, lo, Orientation::LowIsId) == 0.0);
  CHECK(fusion_score(0.0, lo, Orientation::LowIsId) == doctest::Approx(1.0));
  CHECK(fusion_score(-3.0, lo, Orientation::LowIsId) == 1.0);
  CHECK(fusion_score(1e9, lo, Orientation::LowIsId) == -1.0);
  CHECK(fusion_score(std::numeric_limits<double>::infinity(), lo, Orientation::LowIsId) == -1.0);

  const ScoreRecord broken{std::numeric_limits<double>::quiet_NaN(), 0.0, 1.0};
  CHECK(kind_of([&] { fusion_score(0.3, broken, Orientation::HighIsId); }) == ErrorKind::Fit);
}

TEST_CASE("fusion score stays in [-1, 1] and is monotone") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  for (int trial = 0; trial < 200; ++trial) {
    double a = u(rng), b = u(rng), t = u(rng);
    if (a > b) std::swap(a, b);
    t = std::clamp(t, a, b);
    const ScoreRecord r{t, a, b};
    double prev = -2.0;
    for (int k = -10; k <= 10; ++k) {
      const double s = t + k * 7.3;
      const double f = fusion_score(s, r, Orientation::HighIsId);
      CHECK(f >= -1.0);
      CHECK(f <= 1.0);
      CHECK(f >= prev);
      prev = f;
    }
  }
}

TEST_CASE("SCORE decision boundary") {
  const ScoreRecord hi{0.5, 0.2, 0.9};
  const ScoreRecord lo{10.0, 0.0, 20.0};
  // Both exactly at threshold: (0, 0) -> OoD.
  CHECK(fuse_score(0.5, hi, Orientation::HighIsId, 10.0, lo, Orientation::LowIsId));
  // +1 and -0.5 -> ID.
  CHECK_FALSE(fuse_score(0.9, hi, Orientation::HighIsId, 15.0, lo, Orientation::LowIsId));
  // +0.5 and -0.5 sum to exactly 0 -> OoD.
  const ScoreRecord exact{0.5, 0.25, 1.0};
  REQUIRE(fusion_score(0.75, exact, Orientation::HighIsId) == 0.5);
  CHECK(fuse_score(0.75, exact, Orientation::HighIsId, 15.0, lo, Orientation::LowIsId));
  CHECK(parse_fusion_strategy("SCORE") == FusionStrategy::Score);
  CHECK(kind_of([] { parse_fusion_strategy("xor"); }) == ErrorKind::Config);
}
