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

#include "fmapood/distance.hpp"

#include <cmath>

#include "fmapood/errors.hpp"

namespace fmapood {

std::string_view to_string(Distance d) {
  switch (d) {
    case Distance::L1: return "l1";
    case Distance::L2: return "l2";
    case Distance::Cosine: return "cosine";
  }
  return "?";
}

Distance parse_distance(std::string_view name) {
  if (name == "l1" || name == "L1") return Distance::L1;
  if (name == "l2" || name == "L2") return Distance::L2;
  if (name == "cosine" || name == "Cosine") return Distance::Cosine;
  raise(ErrorKind::Config, "unknown distance '" + std::string(name) + "'");
}

double distance(std::span<const float> a, std::span<const float> b, Distance metric) {
  if (a.size() != b.size()) {
    raise(ErrorKind::Data, "distance between vectors of length " + std::to_string(a.size()) +
                               " and " + std::to_string(b.size()));
  }
  switch (metric) {
    case Distance::L1: {
      double s = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(double(a[i]) - double(b[i]));
      return s;
    }
    case Distance::L2: {
      double s = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = double(a[i]) - double(b[i]);
        s += d * d;
      }
      return std::sqrt(s);
    }
    case Distance::Cosine: {
      double dot = 0.0;
      double na = 0.0;
      double nb = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        dot += double(a[i]) * double(b[i]);
        na += double(a[i]) * double(a[i]);
        nb += double(b[i]) * double(b[i]);
      }
      if (na == 0.0 || nb == 0.0) raise(ErrorKind::ZeroVector, "cosine distance of a zero-norm vector");
      return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
    }
  }
  return 0.0;
}

std::vector<double> pairwise_distances(const Points& points, Distance metric) {
  const std::size_t n = points.size();
  std::vector<double> out(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = distance(points[i], points[j], metric);
      out[i * n + j] = d;
      out[j * n + i] = d;
    }
  }
  return out;
}

}  // namespace fmapood
