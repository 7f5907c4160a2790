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

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fmapood {

enum class Distance { L1, L2, Cosine };

std::string_view to_string(Distance d);
Distance parse_distance(std::string_view name);

/// L1, Euclidean, or cosine distance (1 - cosine similarity). Cosine rejects
/// zero-norm inputs with ZeroVector. Lengths must match.
double distance(std::span<const float> a, std::span<const float> b, Distance metric);

using Points = std::vector<std::vector<float>>;

/// Dense symmetric pairwise distance matrix, row-major n x n.
std::vector<double> pairwise_distances(const Points& points, Distance metric);

}  // namespace fmapood
