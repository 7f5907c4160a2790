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
#include <optional>
#include <string_view>
#include <vector>

#include "fmapood/distance.hpp"

namespace fmapood {

enum class ClusterMethod { One, KMeans, KMeansForced, Density };

std::string_view to_string(ClusterMethod m);
ClusterMethod parse_cluster_method(std::string_view name);

struct ClusterSpec {
  ClusterMethod method = ClusterMethod::One;
  std::vector<std::uint32_t> k_grid = {2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::uint32_t forced_k = 10;
  std::vector<std::uint32_t> min_cluster_size_grid = {5, 10, 15};
  std::uint64_t seed = 0;
  std::uint32_t max_iters = 300;
  double tol = 1e-6;
  // Silhouette is skipped below this many samples; the smallest grid value wins.
  std::size_t silhouette_min_samples = 20;
  // Silhouette on larger sets is evaluated on a seeded subsample of this size.
  std::size_t silhouette_max_samples = 2000;

  void validate() const;
};

struct ClusterResult {
  std::vector<int> assignments;  // -1 marks noise
  Points centroids;
  std::optional<double> silhouette;
  ClusterMethod method_used = ClusterMethod::One;
  std::uint32_t parameter = 1;  // k for k-means, min_cluster_size for density
  bool degenerate = false;      // k-means could not keep every cluster populated
  std::vector<double> inertia_history;  // k-means: objective after each assignment step
};

/// Arithmetic mean of the given rows.
std::vector<float> mean_of(const Points& points, const std::vector<std::size_t>& members);

/// Lloyd iterations from k-means++ seeding. Assignment uses `metric`, centroid
/// updates use the arithmetic mean. Empty clusters are re-seeded from the
/// point farthest from its centroid; clusters still empty at the end are
/// dropped and the result is flagged degenerate.
ClusterResult kmeans(const Points& points, std::uint32_t k, std::uint64_t seed,
                     std::uint32_t max_iters = 300, double tol = 1e-6,
                     Distance metric = Distance::L2);

/// Mean silhouette over non-noise samples. A singleton cluster contributes
/// a = 0. Throws Undefined with fewer than two clusters.
double silhouette_score(const Points& points, const std::vector<int>& assignments,
                        Distance metric);
/// Same, from a precomputed n x n distance matrix.
double silhouette_from_matrix(const std::vector<double>& dist, std::size_t n,
                              const std::vector<int>& assignments);

/// Density clustering on the mutual-reachability minimum spanning tree: the
/// tree is cut above the largest gap between consecutive sorted edge weights
/// and components smaller than `min_cluster_size` become noise. Throws
/// AllNoise when nothing survives.
ClusterResult density_cluster(const Points& points, std::uint32_t min_cluster_size,
                              Distance metric);

/// Dispatches on spec.method, running the silhouette-driven grid where the
/// method has one.
ClusterResult fit_clusters(const Points& points, const ClusterSpec& spec, Distance metric);

}  // namespace fmapood
