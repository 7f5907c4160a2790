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

#include "fmapood/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "fmapood/errors.hpp"

namespace fmapood {

namespace {

double l2_squared(const std::vector<float>& a, const std::vector<float>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = double(a[i]) - double(b[i]);
    s += d * d;
  }
  return s;
}

struct Assignment {
  std::vector<int> labels;
  std::vector<double> dist;  // distance of each point to its centroid
};

Assignment assign(const Points& points, const Points& centroids, Distance metric) {
  Assignment a;
  a.labels.resize(points.size());
  a.dist.resize(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (std::size_t m = 0; m < centroids.size(); ++m) {
      const double d = distance(points[i], centroids[m], metric);
      if (d < best) {
        best = d;
        arg = static_cast<int>(m);
      }
    }
    a.labels[i] = arg;
    a.dist[i] = best;
  }
  return a;
}

Points seed_plus_plus(const Points& points, std::uint32_t k, std::mt19937_64& rng,
                      Distance metric) {
  const std::size_t n = points.size();
  Points centers;
  centers.reserve(k);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  centers.push_back(points[pick(rng)]);
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = distance(points[i], centers[0], metric);
    d2[i] = d * d;
  }
  while (centers.size() < k) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t chosen = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double r = u(rng);
      chosen = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        r -= d2[i];
        if (r < 0.0 && d2[i] > 0.0) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = pick(rng);
    }
    centers.push_back(points[chosen]);
    for (std::size_t i = 0; i < n; ++i) {
      const double d = distance(points[i], centers.back(), metric);
      d2[i] = std::min(d2[i], d * d);
    }
  }
  return centers;
}

// Recomputes centroids as member means; returns ids of empty clusters.
std::vector<std::size_t> update_centroids(const Points& points, const std::vector<int>& labels,
                                          Points& centroids) {
  const std::size_t dim = points.front().size();
  std::vector<std::vector<double>> sums(centroids.size(), std::vector<double>(dim, 0.0));
  std::vector<std::size_t> counts(centroids.size(), 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    auto& s = sums[labels[i]];
    for (std::size_t j = 0; j < dim; ++j) s[j] += points[i][j];
    ++counts[labels[i]];
  }
  std::vector<std::size_t> empty;
  for (std::size_t m = 0; m < centroids.size(); ++m) {
    if (counts[m] == 0) {
      empty.push_back(m);
      continue;
    }
    for (std::size_t j = 0; j < dim; ++j) {
      centroids[m][j] = static_cast<float>(sums[m][j] / double(counts[m]));
    }
  }
  return empty;
}

double wcss(const Points& points, const Points& centroids, const std::vector<int>& labels) {
  double s = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) s += l2_squared(points[i], centroids[labels[i]]);
  return s;
}

std::vector<std::size_t> subsample_indices(std::size_t n, std::size_t max_n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (n <= max_n) return idx;
  std::mt19937_64 rng(seed ^ 0x5157u);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(max_n);
  std::sort(idx.begin(), idx.end());
  return idx;
}

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

// Silhouette of a candidate restricted to the evaluation subsample.
std::optional<double> candidate_silhouette(const std::vector<double>& dist,
                                           const std::vector<std::size_t>& sample,
                                           const std::vector<int>& labels) {
  std::vector<int> sub(sample.size());
  for (std::size_t i = 0; i < sample.size(); ++i) sub[i] = labels[sample[i]];
  try {
    return silhouette_from_matrix(dist, sample.size(), sub);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Undefined) return std::nullopt;
    throw;
  }
}

ClusterResult one_cluster(const Points& points) {
  ClusterResult r;
  r.assignments.assign(points.size(), 0);
  std::vector<std::size_t> all(points.size());
  std::iota(all.begin(), all.end(), 0);
  r.centroids.push_back(mean_of(points, all));
  r.method_used = ClusterMethod::One;
  r.parameter = 1;
  return r;
}

}  // namespace

std::string_view to_string(ClusterMethod m) {
  switch (m) {
    case ClusterMethod::One: return "one";
    case ClusterMethod::KMeans: return "kmeans";
    case ClusterMethod::KMeansForced: return "kmeans_forced";
    case ClusterMethod::Density: return "density";
  }
  return "?";
}

ClusterMethod parse_cluster_method(std::string_view name) {
  if (name == "one" || name == "One") return ClusterMethod::One;
  if (name == "kmeans" || name == "KMeans") return ClusterMethod::KMeans;
  if (name == "kmeans_forced" || name == "kmeans10" || name == "KMeansForced") {
    return ClusterMethod::KMeansForced;
  }
  if (name == "density" || name == "hdbscan" || name == "Density") return ClusterMethod::Density;
  raise(ErrorKind::Config, "unknown cluster method '" + std::string(name) + "'");
}

void ClusterSpec::validate() const {
  if (k_grid.empty()) raise(ErrorKind::Config, "k_grid must be nonempty");
  for (auto k : k_grid) {
    if (k < 2) raise(ErrorKind::Config, "k_grid values must be >= 2");
  }
  if (forced_k < 2) raise(ErrorKind::Config, "forced_k must be >= 2");
  if (min_cluster_size_grid.empty()) raise(ErrorKind::Config, "min_cluster_size_grid must be nonempty");
  for (auto m : min_cluster_size_grid) {
    if (m < 2) raise(ErrorKind::Config, "min_cluster_size values must be >= 2");
  }
  if (max_iters < 1) raise(ErrorKind::Config, "max_iters must be >= 1");
}

std::vector<float> mean_of(const Points& points, const std::vector<std::size_t>& members) {
  if (members.empty()) raise(ErrorKind::Data, "mean of an empty set");
  const std::size_t dim = points[members.front()].size();
  std::vector<double> acc(dim, 0.0);
  for (auto i : members) {
    for (std::size_t j = 0; j < dim; ++j) acc[j] += points[i][j];
  }
  std::vector<float> out(dim);
  for (std::size_t j = 0; j < dim; ++j) out[j] = static_cast<float>(acc[j] / double(members.size()));
  return out;
}

ClusterResult kmeans(const Points& points, std::uint32_t k, std::uint64_t seed,
                     std::uint32_t max_iters, double tol, Distance metric) {
  if (k < 1) raise(ErrorKind::Config, "k must be >= 1");
  if (points.size() < k) {
    raise(ErrorKind::InsufficientSamples, std::to_string(points.size()) +
                                              " points cannot form " + std::to_string(k) +
                                              " clusters");
  }
  if (k == 1) {
    ClusterResult r = one_cluster(points);
    r.method_used = ClusterMethod::KMeans;
    r.inertia_history.push_back(wcss(points, r.centroids, r.assignments));
    return r;
  }

  std::mt19937_64 rng(seed);
  Points centroids = seed_plus_plus(points, k, rng, metric);
  ClusterResult result;
  Assignment a = assign(points, centroids, metric);
  result.inertia_history.push_back(wcss(points, centroids, a.labels));

  for (std::uint32_t iter = 0; iter < max_iters; ++iter) {
    Points previous = centroids;
    auto empty = update_centroids(points, a.labels, centroids);
    if (!empty.empty()) {
      // Re-seed from the points currently farthest from their centroids.
      std::vector<std::size_t> order(points.size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t x, std::size_t y) { return a.dist[x] > a.dist[y]; });
      if (a.dist[order.front()] == 0.0) break;  // every point sits on a centroid
      for (std::size_t e = 0; e < empty.size(); ++e) {
        centroids[empty[e]] = points[order[e % order.size()]];
      }
    }

    double movement = 0.0;
    for (std::size_t m = 0; m < centroids.size(); ++m) {
      double delta = 0.0;
      double norm = 0.0;
      for (std::size_t j = 0; j < centroids[m].size(); ++j) {
        const double d = double(centroids[m][j]) - double(previous[m][j]);
        delta += d * d;
        norm += double(previous[m][j]) * double(previous[m][j]);
      }
      movement = std::max(movement, std::sqrt(delta) / std::max(std::sqrt(norm), 1e-12));
    }

    Assignment next = assign(points, centroids, metric);
    result.inertia_history.push_back(wcss(points, centroids, next.labels));
    const bool unchanged = next.labels == a.labels;
    a = std::move(next);
    if (empty.empty() && (unchanged || movement < tol)) break;
  }

  // Final centroids are exact member means of the final assignment.
  auto empty = update_centroids(points, a.labels, centroids);
  std::vector<int> remap(centroids.size(), -1);
  int next_id = 0;
  for (std::size_t m = 0; m < centroids.size(); ++m) {
    if (std::find(empty.begin(), empty.end(), m) == empty.end()) {
      remap[m] = next_id++;
      result.centroids.push_back(centroids[m]);
    }
  }
  result.assignments.resize(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) result.assignments[i] = remap[a.labels[i]];
  result.degenerate = !empty.empty();
  result.method_used = ClusterMethod::KMeans;
  result.parameter = k;
  return result;
}

double silhouette_from_matrix(const std::vector<double>& dist, std::size_t n,
                              const std::vector<int>& assignments) {
  int max_label = -1;
  for (int l : assignments) max_label = std::max(max_label, l);
  std::vector<std::size_t> sizes(static_cast<std::size_t>(max_label + 1), 0);
  for (int l : assignments) {
    if (l >= 0) ++sizes[l];
  }
  std::size_t populated = 0;
  for (auto s : sizes) populated += s > 0 ? 1 : 0;
  if (populated < 2) raise(ErrorKind::Undefined, "silhouette needs at least two clusters");

  const std::size_t n_sizes = sizes.size();
  std::vector<double> sums(n_sizes);
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const int li = assignments[i];
    if (li < 0) continue;
    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      const int lj = assignments[j];
      if (lj < 0 || j == i) continue;
      sums[lj] += dist[i * n + j];
    }
    const double a = sizes[li] > 1 ? sums[li] / double(sizes[li] - 1) : 0.0;
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < n_sizes; ++m) {
      if (static_cast<int>(m) == li || sizes[m] == 0) continue;
      b = std::min(b, sums[m] / double(sizes[m]));
    }
    const double denom = std::max(a, b);
    total += denom > 0.0 ? (b - a) / denom : 0.0;
    ++counted;
  }
  return total / double(counted);
}

double silhouette_score(const Points& points, const std::vector<int>& assignments,
                        Distance metric) {
  if (points.size() != assignments.size()) raise(ErrorKind::Data, "assignment length mismatch");
  return silhouette_from_matrix(pairwise_distances(points, metric), points.size(), assignments);
}

ClusterResult density_cluster(const Points& points, std::uint32_t min_cluster_size,
                              Distance metric) {
  const std::size_t n = points.size();
  if (min_cluster_size < 1) raise(ErrorKind::Config, "min_cluster_size must be >= 1");
  if (n < min_cluster_size) {
    raise(ErrorKind::InsufficientSamples, std::to_string(n) + " points, min_cluster_size " +
                                              std::to_string(min_cluster_size));
  }
  ClusterResult result;
  result.method_used = ClusterMethod::Density;
  result.parameter = min_cluster_size;
  if (n == 1) {
    result.assignments = {0};
    result.centroids = {points[0]};
    return result;
  }

  const auto dist = pairwise_distances(points, metric);
  const std::size_t k = std::min<std::size_t>(min_cluster_size, n - 1);
  std::vector<double> core(n);
  std::vector<double> row(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t w = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) row[w++] = dist[i * n + j];
    }
    std::nth_element(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(k - 1), row.end());
    core[i] = row[k - 1];
  }
  auto reach = [&](std::size_t i, std::size_t j) {
    return std::max({core[i], core[j], dist[i * n + j]});
  };

  // Prim's algorithm on the dense mutual-reachability graph.
  struct Edge {
    std::size_t a;
    std::size_t b;
    double w;
  };
  std::vector<Edge> mst;
  mst.reserve(n - 1);
  std::vector<bool> in_tree(n, false);
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> from(n, 0);
  std::size_t current = 0;
  in_tree[0] = true;
  for (std::size_t added = 1; added < n; ++added) {
    for (std::size_t j = 0; j < n; ++j) {
      if (in_tree[j]) continue;
      const double w = reach(current, j);
      if (w < best[j]) {
        best[j] = w;
        from[j] = current;
      }
    }
    std::size_t next = n;
    double next_w = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (!in_tree[j] && best[j] < next_w) {
        next_w = best[j];
        next = j;
      }
    }
    if (next == n) {  // remaining points at infinite distance
      for (std::size_t j = 0; j < n; ++j) {
        if (!in_tree[j]) {
          next = j;
          break;
        }
      }
    }
    in_tree[next] = true;
    mst.push_back({from[next], next, best[next]});
    current = next;
  }

  std::vector<double> weights;
  weights.reserve(mst.size());
  for (const auto& e : mst) weights.push_back(e.w);
  std::sort(weights.begin(), weights.end());
  double cut = std::numeric_limits<double>::infinity();
  double widest = 0.0;
  for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
    const double gap = weights[i + 1] - weights[i];
    if (gap > widest) {
      widest = gap;
      cut = weights[i];
    }
  }

  UnionFind uf(n);
  for (const auto& e : mst) {
    if (e.w <= cut) uf.unite(e.a, e.b);
  }
  std::vector<std::size_t> comp_size(n, 0);
  for (std::size_t i = 0; i < n; ++i) ++comp_size[uf.find(i)];

  std::vector<int> label_of_root(n, -1);
  int next_label = 0;
  result.assignments.assign(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t root = uf.find(i);
    if (comp_size[root] < min_cluster_size) continue;
    if (label_of_root[root] < 0) label_of_root[root] = next_label++;
    result.assignments[i] = label_of_root[root];
  }
  if (next_label == 0) raise(ErrorKind::AllNoise, "every point was classified as noise");

  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(next_label));
  for (std::size_t i = 0; i < n; ++i) {
    if (result.assignments[i] >= 0) members[result.assignments[i]].push_back(i);
  }
  for (const auto& m : members) result.centroids.push_back(mean_of(points, m));
  return result;
}

ClusterResult fit_clusters(const Points& points, const ClusterSpec& spec, Distance metric) {
  spec.validate();
  if (points.empty()) raise(ErrorKind::InsufficientSamples, "no points to cluster");
  const std::size_t n = points.size();

  switch (spec.method) {
    case ClusterMethod::One:
      return one_cluster(points);

    case ClusterMethod::KMeansForced: {
      ClusterResult r = kmeans(points, spec.forced_k, spec.seed, spec.max_iters, spec.tol, metric);
      r.method_used = ClusterMethod::KMeansForced;
      return r;
    }

    case ClusterMethod::KMeans:
    case ClusterMethod::Density: {
      const bool is_kmeans = spec.method == ClusterMethod::KMeans;
      std::vector<std::uint32_t> grid = is_kmeans ? spec.k_grid : spec.min_cluster_size_grid;
      std::sort(grid.begin(), grid.end());
      grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
      std::vector<std::uint32_t> viable;
      for (auto g : grid) {
        if (g <= n) viable.push_back(g);
      }
      if (viable.empty()) {
        raise(ErrorKind::InsufficientSamples,
              std::to_string(n) + " points are fewer than the smallest grid value " +
                  std::to_string(grid.front()));
      }
      auto run = [&](std::uint32_t g) {
        return is_kmeans ? kmeans(points, g, spec.seed, spec.max_iters, spec.tol, metric)
                         : density_cluster(points, g, metric);
      };

      const bool use_silhouette = n >= spec.silhouette_min_samples;
      std::vector<std::size_t> sample;
      std::vector<double> dist;
      if (use_silhouette) {
        sample = subsample_indices(n, spec.silhouette_max_samples, spec.seed);
        Points sub;
        sub.reserve(sample.size());
        for (auto i : sample) sub.push_back(points[i]);
        dist = pairwise_distances(sub, metric);
      }

      std::optional<ClusterResult> best;
      bool any_all_noise = false;
      for (auto g : viable) {
        ClusterResult candidate;
        try {
          candidate = run(g);
        } catch (const Error& e) {
          if (e.kind() == ErrorKind::AllNoise) {
            any_all_noise = true;
            continue;
          }
          throw;
        }
        if (!use_silhouette) {
          best = std::move(candidate);
          break;
        }
        candidate.silhouette = candidate_silhouette(dist, sample, candidate.assignments);
        const bool better =
            !best || (candidate.silhouette &&
                      (!best->silhouette || *candidate.silhouette > *best->silhouette));
        if (better) best = std::move(candidate);
      }
      if (!best) {
        raise(any_all_noise ? ErrorKind::AllNoise : ErrorKind::InsufficientSamples,
              "no grid value produced clusters");
      }
      best->method_used = spec.method;
      return *best;
    }
  }
  raise(ErrorKind::Internal, "unhandled cluster method");
}

}  // namespace fmapood
