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
#include <span>
#include <vector>

#include "fmapood/distance.hpp"

namespace fmapood {

struct SdrConfig {
  std::uint32_t out_dim = 32;
  std::uint32_t k_neighbors = 15;
  std::vector<std::uint32_t> hidden_dims = {128, 128};
  double margin = 1.0;
  std::uint32_t batch_size = 128;
  std::uint32_t epochs = 50;
  double learning_rate = 1e-3;
  std::uint32_t patience = 5;
  std::uint64_t seed = 0;
  double validation_fraction = 0.1;

  void validate(std::size_t input_dim) const;
};

/// Fully connected layer; weights are out x in, row-major.
struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;
  std::vector<double> bias;
};

/// Multi-layer perceptron with rectifier activations on hidden layers and a
/// linear output layer. Immutable after training.
class Reducer {
 public:
  Reducer() = default;
  explicit Reducer(std::vector<DenseLayer> layers);

  /// He-normal weights (output layer scaled by 0.01), zero biases.
  static Reducer initialized(std::size_t input_dim, const std::vector<std::uint32_t>& hidden,
                             std::size_t out_dim, std::uint64_t seed);

  std::size_t input_dim() const;
  std::size_t out_dim() const;
  bool empty() const { return layers_.empty(); }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  std::vector<float> transform(std::span<const float> features) const;
  std::vector<double> forward(std::span<const double> x) const;

  /// Product of per-layer spectral norms, an upper bound on the Lipschitz
  /// constant of the whole map.
  double lipschitz_bound() const;

 private:
  std::vector<DenseLayer> layers_;
};

struct Triplet {
  std::size_t anchor = 0;
  std::size_t positive = 0;
  std::size_t negative = 0;
  bool operator==(const Triplet&) const = default;
};

/// One triplet per eligible anchor: the positive is drawn from the anchor's
/// k nearest same-class neighbours (Euclidean, input space), the negative
/// uniformly from the other classes. Anchors of classes with a single member
/// are skipped.
std::vector<Triplet> mine_triplets(const Points& features, const std::vector<std::uint32_t>& labels,
                                   std::uint32_t k_neighbors, std::uint64_t seed);

/// k nearest same-class neighbours of every point, closest first.
std::vector<std::vector<std::size_t>> same_class_neighbours(const Points& features,
                                                            const std::vector<std::uint32_t>& labels,
                                                            std::uint32_t k_neighbors);

struct ReducerGradients {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> bias;
};

/// Mean hinge triplet loss max(0, |g(a)-g(p)|^2 - |g(a)-g(n)|^2 + margin).
/// When `grad` is given it receives the analytic gradient.
double triplet_loss(const Reducer& net, const Points& features, std::span<const Triplet> triplets,
                    double margin, ReducerGradients* grad = nullptr);

struct TrainingReport {
  std::vector<double> train_loss;
  std::vector<double> validation_loss;
  std::size_t best_epoch = 0;
  bool early_stopped = false;
};

/// Trains a reducer with Adam on mined triplets; keeps the parameters of the
/// epoch with the lowest validation loss.
Reducer train_reducer(const Points& features, const std::vector<std::uint32_t>& labels,
                      const SdrConfig& cfg, TrainingReport* report = nullptr);

}  // namespace fmapood
