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

#include "fmapood/sdr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include "fmapood/errors.hpp"

namespace fmapood {

namespace {

// Activations of one forward pass: acts[0] is the input, acts[l+1] the output
// of layer l (after the rectifier for hidden layers).
struct Trace {
  std::vector<std::vector<double>> acts;
};

Trace forward_trace(const std::vector<DenseLayer>& layers, std::span<const double> x) {
  Trace t;
  t.acts.reserve(layers.size() + 1);
  t.acts.emplace_back(x.begin(), x.end());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    const auto& in = t.acts.back();
    std::vector<double> out(layer.out);
    for (std::size_t o = 0; o < layer.out; ++o) {
      const double* w = layer.weights.data() + o * layer.in;
      double s = layer.bias[o];
      for (std::size_t i = 0; i < layer.in; ++i) s += w[i] * in[i];
      out[o] = (l + 1 < layers.size()) ? std::max(s, 0.0) : s;
    }
    t.acts.push_back(std::move(out));
  }
  return t;
}

void backward(const std::vector<DenseLayer>& layers, const Trace& t, std::vector<double> delta,
              ReducerGradients& grad, double scale) {
  for (std::size_t l = layers.size(); l-- > 0;) {
    const auto& layer = layers[l];
    const auto& in = t.acts[l];
    const auto& out = t.acts[l + 1];
    if (l + 1 < layers.size()) {
      for (std::size_t o = 0; o < layer.out; ++o) {
        if (out[o] <= 0.0) delta[o] = 0.0;
      }
    }
    auto& gw = grad.weights[l];
    auto& gb = grad.bias[l];
    for (std::size_t o = 0; o < layer.out; ++o) {
      const double d = delta[o] * scale;
      if (d == 0.0) continue;
      gb[o] += d;
      double* row = gw.data() + o * layer.in;
      for (std::size_t i = 0; i < layer.in; ++i) row[i] += d * in[i];
    }
    if (l == 0) break;
    std::vector<double> prev(layer.in, 0.0);
    for (std::size_t o = 0; o < layer.out; ++o) {
      if (delta[o] == 0.0) continue;
      const double* w = layer.weights.data() + o * layer.in;
      for (std::size_t i = 0; i < layer.in; ++i) prev[i] += w[i] * delta[o];
    }
    delta = std::move(prev);
  }
}

std::vector<double> to_double(std::span<const float> f) { return {f.begin(), f.end()}; }

ReducerGradients zero_gradients(const std::vector<DenseLayer>& layers) {
  ReducerGradients g;
  for (const auto& layer : layers) {
    g.weights.emplace_back(layer.weights.size(), 0.0);
    g.bias.emplace_back(layer.bias.size(), 0.0);
  }
  return g;
}

double spectral_norm(const DenseLayer& layer) {
  // Power iteration on W^T W.
  std::vector<double> v(layer.in, 1.0 / std::sqrt(double(layer.in)));
  double sigma = 0.0;
  for (int it = 0; it < 200; ++it) {
    std::vector<double> wv(layer.out, 0.0);
    for (std::size_t o = 0; o < layer.out; ++o) {
      for (std::size_t i = 0; i < layer.in; ++i) wv[o] += layer.weights[o * layer.in + i] * v[i];
    }
    std::vector<double> next(layer.in, 0.0);
    for (std::size_t o = 0; o < layer.out; ++o) {
      for (std::size_t i = 0; i < layer.in; ++i) next[i] += layer.weights[o * layer.in + i] * wv[o];
    }
    double norm = 0.0;
    for (double x : next) norm += x * x;
    norm = std::sqrt(norm);
    if (norm == 0.0) return 0.0;
    for (auto& x : next) x /= norm;
    sigma = std::sqrt(norm);
    v = std::move(next);
  }
  return sigma;
}

struct Adam {
  explicit Adam(const std::vector<DenseLayer>& layers, double lr)
      : m(zero_gradients(layers)), v(zero_gradients(layers)), rate(lr) {}

  void step(std::vector<DenseLayer>& layers, const ReducerGradients& g) {
    ++t;
    const double c1 = 1.0 - std::pow(kBeta1, double(t));
    const double c2 = 1.0 - std::pow(kBeta2, double(t));
    auto update = [&](std::vector<double>& p, const std::vector<double>& gp, std::vector<double>& mp,
                      std::vector<double>& vp) {
      for (std::size_t i = 0; i < p.size(); ++i) {
        mp[i] = kBeta1 * mp[i] + (1.0 - kBeta1) * gp[i];
        vp[i] = kBeta2 * vp[i] + (1.0 - kBeta2) * gp[i] * gp[i];
        p[i] -= rate * (mp[i] / c1) / (std::sqrt(vp[i] / c2) + kEps);
      }
    };
    for (std::size_t l = 0; l < layers.size(); ++l) {
      update(layers[l].weights, g.weights[l], m.weights[l], v.weights[l]);
      update(layers[l].bias, g.bias[l], m.bias[l], v.bias[l]);
    }
  }

  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  ReducerGradients m;
  ReducerGradients v;
  double rate;
  long t = 0;
};

// Triplets for `subset` (indices into the full set) using precomputed
// neighbour lists that are themselves expressed in subset-local positions.
std::vector<Triplet> sample_triplets(const std::vector<std::uint32_t>& labels,
                                     const std::vector<std::vector<std::size_t>>& neighbours,
                                     std::mt19937_64& rng) {
  const std::size_t n = labels.size();
  std::map<std::uint32_t, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < n; ++i) by_class[labels[i]].push_back(i);
  std::map<std::uint32_t, std::vector<std::size_t>> others;
  for (const auto& [label, members] : by_class) {
    auto& list = others[label];
    for (std::size_t j = 0; j < n; ++j) {
      if (labels[j] != label) list.push_back(j);
    }
  }
  std::vector<Triplet> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (neighbours[i].empty()) continue;
    std::uniform_int_distribution<std::size_t> pos(0, neighbours[i].size() - 1);
    const std::size_t p = neighbours[i][pos(rng)];
    const auto& candidates = others[labels[i]];
    std::uniform_int_distribution<std::size_t> neg(0, candidates.size() - 1);
    const std::size_t negative = candidates[neg(rng)];
    out.push_back({i, p, negative});
  }
  return out;
}

void check_labels(const Points& features, const std::vector<std::uint32_t>& labels) {
  if (features.size() != labels.size()) raise(ErrorKind::Data, "features and labels differ in length");
  std::map<std::uint32_t, std::size_t> counts;
  for (auto l : labels) ++counts[l];
  if (counts.size() < 2) raise(ErrorKind::Triplet, "triplet mining needs at least two classes");
  bool any_anchor = false;
  for (const auto& [label, count] : counts) any_anchor |= count >= 2;
  if (!any_anchor) raise(ErrorKind::Triplet, "no class has two samples to form a positive pair");
}

Points gather(const Points& all, const std::vector<std::size_t>& idx) {
  Points out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(all[i]);
  return out;
}

std::vector<std::uint32_t> gather(const std::vector<std::uint32_t>& all,
                                  const std::vector<std::size_t>& idx) {
  std::vector<std::uint32_t> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(all[i]);
  return out;
}

bool can_mine(const std::vector<std::uint32_t>& labels) {
  std::map<std::uint32_t, std::size_t> counts;
  for (auto l : labels) ++counts[l];
  if (counts.size() < 2) return false;
  for (const auto& [label, count] : counts) {
    if (count >= 2) return true;
  }
  return false;
}

}  // namespace

void SdrConfig::validate(std::size_t input_dim) const {
  if (out_dim == 0) raise(ErrorKind::Config, "SDR out_dim must be >= 1");
  if (input_dim > 0 && out_dim >= input_dim) {
    raise(ErrorKind::Config, "SDR out_dim (" + std::to_string(out_dim) +
                                 ") must be smaller than the input dimension (" +
                                 std::to_string(input_dim) + ")");
  }
  if (k_neighbors < 1) raise(ErrorKind::Config, "SDR k_neighbors must be >= 1");
  if (batch_size < 1) raise(ErrorKind::Config, "SDR batch_size must be >= 1");
  if (!(learning_rate > 0.0)) raise(ErrorKind::Config, "SDR learning_rate must be > 0");
  if (margin < 0.0) raise(ErrorKind::Config, "SDR margin must be >= 0");
  for (auto h : hidden_dims) {
    if (h == 0) raise(ErrorKind::Config, "SDR hidden dims must be >= 1");
  }
}

Reducer::Reducer(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.weights.size() != layer.in * layer.out || layer.bias.size() != layer.out) {
      raise(ErrorKind::Format, "layer " + std::to_string(l) + " parameter sizes do not match its dims");
    }
    if (l > 0 && layers_[l - 1].out != layer.in) {
      raise(ErrorKind::Format, "layer " + std::to_string(l) + " input does not match previous output");
    }
  }
}

Reducer Reducer::initialized(std::size_t input_dim, const std::vector<std::uint32_t>& hidden,
                             std::size_t out_dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<DenseLayer> layers;
  std::size_t in = input_dim;
  std::vector<std::size_t> dims(hidden.begin(), hidden.end());
  dims.push_back(out_dim);
  for (auto out : dims) {
    DenseLayer layer;
    layer.in = in;
    layer.out = out;
    // The output layer starts at 1/100 of the He scale.
    const double gain = layers.size() + 1 == dims.size() ? 0.01 : 1.0;
    std::normal_distribution<double> init(0.0, gain * std::sqrt(2.0 / double(in)));
    layer.weights.resize(in * out);
    for (auto& w : layer.weights) w = init(rng);
    layer.bias.assign(out, 0.0);
    layers.push_back(std::move(layer));
    in = out;
  }
  return Reducer(std::move(layers));
}

std::size_t Reducer::input_dim() const { return layers_.empty() ? 0 : layers_.front().in; }
std::size_t Reducer::out_dim() const { return layers_.empty() ? 0 : layers_.back().out; }

std::vector<double> Reducer::forward(std::span<const double> x) const {
  if (x.size() != input_dim()) {
    raise(ErrorKind::Data, "reducer expects " + std::to_string(input_dim()) +
                               " inputs, got " + std::to_string(x.size()));
  }
  return forward_trace(layers_, x).acts.back();
}

std::vector<float> Reducer::transform(std::span<const float> features) const {
  auto out = forward(to_double(features));
  return {out.begin(), out.end()};
}

double Reducer::lipschitz_bound() const {
  double bound = 1.0;
  for (const auto& layer : layers_) bound *= spectral_norm(layer);
  return bound;
}

std::vector<std::vector<std::size_t>> same_class_neighbours(const Points& features,
                                                            const std::vector<std::uint32_t>& labels,
                                                            std::uint32_t k_neighbors) {
  const std::size_t n = features.size();
  std::map<std::uint32_t, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < n; ++i) by_class[labels[i]].push_back(i);
  std::vector<std::vector<std::size_t>> out(n);
  for (const auto& [label, members] : by_class) {
    for (auto i : members) {
      std::vector<std::pair<double, std::size_t>> cand;
      cand.reserve(members.size());
      for (auto j : members) {
        if (j == i) continue;
        cand.emplace_back(distance(features[i], features[j], Distance::L2), j);
      }
      const std::size_t keep = std::min<std::size_t>(k_neighbors, cand.size());
      std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(keep), cand.end());
      for (std::size_t q = 0; q < keep; ++q) out[i].push_back(cand[q].second);
    }
  }
  return out;
}

std::vector<Triplet> mine_triplets(const Points& features, const std::vector<std::uint32_t>& labels,
                                   std::uint32_t k_neighbors, std::uint64_t seed) {
  check_labels(features, labels);
  if (k_neighbors < 1) raise(ErrorKind::Config, "k_neighbors must be >= 1");
  auto neighbours = same_class_neighbours(features, labels, k_neighbors);
  std::mt19937_64 rng(seed);
  return sample_triplets(labels, neighbours, rng);
}

double triplet_loss(const Reducer& net, const Points& features, std::span<const Triplet> triplets,
                    double margin, ReducerGradients* grad) {
  if (triplets.empty()) return 0.0;
  const auto& layers = net.layers();
  if (grad != nullptr) *grad = zero_gradients(layers);
  const double scale = 1.0 / double(triplets.size());
  double total = 0.0;
  for (const auto& t : triplets) {
    const auto xa = to_double(features[t.anchor]);
    const auto xp = to_double(features[t.positive]);
    const auto xn = to_double(features[t.negative]);
    const Trace ta = forward_trace(layers, xa);
    const Trace tp = forward_trace(layers, xp);
    const Trace tn = forward_trace(layers, xn);
    const auto& ga = ta.acts.back();
    const auto& gp = tp.acts.back();
    const auto& gn = tn.acts.back();
    double dp = 0.0;
    double dn = 0.0;
    for (std::size_t j = 0; j < ga.size(); ++j) {
      dp += (ga[j] - gp[j]) * (ga[j] - gp[j]);
      dn += (ga[j] - gn[j]) * (ga[j] - gn[j]);
    }
    const double hinge = dp - dn + margin;
    if (hinge <= 0.0) continue;
    total += hinge;
    if (grad == nullptr) continue;
    std::vector<double> d_a(ga.size());
    std::vector<double> d_p(ga.size());
    std::vector<double> d_n(ga.size());
    for (std::size_t j = 0; j < ga.size(); ++j) {
      d_a[j] = 2.0 * (gn[j] - gp[j]);
      d_p[j] = -2.0 * (ga[j] - gp[j]);
      d_n[j] = 2.0 * (ga[j] - gn[j]);
    }
    backward(layers, ta, std::move(d_a), *grad, scale);
    backward(layers, tp, std::move(d_p), *grad, scale);
    backward(layers, tn, std::move(d_n), *grad, scale);
  }
  return total * scale;
}

Reducer train_reducer(const Points& features, const std::vector<std::uint32_t>& labels,
                      const SdrConfig& cfg, TrainingReport* report) {
  check_labels(features, labels);
  const std::size_t input_dim = features.front().size();
  cfg.validate(input_dim);

  // Stratified train/validation split.
  std::mt19937_64 split_rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);
  std::map<std::uint32_t, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> val_idx;
  for (auto& [label, members] : by_class) {
    std::shuffle(members.begin(), members.end(), split_rng);
    const auto n_val = static_cast<std::size_t>(std::floor(cfg.validation_fraction * double(members.size())));
    const std::size_t take = members.size() >= 20 ? n_val : 0;
    val_idx.insert(val_idx.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take));
    train_idx.insert(train_idx.end(), members.begin() + static_cast<std::ptrdiff_t>(take), members.end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(val_idx.begin(), val_idx.end());

  const Points train_x = gather(features, train_idx);
  const auto train_y = gather(labels, train_idx);
  const Points val_x = gather(features, val_idx);
  const auto val_y = gather(labels, val_idx);
  const bool has_validation = can_mine(val_y);

  const auto train_nb = same_class_neighbours(train_x, train_y, cfg.k_neighbors);
  std::mt19937_64 rng(cfg.seed);
  const auto monitor = sample_triplets(train_y, train_nb, rng);
  std::vector<Triplet> val_triplets;
  if (has_validation) {
    const auto val_nb = same_class_neighbours(val_x, val_y, cfg.k_neighbors);
    val_triplets = sample_triplets(val_y, val_nb, rng);
  }

  Reducer net = Reducer::initialized(input_dim, cfg.hidden_dims, cfg.out_dim, cfg.seed + 1);
  Reducer best = net;
  Adam adam(net.layers(), cfg.learning_rate);
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  TrainingReport local;

  for (std::uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto triplets = sample_triplets(train_y, train_nb, rng);
    std::shuffle(triplets.begin(), triplets.end(), rng);
    for (std::size_t start = 0; start < triplets.size(); start += cfg.batch_size) {
      const std::size_t len = std::min<std::size_t>(cfg.batch_size, triplets.size() - start);
      ReducerGradients g;
      const double loss =
          triplet_loss(net, train_x, std::span(triplets).subspan(start, len), cfg.margin, &g);
      if (!std::isfinite(loss)) {
        raise(ErrorKind::Divergence, "triplet loss became non-finite at epoch " +
                                         std::to_string(epoch) + "; lower learning_rate");
      }
      adam.step(net.layers(), g);
    }
    const double train_loss = triplet_loss(net, train_x, monitor, cfg.margin);
    if (!std::isfinite(train_loss)) {
      raise(ErrorKind::Divergence, "triplet loss became non-finite at epoch " +
                                       std::to_string(epoch) + "; lower learning_rate");
    }
    local.train_loss.push_back(train_loss);
    const double watched =
        has_validation ? triplet_loss(net, val_x, val_triplets, cfg.margin) : train_loss;
    if (has_validation) local.validation_loss.push_back(watched);
    if (watched < best_loss) {
      best_loss = watched;
      best = net;
      local.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      local.early_stopped = true;
      break;
    }
  }
  if (report != nullptr) *report = std::move(local);
  return best;
}

}  // namespace fmapood
