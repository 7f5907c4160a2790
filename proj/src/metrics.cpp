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

#include "fmapood/metrics.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace fmapood {

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double iw = std::min<double>(a.x_max, b.x_max) - std::max<double>(a.x_min, b.x_min);
  const double ih = std::min<double>(a.y_max, b.y_max) - std::max<double>(a.y_min, b.y_min);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double area_a = static_cast<double>(a.width()) * a.height();
  const double area_b = static_cast<double>(b.width()) * b.height();
  const double uni = area_a + area_b - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

namespace {

std::vector<std::size_t> by_score_desc(std::span<const ScoredBox> preds) {
  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return preds[a].score > preds[b].score; });
  return order;
}

bool overlaps_unknown(const BoundingBox& box, std::span<const GroundTruthObject> gt,
                      double threshold) {
  return std::any_of(gt.begin(), gt.end(), [&](const GroundTruthObject& g) {
    return g.is_unknown() && iou(box, g.box) >= threshold;
  });
}

}  // namespace

MatchResult match(std::span<const ScoredBox> predictions,
                  std::span<const GroundTruthObject> ground_truth, double iou_threshold,
                  std::optional<std::int32_t> class_filter) {
  MatchResult r;
  r.iou_threshold = iou_threshold;
  r.matched_gt.assign(predictions.size(), std::nullopt);
  r.is_tp.assign(predictions.size(), false);
  r.gt_covered.assign(ground_truth.size(), false);
  for (std::size_t p : by_score_desc(predictions)) {
    double best = -1.0;
    std::size_t best_g = 0;
    for (std::size_t g = 0; g < ground_truth.size(); ++g) {
      if (r.gt_covered[g]) continue;
      if (class_filter && ground_truth[g].class_id != *class_filter) continue;
      const double v = iou(predictions[p].box, ground_truth[g].box);
      if (v > best) {
        best = v;
        best_g = g;
      }
    }
    if (best >= iou_threshold) {
      r.gt_covered[best_g] = true;
      r.matched_gt[p] = best_g;
      r.is_tp[p] = true;
    }
  }
  return r;
}

RankedOutcomes collect_outcomes(std::span<const Scene> scenes, std::int32_t class_id,
                                double iou_threshold) {
  RankedOutcomes out;
  for (const Scene& s : scenes) {
    std::vector<ScoredBox> preds;
    for (const auto& p : s.predictions) {
      if (p.class_id == class_id) preds.push_back(p);
    }
    out.gt_count += static_cast<std::size_t>(
        std::count_if(s.ground_truth.begin(), s.ground_truth.end(),
                      [&](const GroundTruthObject& g) { return g.class_id == class_id; }));
    const MatchResult m = match(preds, s.ground_truth, iou_threshold, class_id);
    for (std::size_t i = 0; i < preds.size(); ++i) out.ranked.emplace_back(preds[i].score, m.is_tp[i]);
  }
  return out;
}

std::optional<double> average_precision(const RankedOutcomes& outcomes) {
  if (outcomes.gt_count == 0) return std::nullopt;
  auto ranked = outcomes.ranked;
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  const std::size_t n = ranked.size();
  // Extended precision, rounded once at the end.
  std::vector<long double> precision(n);
  std::size_t tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (ranked[i].second) ++tp;
    precision[i] = static_cast<long double>(tp) / static_cast<long double>(i + 1);
  }
  for (std::size_t i = n; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  // Recall rises by 1/gt_count at each true positive.
  long double sum = 0.0L;
  for (std::size_t i = 0; i < n; ++i) {
    if (ranked[i].second) sum += precision[i];
  }
  return static_cast<double>(sum / static_cast<long double>(outcomes.gt_count));
}

std::optional<double> average_precision(std::span<const Scene> scenes, std::int32_t class_id,
                                        double iou_threshold) {
  return average_precision(collect_outcomes(scenes, class_id, iou_threshold));
}

double f1_score(double precision, double recall) {
  const double s = precision + recall;
  return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

UnknownMetrics unknown_rates(const UnknownCounts& counts) {
  UnknownMetrics m;
  m.counts = counts;
  const std::size_t gt = counts.tp + counts.fn;
  if (gt == 0) return m;
  m.u_rec = static_cast<double>(counts.tp) / static_cast<double>(gt);
  if (counts.tp + counts.fp > 0) {
    m.u_pre = static_cast<double>(counts.tp) / static_cast<double>(counts.tp + counts.fp);
    m.u_f1 = f1_score(*m.u_pre, *m.u_rec);
  } else {
    // Nothing flagged: recall is zero, so the harmonic mean is zero as well.
    m.u_f1 = 0.0;
  }
  return m;
}

UnknownMetrics unknown_metrics(std::span<const Scene> scenes, double iou_threshold) {
  UnknownCounts counts;
  for (const Scene& s : scenes) {
    std::vector<ScoredBox> preds;
    for (const auto& p : s.predictions) {
      if (p.class_id == GroundTruthObject::kUnknown) preds.push_back(p);
    }
    const MatchResult m = match(preds, s.ground_truth, iou_threshold, GroundTruthObject::kUnknown);
    const auto tp = static_cast<std::size_t>(std::count(m.is_tp.begin(), m.is_tp.end(), true));
    counts.tp += tp;
    counts.fp += preds.size() - tp;
    for (std::size_t g = 0; g < s.ground_truth.size(); ++g) {
      if (s.ground_truth[g].is_unknown() && !m.gt_covered[g]) ++counts.fn;
    }
  }
  UnknownMetrics m = unknown_rates(counts);
  if (m.u_rec) m.u_ap = average_precision(scenes, GroundTruthObject::kUnknown, iou_threshold);
  return m;
}

std::size_t a_ose(std::span<const Scene> known_scenes, double iou_threshold, AoseMode mode) {
  std::size_t count = 0;
  for (const Scene& s : known_scenes) {
    if (mode == AoseMode::GroundTruth) {
      for (const auto& g : s.ground_truth) {
        if (!g.is_unknown()) continue;
        const bool hit = std::any_of(s.predictions.begin(), s.predictions.end(), [&](const ScoredBox& p) {
          return p.class_id >= 0 && iou(p.box, g.box) >= iou_threshold;
        });
        if (hit) ++count;
      }
    } else {
      for (const auto& p : s.predictions) {
        if (p.class_id >= 0 && overlaps_unknown(p.box, s.ground_truth, iou_threshold)) ++count;
      }
    }
  }
  return count;
}

std::optional<double> wilderness_impact(std::span<const Scene> known_scenes, double recall_level,
                                        double iou_threshold) {
  if (!(recall_level > 0.0 && recall_level <= 1.0)) return std::nullopt;
  // Kind of each known-class prediction: true positive, closed-set false
  // positive, or a false positive that only exists in the open set.
  enum class Kind { Tp, Fp, OpenFp };
  std::vector<std::pair<double, Kind>> rows;
  std::size_t known_gt = 0;
  for (const Scene& s : known_scenes) {
    std::int32_t max_class = -1;
    for (const auto& p : s.predictions) max_class = std::max(max_class, p.class_id);
    for (const auto& g : s.ground_truth) {
      if (!g.is_unknown()) ++known_gt;
    }
    for (std::int32_t c = 0; c <= max_class; ++c) {
      std::vector<ScoredBox> preds;
      for (const auto& p : s.predictions) {
        if (p.class_id == c) preds.push_back(p);
      }
      if (preds.empty()) continue;
      const MatchResult m = match(preds, s.ground_truth, iou_threshold, c);
      for (std::size_t i = 0; i < preds.size(); ++i) {
        Kind k = Kind::Fp;
        if (m.is_tp[i]) {
          k = Kind::Tp;
        } else if (overlaps_unknown(preds[i].box, s.ground_truth, iou_threshold)) {
          k = Kind::OpenFp;
        }
        rows.emplace_back(preds[i].score, k);
      }
    }
  }
  if (known_gt == 0) return std::nullopt;
  std::stable_sort(rows.begin(), rows.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t open_fp = 0;
  for (std::size_t i = 0; i < rows.size();) {
    // Advance over a block of tied scores so the cutoff is a score, not a rank.
    std::size_t j = i;
    for (; j < rows.size() && rows[j].first == rows[i].first; ++j) {
      switch (rows[j].second) {
        case Kind::Tp: ++tp; break;
        case Kind::Fp: ++fp; break;
        case Kind::OpenFp: ++open_fp; break;
      }
    }
    i = j;
    const double recall = static_cast<double>(tp) / static_cast<double>(known_gt);
    if (recall >= recall_level) {
      const double p_closed = static_cast<double>(tp) / static_cast<double>(tp + fp);
      const double p_open = static_cast<double>(tp) / static_cast<double>(tp + fp + open_fp);
      return p_closed / p_open - 1.0;
    }
  }
  return std::nullopt;
}

std::vector<std::size_t> pareto_front(std::span<const ParetoPoint> points) {
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return points[a].map > points[b].map; });
  std::vector<std::size_t> front;
  double best_above = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    double group_max = -std::numeric_limits<double>::infinity();
    for (; j < order.size() && points[order[j]].map == points[order[i]].map; ++j) {
      group_max = std::max(group_max, points[order[j]].u_f1_sum);
    }
    if (group_max > best_above) {
      for (std::size_t k = i; k < j; ++k) {
        if (points[order[k]].u_f1_sum == group_max) front.push_back(order[k]);
      }
      best_above = group_max;
    }
    i = j;
  }
  return front;
}

EvalReport evaluate(std::span<const Scene> known, std::span<const Scene> unknown,
                    std::uint32_t num_classes, double wi_recall_level, AoseMode aose_mode) {
  EvalReport r;
  double sum = 0.0;
  std::size_t n = 0;
  for (std::uint32_t c = 0; c < num_classes; ++c) {
    auto ap = average_precision(known, static_cast<std::int32_t>(c));
    if (ap) {
      sum += *ap;
      ++n;
    }
    r.per_class_ap.push_back(ap);
  }
  if (n > 0) r.map_known = sum / static_cast<double>(n);
  r.unknown = unknown_metrics(unknown);
  r.a_ose = a_ose(known, 0.5, aose_mode);
  r.wi = wilderness_impact(known, wi_recall_level);
  for (const Scene& s : known) {
    for (const auto& g : s.ground_truth) (g.is_unknown() ? r.unknown_gt : r.known_gt)++;
  }
  return r;
}

}  // namespace fmapood
