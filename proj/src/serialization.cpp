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

#include "fmapood/serialization.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "fmapood/errors.hpp"
#include "json_reader.hpp"

namespace fmapood {

using detail::as_config;
using detail::Reader;

namespace {

double finite_or_throw(const json& v, const std::string& where) {
  if (!v.is_number()) raise(ErrorKind::Format, where + " must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) raise(ErrorKind::Format, where + " must be finite");
  return d;
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

RoiAlignConfig roi_config_from_json(const json& j, const std::string& where) {
  Reader r(j, where, {"output_height", "output_width", "sampling_ratio", "aligned"});
  RoiAlignConfig c;
  r.opt("output_height", c.output_height);
  r.opt("output_width", c.output_width);
  r.opt("sampling_ratio", c.sampling_ratio);
  r.opt("aligned", c.aligned);
  c.validate();
  return c;
}

json to_json(const RoiAlignConfig& c) {
  return {{"output_height", c.output_height},
          {"output_width", c.output_width},
          {"sampling_ratio", c.sampling_ratio},
          {"aligned", c.aligned}};
}

ClusterSpec cluster_spec_from_json(const json& j, const std::string& where) {
  Reader r(j, where,
           {"method", "k_grid", "forced_k", "min_cluster_size_grid", "seed", "max_iters", "tol",
            "silhouette_min_samples", "silhouette_max_samples"});
  ClusterSpec c;
  if (r.has("method")) as_config([&] { c.method = parse_cluster_method(r.req<std::string>("method")); });
  r.opt("k_grid", c.k_grid);
  r.opt("forced_k", c.forced_k);
  r.opt("min_cluster_size_grid", c.min_cluster_size_grid);
  r.opt("seed", c.seed);
  r.opt("max_iters", c.max_iters);
  r.opt("tol", c.tol);
  r.opt("silhouette_min_samples", c.silhouette_min_samples);
  r.opt("silhouette_max_samples", c.silhouette_max_samples);
  as_config([&] { c.validate(); });
  return c;
}

json to_json(const ClusterSpec& c) {
  return {{"method", to_string(c.method)},
          {"k_grid", c.k_grid},
          {"forced_k", c.forced_k},
          {"min_cluster_size_grid", c.min_cluster_size_grid},
          {"seed", c.seed},
          {"max_iters", c.max_iters},
          {"tol", c.tol},
          {"silhouette_min_samples", c.silhouette_min_samples},
          {"silhouette_max_samples", c.silhouette_max_samples}};
}

SdrConfig sdr_config_from_json(const json& j, const std::string& where) {
  Reader r(j, where,
           {"out_dim", "k_neighbors", "hidden_dims", "margin", "batch_size", "epochs",
            "learning_rate", "patience", "seed", "validation_fraction"});
  SdrConfig c;
  r.opt("out_dim", c.out_dim);
  r.opt("k_neighbors", c.k_neighbors);
  r.opt("hidden_dims", c.hidden_dims);
  r.opt("margin", c.margin);
  r.opt("batch_size", c.batch_size);
  r.opt("epochs", c.epochs);
  r.opt("learning_rate", c.learning_rate);
  r.opt("patience", c.patience);
  r.opt("seed", c.seed);
  r.opt("validation_fraction", c.validation_fraction);
  c.validate(0);
  return c;
}

json to_json(const SdrConfig& c) {
  return {{"out_dim", c.out_dim},
          {"k_neighbors", c.k_neighbors},
          {"hidden_dims", c.hidden_dims},
          {"margin", c.margin},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"learning_rate", c.learning_rate},
          {"patience", c.patience},
          {"seed", c.seed},
          {"validation_fraction", c.validation_fraction}};
}

FitConfig fit_config_from_json(const json& j, const std::string& where) {
  Reader r(j, where,
           {"iou_match_threshold", "target_tpr", "distance", "cluster", "roi", "min_samples_per_cell"});
  FitConfig c;
  r.opt("iou_match_threshold", c.iou_match_threshold);
  r.opt("target_tpr", c.target_tpr);
  if (r.has("distance")) as_config([&] { c.distance = parse_distance(r.req<std::string>("distance")); });
  if (r.has("cluster")) c.cluster = cluster_spec_from_json(r.at("cluster"), r.path("cluster"));
  if (r.has("roi")) c.roi = roi_config_from_json(r.at("roi"), r.path("roi"));
  r.opt("min_samples_per_cell", c.min_samples_per_cell);
  c.validate();
  return c;
}

json to_json(const FitConfig& c) {
  return {{"iou_match_threshold", c.iou_match_threshold},
          {"target_tpr", c.target_tpr},
          {"distance", to_string(c.distance)},
          {"cluster", to_json(c.cluster)},
          {"roi", to_json(c.roi)},
          {"min_samples_per_cell", c.min_samples_per_cell},
          {"sdr", c.sdr ? to_json(*c.sdr) : json(nullptr)}};
}

EulConfig eul_config_from_json(const json& j, const std::string& where) {
  Reader r(j, where, {"otsu_depth", "connectivity", "top_k", "min_region_pixels", "suppress_iou"});
  EulConfig c;
  r.opt("otsu_depth", c.otsu_depth);
  r.opt("connectivity", c.connectivity);
  r.opt("top_k", c.top_k);
  r.opt("min_region_pixels", c.min_region_pixels);
  r.opt("suppress_iou", c.suppress_iou);
  c.validate();
  return c;
}

json to_json(const EulConfig& c) {
  return {{"otsu_depth", c.otsu_depth},
          {"connectivity", c.connectivity},
          {"top_k", c.top_k},
          {"min_region_pixels", c.min_region_pixels},
          {"suppress_iou", c.suppress_iou}};
}

LogitsMethodConfig logits_config_from_json(const json& j, const std::string& where) {
  Reader r(j, where, {"method", "temperature", "target_tpr", "granularity", "min_samples_per_class"});
  LogitsMethodConfig c;
  if (r.has("method")) c.method = parse_logits_method(r.req<std::string>("method"));
  if (r.has("temperature")) c.temperature = r.req<double>("temperature");
  r.opt("target_tpr", c.target_tpr);
  if (r.has("granularity")) c.granularity = parse_granularity(r.req<std::string>("granularity"));
  r.opt("min_samples_per_class", c.min_samples_per_class);
  c.validate();
  return c;
}

json to_json(const LogitsMethodConfig& c) {
  return {{"method", to_string(c.method)},
          {"temperature", c.effective_temperature()},
          {"target_tpr", c.target_tpr},
          {"granularity", to_string(c.granularity)},
          {"min_samples_per_class", c.min_samples_per_class}};
}

SynthConfig synth_config_from_json(const json& j, const std::string& where) {
  Reader r(j, where,
           {"num_classes", "stride_count", "channels", "downsample_factors", "image_size",
            "slot_size", "images", "min_objects", "max_objects", "id_cluster_means",
            "clusters_per_cell", "mean_scale", "id_sigma", "ood_shift", "unknown_fraction",
            "label_noise", "background_fp_rate", "background_sigma", "name", "seed"});
  SynthConfig c;
  r.opt("num_classes", c.num_classes);
  r.opt("stride_count", c.stride_count);
  r.opt("channels", c.channels);
  r.opt("downsample_factors", c.downsample_factors);
  r.opt("image_size", c.image_size);
  r.opt("slot_size", c.slot_size);
  r.opt("images", c.images);
  r.opt("min_objects", c.min_objects);
  r.opt("max_objects", c.max_objects);
  r.opt("id_cluster_means", c.id_cluster_means);
  r.opt("clusters_per_cell", c.clusters_per_cell);
  r.opt("mean_scale", c.mean_scale);
  r.opt("id_sigma", c.id_sigma);
  r.opt("ood_shift", c.ood_shift);
  r.opt("unknown_fraction", c.unknown_fraction);
  r.opt("label_noise", c.label_noise);
  r.opt("background_fp_rate", c.background_fp_rate);
  r.opt("background_sigma", c.background_sigma);
  r.opt("name", c.name);
  r.opt("seed", c.seed);
  c.validate();
  return c;
}

json to_json(const SynthConfig& c) {
  return {{"num_classes", c.num_classes},
          {"stride_count", c.stride_count},
          {"channels", c.channels},
          {"downsample_factors", c.downsample_factors},
          {"image_size", c.image_size},
          {"slot_size", c.slot_size},
          {"images", c.images},
          {"min_objects", c.min_objects},
          {"max_objects", c.max_objects},
          {"id_cluster_means", c.id_cluster_means},
          {"clusters_per_cell", c.clusters_per_cell},
          {"mean_scale", c.mean_scale},
          {"id_sigma", c.id_sigma},
          {"ood_shift", c.ood_shift},
          {"unknown_fraction", c.unknown_fraction},
          {"label_noise", c.label_noise},
          {"background_fp_rate", c.background_fp_rate},
          {"background_sigma", c.background_sigma},
          {"name", c.name},
          {"seed", c.seed}};
}

json to_json(const Reducer& r) {
  json layers = json::array();
  for (const auto& l : r.layers()) {
    layers.push_back({{"in", l.in}, {"out", l.out}, {"weights", l.weights}, {"bias", l.bias}});
  }
  return {{"layers", layers}};
}

Reducer reducer_from_json(const json& j, const std::string& where) {
  try {
    std::vector<DenseLayer> layers;
    for (const auto& l : j.at("layers")) {
      DenseLayer d;
      d.in = l.at("in").get<std::size_t>();
      d.out = l.at("out").get<std::size_t>();
      d.weights = l.at("weights").get<std::vector<double>>();
      d.bias = l.at("bias").get<std::vector<double>>();
      layers.push_back(std::move(d));
    }
    return Reducer(std::move(layers));
  } catch (const json::exception& e) {
    raise(ErrorKind::Format, where + ": " + e.what());
  }
}

namespace {

json pooled_json(const CentroidBank::PooledRecord& p) {
  return {{"threshold", p.threshold},
          {"id_score_min", p.id_score_min},
          {"id_score_max", p.id_score_max},
          {"sample_count", p.sample_count}};
}

CentroidBank::PooledRecord pooled_from_json(const json& j, const std::string& where) {
  CentroidBank::PooledRecord p;
  p.threshold = finite_or_throw(j.at("threshold"), where + ".threshold");
  p.id_score_min = finite_or_throw(j.at("id_score_min"), where + ".id_score_min");
  p.id_score_max = finite_or_throw(j.at("id_score_max"), where + ".id_score_max");
  p.sample_count = j.at("sample_count").get<std::size_t>();
  return p;
}

ThresholdSource parse_source(const std::string& s, const std::string& where) {
  if (s == "cell") return ThresholdSource::Cell;
  if (s == "class") return ThresholdSource::Class;
  if (s == "global") return ThresholdSource::Global;
  raise(ErrorKind::Format, where + ": unknown threshold source '" + s + "'");
}

}  // namespace

json to_json(const CentroidBank& bank) {
  json cells = json::array();
  for (std::uint32_t s = 1; s <= bank.stride_count(); ++s) {
    for (std::uint32_t c = 0; c < bank.num_classes(); ++c) {
      const CellModel& m = bank.cell(s, c);
      cells.push_back({{"stride_index", s},
                       {"class_id", c},
                       {"centroids", m.centroids},
                       {"threshold", m.threshold},
                       {"id_score_min", m.id_score_min},
                       {"id_score_max", m.id_score_max},
                       {"sample_count", m.sample_count},
                       {"source", to_string(m.source)},
                       {"method_used", to_string(m.method_used)},
                       {"silhouette", opt_json(m.silhouette)},
                       {"noise_count", m.noise_count}});
    }
  }
  json classes = json::array();
  for (const auto& rec : bank.class_records()) classes.push_back(rec ? pooled_json(*rec) : json(nullptr));
  json reducers = json::array();
  for (const auto& r : bank.reducers()) reducers.push_back(r.empty() ? json(nullptr) : to_json(r));
  return {{"num_classes", bank.num_classes()},
          {"stride_count", bank.stride_count()},
          {"distance", to_string(bank.distance())},
          {"roi", to_json(bank.roi())},
          {"cells", cells},
          {"class_records", classes},
          {"global_record", pooled_json(bank.global_record())},
          {"reducers", reducers}};
}

CentroidBank bank_from_json(const json& j, const std::string& where) {
  try {
    const auto C = j.at("num_classes").get<std::uint32_t>();
    const auto Z = j.at("stride_count").get<std::uint32_t>();
    CentroidBank bank(C, Z, parse_distance(j.at("distance").get<std::string>()),
                      roi_config_from_json(j.at("roi"), where + ".roi"));
    const json& cells = j.at("cells");
    if (cells.size() != static_cast<std::size_t>(C) * Z) {
      raise(ErrorKind::Format, where + ".cells must hold num_classes * stride_count entries");
    }
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const json& cj = cells[i];
      const std::string w = where + ".cells[" + std::to_string(i) + "]";
      CellModel& m = bank.cell(cj.at("stride_index").get<std::uint32_t>(), cj.at("class_id").get<std::uint32_t>());
      m.centroids = cj.at("centroids").get<Points>();
      m.threshold = finite_or_throw(cj.at("threshold"), w + ".threshold");
      m.id_score_min = finite_or_throw(cj.at("id_score_min"), w + ".id_score_min");
      m.id_score_max = finite_or_throw(cj.at("id_score_max"), w + ".id_score_max");
      m.sample_count = cj.at("sample_count").get<std::size_t>();
      m.source = parse_source(cj.at("source").get<std::string>(), w);
      m.method_used = parse_cluster_method(cj.at("method_used").get<std::string>());
      if (!cj.at("silhouette").is_null()) m.silhouette = cj.at("silhouette").get<double>();
      m.noise_count = cj.at("noise_count").get<std::size_t>();
    }
    const json& classes = j.at("class_records");
    if (classes.size() != C) raise(ErrorKind::Format, where + ".class_records must hold num_classes entries");
    for (std::uint32_t c = 0; c < C; ++c) {
      if (!classes[c].is_null()) {
        bank.class_records()[c] = pooled_from_json(classes[c], where + ".class_records");
      }
    }
    bank.global_record() = pooled_from_json(j.at("global_record"), where + ".global_record");
    const json& reducers = j.at("reducers");
    if (!reducers.empty()) {
      if (reducers.size() != Z) raise(ErrorKind::Format, where + ".reducers must hold stride_count entries");
      for (const auto& r : reducers) {
        bank.reducers().push_back(r.is_null() ? Reducer{} : reducer_from_json(r, where + ".reducers"));
      }
    }
    return bank;
  } catch (const json::exception& e) {
    raise(ErrorKind::Format, where + ": " + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Format) throw;
    raise(ErrorKind::Format, where + ": " + e.what());
  }
}

json to_json(const ThresholdRecord& r) {
  return {{"threshold", r.threshold},
          {"id_score_min", r.id_score_min},
          {"id_score_max", r.id_score_max},
          {"sample_count", r.sample_count}};
}

json to_json(const LogitsCalibration& c) {
  json per_class = json::array();
  for (const auto& r : c.per_class) per_class.push_back(r ? to_json(*r) : json(nullptr));
  return {{"config", to_json(c.config)}, {"global", to_json(c.global)}, {"per_class", per_class}};
}

LogitsCalibration calibration_from_json(const json& j, const std::string& where) {
  try {
    LogitsCalibration c;
    c.config = logits_config_from_json(j.at("config"), where + ".config");
    auto rec = [&](const json& r, const std::string& w) {
      const auto p = pooled_from_json(r, w);
      return ThresholdRecord{p.threshold, p.id_score_min, p.id_score_max, p.sample_count};
    };
    c.global = rec(j.at("global"), where + ".global");
    for (const auto& r : j.at("per_class")) {
      c.per_class.push_back(r.is_null() ? std::nullopt
                                        : std::optional(rec(r, where + ".per_class")));
    }
    return c;
  } catch (const json::exception& e) {
    raise(ErrorKind::Format, where + ": " + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Format) throw;
    raise(ErrorKind::Format, where + ": " + e.what());
  }
}

json to_json(const EvalReport& r) {
  json per_class = json::array();
  for (const auto& ap : r.per_class_ap) per_class.push_back(opt_json(ap));
  return {{"mAP", opt_json(r.map_known)},
          {"per_class_ap", per_class},
          {"U-AP", opt_json(r.unknown.u_ap)},
          {"U-PRE", opt_json(r.unknown.u_pre)},
          {"U-REC", opt_json(r.unknown.u_rec)},
          {"U-F1", opt_json(r.unknown.u_f1)},
          {"A-OSE", r.a_ose},
          {"WI", opt_json(r.wi)},
          {"counts",
           {{"tp_u", r.unknown.counts.tp}, {"fp_u", r.unknown.counts.fp}, {"fn_u", r.unknown.counts.fn}}},
          {"known_gt", r.known_gt},
          {"unknown_gt", r.unknown_gt}};
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::Io, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    raise(ErrorKind::Format, path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorKind::Io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) raise(ErrorKind::Io, "failed writing " + path.string());
}

}  // namespace fmapood
