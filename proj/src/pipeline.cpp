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

#include "fmapood/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <set>

#include <spdlog/fmt/fmt.h>
#include <spdlog/spdlog.h>

#include "fmapood/errors.hpp"
#include "fmapood/parallel.hpp"
#include "fmapood/synth.hpp"
#include "json_reader.hpp"

namespace fmapood {

namespace fs = std::filesystem;
using detail::as_config;
using detail::Reader;

namespace {

const std::set<std::string> kMethods = {"fmap", "msp", "energy", "odin", "fusion"};
const std::set<std::string> kComponents = {"fmap", "msp", "energy", "odin"};

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt::format("{}", *v) : ""; }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorKind::Io, "cannot write " + path.string());
  out << text;
  if (!out) raise(ErrorKind::Io, "failed writing " + path.string());
}

}  // namespace

fs::path RunConfig::resolve(const std::string& p) const {
  const fs::path path(p);
  return path.is_absolute() ? path : base_dir / path;
}

std::vector<std::string> RunConfig::components() const {
  if (method == "fusion") return {fusion.method_a, fusion.method_b};
  return {method};
}

bool RunConfig::needs_fmap() const {
  const auto c = components();
  return eul.has_value() || std::find(c.begin(), c.end(), "fmap") != c.end();
}

void RunConfig::validate() const {
  if (!kMethods.contains(method)) raise(ErrorKind::Config, "unknown method '" + method + "'");
  if (method == "fusion") {
    if (!kComponents.contains(fusion.method_a) || !kComponents.contains(fusion.method_b)) {
      raise(ErrorKind::Config, "fusion methods must be fmap, msp, energy or odin");
    }
    if (fusion.method_a == fusion.method_b) raise(ErrorKind::Config, "fusion needs two different methods");
  }
  if (confidence_thresholds.empty()) raise(ErrorKind::Config, "confidence_thresholds is empty");
  for (std::size_t i = 0; i < confidence_thresholds.size(); ++i) {
    const double t = confidence_thresholds[i];
    if (!(t > 0.0 && t < 1.0)) raise(ErrorKind::Config, "confidence thresholds must lie in (0, 1)");
    if (i > 0 && !(t > confidence_thresholds[i - 1])) {
      raise(ErrorKind::Config, "confidence thresholds must be strictly ascending");
    }
  }
  if (!(wi_recall > 0.0 && wi_recall <= 1.0)) raise(ErrorKind::Config, "metrics.wi_recall must lie in (0, 1]");
  if (threads < 1) raise(ErrorKind::Config, "threads must be >= 1");
}

RunConfig run_config_from_json(const json& doc, const fs::path& base_dir) {
  Reader r(doc, "config",
           {"fit_manifest", "eval_manifests", "method", "fit", "sdr", "eul", "logits", "fusion",
            "confidence_thresholds", "metrics", "out_dir", "bank", "seed", "threads", "runs"});
  RunConfig c;
  c.base_dir = base_dir;
  c.document = doc;
  r.opt("seed", c.seed);
  r.opt("threads", c.threads);
  r.opt("fit_manifest", c.fit_manifest);
  r.opt("eval_manifests", c.eval_manifests);
  r.opt("method", c.method);
  r.opt("confidence_thresholds", c.confidence_thresholds);
  r.opt("out_dir", c.out_dir);
  if (r.has("bank")) c.bank_path = r.req<std::string>("bank");
  if (r.has("runs")) {
    c.runs = r.at("runs");
    if (!c.runs.is_array()) raise(ErrorKind::Config, "config.runs must be an array");
  }

  json fit = r.has("fit") ? r.at("fit") : json::object();
  if (!fit.is_object()) raise(ErrorKind::Config, "config.fit must be a JSON object");
  if (!fit.contains("cluster")) fit["cluster"] = json::object();
  if (fit["cluster"].is_object() && !fit["cluster"].contains("seed")) fit["cluster"]["seed"] = c.seed;
  c.fit = fit_config_from_json(fit, "config.fit");
  if (r.has("sdr")) {
    json sdr = r.at("sdr");
    if (sdr.is_object() && !sdr.contains("seed")) sdr["seed"] = c.seed;
    c.fit.sdr = sdr_config_from_json(sdr, "config.sdr");
  }
  if (r.has("eul")) c.eul = eul_config_from_json(r.at("eul"), "config.eul");
  json logits = r.has("logits") ? r.at("logits") : json::object();
  if (logits.is_object() && !logits.contains("target_tpr")) logits["target_tpr"] = c.fit.target_tpr;
  c.logits = logits_config_from_json(logits, "config.logits");
  if (r.has("fusion")) {
    Reader f(r.at("fusion"), "config.fusion", {"strategy", "method_a", "method_b"});
    if (f.has("strategy")) {
      as_config([&] { c.fusion.strategy = parse_fusion_strategy(f.req<std::string>("strategy")); });
    }
    f.opt("method_a", c.fusion.method_a);
    f.opt("method_b", c.fusion.method_b);
  }
  if (r.has("metrics")) {
    Reader m(r.at("metrics"), "config.metrics", {"wi_recall", "a_ose"});
    m.opt("wi_recall", c.wi_recall);
    const std::string mode = m.str("a_ose", "ground_truth");
    if (mode == "ground_truth") {
      c.aose_mode = AoseMode::GroundTruth;
    } else if (mode == "prediction") {
      c.aose_mode = AoseMode::Prediction;
    } else {
      raise(ErrorKind::Config, "config.metrics.a_ose must be ground_truth or prediction");
    }
  }
  c.fit.threads = c.threads;
  c.validate();
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  const json doc = read_json_file(path);
  auto base = path.parent_path();
  if (base.empty()) base = ".";
  return run_config_from_json(doc, base);
}

RunConfig apply_options(const RunConfig& cfg, const RunOptions& opts) {
  json doc = cfg.document;
  if (opts.out_dir) doc["out_dir"] = fs::absolute(*opts.out_dir).string();
  if (opts.seed) doc["seed"] = *opts.seed;
  if (opts.threads) doc["threads"] = *opts.threads;
  if (opts.bank_path) doc["bank"] = fs::absolute(*opts.bank_path).string();
  return run_config_from_json(doc, cfg.base_dir);
}

FittedModels fit_models(const Dataset& fit_set, const RunConfig& cfg) {
  FittedModels m;
  if (cfg.needs_fmap()) m.fmap = fit(fit_set, cfg.fit, &m.summary);
  for (auto method : {LogitsMethod::Msp, LogitsMethod::Energy, LogitsMethod::Odin}) {
    LogitsMethodConfig lc = cfg.logits;
    lc.method = method;
    if (method != LogitsMethod::Odin) lc.temperature.reset();
    m.logits.emplace(method, calibrate_logits(fit_set.manifest, lc, cfg.fit.iou_match_threshold));
  }
  return m;
}

json to_json(const FittedModels& models, const RunConfig& cfg) {
  json logits = json::object();
  for (const auto& [method, cal] : models.logits) logits[std::string(to_string(method))] = to_json(cal);
  return {{"format", "fmapood-bank"},
          {"version", 1},
          {"fit", to_json(cfg.fit)},
          {"summary",
           {{"correct_predictions", models.summary.correct_predictions},
            {"cell_fallbacks", models.summary.cell_fallbacks},
            {"class_fallbacks", models.summary.class_fallbacks}}},
          {"fmap", models.fmap ? to_json(*models.fmap) : json(nullptr)},
          {"logits", logits}};
}

FittedModels models_from_json(const json& j, const std::string& where) {
  if (!j.is_object() || j.value("format", "") != "fmapood-bank") {
    raise(ErrorKind::Format, where + " is not a fmapood bank document");
  }
  FittedModels m;
  if (j.contains("fmap") && !j.at("fmap").is_null()) m.fmap = bank_from_json(j.at("fmap"), where + ".fmap");
  if (j.contains("logits")) {
    for (const auto& [name, cal] : j.at("logits").items()) {
      m.logits.emplace(parse_logits_method(name), calibration_from_json(cal, where + ".logits." + name));
    }
  }
  return m;
}

namespace {

struct ComponentResult {
  OodVerdict verdict;
  ScoreRecord record;
  Orientation orientation = Orientation::LowIsId;
  double rank = 0.0;  // higher means more likely unknown
};

ComponentResult run_component(const std::string& name, const Detection& det, std::size_t index,
                              const StrideFeatureMaps& maps, const FittedModels& models) {
  ComponentResult r;
  if (name == "fmap") {
    const CentroidBank& bank = *models.fmap;
    r.verdict = classify(det, index, maps, bank);
    const CellModel& cell = bank.cell(det.stride_index, det.class_id);
    r.record = {cell.threshold, cell.id_score_min, cell.id_score_max};
    r.orientation = Orientation::LowIsId;
    r.rank = r.verdict.score;
    return r;
  }
  const auto it = models.logits.find(parse_logits_method(name));
  if (it == models.logits.end()) raise(ErrorKind::Config, "bank has no calibration for " + name);
  r.verdict = classify_logits(det, index, it->second);
  const ThresholdRecord& rec = it->second.record(det.class_id);
  r.record = {rec.threshold, rec.id_score_min, rec.id_score_max};
  r.orientation = Orientation::HighIsId;
  r.rank = -r.verdict.score;
  return r;
}

void check_compatible(const Dataset& ds, const FittedModels& models, const RunConfig& cfg) {
  if (cfg.needs_fmap()) {
    if (!models.fmap) raise(ErrorKind::Config, "the bank holds no FMap model but the run needs one");
    if (models.fmap->num_classes() != ds.manifest.num_classes ||
        models.fmap->stride_count() != ds.manifest.stride_count) {
      raise(ErrorKind::Config, "dataset " + ds.manifest.name +
                                   " does not match the bank's class or stride count");
    }
  }
}

}  // namespace

std::vector<ImageVerdicts> score_dataset(const Dataset& ds, const FittedModels& models,
                                         const RunConfig& cfg) {
  check_compatible(ds, models, cfg);
  const auto comps = cfg.components();
  std::vector<ImageVerdicts> out(ds.size());
  parallel_for(ds.size(), cfg.threads, [&](std::size_t i) {
    const ImageRecord& img = ds.manifest.images[i];
    const StrideFeatureMaps& maps = ds.maps[i];
    ImageVerdicts& iv = out[i];
    for (std::size_t k = 0; k < img.detections.size(); ++k) {
      const Detection& det = img.detections[k];
      if (comps.size() == 1) {
        const auto r = run_component(comps[0], det, k, maps, models);
        iv.is_ood.push_back(r.verdict.is_ood);
        iv.unknown_rank.push_back(r.rank);
        continue;
      }
      const auto a = run_component(comps[0], det, k, maps, models);
      const auto b = run_component(comps[1], det, k, maps, models);
      const double fa = fusion_score(a.verdict.score, a.record, a.orientation);
      const double fb = fusion_score(b.verdict.score, b.record, b.orientation);
      const bool ood = cfg.fusion.strategy == FusionStrategy::Score
                           ? fa + fb <= 0.0
                           : fuse_hard(a.verdict, b.verdict, cfg.fusion.strategy);
      iv.is_ood.push_back(ood);
      iv.unknown_rank.push_back(-(fa + fb));
    }
    if (cfg.eul) {
      EulConfig all = *cfg.eul;
      all.top_k = std::numeric_limits<std::uint32_t>::max();
      iv.proposals = eul_propose(maps, {}, *models.fmap, all);
    }
  });
  return out;
}

SceneSplit split_scenes(const Dataset& ds, const std::vector<ImageVerdicts>& verdicts,
                        const RunConfig& cfg, double threshold) {
  SceneSplit split;
  split.known.resize(ds.size());
  split.unknown.resize(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const ImageRecord& img = ds.manifest.images[i];
    Scene& known = split.known[i];
    Scene& unknown = split.unknown[i];
    known.ground_truth = img.ground_truth;
    unknown.ground_truth = img.ground_truth;
    std::vector<const Detection*> kept;
    for (std::size_t k = 0; k < img.detections.size(); ++k) {
      const Detection& det = img.detections[k];
      if (det.confidence < threshold) continue;
      kept.push_back(&det);
      if (verdicts[i].is_ood[k]) {
        unknown.predictions.push_back({det.box, verdicts[i].unknown_rank[k], GroundTruthObject::kUnknown});
      } else {
        known.predictions.push_back({det.box, det.confidence, static_cast<std::int32_t>(det.class_id)});
      }
    }
    if (!cfg.eul) continue;
    std::uint32_t emitted = 0;
    for (const auto& p : verdicts[i].proposals) {
      if (emitted == cfg.eul->top_k) break;
      const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection* d) {
        return iou(p.box, d->box) >= cfg.eul->suppress_iou;
      });
      if (suppressed) continue;
      unknown.predictions.push_back({p.box, 1.0 - p.entropy, GroundTruthObject::kUnknown});
      ++emitted;
    }
  }
  return split;
}

std::optional<double> u_f1_sum(const std::vector<EvalReport>& reports) {
  if (reports.empty() || reports.size() > 2) return std::nullopt;
  double sum = 0.0;
  for (const auto& r : reports) {
    if (!r.unknown.u_f1) return std::nullopt;
    sum += *r.unknown.u_f1;
  }
  return sum;
}

std::vector<ThresholdResult> evaluate_run(const std::vector<const Dataset*>& eval_sets,
                                          const FittedModels& models, const RunConfig& cfg) {
  std::vector<std::vector<ImageVerdicts>> verdicts;
  for (const Dataset* ds : eval_sets) verdicts.push_back(score_dataset(*ds, models, cfg));
  std::vector<ThresholdResult> out;
  for (double t : cfg.confidence_thresholds) {
    ThresholdResult tr;
    tr.threshold = t;
    for (std::size_t d = 0; d < eval_sets.size(); ++d) {
      const auto split = split_scenes(*eval_sets[d], verdicts[d], cfg, t);
      tr.per_dataset.push_back(evaluate(split.known, split.unknown, eval_sets[d]->manifest.num_classes,
                                        cfg.wi_recall, cfg.aose_mode));
    }
    tr.u_f1_sum = u_f1_sum(tr.per_dataset);
    out.push_back(std::move(tr));
  }
  return out;
}

namespace {

fs::path out_dir_of(const RunConfig& cfg) { return cfg.resolve(cfg.out_dir); }

Dataset load_required(const RunConfig& cfg, const std::string& path, const char* what) {
  if (path.empty()) raise(ErrorKind::Config, std::string("config has no ") + what);
  return load_dataset(cfg.resolve(path));
}

std::vector<std::string> row_labels(const RunConfig& cfg) {
  const bool fm = cfg.needs_fmap();
  std::string method = cfg.method;
  if (cfg.method == "fusion") method = cfg.fusion.method_a + "+" + cfg.fusion.method_b;
  return {method,
          fm ? std::string(to_string(cfg.fit.distance)) : "-",
          fm ? std::string(to_string(cfg.fit.cluster.method)) : "-",
          fm ? (cfg.fit.sdr ? "yes" : "no") : "-",
          cfg.eul ? "yes" : "no",
          cfg.method == "fusion" ? std::string(to_string(cfg.fusion.strategy)) : "-"};
}

std::vector<std::string> metric_fields(const EvalReport& r) {
  return {fmt_opt(r.map_known), fmt_opt(r.unknown.u_ap), fmt_opt(r.unknown.u_pre),
          fmt_opt(r.unknown.u_rec), fmt_opt(r.unknown.u_f1), fmt::format("{}", r.a_ose),
          fmt_opt(r.wi)};
}

std::string csv_line(const std::vector<std::string>& fields) {
  std::string line;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) line += ',';
    line += csv_field(fields[i]);
  }
  return line + '\n';
}

json threshold_report(const ThresholdResult& tr, const RunConfig& cfg,
                      const std::vector<std::string>& names) {
  json datasets = json::array();
  for (std::size_t d = 0; d < tr.per_dataset.size(); ++d) {
    json r = to_json(tr.per_dataset[d]);
    r["dataset"] = names[d];
    datasets.push_back(std::move(r));
  }
  const auto labels = row_labels(cfg);
  return {{"conf_threshold", tr.threshold},
          {"method", labels[0]},
          {"distance", labels[1]},
          {"cluster", labels[2]},
          {"sdr", labels[3]},
          {"eul", labels[4]},
          {"fusion", labels[5]},
          {"datasets", datasets},
          {"U-F1_SUM", tr.u_f1_sum ? json(*tr.u_f1_sum) : json(nullptr)}};
}

void write_reports(const fs::path& dir, const std::vector<ThresholdResult>& results,
                   const RunConfig& cfg, const std::vector<std::string>& names) {
  for (const auto& tr : results) {
    write_json_file(dir / fmt::format("report_{}.json", tr.threshold), threshold_report(tr, cfg, names));
  }
}

}  // namespace

void cmd_fit(const RunConfig& cfg) {
  const Dataset ds = load_required(cfg, cfg.fit_manifest, "fit_manifest");
  const FittedModels models = fit_models(ds, cfg);
  const fs::path out = cfg.bank_path ? cfg.resolve(*cfg.bank_path) : out_dir_of(cfg) / "bank.json";
  write_json_file(out, to_json(models, cfg));
  spdlog::info("fit: wrote {}", out.string());
}

void cmd_eval(const RunConfig& cfg) {
  if (cfg.eval_manifests.empty()) raise(ErrorKind::Config, "config has no eval_manifests");
  const fs::path bank_path = cfg.bank_path ? cfg.resolve(*cfg.bank_path) : out_dir_of(cfg) / "bank.json";
  if (!fs::exists(bank_path)) raise(ErrorKind::Io, "bank not found: " + bank_path.string());
  const FittedModels models = models_from_json(read_json_file(bank_path), bank_path.string());
  std::vector<Dataset> sets;
  std::vector<std::string> names;
  for (const auto& m : cfg.eval_manifests) {
    sets.push_back(load_required(cfg, m, "eval manifest"));
    names.push_back(sets.back().manifest.name);
  }
  std::vector<const Dataset*> ptrs;
  for (const auto& s : sets) ptrs.push_back(&s);
  const auto results = evaluate_run(ptrs, models, cfg);
  const fs::path out = out_dir_of(cfg);
  write_reports(out, results, cfg, names);
  std::vector<std::string> header = {"dataset"};
  header.insert(header.end(), kSweepColumns.begin(), kSweepColumns.end() - 1);
  std::string csv = csv_line(header);
  for (const auto& tr : results) {
    for (std::size_t d = 0; d < tr.per_dataset.size(); ++d) {
      std::vector<std::string> row = {names[d]};
      for (auto& l : row_labels(cfg)) row.push_back(l);
      row.push_back(fmt::format("{}", tr.threshold));
      for (auto& f : metric_fields(tr.per_dataset[d])) row.push_back(f);
      row.push_back(fmt_opt(tr.u_f1_sum));
      csv += csv_line(row);
    }
  }
  write_text(out / "eval.csv", csv);
  spdlog::info("eval: wrote {} reports to {}", results.size(), out.string());
}

void cmd_sweep(const RunConfig& cfg) {
  json patches = cfg.runs.empty() ? json::array({json::object()}) : cfg.runs;
  json base = cfg.document;
  base.erase("runs");
  std::vector<RunConfig> runs;
  for (std::size_t i = 0; i < patches.size(); ++i) {
    json doc = base;
    doc.merge_patch(patches[i]);
    // Output location and parallelism stay with the sweep itself.
    doc["out_dir"] = cfg.document.value("out_dir", "out");
    doc["threads"] = cfg.threads;
    runs.push_back(run_config_from_json(doc, cfg.base_dir));
  }

  std::map<std::string, Dataset> datasets;
  auto dataset = [&](const RunConfig& rc, const std::string& path) -> const Dataset& {
    const std::string key = rc.resolve(path).lexically_normal().string();
    auto it = datasets.find(key);
    if (it == datasets.end()) it = datasets.emplace(key, load_required(rc, path, "manifest")).first;
    return it->second;
  };
  std::map<std::string, FittedModels> banks;

  struct Row {
    std::vector<std::string> fields;
    std::optional<double> map;
    std::optional<double> sum;
  };
  std::vector<Row> rows;
  std::size_t failures = 0;
  std::optional<Error> first_error;
  const fs::path out = out_dir_of(cfg);
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const RunConfig& rc = runs[i];
    try {
      if (rc.eval_manifests.empty()) raise(ErrorKind::Config, "run has no eval_manifests");
      const json key = {{"fit_manifest", rc.resolve(rc.fit_manifest).lexically_normal().string()},
                        {"fit", to_json(rc.fit)},
                        {"logits", to_json(rc.logits)},
                        {"fmap", rc.needs_fmap()}};
      auto it = banks.find(key.dump());
      if (it == banks.end()) {
        it = banks.emplace(key.dump(), fit_models(dataset(rc, rc.fit_manifest), rc)).first;
      }
      std::vector<const Dataset*> sets;
      std::vector<std::string> names;
      for (const auto& m : rc.eval_manifests) {
        sets.push_back(&dataset(rc, m));
        names.push_back(sets.back()->manifest.name);
      }
      const auto results = evaluate_run(sets, it->second, rc);
      write_reports(out / "runs" / fmt::format("run_{:03d}", i), results, rc, names);
      for (const auto& tr : results) {
        // Metric columns describe the last evaluation set (the mixed one).
        const EvalReport& last = tr.per_dataset.back();
        Row row;
        row.fields = row_labels(rc);
        row.fields.push_back(fmt::format("{}", tr.threshold));
        for (auto& f : metric_fields(last)) row.fields.push_back(f);
        row.fields.push_back(fmt_opt(tr.u_f1_sum));
        row.fields.push_back("ok");
        row.map = last.map_known;
        row.sum = tr.u_f1_sum;
        rows.push_back(std::move(row));
      }
    } catch (const Error& e) {
      spdlog::warn("sweep: run {} failed: {}", i, e.what());
      ++failures;
      if (!first_error) first_error = e;
      Row row;
      row.fields = row_labels(rc);
      row.fields.resize(kSweepColumns.size() - 1);
      row.fields.push_back(std::string("error: ") + e.what());
      rows.push_back(std::move(row));
    }
  }
  if (failures == runs.size() && first_error) throw *first_error;

  std::string all = csv_line(kSweepColumns);
  for (const auto& r : rows) all += csv_line(r.fields);
  write_text(out / "sweep.csv", all);

  std::vector<ParetoPoint> points;
  std::vector<std::size_t> row_of;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].map && rows[i].sum) {
      points.push_back({*rows[i].map, *rows[i].sum});
      row_of.push_back(i);
    }
  }
  std::string front = csv_line(kSweepColumns);
  for (auto idx : pareto_front(points)) front += csv_line(rows[row_of[idx]].fields);
  write_text(out / "front.csv", front);
  spdlog::info("sweep: {} rows, {} on the front", rows.size(), pareto_front(points).size());
}

void cmd_synth(const json& doc, const fs::path& base_dir, const RunOptions& opts) {
  Reader r(doc, "config", {"out_dir", "seed", "threads", "base", "datasets"});
  std::string out_dir = r.str("out_dir", "data");
  std::uint64_t seed = 0;
  unsigned threads = 1;
  r.opt("seed", seed);
  r.opt("threads", threads);
  if (opts.out_dir) out_dir = fs::absolute(*opts.out_dir).string();
  if (opts.seed) seed = *opts.seed;
  if (opts.threads) threads = *opts.threads;
  if (threads < 1) raise(ErrorKind::Config, "threads must be >= 1");
  const fs::path out = fs::path(out_dir).is_absolute() ? fs::path(out_dir) : base_dir / out_dir;

  json base = r.has("base") ? r.at("base") : json::object();
  if (!base.is_object()) raise(ErrorKind::Config, "config.base must be a JSON object");
  if (!base.contains("seed")) base["seed"] = seed;
  SynthConfig base_cfg = synth_config_from_json(base, "config.base");
  base_cfg.id_cluster_means = resolve_means(base_cfg);

  if (!r.has("datasets")) {
    save_dataset(out, generate(base_cfg, threads));
    spdlog::info("synth: wrote {}", (out / "manifest.json").string());
    return;
  }
  const json& list = r.at("datasets");
  if (!list.is_array() || list.empty()) raise(ErrorKind::Config, "config.datasets must be a non-empty array");
  std::set<std::string> names;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string where = fmt::format("config.datasets[{}]", i);
    if (!list[i].is_object() || !list[i].contains("name") || !list[i]["name"].is_string()) {
      raise(ErrorKind::Config, where + " needs a string name");
    }
    json merged = to_json(base_cfg);
    merged["seed"] = base_cfg.seed + i + 1;
    merged.merge_patch(list[i]);
    const SynthConfig sc = synth_config_from_json(merged, where);
    if (!names.insert(sc.name).second) raise(ErrorKind::Config, where + " repeats name " + sc.name);
    save_dataset(out / sc.name, generate(sc, threads));
    spdlog::info("synth: wrote {}", (out / sc.name / "manifest.json").string());
  }
}

}  // namespace fmapood
