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

#include "fmapood/fmapood.h"

#include <filesystem>
#include <new>
#include <string>

#include <spdlog/spdlog.h>

#include "fmapood/errors.hpp"
#include "fmapood/fusion.hpp"
#include "fmapood/logits_ood.hpp"
#include "fmapood/metrics.hpp"
#include "fmapood/pipeline.hpp"
#include "fmapood/serialization.hpp"
#include "fmapood/tensor_io.hpp"

struct fmo_tensor {
  fmapood::Tensor value;
};

struct fmo_dataset {
  fmapood::Dataset value;
};

struct fmo_bank {
  fmapood::FittedModels models;
  fmapood::RunConfig config;
};

namespace {

thread_local std::string g_last_error;

fmo_status status_of(fmapood::ErrorKind kind) {
  using fmapood::ErrorKind;
  switch (kind) {
    case ErrorKind::Io: return FMO_ERR_IO;
    case ErrorKind::Format: return FMO_ERR_FORMAT;
    case ErrorKind::Data: return FMO_ERR_DATA;
    case ErrorKind::Config: return FMO_ERR_CONFIG;
    case ErrorKind::Fit: return FMO_ERR_FIT;
    case ErrorKind::DegenerateBox: return FMO_ERR_DEGENERATE_BOX;
    case ErrorKind::DegenerateMap: return FMO_ERR_DEGENERATE_MAP;
    case ErrorKind::InsufficientSamples: return FMO_ERR_INSUFFICIENT_SAMPLES;
    case ErrorKind::Undefined: return FMO_ERR_UNDEFINED;
    case ErrorKind::AllNoise: return FMO_ERR_ALL_NOISE;
    case ErrorKind::ZeroVector: return FMO_ERR_ZERO_VECTOR;
    case ErrorKind::Triplet: return FMO_ERR_TRIPLET;
    case ErrorKind::Divergence: return FMO_ERR_DIVERGENCE;
    case ErrorKind::Internal: return FMO_ERR_INTERNAL;
  }
  return FMO_ERR_INTERNAL;
}

fmo_status fail(fmo_status s, std::string message) {
  g_last_error = std::move(message);
  return s;
}

template <typename Fn>
fmo_status guarded(Fn&& fn) {
  g_last_error.clear();
  try {
    fn();
    return FMO_OK;
  } catch (const fmapood::Error& e) {
    return fail(status_of(e.kind()), e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(FMO_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(FMO_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(FMO_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(FMO_ERR_INTERNAL, "unknown exception");
  }
}

#define FMO_REQUIRE(cond, what)                                  \
  do {                                                           \
    if (!(cond)) return fail(FMO_ERR_INVALID_ARGUMENT, (what)); \
  } while (0)

fmapood::RunOptions to_options(const fmo_run_options* o) {
  fmapood::RunOptions r;
  if (!o) return r;
  if (o->out_dir) r.out_dir = o->out_dir;
  if (o->has_seed) r.seed = o->seed;
  if (o->threads) r.threads = o->threads;
  if (o->bank_path) r.bank_path = o->bank_path;
  return r;
}

template <typename Cmd>
fmo_status run_command(const char* config_path, const fmo_run_options* options, Cmd&& cmd) {
  FMO_REQUIRE(config_path, "config path is NULL");
  return guarded([&] {
    const auto cfg = fmapood::apply_options(fmapood::load_run_config(config_path), to_options(options));
    cmd(cfg);
  });
}

}  // namespace

extern "C" {

const char* fmo_version(void) { return "0.1.0"; }

const char* fmo_status_string(fmo_status status) {
  switch (status) {
    case FMO_OK: return "ok";
    case FMO_ERR_IO: return "io error";
    case FMO_ERR_FORMAT: return "format error";
    case FMO_ERR_DATA: return "data error";
    case FMO_ERR_CONFIG: return "config error";
    case FMO_ERR_FIT: return "fit error";
    case FMO_ERR_DEGENERATE_BOX: return "degenerate box";
    case FMO_ERR_DEGENERATE_MAP: return "degenerate map";
    case FMO_ERR_INSUFFICIENT_SAMPLES: return "insufficient samples";
    case FMO_ERR_UNDEFINED: return "undefined";
    case FMO_ERR_ALL_NOISE: return "all noise";
    case FMO_ERR_ZERO_VECTOR: return "zero vector";
    case FMO_ERR_TRIPLET: return "triplet error";
    case FMO_ERR_DIVERGENCE: return "divergence";
    case FMO_ERR_INVALID_ARGUMENT: return "invalid argument";
    case FMO_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* fmo_last_error(void) { return g_last_error.c_str(); }

int fmo_exit_code(fmo_status status) {
  switch (status) {
    case FMO_OK: return 0;
    case FMO_ERR_IO:
    case FMO_ERR_FORMAT:
    case FMO_ERR_DATA:
    case FMO_ERR_CONFIG:
    case FMO_ERR_FIT:
    case FMO_ERR_INVALID_ARGUMENT: return 2;
    default: return 1;
  }
}

void fmo_set_verbosity(int level) {
  spdlog::set_level(level <= 0 ? spdlog::level::warn
                    : level == 1 ? spdlog::level::info
                                 : spdlog::level::debug);
}

fmo_status fmo_tensor_create(const uint32_t* shape, size_t ndim, const float* data, fmo_tensor** out) {
  FMO_REQUIRE(shape && out && ndim > 0, "shape and out must be non-NULL and ndim > 0");
  return guarded([&] {
    std::vector<std::uint32_t> dims(shape, shape + ndim);
    const std::size_t n = fmapood::element_count(dims);
    std::vector<float> values = data ? std::vector<float>(data, data + n) : std::vector<float>(n, 0.0F);
    *out = new fmo_tensor{fmapood::Tensor(std::move(dims), std::move(values))};
  });
}

fmo_status fmo_tensor_read(const char* path, fmo_tensor** out) {
  FMO_REQUIRE(path && out, "path and out must be non-NULL");
  return guarded([&] { *out = new fmo_tensor{fmapood::read_tensor(path)}; });
}

fmo_status fmo_tensor_write(const fmo_tensor* tensor, const char* path) {
  FMO_REQUIRE(tensor && path, "tensor and path must be non-NULL");
  return guarded([&] { fmapood::write_tensor(path, tensor->value); });
}

size_t fmo_tensor_ndim(const fmo_tensor* tensor) { return tensor ? tensor->value.ndim() : 0; }

uint32_t fmo_tensor_dim(const fmo_tensor* tensor, size_t axis) {
  return tensor && axis < tensor->value.ndim() ? tensor->value.shape[axis] : 0;
}

size_t fmo_tensor_size(const fmo_tensor* tensor) { return tensor ? tensor->value.size() : 0; }

const float* fmo_tensor_data(const fmo_tensor* tensor) {
  return tensor ? tensor->value.data.data() : nullptr;
}

void fmo_tensor_free(fmo_tensor* tensor) { delete tensor; }

fmo_status fmo_dataset_load(const char* manifest_path, fmo_dataset** out) {
  FMO_REQUIRE(manifest_path && out, "manifest_path and out must be non-NULL");
  return guarded([&] { *out = new fmo_dataset{fmapood::load_dataset(manifest_path)}; });
}

fmo_status fmo_dataset_save(const fmo_dataset* dataset, const char* directory) {
  FMO_REQUIRE(dataset && directory, "dataset and directory must be non-NULL");
  return guarded([&] { fmapood::save_dataset(directory, dataset->value); });
}

size_t fmo_dataset_image_count(const fmo_dataset* dataset) { return dataset ? dataset->value.size() : 0; }

uint32_t fmo_dataset_num_classes(const fmo_dataset* dataset) {
  return dataset ? dataset->value.manifest.num_classes : 0;
}

uint32_t fmo_dataset_stride_count(const fmo_dataset* dataset) {
  return dataset ? dataset->value.manifest.stride_count : 0;
}

size_t fmo_dataset_detection_count(const fmo_dataset* dataset, size_t image) {
  if (!dataset || image >= dataset->value.size()) return 0;
  return dataset->value.manifest.images[image].detections.size();
}

void fmo_dataset_free(fmo_dataset* dataset) { delete dataset; }

fmo_status fmo_bank_fit(const fmo_dataset* dataset, const char* config_json, fmo_bank** out) {
  FMO_REQUIRE(dataset && out, "dataset and out must be non-NULL");
  return guarded([&] {
    fmapood::json doc = fmapood::json::object();
    if (config_json) {
      try {
        doc = fmapood::json::parse(config_json);
      } catch (const fmapood::json::parse_error& e) {
        fmapood::raise(fmapood::ErrorKind::Config, std::string("config JSON: ") + e.what());
      }
    }
    auto cfg = fmapood::run_config_from_json(doc, ".");
    auto models = fmapood::fit_models(dataset->value, cfg);
    *out = new fmo_bank{std::move(models), std::move(cfg)};
  });
}

fmo_status fmo_bank_load(const char* path, fmo_bank** out) {
  FMO_REQUIRE(path && out, "path and out must be non-NULL");
  return guarded([&] {
    auto models = fmapood::models_from_json(fmapood::read_json_file(path), path);
    *out = new fmo_bank{std::move(models), fmapood::run_config_from_json(fmapood::json::object(), ".")};
  });
}

fmo_status fmo_bank_save(const fmo_bank* bank, const char* path) {
  FMO_REQUIRE(bank && path, "bank and path must be non-NULL");
  return guarded([&] { fmapood::write_json_file(path, fmapood::to_json(bank->models, bank->config)); });
}

fmo_status fmo_bank_score(const fmo_bank* bank, const float* features, size_t length,
                          uint32_t class_id, uint32_t stride_index, double* out) {
  FMO_REQUIRE(bank && features && out, "bank, features and out must be non-NULL");
  FMO_REQUIRE(bank->models.fmap.has_value(), "bank holds no FMap model");
  return guarded([&] {
    *out = bank->models.fmap->score(std::span<const float>(features, length), class_id, stride_index);
  });
}

fmo_status fmo_bank_threshold(const fmo_bank* bank, uint32_t stride_index, uint32_t class_id, double* out) {
  FMO_REQUIRE(bank && out, "bank and out must be non-NULL");
  FMO_REQUIRE(bank->models.fmap.has_value(), "bank holds no FMap model");
  return guarded([&] { *out = bank->models.fmap->threshold(stride_index, class_id); });
}

fmo_status fmo_bank_classify(const fmo_bank* bank, const fmo_dataset* dataset, size_t image,
                             size_t detection, double* score, int* is_ood) {
  FMO_REQUIRE(bank && dataset && score && is_ood, "arguments must be non-NULL");
  FMO_REQUIRE(bank->models.fmap.has_value(), "bank holds no FMap model");
  FMO_REQUIRE(image < dataset->value.size(), "image index out of range");
  const auto& dets = dataset->value.manifest.images[image].detections;
  FMO_REQUIRE(detection < dets.size(), "detection index out of range");
  return guarded([&] {
    const auto v = fmapood::classify(dets[detection], detection, dataset->value.maps[image], *bank->models.fmap);
    *score = v.score;
    *is_ood = v.is_ood ? 1 : 0;
  });
}

void fmo_bank_free(fmo_bank* bank) { delete bank; }

fmo_status fmo_logits_score(fmo_logits_method method, const float* logits, size_t length,
                            double temperature, double* out) {
  FMO_REQUIRE(logits && out && length > 0, "logits and out must be non-NULL and length > 0");
  return guarded([&] {
    const std::span<const float> z(logits, length);
    switch (method) {
      case FMO_MSP: *out = fmapood::msp_score(z); return;
      case FMO_ENERGY: *out = fmapood::energy_score(z); return;
      case FMO_ODIN: *out = fmapood::odin_score(z, temperature); return;
    }
    fmapood::raise(fmapood::ErrorKind::Config, "unknown logits method");
  });
}

fmo_status fmo_fusion_score(double raw, double threshold, double id_score_min, double id_score_max,
                            int low_is_id, double* out) {
  FMO_REQUIRE(out, "out must be non-NULL");
  return guarded([&] {
    *out = fmapood::fusion_score(raw, {threshold, id_score_min, id_score_max},
                                 low_is_id ? fmapood::Orientation::LowIsId : fmapood::Orientation::HighIsId);
  });
}

fmo_status fmo_iou(const float* box_a, const float* box_b, double* out) {
  FMO_REQUIRE(box_a && box_b && out, "boxes and out must be non-NULL");
  return guarded([&] {
    *out = fmapood::iou({box_a[0], box_a[1], box_a[2], box_a[3]}, {box_b[0], box_b[1], box_b[2], box_b[3]});
  });
}

fmo_status fmo_cmd_fit(const char* config_path, const fmo_run_options* options) {
  return run_command(config_path, options, [](const fmapood::RunConfig& c) { fmapood::cmd_fit(c); });
}

fmo_status fmo_cmd_eval(const char* config_path, const fmo_run_options* options) {
  return run_command(config_path, options, [](const fmapood::RunConfig& c) { fmapood::cmd_eval(c); });
}

fmo_status fmo_cmd_sweep(const char* config_path, const fmo_run_options* options) {
  return run_command(config_path, options, [](const fmapood::RunConfig& c) { fmapood::cmd_sweep(c); });
}

fmo_status fmo_cmd_synth(const char* config_path, const fmo_run_options* options) {
  FMO_REQUIRE(config_path, "config path is NULL");
  return guarded([&] {
    const std::filesystem::path path(config_path);
    auto base = path.parent_path();
    if (base.empty()) base = ".";
    fmapood::cmd_synth(fmapood::read_json_file(path), base, to_options(options));
  });
}

}  // extern "C"
