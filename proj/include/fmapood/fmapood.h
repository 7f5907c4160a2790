/*
 * Copyright 2026 The fmapood Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.

 */

/* C interface of the fmapood toolkit. Every fallible call returns an
 * fmo_status; on failure fmo_last_error() describes the cause for the
 * calling thread. Handles are opaque and released with their _free call. */

#ifndef FMAPOOD_FMAPOOD_H_
#define FMAPOOD_FMAPOOD_H_

#include <stddef.h>
#include <stdint.h>

#if defined(FMO_BUILDING_LIBRARY)
#define FMO_API __attribute__((visibility("default")))
#else
#define FMO_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fmo_status {
  FMO_OK = 0,
  FMO_ERR_IO = 1,
  FMO_ERR_FORMAT = 2,
  FMO_ERR_DATA = 3,
  FMO_ERR_CONFIG = 4,
  FMO_ERR_FIT = 5,
  FMO_ERR_DEGENERATE_BOX = 6,
  FMO_ERR_DEGENERATE_MAP = 7,
  FMO_ERR_INSUFFICIENT_SAMPLES = 8,
  FMO_ERR_UNDEFINED = 9,
  FMO_ERR_ALL_NOISE = 10,
  FMO_ERR_ZERO_VECTOR = 11,
  FMO_ERR_TRIPLET = 12,
  FMO_ERR_DIVERGENCE = 13,
  FMO_ERR_INVALID_ARGUMENT = 14,
  FMO_ERR_INTERNAL = 15
} fmo_status;

FMO_API const char* fmo_version(void);
FMO_API const char* fmo_status_string(fmo_status status);
/* Message of the last failed call on this thread; "" if none. */
FMO_API const char* fmo_last_error(void);
/* Process exit code for a status: 0 success, 2 user or input error, 1 otherwise. */
FMO_API int fmo_exit_code(fmo_status status);

/* 0 = warnings only, 1 = info, 2 = debug. */
FMO_API void fmo_set_verbosity(int level);

/* ---- tensors ---- */

typedef struct fmo_tensor fmo_tensor;

/* Copies `data` (product of shape entries floats); NULL data gives zeros. */
FMO_API fmo_status fmo_tensor_create(const uint32_t* shape, size_t ndim, const float* data,
                                     fmo_tensor** out);
FMO_API fmo_status fmo_tensor_read(const char* path, fmo_tensor** out);
FMO_API fmo_status fmo_tensor_write(const fmo_tensor* tensor, const char* path);
FMO_API size_t fmo_tensor_ndim(const fmo_tensor* tensor);
FMO_API uint32_t fmo_tensor_dim(const fmo_tensor* tensor, size_t axis);
FMO_API size_t fmo_tensor_size(const fmo_tensor* tensor);
FMO_API const float* fmo_tensor_data(const fmo_tensor* tensor);
FMO_API void fmo_tensor_free(fmo_tensor* tensor);

/* ---- datasets (manifest plus feature maps) ---- */

typedef struct fmo_dataset fmo_dataset;

FMO_API fmo_status fmo_dataset_load(const char* manifest_path, fmo_dataset** out);
/* Writes tensors under `directory` and the manifest as directory/manifest.json. */
FMO_API fmo_status fmo_dataset_save(const fmo_dataset* dataset, const char* directory);
FMO_API size_t fmo_dataset_image_count(const fmo_dataset* dataset);
FMO_API uint32_t fmo_dataset_num_classes(const fmo_dataset* dataset);
FMO_API uint32_t fmo_dataset_stride_count(const fmo_dataset* dataset);
FMO_API size_t fmo_dataset_detection_count(const fmo_dataset* dataset, size_t image);
FMO_API void fmo_dataset_free(fmo_dataset* dataset);

/* ---- fitted models ---- */

typedef struct fmo_bank fmo_bank;

/* Fits on `dataset` with a run configuration given as JSON text (NULL for
 * defaults). */
FMO_API fmo_status fmo_bank_fit(const fmo_dataset* dataset, const char* config_json, fmo_bank** out);
FMO_API fmo_status fmo_bank_load(const char* path, fmo_bank** out);
FMO_API fmo_status fmo_bank_save(const fmo_bank* bank, const char* path);
/* Minimum distance of a feature vector to the centroids of (stride, class). */
FMO_API fmo_status fmo_bank_score(const fmo_bank* bank, const float* features, size_t length,
                                  uint32_t class_id, uint32_t stride_index, double* out);
FMO_API fmo_status fmo_bank_threshold(const fmo_bank* bank, uint32_t stride_index,
                                      uint32_t class_id, double* out);
/* FMap verdict for one detection of a dataset image. */
FMO_API fmo_status fmo_bank_classify(const fmo_bank* bank, const fmo_dataset* dataset, size_t image,
                                     size_t detection, double* score, int* is_ood);
FMO_API void fmo_bank_free(fmo_bank* bank);

/* ---- scoring helpers ---- */

typedef enum fmo_logits_method { FMO_MSP = 0, FMO_ENERGY = 1, FMO_ODIN = 2 } fmo_logits_method;

/* Higher means more in-distribution. `temperature` is used by ODIN only. */
FMO_API fmo_status fmo_logits_score(fmo_logits_method method, const float* logits, size_t length,
                                    double temperature, double* out);
FMO_API fmo_status fmo_fusion_score(double raw, double threshold, double id_score_min,
                                    double id_score_max, int low_is_id, double* out);
/* Boxes as {x_min, y_min, x_max, y_max}. */
FMO_API fmo_status fmo_iou(const float* box_a, const float* box_b, double* out);

/* ---- commands ---- */

typedef struct fmo_run_options {
  const char* out_dir;   /* NULL keeps the config value */
  uint64_t seed;
  int has_seed;
  unsigned threads;      /* 0 keeps the config value */
  const char* bank_path; /* NULL keeps the config value */
} fmo_run_options;

FMO_API fmo_status fmo_cmd_fit(const char* config_path, const fmo_run_options* options);
FMO_API fmo_status fmo_cmd_eval(const char* config_path, const fmo_run_options* options);
FMO_API fmo_status fmo_cmd_sweep(const char* config_path, const fmo_run_options* options);
FMO_API fmo_status fmo_cmd_synth(const char* config_path, const fmo_run_options* options);

#ifdef __cplusplus
}
#endif

#endif /* FMAPOOD_FMAPOOD_H_ */
