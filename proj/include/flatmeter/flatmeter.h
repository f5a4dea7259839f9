// Copyright 2026 The Flatmeter Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/*
 * flatmeter C API.
 *
 * Every function returns an flm_status; FLM_OK is zero. After a failure,
 * flm_last_error() describes it on the calling thread. Strings handed out
 * through char** parameters are owned by the caller and released with
 * flm_string_free(). Handles are opaque and released with their _free
 * function; passing NULL to any _free function is a no-op.
 */

#ifndef FLATMETER_FLATMETER_H_
#define FLATMETER_FLATMETER_H_

#include <stddef.h>
#include <stdint.h>

#if defined(FLATMETER_BUILDING_LIBRARY)
#define FLM_API __attribute__((visibility("default")))
#else
#define FLM_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum flm_status {
  FLM_OK = 0,
  FLM_INVALID_ARGUMENT,
  FLM_DIMENSION_MISMATCH,
  FLM_NON_FINITE,
  FLM_NON_FINITE_OPERATOR,
  FLM_NOT_SQUARE,
  FLM_DID_NOT_CONVERGE,
  FLM_MISSING_LAYER,
  FLM_INVALID_SPEC,
  FLM_SHAPE_MISMATCH,
  FLM_EMPTY_INTERVAL,
  FLM_UNKNOWN_SCHEME,
  FLM_DIVERGED,
  FLM_BAD_MAGIC,
  FLM_TRUNCATED_FILE,
  FLM_COUNT_MISMATCH,
  FLM_VERSION_MISMATCH,
  FLM_CORRUPT_FILE,
  FLM_IO_ERROR,
  FLM_DEGENERATE_VARIANCE,
  FLM_TOO_FEW_RUNS,
  FLM_MISSING_CHECKPOINT,
  FLM_CONFIG_ERROR,
  FLM_TOO_LARGE,
  FLM_PRECONDITION_VIOLATED,
  FLM_INTERNAL = 100
} flm_status;

FLM_API const char* flm_status_string(flm_status status);
/* Message of the last failure on this thread; "" if none. */
FLM_API const char* flm_last_error(void);
FLM_API const char* flm_version(void);
FLM_API void flm_string_free(char* s);

typedef enum flm_log_level { FLM_LOG_QUIET = 0, FLM_LOG_INFO = 1, FLM_LOG_DEBUG = 2 } flm_log_level;
FLM_API void flm_set_log_level(flm_log_level level);

/* ---- Networks, datasets, reports ---- */

typedef struct flm_network flm_network;
typedef struct flm_dataset flm_dataset;
typedef struct flm_report flm_report;

typedef enum flm_loss { FLM_LOSS_SQUARED = 0, FLM_LOSS_CROSS_ENTROPY = 1 } flm_loss;

/* Checkpoint JSON as written by the train command. */
FLM_API flm_status flm_network_load(const char* path, flm_network** out);
/* Weights in layer order, each row-major (rows = fan-out); biases likewise. */
FLM_API flm_status flm_network_create(const size_t* shape, size_t shape_len, const double* weights,
                                      const double* biases, flm_network** out);
FLM_API flm_status flm_network_save(const flm_network* net, const char* path);
FLM_API size_t flm_network_num_layers(const flm_network* net);
FLM_API size_t flm_network_num_params(const flm_network* net);
FLM_API void flm_network_free(flm_network* net);

/* Rows of x are samples. Regression targets are n x outputs, row-major. */
FLM_API flm_status flm_dataset_regression(const double* x, const double* y, size_t n,
                                          size_t inputs, size_t outputs, flm_dataset** out);
FLM_API flm_status flm_dataset_classification(const double* x, const uint32_t* labels, size_t n,
                                              size_t inputs, size_t classes, flm_dataset** out);
/* which: 0 for the training split, 1 for the test split. count 0 keeps all. */
FLM_API flm_status flm_dataset_load_mnist(const char* root, int which, size_t count,
                                          flm_dataset** out);
FLM_API size_t flm_dataset_size(const flm_dataset* data);
FLM_API void flm_dataset_free(flm_dataset* data);

FLM_API flm_status flm_empirical_error(const flm_network* net, const flm_dataset* data,
                                       flm_loss loss, double* out);

/* layers: 1-based indices, NULL/0 for all. trace_mode: "auto" (or NULL),
 * "exact" or "hutchinson[:probes]". */
FLM_API flm_status flm_measure(const flm_network* net, const flm_dataset* data, flm_loss loss,
                               const size_t* layers, size_t num_layers, const char* trace_mode,
                               flm_report** out);
/* Keys as in records.csv, e.g. "kappa_tau.l2" or "rho_sum". */
FLM_API flm_status flm_report_value(const flm_report* report, const char* key, double* out);
FLM_API flm_status flm_report_json(const flm_report* report, char** out);
FLM_API void flm_report_free(flm_report* report);

/* ---- Subcommands ---- */

typedef struct flm_options {
  size_t struct_size; /* sizeof(flm_options), set by flm_options_init */
  const char* config_path;
  const char* out_dir;
  size_t jobs; /* 0: all cores */
  int has_seed;
  uint64_t seed;
  const size_t* layers; /* 1-based */
  size_t num_layers;
  const char* trace_mode;
  const char* stat; /* "spearman" | "pearson" */
  int has_factor_range;
  double factor_lo, factor_hi;
  const char* reparam_kind; /* "layerwise" | "neuronwise" */
  const char* const* measures;
  size_t num_measures;
} flm_options;

FLM_API void flm_options_init(flm_options* options);

/* Each writes a JSON summary to *summary (may be NULL). */
FLM_API flm_status flm_cmd_train(const flm_options* options, char** summary);
FLM_API flm_status flm_cmd_measure(const char* target, const flm_options* options, char** summary);
FLM_API flm_status flm_cmd_reparam(const char* run_dir, const flm_options* options, char** summary);
FLM_API flm_status flm_cmd_correlate(const char* const* run_dirs, size_t count,
                                     const flm_options* options, char** summary);
/* suite: "invariance", "oracle" or "all". *all_passed is 1 iff every check
 * passed; a failing check is not an error status. */
FLM_API flm_status flm_cmd_verify(const char* suite, const flm_options* options, int* all_passed,
                                  char** summary);
FLM_API flm_status flm_cmd_experiment(const char* preset, const flm_options* options,
                                      char** summary);
/* Newline-separated preset names. */
FLM_API flm_status flm_preset_names(char** out);

#ifdef __cplusplus
}
#endif

#endif /* FLATMETER_FLATMETER_H_ */
