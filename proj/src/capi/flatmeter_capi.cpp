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

#include "flatmeter/flatmeter.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <string>
#include <vector>

#include "common/error.hpp"
#include "common/log.hpp"
#include "data/checkpoint.hpp"
#include "data/datasets.hpp"
#include "experiment/commands.hpp"
#include "experiment/config.hpp"
#include "expstats/expstats.hpp"
#include "flatness/flatness.hpp"

struct flm_network {
  flatmeter::MlpNetwork net;
};
struct flm_dataset {
  flatmeter::LabeledSet data;
};
struct flm_report {
  flatmeter::FlatnessReport report;
};

namespace {

using flatmeter::Errc;

thread_local std::string g_last_error;

flm_status Fail(flm_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

// Errc and flm_status list the same codes in the same order, offset by one.
constexpr flm_status FromErrc(Errc code) {
  return static_cast<flm_status>(static_cast<int>(code) + 1);
}
static_assert(FromErrc(Errc::kInvalidArgument) == FLM_INVALID_ARGUMENT);
static_assert(FromErrc(Errc::kIoError) == FLM_IO_ERROR);
static_assert(FromErrc(Errc::kConfigError) == FLM_CONFIG_ERROR);
static_assert(FromErrc(Errc::kPreconditionViolated) == FLM_PRECONDITION_VIOLATED);

template <typename F>
flm_status Guard(F&& body) {
  g_last_error.clear();
  try {
    body();
    return FLM_OK;
  } catch (const flatmeter::Error& e) {
    return Fail(FromErrc(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return Fail(FLM_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return Fail(FLM_INTERNAL, e.what());
  }
}

void Need(bool ok, const char* what) {
  if (!ok) flatmeter::Fail(Errc::kInvalidArgument, what);
}

char* Dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void Emit(char** out, const std::string& s) {
  if (out) *out = Dup(s);
}

flatmeter::LossKind ToLoss(flm_loss loss) {
  Need(loss == FLM_LOSS_SQUARED || loss == FLM_LOSS_CROSS_ENTROPY, "unknown loss");
  return loss == FLM_LOSS_SQUARED ? flatmeter::LossKind::kSquared
                                  : flatmeter::LossKind::kSoftmaxCrossEntropy;
}

flatmeter::CommandOptions ToOptions(const flm_options* o) {
  flatmeter::CommandOptions c;
  if (!o) return c;
  Need(o->struct_size >= sizeof(flm_options), "flm_options not initialized with flm_options_init");
  if (o->config_path) c.config_path = o->config_path;
  if (o->out_dir) c.out_dir = o->out_dir;
  c.jobs = o->jobs;
  if (o->has_seed) c.seed = o->seed;
  Need(o->num_layers == 0 || o->layers, "layers is NULL");
  c.layers.assign(o->layers, o->layers + o->num_layers);
  if (o->trace_mode) c.trace_mode = o->trace_mode;
  if (o->stat) c.stat = o->stat;
  if (o->has_factor_range) c.factor_range = {o->factor_lo, o->factor_hi};
  if (o->reparam_kind) c.reparam_kind = o->reparam_kind;
  Need(o->num_measures == 0 || o->measures, "measures is NULL");
  for (std::size_t i = 0; i < o->num_measures; ++i) {
    Need(o->measures[i] != nullptr, "measure key is NULL");
    c.measures.emplace_back(o->measures[i]);
  }
  return c;
}

}  // namespace

extern "C" {

const char* flm_status_string(flm_status status) {
  if (status == FLM_OK) return "ok";
  if (status == FLM_INTERNAL) return "internal error";
  const int code = static_cast<int>(status) - 1;
  if (code < 0 || code > static_cast<int>(Errc::kPreconditionViolated)) return "unknown status";
  return flatmeter::ErrcName(static_cast<Errc>(code)).data();
}

const char* flm_last_error(void) { return g_last_error.c_str(); }

const char* flm_version(void) { return "0.1.0"; }

void flm_string_free(char* s) { std::free(s); }

void flm_set_log_level(flm_log_level level) {
  flatmeter::SetLogLevel(level == FLM_LOG_QUIET   ? flatmeter::LogLevel::kQuiet
                         : level == FLM_LOG_DEBUG ? flatmeter::LogLevel::kDebug
                                                  : flatmeter::LogLevel::kInfo);
}

flm_status flm_network_load(const char* path, flm_network** out) {
  return Guard([&] {
    Need(path && out, "path and out must be non-NULL");
    *out = new flm_network{flatmeter::LoadCheckpoint(path).network};
  });
}

flm_status flm_network_create(const size_t* shape, size_t shape_len, const double* weights,
                              const double* biases, flm_network** out) {
  return Guard([&] {
    Need(shape && weights && biases && out, "arguments must be non-NULL");
    Need(shape_len >= 2, "shape needs at least an input and an output width");
    std::vector<flatmeter::Layer> layers;
    for (std::size_t l = 1; l < shape_len; ++l) {
      Need(shape[l] > 0 && shape[l - 1] > 0, "layer widths must be positive");
      flatmeter::Layer layer{flatmeter::DenseMatrix(shape[l], shape[l - 1]),
                             std::vector<double>(biases, biases + shape[l])};
      std::copy(weights, weights + layer.weights.size(), layer.weights.data().begin());
      weights += layer.weights.size();
      biases += shape[l];
      layers.push_back(std::move(layer));
    }
    *out = new flm_network{flatmeter::MlpNetwork(std::move(layers))};
  });
}

flm_status flm_network_save(const flm_network* net, const char* path) {
  return Guard([&] {
    Need(net && path, "arguments must be non-NULL");
    flatmeter::SaveCheckpoint(path, net->net, {});
  });
}

size_t flm_network_num_layers(const flm_network* net) { return net ? net->net.num_layers() : 0; }
size_t flm_network_num_params(const flm_network* net) { return net ? net->net.num_params() : 0; }
void flm_network_free(flm_network* net) { delete net; }

flm_status flm_dataset_regression(const double* x, const double* y, size_t n, size_t inputs,
                                  size_t outputs, flm_dataset** out) {
  return Guard([&] {
    Need(x && y && out, "arguments must be non-NULL");
    flatmeter::DenseMatrix xs(n, inputs), ys(n, outputs);
    std::copy(x, x + n * inputs, xs.data().begin());
    std::copy(y, y + n * outputs, ys.data().begin());
    *out = new flm_dataset{flatmeter::LabeledSet::Regression(std::move(xs), std::move(ys))};
  });
}

flm_status flm_dataset_classification(const double* x, const uint32_t* labels, size_t n,
                                      size_t inputs, size_t classes, flm_dataset** out) {
  return Guard([&] {
    Need(x && labels && out, "arguments must be non-NULL");
    flatmeter::DenseMatrix xs(n, inputs);
    std::copy(x, x + n * inputs, xs.data().begin());
    *out = new flm_dataset{flatmeter::LabeledSet::Classification(
        std::move(xs), std::vector<std::uint32_t>(labels, labels + n), classes)};
  });
}

flm_status flm_dataset_load_mnist(const char* root, int which, size_t count, flm_dataset** out) {
  return Guard([&] {
    Need(out && (which == 0 || which == 1), "which must be 0 (train) or 1 (test)");
    const std::string dir =
        flatmeter::FindMnistDir(root ? std::string(root) : flatmeter::DefaultDataRoot());
    flatmeter::Require(!dir.empty(), Errc::kIoError, "MNIST IDX files not found");
    flatmeter::DatasetBundle b =
        flatmeter::LoadMnistBundle(dir, which == 0 ? count : 0, which == 1 ? count : 0);
    *out = new flm_dataset{which == 0 ? std::move(b.train) : std::move(b.test)};
  });
}

size_t flm_dataset_size(const flm_dataset* data) { return data ? data->data.size() : 0; }
void flm_dataset_free(flm_dataset* data) { delete data; }

flm_status flm_empirical_error(const flm_network* net, const flm_dataset* data, flm_loss loss,
                               double* out) {
  return Guard([&] {
    Need(net && data && out, "arguments must be non-NULL");
    *out = flatmeter::EmpiricalError(net->net, data->data, ToLoss(loss));
  });
}

flm_status flm_measure(const flm_network* net, const flm_dataset* data, flm_loss loss,
                       const size_t* layers, size_t num_layers, const char* trace_mode,
                       flm_report** out) {
  return Guard([&] {
    Need(net && data && out, "arguments must be non-NULL");
    Need(num_layers == 0 || layers, "layers is NULL");
    flatmeter::MeasureOptions options;
    for (std::size_t i = 0; i < num_layers; ++i) {
      flatmeter::Require(layers[i] >= 1 && layers[i] <= net->net.num_layers(),
                         Errc::kMissingLayer, "layer index out of range (1-based)");
      options.layers.push_back(layers[i] - 1);
    }
    if (trace_mode) options.trace_mode = flatmeter::ParseTraceModeSpec(trace_mode);
    *out = new flm_report{flatmeter::FullReport(net->net, data->data, ToLoss(loss), options)};
  });
}

flm_status flm_report_value(const flm_report* report, const char* key, double* out) {
  return Guard([&] {
    Need(report && key && out, "arguments must be non-NULL");
    for (const auto& [k, v] : flatmeter::ToKeyValues(report->report)) {
      if (k == key) {
        *out = v;
        return;
      }
    }
    flatmeter::Fail(Errc::kMissingLayer, std::string("report has no value '") + key + "'");
  });
}

flm_status flm_report_json(const flm_report* report, char** out) {
  return Guard([&] {
    Need(report && out, "arguments must be non-NULL");
    *out = Dup(flatmeter::ReportToJson(report->report));
  });
}

void flm_report_free(flm_report* report) { delete report; }

void flm_options_init(flm_options* options) {
  if (!options) return;
  *options = flm_options{};
  options->struct_size = sizeof(flm_options);
}

flm_status flm_cmd_train(const flm_options* options, char** summary) {
  return Guard([&] { Emit(summary, flatmeter::CmdTrain(ToOptions(options))); });
}

flm_status flm_cmd_measure(const char* target, const flm_options* options, char** summary) {
  return Guard([&] {
    Need(target, "target is NULL");
    Emit(summary, flatmeter::CmdMeasure(target, ToOptions(options)));
  });
}

flm_status flm_cmd_reparam(const char* run_dir, const flm_options* options, char** summary) {
  return Guard([&] {
    Need(run_dir, "run_dir is NULL");
    Emit(summary, flatmeter::CmdReparam(run_dir, ToOptions(options)));
  });
}

flm_status flm_cmd_correlate(const char* const* run_dirs, size_t count, const flm_options* options,
                             char** summary) {
  return Guard([&] {
    Need(run_dirs || count == 0, "run_dirs is NULL");
    std::vector<std::string> dirs;
    for (std::size_t i = 0; i < count; ++i) {
      Need(run_dirs[i] != nullptr, "run directory is NULL");
      dirs.emplace_back(run_dirs[i]);
    }
    Emit(summary, flatmeter::CmdCorrelate(dirs, ToOptions(options)));
  });
}

flm_status flm_cmd_verify(const char* suite, const flm_options* options, int* all_passed,
                          char** summary) {
  return Guard([&] {
    Need(suite && all_passed, "suite and all_passed must be non-NULL");
    const flatmeter::VerifyReport report = flatmeter::CmdVerify(suite, ToOptions(options));
    *all_passed = report.passed() ? 1 : 0;
    Emit(summary, flatmeter::VerifySummary(report));
  });
}

flm_status flm_cmd_experiment(const char* preset, const flm_options* options, char** summary) {
  return Guard([&] {
    Need(preset, "preset is NULL");
    Emit(summary, flatmeter::CmdExperiment(preset, ToOptions(options)));
  });
}

flm_status flm_preset_names(char** out) {
  return Guard([&] {
    Need(out, "out is NULL");
    std::string names;
    for (const std::string& n : flatmeter::PresetNames()) names += n + "\n";
    *out = Dup(names);
  });
}

}  // extern "C"
