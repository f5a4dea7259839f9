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

// Experiment configuration: a JSON document with every default filled in
// once resolved. The resolved form is canonical (sorted keys, round-trip
// doubles), so its hash identifies the experiment.

#ifndef FLATMETER_EXPERIMENT_CONFIG_HPP_
#define FLATMETER_EXPERIMENT_CONFIG_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "data/datasets.hpp"
#include "expstats/expstats.hpp"
#include "flatness/flatness.hpp"
#include "net/mlp.hpp"
#include "reparam/reparam.hpp"
#include "trainer/trainer.hpp"

namespace flatmeter {

struct DatasetConfig {
  enum class Kind { kMnist, kSynthetic };
  Kind kind = Kind::kSynthetic;
  std::string root;             // mnist: empty means FLATMETER_DATA / build default
  std::size_t train_count = 0;  // mnist: 0 keeps the full official split
  std::size_t test_count = 0;
  // synthetic teacher
  std::uint64_t seed = 1;
  std::size_t input_dim = 4;
  std::vector<std::size_t> hidden = {8};
  std::size_t output_dim = 1;
};

struct GridConfig {
  std::vector<InitScheme> init_schemes = {InitScheme::kXavierNormal};
  std::vector<std::size_t> batch_sizes = {32};
  std::vector<double> learning_rates = {0.01};
  bool paired = true;  // zip batch sizes with learning rates instead of crossing them
  std::size_t repeats = 1;
  std::uint64_t base_seed = 0;
  std::size_t max_epochs = 3000;
  double train_error_threshold = 0.07;
  std::size_t patience = 5;
};

struct MeasureConfig {
  std::vector<std::size_t> layers;  // 1-based; empty: all
  std::optional<TraceMode> trace_mode;
  SpectralConfig spectral;
  std::uint64_t trace_seed = 0x7ace;
};

struct ReparamConfig {
  ReparamSpec::Kind kind = ReparamSpec::Kind::kLayerwise;
  double factor_lo = 5.0;
  double factor_hi = 25.0;
  std::size_t repetitions = 1;
  std::uint64_t seed = 0x4e9a;
};

struct CorrelateConfig {
  StatKind stat = StatKind::kSpearman;
  std::vector<std::string> measures;  // empty: kappa_tau per hidden layer
  std::string gen_error = "gen_err_mean";
};

struct ExperimentConfig {
  std::string name = "custom";
  DatasetConfig dataset;
  std::vector<std::size_t> shape;
  LossKind loss = LossKind::kSoftmaxCrossEntropy;
  GridConfig grid;
  MeasureConfig measure;
  ReparamConfig reparam;
  CorrelateConfig correlate;
};

// One trained network of the grid.
struct GridCell {
  std::size_t index = 0;
  std::string run_id;
  TrainConfig train;
  std::size_t repeat = 0;
};

// "auto", "exact" or "hutchinson[:probes]"; ConfigError otherwise.
std::optional<TraceMode> ParseTraceModeSpec(const std::string& text);
std::string TraceModeSpec(const std::optional<TraceMode>& mode);

// Errors: ConfigError on unknown keys, wrong types or violated invariants.
ExperimentConfig ParseConfig(const std::string& json_text);
std::string ConfigToJson(const ExperimentConfig& config);
std::string ConfigHash(const ExperimentConfig& config);
void Validate(const ExperimentConfig& config);

// Built-in presets: "appendix-c-desk", "teacher-smoke". ConfigError if unknown.
ExperimentConfig Preset(const std::string& name);
std::vector<std::string> PresetNames();

// Grid cells in a fixed order (scheme, batch/lr, repeat).
std::vector<GridCell> ExpandGrid(const ExperimentConfig& config);

// Human-readable warnings, e.g. a learning-rate/batch-size ratio that varies
// across the grid.
std::vector<std::string> ConfigWarnings(const ExperimentConfig& config);

// Hash of everything that influences training of one cell.
std::string CellHash(const ExperimentConfig& config, const GridCell& cell);

DatasetBundle LoadDataset(const DatasetConfig& config);

// Measure keys used when correlate.measures is empty.
std::vector<std::string> DefaultMeasureKeys(const ExperimentConfig& config);

MeasureOptions ToMeasureOptions(const MeasureConfig& config);

}  // namespace flatmeter

#endif  // FLATMETER_EXPERIMENT_CONFIG_HPP_
