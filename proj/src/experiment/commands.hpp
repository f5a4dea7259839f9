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

// Subcommand implementations behind the C API. A run directory holds:
//
//   config.json, config.hash     resolved configuration and its hash
//   cells/<run_id>/              checkpoint.json, record.json, train.json
//                                (training hash, loss history), measure.json
//   records.json, records.csv    merged records in grid order
//   plots/                       measure vs generalization-error scatters
//   reparam/                     the same layout for reparameterized copies,
//                                plus pairs.csv with before/after measures
//   correlations.csv             written by correlate

#ifndef FLATMETER_EXPERIMENT_COMMANDS_HPP_
#define FLATMETER_EXPERIMENT_COMMANDS_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "experiment/config.hpp"
#include "expstats/expstats.hpp"
#include "oracle/suites.hpp"

namespace flatmeter {

// Command-line overrides; unset fields leave the configuration alone.
struct CommandOptions {
  std::string config_path;
  std::string out_dir;
  std::size_t jobs = 0;               // 0: every available core
  std::optional<std::uint64_t> seed;  // meaning depends on the command
  std::vector<std::size_t> layers;    // 1-based
  std::optional<std::string> trace_mode;
  std::optional<std::string> stat;
  std::optional<std::pair<double, double>> factor_range;
  std::optional<std::string> reparam_kind;
  std::vector<std::string> measures;
};

// Which configuration field --seed overrides.
enum class SeedTarget { kGrid, kMeasure, kReparam };

// Errors: ConfigError.
void ApplyOverrides(ExperimentConfig& config, const CommandOptions& options, SeedTarget target);

ExperimentConfig LoadRunConfig(const std::string& run_dir);
std::vector<RunRecord> LoadRecords(const std::string& run_dir);

struct CorrelationRow {
  std::string measure;
  std::string gen_error;
  CorrelationResult result;
};

// Each returns a JSON summary. Errors are thrown as flatmeter::Error.
//
// train: trains every grid cell; cells whose training hash matches a
// completed cell on disk are reused. Errors: ConfigError, IoError.
std::string CmdTrain(const CommandOptions& options);
std::string TrainRunDir(const ExperimentConfig& config, const std::string& out_dir,
                        std::size_t jobs);

// measure: `target` is a run directory or a checkpoint file (the latter
// needs --config for the dataset and loss). Errors: MissingCheckpoint,
// ConfigError.
std::string CmdMeasure(const std::string& target, const CommandOptions& options);

// reparam: reparameterizes every measured network of the run directory.
// Errors: PreconditionViolated when nothing is measured or a certificate
// fails, plus anything propagated.
std::string CmdReparam(const std::string& run_dir, const CommandOptions& options);

// correlate: Errors: TooFewRuns, DegenerateVariance.
std::vector<CorrelationRow> Correlate(const std::vector<std::string>& run_dirs,
                                      const CommandOptions& options, std::string* out_dir);
std::string CorrelationsCsv(const std::vector<CorrelationRow>& rows);
std::string CmdCorrelate(const std::vector<std::string>& run_dirs, const CommandOptions& options);

// verify: never throws on failing checks; the report says what failed.
// Writes verify.csv under --out when given.
VerifyReport CmdVerify(const std::string& suite, const CommandOptions& options);
std::string VerifySummary(const VerifyReport& report);

// experiment: train, measure, reparam and correlate a preset (or --config)
// into one run directory; writes summary.json.
std::string CmdExperiment(const std::string& preset, const CommandOptions& options);

}  // namespace flatmeter

#endif  // FLATMETER_EXPERIMENT_COMMANDS_HPP_
