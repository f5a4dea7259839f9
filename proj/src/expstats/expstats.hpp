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

#ifndef FLATMETER_EXPSTATS_EXPSTATS_HPP_
#define FLATMETER_EXPSTATS_EXPSTATS_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "flatness/flatness.hpp"
#include "net/mlp.hpp"

namespace flatmeter {

enum class GenErrMode {
  kMeanDifference,  // mean test loss - mean train loss
  kScaledSum,       // (|train| / |test|) * summed test loss - summed train loss
};

std::string_view GenErrModeName(GenErrMode mode);

double GeneralizationError(const MlpNetwork& net, const LabeledSet& train, const LabeledSet& test,
                           LossKind loss, GenErrMode mode);

// The same formulas on precomputed summed losses.
double GeneralizationErrorFromSums(double train_sum, std::size_t train_count, double test_sum,
                                   std::size_t test_count, GenErrMode mode);

enum class StatKind { kPearson, kSpearman };

std::string_view StatKindName(StatKind kind);
StatKind ParseStatKind(std::string_view name);

struct CorrelationResult {
  std::string key;
  StatKind kind = StatKind::kSpearman;
  double coefficient = 0.0;
  std::size_t count = 0;
};

// 1-based ranks, ties share their average rank.
std::vector<double> AverageRanks(std::span<const double> xs);

// Errors: TooFewRuns below 3 pairs, DimensionMismatch, NonFinite,
// DegenerateVariance when either side is constant.
CorrelationResult Correlation(std::span<const double> xs, std::span<const double> ys,
                              StatKind kind, std::string key = {});

struct RunRecord {
  std::string run_id;
  std::uint64_t seed = 0;
  std::string init_scheme;
  std::size_t batch_size = 0;
  double learning_rate = 0.0;
  bool converged = false;
  bool diverged = false;
  std::size_t epochs = 0;
  double train_error = 0.0;
  double test_error = 0.0;
  double gen_err_mean = 0.0;
  double gen_err_scaled = 0.0;
  std::optional<FlatnessReport> report;
  std::string reparam_id;  // empty unless measured after a reparameterization

  // Plot color class: one per training setup.
  std::string SetupLabel() const;
};

// Value of a CSV column for this record ("kappa_tau.l2", "gen_err_mean", ...);
// nullopt when the record carries no such measure.
std::optional<double> RecordValue(const RunRecord& record, std::string_view key);

// Fixed column order; per-layer columns run l1..lL.
std::vector<std::string> CsvColumns(std::size_t num_layers);
std::string RecordsCsv(std::span<const RunRecord> records, std::size_t num_layers);

std::string RecordToJson(const RunRecord& record);
RunRecord RecordFromJson(const std::string& text);
std::string ReportToJson(const FlatnessReport& report);
FlatnessReport ReportFromJson(const std::string& text);

struct ScatterSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

// Log-scaled x axis; non-positive x values cannot be placed and are dropped.
std::string ScatterSvg(const std::vector<ScatterSeries>& series, const std::string& title,
                       const std::string& x_label, const std::string& y_label);

struct EmitResult {
  std::string csv_path;
  std::vector<std::string> svg_paths;
};

// Writes records.csv (all records) and one scatter per (measure, gen-error)
// pair from converged records only. Errors: IoError, InvalidArgument on an
// empty record list.
EmitResult Emit(std::span<const RunRecord> records, const std::string& out_dir,
                std::size_t num_layers,
                const std::vector<std::pair<std::string, std::string>>& plots);

}  // namespace flatmeter

#endif  // FLATMETER_EXPSTATS_EXPSTATS_HPP_
