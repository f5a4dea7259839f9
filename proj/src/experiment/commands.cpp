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

#include "experiment/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <json.hpp>
#include <limits>
#include <mutex>

#include "common/error.hpp"
#include "common/hash.hpp"
#include "common/io.hpp"
#include "common/log.hpp"
#include "data/checkpoint.hpp"
#include "experiment/pool.hpp"
#include "flatness/flatness.hpp"
#include "reparam/reparam.hpp"
#include "trainer/trainer.hpp"

namespace flatmeter {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

constexpr std::size_t kCertificateProbes = 100;

std::string Join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

double Seconds(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

// JSON has no inf/nan; summaries carry them as strings like the records do.
json Number(double v) {
  if (std::isfinite(v)) return v;
  return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

std::size_t NumLayers(const ExperimentConfig& config) { return config.shape.size() - 1; }

void WriteRunConfig(const std::string& dir, const ExperimentConfig& config) {
  WriteFileAtomic(Join(dir, "config.json"), ConfigToJson(config) + "\n");
  WriteFileAtomic(Join(dir, "config.hash"), ConfigHash(config) + "\n");
}

ExperimentConfig LoadConfigFile(const std::string& path) {
  Require(FileExists(path), Errc::kConfigError, "config file '" + path + "' not found");
  ExperimentConfig config = ParseConfig(ReadFile(path));
  Validate(config);
  return config;
}

void SaveRecords(const std::string& dir, const std::vector<RunRecord>& records,
                 std::size_t num_layers) {
  json all = json::array();
  for (const RunRecord& r : records) all.push_back(json::parse(RecordToJson(r)));
  WriteFileAtomic(Join(dir, "records.json"), all.dump(2) + "\n");
  WriteFileAtomic(Join(dir, "records.csv"), RecordsCsv(records, num_layers));
}

// Loss-derived fields of a record from a network and its data.
void FillErrors(RunRecord& r, const MlpNetwork& net, const DatasetBundle& data, LossKind loss) {
  const double train_sum = SummedLoss(net, data.train, loss);
  const double test_sum = SummedLoss(net, data.test, loss);
  r.train_error = train_sum / static_cast<double>(data.train.size());
  r.test_error = test_sum / static_cast<double>(data.test.size());
  r.gen_err_mean = GeneralizationErrorFromSums(train_sum, data.train.size(), test_sum,
                                               data.test.size(), GenErrMode::kMeanDifference);
  r.gen_err_scaled = GeneralizationErrorFromSums(train_sum, data.train.size(), test_sum,
                                                 data.test.size(), GenErrMode::kScaledSum);
}

std::string MeasureHash(const ExperimentConfig& config, const std::string& network_hash) {
  const json measure = json::parse(ConfigToJson(config)).at("measure");
  return HexHash(network_hash + "/" + measure.dump());
}

std::vector<std::pair<std::string, std::string>> PlotPairs(const ExperimentConfig& config) {
  std::vector<std::pair<std::string, std::string>> plots;
  for (const std::string& key : DefaultMeasureKeys(config))
    plots.emplace_back(key, config.correlate.gen_error);
  return plots;
}

// Measures every record whose stored measurement hash is stale. `cells`
// maps each record to its cell directory; `network_hash` to the hash of the
// weights it was trained (or reparameterized) into.
std::size_t MeasureRecords(std::vector<RunRecord>& records, const std::vector<std::string>& cells,
                           const std::vector<std::string>& network_hashes,
                           const ExperimentConfig& config, const LabeledSet& train,
                           std::size_t jobs) {
  const MeasureOptions options = ToMeasureOptions(config.measure);
  std::mutex log_mutex;
  std::size_t measured = 0;
  ParallelFor(records.size(), jobs, [&](std::size_t i) {
    RunRecord& r = records[i];
    if (r.diverged) return;
    const std::string hash = MeasureHash(config, network_hashes[i]);
    const std::string stamp = Join(cells[i], "measure.json");
    if (r.report && FileExists(stamp) &&
        json::parse(ReadFile(stamp)).value("measure_hash", "") == hash)
      return;
    const std::string ckpt = Join(cells[i], "checkpoint.json");
    Require(FileExists(ckpt), Errc::kMissingCheckpoint, "no checkpoint at '" + ckpt + "'");
    const auto t0 = std::chrono::steady_clock::now();
    r.report = FullReport(LoadCheckpoint(ckpt).network, train, config.loss, options);
    WriteFileAtomic(Join(cells[i], "record.json"), RecordToJson(r) + "\n");
    WriteFileAtomic(stamp, json{{"measure_hash", hash}}.dump(2) + "\n");
    std::lock_guard<std::mutex> lock(log_mutex);
    ++measured;
    Log(LogLevel::kInfo, "measured %s%s%s (%.1fs)", r.run_id.c_str(),
        r.reparam_id.empty() ? "" : " ", r.reparam_id.c_str(), Seconds(t0));
  });
  return measured;
}

struct CellState {
  std::string dir;
  std::string network_hash;
};

// Records, cell directories and network hashes of a run directory, in the
// stored order.
std::vector<CellState> CellStates(const std::string& dir, const std::vector<RunRecord>& records) {
  std::vector<CellState> states;
  for (const RunRecord& r : records) {
    const std::string id = r.reparam_id.empty() ? r.run_id : r.run_id + "-" + r.reparam_id;
    CellState s{Join(Join(dir, "cells"), id), ""};
    const std::string marker = Join(s.dir, r.reparam_id.empty() ? "train.json" : "pair.json");
    Require(FileExists(marker), Errc::kMissingCheckpoint,
            "cell '" + id + "' is incomplete (missing " + marker + ")");
    s.network_hash = json::parse(ReadFile(marker)).at("network_hash").get<std::string>();
    states.push_back(std::move(s));
  }
  return states;
}

std::string MeasureRunDir(const std::string& dir, const CommandOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig config = LoadRunConfig(dir);
  ApplyOverrides(config, options, SeedTarget::kMeasure);
  std::vector<RunRecord> records = LoadRecords(dir);
  Require(!records.empty(), Errc::kMissingCheckpoint, "run directory '" + dir + "' has no records");
  const std::vector<CellState> states = CellStates(dir, records);
  std::vector<std::string> cells, hashes;
  for (const CellState& s : states) {
    cells.push_back(s.dir);
    hashes.push_back(s.network_hash);
  }
  const DatasetBundle data = LoadDataset(config.dataset);
  const std::size_t measured =
      MeasureRecords(records, cells, hashes, config, data.train, ResolveJobs(options.jobs));
  WriteRunConfig(dir, config);
  SaveRecords(dir, records, NumLayers(config));
  Emit(records, dir, NumLayers(config), PlotPairs(config));
  std::size_t with_report = 0;
  for (const RunRecord& r : records) with_report += r.report.has_value();
  return json{{"command", "measure"},
              {"run_dir", dir},
              {"records", records.size()},
              {"measured", measured},
              {"with_report", with_report},
              {"seconds", Seconds(t0)}}
      .dump(2);
}

std::string PairsCsv(const json& pairs) {
  static const char* kColumns[] = {
      "run_id",          "reparam_id",       "layer",           "alpha",
      "certificate",     "weight_norm_sq_before", "weight_norm_sq_after",
      "lambda_max_before", "lambda_max_after", "trace_before",  "trace_after",
      "kappa_before",    "kappa_after",      "kappa_tau_before", "kappa_tau_after",
      "rho_sigma_before", "rho_sigma_after"};
  std::string out;
  for (const char* c : kColumns) out += std::string(out.empty() ? "" : ",") + c;
  out += "\n";
  for (const json& row : pairs) {
    std::string line;
    for (const char* c : kColumns) {
      if (!line.empty() || c != kColumns[0]) line += ",";
      const json& v = row.at(c);
      if (v.is_string())
        line += v.get<std::string>();
      else if (v.is_null())
        line += "";
      else if (v.is_number_unsigned())
        line += std::to_string(v.get<std::size_t>());
      else
        line += FormatDouble(v.get<double>());
    }
    out += line + "\n";
  }
  return out;
}

json CorrelationsJson(const std::vector<CorrelationRow>& rows) {
  json out = json::array();
  for (const CorrelationRow& r : rows)
    out.push_back({{"measure", r.measure},
                   {"gen_error", r.gen_error},
                   {"stat", StatKindName(r.result.kind)},
                   {"coefficient", Number(r.result.coefficient)},
                   {"count", r.result.count}});
  return out;
}

}  // namespace

void ApplyOverrides(ExperimentConfig& config, const CommandOptions& o, SeedTarget target) {
  if (o.seed) {
    switch (target) {
      case SeedTarget::kGrid: config.grid.base_seed = *o.seed; break;
      case SeedTarget::kMeasure: config.measure.trace_seed = *o.seed; break;
      case SeedTarget::kReparam: config.reparam.seed = *o.seed; break;
    }
  }
  if (!o.layers.empty()) config.measure.layers = o.layers;
  if (o.trace_mode) config.measure.trace_mode = ParseTraceModeSpec(*o.trace_mode);
  try {
    if (o.stat) config.correlate.stat = ParseStatKind(*o.stat);
    if (o.reparam_kind) config.reparam.kind = ParseReparamKind(*o.reparam_kind);
  } catch (const Error& e) {
    Fail(Errc::kConfigError, e.what());
  }
  if (o.factor_range) {
    config.reparam.factor_lo = o.factor_range->first;
    config.reparam.factor_hi = o.factor_range->second;
  }
  if (!o.measures.empty()) config.correlate.measures = o.measures;
  Validate(config);
}

ExperimentConfig LoadRunConfig(const std::string& run_dir) {
  const std::string path = Join(run_dir, "config.json");
  Require(FileExists(path), Errc::kMissingCheckpoint,
          "'" + run_dir + "' is not a run directory (no config.json)");
  return LoadConfigFile(path);
}

std::vector<RunRecord> LoadRecords(const std::string& run_dir) {
  const std::string path = Join(run_dir, "records.json");
  Require(FileExists(path), Errc::kMissingCheckpoint, "no records.json in '" + run_dir + "'");
  json all;
  try {
    all = json::parse(ReadFile(path));
  } catch (const json::exception& e) {
    Fail(Errc::kCorruptFile, path + ": " + e.what());
  }
  Require(all.is_array(), Errc::kCorruptFile, path + ": expected an array of records");
  std::vector<RunRecord> records;
  for (const json& r : all) records.push_back(RecordFromJson(r.dump()));
  return records;
}

std::string TrainRunDir(const ExperimentConfig& config, const std::string& out_dir,
                        std::size_t jobs) {
  const auto t0 = std::chrono::steady_clock::now();
  Validate(config);
  for (const std::string& w : ConfigWarnings(config)) Log(LogLevel::kInfo, "warning: %s", w.c_str());
  fs::create_directories(out_dir);
  WriteRunConfig(out_dir, config);
  const std::vector<GridCell> grid = ExpandGrid(config);
  const DatasetBundle data = LoadDataset(config.dataset);
  std::vector<RunRecord> records(grid.size());
  std::vector<char> reused(grid.size(), 0);
  std::mutex log_mutex;
  ParallelFor(grid.size(), ResolveJobs(jobs), [&](std::size_t i) {
    const GridCell& cell = grid[i];
    const std::string dir = Join(Join(out_dir, "cells"), cell.run_id);
    const std::string hash = CellHash(config, cell);
    const std::string marker = Join(dir, "train.json");
    if (FileExists(marker) && FileExists(Join(dir, "record.json")) &&
        FileExists(Join(dir, "checkpoint.json")) &&
        json::parse(ReadFile(marker)).value("cell_hash", "") == hash) {
      records[i] = RecordFromJson(ReadFile(Join(dir, "record.json")));
      reused[i] = 1;
      return;
    }
    const auto t_cell = std::chrono::steady_clock::now();
    // A retrained cell invalidates anything derived from the old weights.
    fs::remove(marker);
    fs::remove(Join(dir, "measure.json"));
    TrainOutcome out = SgdTrain(Initialize(config.shape, cell.train.init_scheme, cell.train.seed),
                                data.train, cell.train);
    RunRecord& r = records[i];
    r.run_id = cell.run_id;
    r.seed = cell.train.seed;
    r.init_scheme = std::string(InitSchemeName(cell.train.init_scheme));
    r.batch_size = cell.train.batch_size;
    r.learning_rate = cell.train.learning_rate;
    r.converged = out.converged;
    r.diverged = out.diverged;
    r.epochs = out.epochs;
    if (out.diverged) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      r.train_error = std::numeric_limits<double>::infinity();
      r.test_error = r.gen_err_mean = r.gen_err_scaled = nan;
    } else {
      FillErrors(r, out.network, data, config.loss);
    }
    SaveCheckpoint(Join(dir, "checkpoint.json"), out.network, {cell.train.seed, hash});
    WriteFileAtomic(Join(dir, "record.json"), RecordToJson(r) + "\n");
    json history = json::array();
    for (double v : out.loss_history) history.push_back(Number(v));
    WriteFileAtomic(marker, json{{"cell_hash", hash},
                                 {"network_hash", hash},
                                 {"loss_history", history}}
                                    .dump(2) +
                                "\n");
    std::lock_guard<std::mutex> lock(log_mutex);
    Log(LogLevel::kInfo, "trained %s: %s after %zu epochs, train error %.4g (%.1fs)",
        r.run_id.c_str(), r.diverged ? "diverged" : (r.converged ? "converged" : "not converged"),
        r.epochs, r.train_error, Seconds(t_cell));
  });
  SaveRecords(out_dir, records, NumLayers(config));
  std::size_t converged = 0, diverged = 0, skipped = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    converged += records[i].converged;
    diverged += records[i].diverged;
    skipped += reused[i];
  }
  return json{{"command", "train"},
              {"run_dir", out_dir},
              {"config_hash", ConfigHash(config)},
              {"cells", records.size()},
              {"reused", skipped},
              {"converged", converged},
              {"diverged", diverged},
              {"seconds", Seconds(t0)}}
      .dump(2);
}

std::string CmdTrain(const CommandOptions& options) {
  Require(!options.config_path.empty(), Errc::kConfigError, "train needs --config");
  Require(!options.out_dir.empty(), Errc::kConfigError, "train needs --out");
  ExperimentConfig config = LoadConfigFile(options.config_path);
  ApplyOverrides(config, options, SeedTarget::kGrid);
  return TrainRunDir(config, options.out_dir, options.jobs);
}

std::string CmdMeasure(const std::string& target, const CommandOptions& options) {
  if (fs::is_directory(target)) return MeasureRunDir(target, options);
  Require(FileExists(target), Errc::kMissingCheckpoint, "no checkpoint at '" + target + "'");
  Require(!options.config_path.empty(), Errc::kConfigError,
          "measuring a single checkpoint needs --config for the dataset and loss");
  ExperimentConfig config = LoadConfigFile(options.config_path);
  ApplyOverrides(config, options, SeedTarget::kMeasure);
  const Checkpoint ckpt = LoadCheckpoint(target);
  Require(ckpt.network.shape() == config.shape, Errc::kConfigError,
          "checkpoint shape does not match the configured shape");
  const DatasetBundle data = LoadDataset(config.dataset);
  const FlatnessReport report =
      FullReport(ckpt.network, data.train, config.loss, ToMeasureOptions(config.measure));
  const std::string text = ReportToJson(report);
  if (!options.out_dir.empty()) WriteFileAtomic(Join(options.out_dir, "report.json"), text + "\n");
  return text;
}

std::string CmdReparam(const std::string& run_dir, const CommandOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig config = LoadRunConfig(run_dir);
  ApplyOverrides(config, options, SeedTarget::kReparam);
  WriteRunConfig(run_dir, config);
  const std::vector<RunRecord> base = LoadRecords(run_dir);
  const std::vector<CellState> base_states = CellStates(run_dir, base);
  std::vector<std::size_t> sources;
  for (std::size_t i = 0; i < base.size(); ++i)
    if (base[i].report) sources.push_back(i);
  Require(!sources.empty(), Errc::kPreconditionViolated,
          "no measured records in '" + run_dir + "'; run measure first");

  const std::string out = options.out_dir.empty() ? Join(run_dir, "reparam") : options.out_dir;
  fs::create_directories(out);
  WriteRunConfig(out, config);
  const DatasetBundle data = LoadDataset(config.dataset);
  const std::size_t reps = config.reparam.repetitions;
  const std::size_t n = sources.size() * reps;
  std::vector<RunRecord> records(n);
  std::vector<std::string> cells(n), hashes(n);
  std::vector<json> pair_rows(n);
  std::vector<double> certificates(n);
  std::mutex log_mutex;
  ParallelFor(n, ResolveJobs(options.jobs), [&](std::size_t k) {
    const RunRecord& src = base[sources[k / reps]];
    const CellState& src_state = base_states[sources[k / reps]];
    const std::size_t rep = k % reps;
    const std::uint64_t seed = DeriveSeed(config.reparam.seed, {HashBytes(src.run_id), rep});
    const MlpNetwork net = LoadCheckpoint(Join(src_state.dir, "checkpoint.json")).network;
    const ReparamSpec spec = SampleRandom(net.shape(), config.reparam.kind, config.reparam.factor_lo,
                                          config.reparam.factor_hi, seed);
    RunRecord& r = records[k];
    r = src;
    r.reparam_id = spec.Id() + "-k" + std::to_string(rep);
    r.report.reset();
    const std::string dir = Join(Join(out, "cells"), r.run_id + "-" + r.reparam_id);
    cells[k] = dir;
    hashes[k] = HexHash(src_state.network_hash + "/" + SerializeSpec(spec));
    const std::string marker = Join(dir, "pair.json");
    const MlpNetwork moved = Apply(net, spec);
    if (FileExists(marker) && FileExists(Join(dir, "record.json"))) {
      const json stored = json::parse(ReadFile(marker));
      if (stored.value("network_hash", "") == hashes[k]) {
        r = RecordFromJson(ReadFile(Join(dir, "record.json")));
        certificates[k] = stored.at("certificate").get<double>();
        return;
      }
    }
    const ProbeCertificate cert = VerifyFunctionPreserving(net, moved, kCertificateProbes, seed);
    certificates[k] = cert.max_abs_deviation;
    if (!src.diverged) FillErrors(r, moved, data, config.loss);
    WriteFileAtomic(Join(dir, "spec.json"), SerializeSpec(spec) + "\n");
    SaveCheckpoint(Join(dir, "checkpoint.json"), moved, {src.seed, hashes[k]});
    WriteFileAtomic(Join(dir, "record.json"), RecordToJson(r) + "\n");
    fs::remove(Join(dir, "measure.json"));
    WriteFileAtomic(marker, json{{"network_hash", hashes[k]},
                                 {"certificate", cert.max_abs_deviation},
                                 {"certificate_passed", cert.passed},
                                 {"spec_id", spec.Id()}}
                                    .dump(2) +
                                "\n");
  });
  const std::size_t measured =
      MeasureRecords(records, cells, hashes, config, data.train, ResolveJobs(options.jobs));

  json pairs = json::array();
  double worst_certificate = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const RunRecord& before = base[sources[k / reps]];
    const RunRecord& after = records[k];
    worst_certificate = std::max(worst_certificate, certificates[k]);
    const ReparamSpec spec = ParseSpec(ReadFile(Join(cells[k], "spec.json")));
    for (const LayerMeasures& a : after.report->layers) {
      const LayerMeasures* b = before.report->Find(a.layer);
      if (!b) continue;
      pairs.push_back({{"run_id", after.run_id},
                       {"reparam_id", after.reparam_id},
                       {"layer", a.layer + 1},
                       {"alpha", spec.kind == ReparamSpec::Kind::kLayerwise
                                     ? json(spec.alphas[a.layer])
                                     : json(nullptr)},
                       {"certificate", certificates[k]},
                       {"weight_norm_sq_before", b->weight_norm_sq},
                       {"weight_norm_sq_after", a.weight_norm_sq},
                       {"lambda_max_before", b->eig.eigenvalue},
                       {"lambda_max_after", a.eig.eigenvalue},
                       {"trace_before", b->trace.trace},
                       {"trace_after", a.trace.trace},
                       {"kappa_before", b->kappa},
                       {"kappa_after", a.kappa},
                       {"kappa_tau_before", b->kappa_tau},
                       {"kappa_tau_after", a.kappa_tau},
                       {"rho_sigma_before", b->rho_sigma},
                       {"rho_sigma_after", a.rho_sigma}});
    }
  }
  SaveRecords(out, records, NumLayers(config));
  WriteFileAtomic(Join(out, "pairs.csv"), PairsCsv(pairs));
  Emit(records, out, NumLayers(config), PlotPairs(config));
  Log(LogLevel::kInfo, "reparam: %zu networks, worst certificate deviation %.3g", n,
      worst_certificate);
  Require(worst_certificate <= 1e-10, Errc::kPreconditionViolated,
          "function-preservation certificate failed (max deviation " +
              FormatDouble(worst_certificate) + ")");
  return json{{"command", "reparam"},
              {"run_dir", run_dir},
              {"out_dir", out},
              {"kind", ReparamKindName(config.reparam.kind)},
              {"factor_range", {config.reparam.factor_lo, config.reparam.factor_hi}},
              {"networks", n},
              {"measured", measured},
              {"worst_certificate", worst_certificate},
              {"seconds", Seconds(t0)}}
      .dump(2);
}

std::vector<CorrelationRow> Correlate(const std::vector<std::string>& run_dirs,
                                      const CommandOptions& options, std::string* out_dir) {
  Require(!run_dirs.empty(), Errc::kInvalidArgument, "correlate needs at least one run directory");
  Require(run_dirs.size() == 1 || !options.out_dir.empty(), Errc::kConfigError,
          "correlating several run directories needs --out");
  ExperimentConfig config = LoadRunConfig(run_dirs.front());
  ApplyOverrides(config, options, SeedTarget::kMeasure);
  std::vector<RunRecord> all;
  for (const std::string& dir : run_dirs) {
    const ExperimentConfig other = LoadRunConfig(dir);
    Require(other.shape == config.shape, Errc::kConfigError,
            "run directories disagree on the network shape");
    for (RunRecord& r : LoadRecords(dir)) all.push_back(std::move(r));
  }
  std::vector<RunRecord> usable;
  for (const RunRecord& r : all)
    if (r.converged && !r.diverged && r.report) usable.push_back(r);
  Require(usable.size() >= 3, Errc::kTooFewRuns,
          "need at least 3 converged, measured runs; have " + std::to_string(usable.size()));

  std::vector<CorrelationRow> rows;
  const std::string& gen = config.correlate.gen_error;
  for (const std::string& key : DefaultMeasureKeys(config)) {
    std::vector<double> xs, ys;
    for (const RunRecord& r : usable) {
      const auto x = RecordValue(r, key), y = RecordValue(r, gen);
      Require(x.has_value(), Errc::kMissingLayer, "records carry no measure '" + key + "'");
      Require(y.has_value(), Errc::kConfigError, "unknown generalization-error key '" + gen + "'");
      xs.push_back(*x);
      ys.push_back(*y);
    }
    rows.push_back({key, gen, Correlation(xs, ys, config.correlate.stat, key)});
  }
  const std::string target = options.out_dir.empty() ? run_dirs.front() : options.out_dir;
  WriteFileAtomic(Join(target, "correlations.csv"), CorrelationsCsv(rows));
  std::vector<std::pair<std::string, std::string>> plots;
  for (const CorrelationRow& r : rows) plots.emplace_back(r.measure, r.gen_error);
  Emit(all, target, NumLayers(config), plots);
  if (out_dir) *out_dir = target;
  return rows;
}

std::string CorrelationsCsv(const std::vector<CorrelationRow>& rows) {
  std::string out = "measure,gen_error,stat,coefficient,count\n";
  for (const CorrelationRow& r : rows)
    out += r.measure + "," + r.gen_error + "," + std::string(StatKindName(r.result.kind)) + "," +
           FormatDouble(r.result.coefficient) + "," + std::to_string(r.result.count) + "\n";
  return out;
}

std::string CmdCorrelate(const std::vector<std::string>& run_dirs, const CommandOptions& options) {
  std::string target;
  const std::vector<CorrelationRow> rows = Correlate(run_dirs, options, &target);
  for (const CorrelationRow& r : rows)
    Log(LogLevel::kInfo, "%s %s vs %s: %.4f over %zu runs", StatKindName(r.result.kind).data(),
        r.measure.c_str(), r.gen_error.c_str(), r.result.coefficient, r.result.count);
  return json{{"command", "correlate"}, {"out_dir", target}, {"correlations", CorrelationsJson(rows)}}
      .dump(2);
}

VerifyReport CmdVerify(const std::string& suite, const CommandOptions& options) {
  SuiteOptions so;
  if (options.seed) so.seed = *options.seed;
  so.jobs = ResolveJobs(options.jobs);
  if (options.factor_range) {
    so.factor_lo = options.factor_range->first;
    so.factor_hi = options.factor_range->second;
    Require(so.factor_lo > 0.0 && so.factor_lo <= so.factor_hi, Errc::kConfigError,
            "--factor-range needs 0 < lo <= hi");
  }
  VerifyReport report = RunSuite(suite, so);
  if (!options.out_dir.empty()) WriteFileAtomic(Join(options.out_dir, "verify.csv"), report.Csv());
  return report;
}

std::string VerifySummary(const VerifyReport& report) {
  json checks = json::array();
  for (const CheckSummary& c : report.checks)
    checks.push_back({{"suite", c.suite},
                      {"check", c.check},
                      {"count", c.count},
                      {"failures", c.failures},
                      {"worst", Number(c.worst)},
                      {"tolerance", c.tolerance},
                      {"seconds", c.seconds}});
  return json{{"command", "verify"}, {"passed", report.passed()}, {"checks", checks}}.dump(2);
}

std::string CmdExperiment(const std::string& preset, const CommandOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig config =
      options.config_path.empty() ? Preset(preset) : LoadConfigFile(options.config_path);
  ApplyOverrides(config, options, SeedTarget::kGrid);
  const std::string out = options.out_dir.empty() ? "flatmeter-" + config.name : options.out_dir;
  CommandOptions stage = options;
  stage.seed.reset();  // already folded into the grid seed

  json summary{{"command", "experiment"}, {"preset", config.name}, {"out_dir", out}};
  auto timed = [&](const char* name, auto&& fn) {
    const auto t = std::chrono::steady_clock::now();
    Log(LogLevel::kInfo, "experiment: %s", name);
    summary[name] = json::parse(fn());
    summary[name]["seconds"] = Seconds(t);
  };
  timed("train", [&] { return TrainRunDir(config, out, options.jobs); });
  timed("measure", [&] { return MeasureRunDir(out, stage); });
  CommandOptions reparam = stage;
  reparam.out_dir.clear();
  timed("reparam", [&] { return CmdReparam(out, reparam); });
  CommandOptions correlate = stage;
  correlate.out_dir.clear();
  std::vector<CorrelationRow> before, after;
  timed("correlate", [&] {
    before = Correlate({out}, correlate, nullptr);
    return json{{"correlations", CorrelationsJson(before)}}.dump();
  });
  timed("correlate_reparam", [&] {
    after = Correlate({Join(out, "reparam")}, correlate, nullptr);
    return json{{"correlations", CorrelationsJson(after)}}.dump();
  });
  double max_change = 0.0;
  for (std::size_t i = 0; i < before.size() && i < after.size(); ++i)
    max_change = std::max(max_change,
                          std::abs(before[i].result.coefficient - after[i].result.coefficient));
  summary["max_correlation_change"] = max_change;
  summary["seconds"] = Seconds(t0);
  const std::string text = summary.dump(2);
  WriteFileAtomic(Join(out, "summary.json"), text + "\n");
  return text;
}

}  // namespace flatmeter
