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

// Command-line front end. Talks to the library only through the C API.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <string>
#include <vector>

#include "flatmeter/flatmeter.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct Flags {
  std::string config, out, trace_mode, stat, reparam_kind;
  std::size_t jobs = 0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> layers;
  std::vector<double> factor_range;
  std::vector<std::string> measures;
  bool quiet = false, verbose = false;
};

// Owns the storage the C struct points into.
struct BuiltOptions {
  flm_options c;
  std::vector<const char*> measure_ptrs;
};

void Build(const Flags& f, const CLI::App& app, BuiltOptions& b) {
  flm_options_init(&b.c);
  auto set = [](const std::string& s) { return s.empty() ? nullptr : s.c_str(); };
  b.c.config_path = set(f.config);
  b.c.out_dir = set(f.out);
  b.c.jobs = f.jobs;
  const CLI::Option* seed = app.get_option_no_throw("--seed");
  b.c.has_seed = seed && seed->count() > 0;
  b.c.seed = f.seed;
  b.c.layers = f.layers.data();
  b.c.num_layers = f.layers.size();
  b.c.trace_mode = set(f.trace_mode);
  b.c.stat = set(f.stat);
  b.c.reparam_kind = set(f.reparam_kind);
  if (f.factor_range.size() == 2) {
    b.c.has_factor_range = 1;
    b.c.factor_lo = f.factor_range[0];
    b.c.factor_hi = f.factor_range[1];
  }
  for (const std::string& m : f.measures) b.measure_ptrs.push_back(m.c_str());
  b.c.measures = b.measure_ptrs.data();
  b.c.num_measures = b.measure_ptrs.size();
}

int Report(flm_status status, char* summary) {
  if (summary) {
    std::printf("%s\n", summary);
    flm_string_free(summary);
  }
  if (status == FLM_OK) return kExitOk;
  std::fprintf(stderr, "flatmeter: %s\n", flm_last_error());
  return status == FLM_CONFIG_ERROR || status == FLM_INVALID_ARGUMENT ? kExitUsage : kExitFailure;
}

void PrintVerifyFailures(const char* summary) {
  const auto j = nlohmann::json::parse(summary, nullptr, false);
  if (j.is_discarded()) return;
  for (const auto& c : j.value("checks", nlohmann::json::array())) {
    if (c.value("failures", 0) == 0) continue;
    std::fprintf(stderr, "FAIL %s/%s: %d of %d instances out of bound %s (worst %s)\n",
                 c.value("suite", "").c_str(), c.value("check", "").c_str(),
                 c.value("failures", 0), c.value("count", 0), c.at("tolerance").dump().c_str(),
                 c.at("worst").dump().c_str());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flatmeter: Hessian-based flatness measures for ReLU networks"};
  app.require_subcommand(1);
  Flags f;
  std::string target, suite = "all", preset;
  std::vector<std::string> dirs;

  app.add_flag("-q,--quiet", f.quiet, "Suppress progress logging");
  app.add_flag("-v,--verbose", f.verbose, "Debug logging");

  auto common = [&](CLI::App* sub) {
    sub->add_option("--jobs", f.jobs, "Parallel workers (0: all cores)")->capture_default_str();
    sub->add_option("--seed", f.seed, "Seed override");
  };
  auto measure_flags = [&](CLI::App* sub) {
    sub->add_option("--layers", f.layers, "1-based layers to measure, e.g. 1,2,3")
        ->delimiter(',');
    sub->add_option("--trace-mode", f.trace_mode, "auto | exact | hutchinson[:probes]");
  };
  auto reparam_flags = [&](CLI::App* sub) {
    sub->add_option("--factor-range", f.factor_range, "Reparameterization factors lo,hi")
        ->delimiter(',')
        ->expected(2);
    sub->add_option("--kind", f.reparam_kind, "layerwise | neuronwise");
  };
  auto correlate_flags = [&](CLI::App* sub) {
    sub->add_option("--stat", f.stat, "spearman | pearson");
    sub->add_option("--measures", f.measures, "Measure keys, e.g. kappa_tau.l1,rho_sum")
        ->delimiter(',');
  };

  auto* train = app.add_subcommand("train", "Train every cell of a configuration grid");
  train->add_option("--config", f.config, "Experiment config (JSON)")->required();
  train->add_option("--out", f.out, "Run directory")->required();
  common(train);

  auto* measure = app.add_subcommand("measure", "Measure flatness of a run directory or checkpoint");
  measure->add_option("target", target, "Run directory or checkpoint file")->required();
  measure->add_option("--config", f.config, "Config for a single checkpoint");
  measure->add_option("--out", f.out, "Where a single checkpoint's report.json goes");
  common(measure);
  measure_flags(measure);

  auto* reparam = app.add_subcommand("reparam", "Reparameterize and re-measure a measured run");
  reparam->add_option("run_dir", target, "Measured run directory")->required();
  reparam->add_option("--out", f.out, "Output directory (default: <run_dir>/reparam)");
  common(reparam);
  reparam_flags(reparam);

  auto* correlate = app.add_subcommand("correlate", "Correlate measures with generalization error");
  correlate->add_option("run_dirs", dirs, "Run directories")->required();
  correlate->add_option("--out", f.out, "Output directory (required for several run dirs)");
  correlate_flags(correlate);

  auto* verify = app.add_subcommand("verify", "Run the invariance and oracle suites");
  verify->add_option("suite", suite, "invariance | oracle | all")
      ->check(CLI::IsMember({"invariance", "oracle", "all"}))
      ->capture_default_str();
  verify->add_option("--out", f.out, "Directory for verify.csv");
  common(verify);
  reparam_flags(verify);

  auto* experiment = app.add_subcommand("experiment", "Train, measure, reparameterize, correlate");
  experiment->add_option("preset", preset, "Preset name (see `presets`)")->required();
  experiment->add_option("--config", f.config, "Use this config instead of the preset");
  experiment->add_option("--out", f.out, "Run directory (default: flatmeter-<preset>)");
  common(experiment);
  measure_flags(experiment);
  reparam_flags(experiment);
  correlate_flags(experiment);

  auto* presets = app.add_subcommand("presets", "List built-in presets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  flm_set_log_level(f.quiet ? FLM_LOG_QUIET : (f.verbose ? FLM_LOG_DEBUG : FLM_LOG_INFO));
  CLI::App* sub = app.get_subcommands().front();
  BuiltOptions b;
  Build(f, *sub, b);
  char* summary = nullptr;

  flm_status status = FLM_OK;
  if (sub == train) {
    status = flm_cmd_train(&b.c, &summary);
  } else if (sub == measure) {
    status = flm_cmd_measure(target.c_str(), &b.c, &summary);
  } else if (sub == reparam) {
    status = flm_cmd_reparam(target.c_str(), &b.c, &summary);
  } else if (sub == correlate) {
    std::vector<const char*> ptrs;
    for (const std::string& d : dirs) ptrs.push_back(d.c_str());
    status = flm_cmd_correlate(ptrs.data(), ptrs.size(), &b.c, &summary);
  } else if (sub == experiment) {
    status = flm_cmd_experiment(preset.c_str(), &b.c, &summary);
  }
  if (sub != verify && sub != presets) return Report(status, summary);
  if (sub == verify) {
    int passed = 0;
    status = flm_cmd_verify(suite.c_str(), &b.c, &passed, &summary);
    if (status == FLM_OK && summary) PrintVerifyFailures(summary);
    const int code = Report(status, summary);
    return code != kExitOk ? code : (passed ? kExitOk : kExitFailure);
  }
  if (sub == presets) {
    status = flm_preset_names(&summary);
    if (summary) {
      std::fputs(summary, stdout);
      flm_string_free(summary);
    }
    return status == FLM_OK ? kExitOk : kExitFailure;
  }
  return kExitUsage;
}
