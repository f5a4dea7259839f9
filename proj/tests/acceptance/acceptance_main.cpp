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

// Acceptance criteria, one PASS/FAIL/SKIP line each.
//
//   flatmeter_acceptance fast   criteria 1-7 and the suite/smoke half of 10
//   flatmeter_acceptance desk   criteria 8, 9 and the MNIST half of 10
//
// Exit status: 0 all evaluated criteria pass, 1 any fails, 77 nothing could
// be evaluated (MNIST missing for the desk group).
//
// Tolerances are pinned here rather than read from the library, and every
// row the suites emit is judged again against them.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "common/error.hpp"
#include "common/io.hpp"
#include "common/log.hpp"
#include "data/datasets.hpp"
#include "experiment/commands.hpp"
#include "experiment/config.hpp"
#include "oracle/suites.hpp"

namespace fm = flatmeter;
namespace fs = std::filesystem;

namespace {

constexpr int kSkip = 77;

enum class Verdict { kPass, kFail, kSkip };

struct Outcome {
  Verdict verdict;
  std::string detail;
};

int g_failures = 0, g_passes = 0, g_skips = 0;

void Line(int id, const std::string& name, const Outcome& o, double seconds) {
  const char* tag = o.verdict == Verdict::kPass   ? "PASS"
                    : o.verdict == Verdict::kFail ? "FAIL"
                                                  : "SKIP";
  std::printf("[%s] criterion %2d  %-38s %s (%.1fs)\n", tag, id, name.c_str(), o.detail.c_str(),
              seconds);
  std::fflush(stdout);
  (o.verdict == Verdict::kPass ? g_passes : o.verdict == Verdict::kFail ? g_failures : g_skips)++;
}

double Now() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

std::string Fmt(const char* fmt, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, fmt, a, b, c, d);
  return buf;
}

// Rows of one check, judged against a pinned bound.
struct Judged {
  std::size_t count = 0, failures = 0;
  double worst = 0.0;
  std::size_t instances = 0;  // distinct instance prefixes ("n012" of "n012.l2")
  double seconds = 0.0;
};

Judged Judge(const fm::VerifyReport& r, const std::string& check, double bound) {
  Judged j;
  std::map<std::string, int> prefixes;
  for (const fm::VerifyRow& row : r.rows) {
    if (row.check != check) continue;
    ++j.count;
    const bool ok = row.value <= bound;  // NaN fails
    j.failures += !ok;
    j.worst = std::isnan(row.value) ? row.value : std::max(j.worst, row.value);
    prefixes[row.instance.substr(0, row.instance.find('.'))] = 1;
  }
  j.instances = prefixes.size();
  for (const fm::CheckSummary& c : r.checks)
    if (c.check == check) j.seconds = c.seconds;
  return j;
}

std::string Describe(const std::string& what, const Judged& j, double bound) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s: %zu/%zu rows within %.0e (worst %.3g)", what.c_str(),
                j.count - j.failures, j.count, bound, j.worst);
  return buf;
}

// All listed checks must have rows, no failures, and at least `instances`
// distinct instances each.
Outcome AllWithin(const fm::VerifyReport& r,
                  const std::vector<std::pair<std::string, double>>& checks,
                  std::size_t instances, double* seconds) {
  Outcome o{Verdict::kPass, ""};
  *seconds = 0.0;
  for (const auto& [check, bound] : checks) {
    const Judged j = Judge(r, check, bound);
    *seconds += j.seconds;
    if (!o.detail.empty()) o.detail += "; ";
    o.detail += Describe(check, j, bound);
    if (j.count == 0 || j.failures > 0 || j.instances < instances) o.verdict = Verdict::kFail;
    if (j.instances < instances)
      o.detail += Fmt(" [only %.0f of %.0f instances]", static_cast<double>(j.instances),
                      static_cast<double>(instances));
  }
  return o;
}

fm::SuiteOptions SuiteDefaults() {
  fm::SuiteOptions o;
  o.jobs = 1;
  return o;
}

void FastGroup(const std::string& work) {
  double t0 = Now();
  const fm::VerifyReport inv = fm::InvarianceSuite(SuiteDefaults());
  const double inv_seconds = Now() - t0;
  double s = 0.0;

  {
    Outcome o = AllWithin(inv,
                          {{"layerwise.kappa", 1e-6},
                           {"layerwise.kappa_tau", 1e-6},
                           {"layerwise.certificate", 1e-10}},
                          100, &s);
    if (s >= 120.0) o = {Verdict::kFail, o.detail + "; over the 2 min budget"};
    Line(1, "layer-wise invariance (kappa, kappa_tau)", o, s);
  }
  {
    Outcome o = AllWithin(inv, {{"neuronwise.rho", 1e-6}, {"neuronwise.certificate", 1e-10}},
                          100, &s);
    if (s >= 120.0) o = {Verdict::kFail, o.detail + "; over the 2 min budget"};
    Line(2, "neuron-wise invariance (rho per column)", o, s);
  }

  t0 = Now();
  const fm::VerifyReport orc = fm::OracleSuite(SuiteDefaults());
  const double orc_seconds = Now() - t0;
  {
    const Outcome o = AllWithin(
        orc, {{"scaling_law.fd_hessian", 1e-3}, {"scaling_law.raw_lambda_ratio", 1e-3}}, 50,
        &s);
    Line(3, "Hessian scaling law", o, s);
  }
  {
    const Outcome o =
        AllWithin(orc, {{"oracle.lambda_max", 1e-3}, {"oracle.trace", 1e-3}}, 30, &s);
    Line(4, "oracle equivalence (lambda_max, trace)", o, s);
  }
  {
    Outcome o = AllWithin(orc, {{"tikhonov.constancy", 1e-8}, {"tikhonov.closed_form", 1e-6}},
                          1, &s);
    // 20 weight draws per dataset are folded into each row.
    Line(5, "Tikhonov reduction", o, s);
  }
  {
    const Outcome o = AllWithin(
        orc, {{"derivatives.gradient_fd", 1e-5}, {"derivatives.hvp_fd", 1e-4}}, 100, &s);
    Line(6, "gradient and HVP vs finite differences", o, s);
  }
  {
    const Outcome o = AllWithin(
        orc, {{"contraction.bound", 1e-10}, {"contraction.orthogonal", 1e-12}}, 1000, &s);
    Line(7, "Frobenius contraction", o, s);
  }

  // Criterion 10, suites and the synthetic preset: rerun and compare bytes.
  t0 = Now();
  Outcome det{Verdict::kPass, ""};
  const std::string inv2 = fm::InvarianceSuite(SuiteDefaults()).Csv();
  fm::SuiteOptions parallel = SuiteDefaults();
  parallel.jobs = 4;  // scheduling must not reach the numbers
  const std::string orc2 = fm::OracleSuite(parallel).Csv();
  if (inv2 != inv.Csv()) det = {Verdict::kFail, "invariance CSV differs between runs; "};
  if (orc2 != orc.Csv()) det = {Verdict::kFail, det.detail + "oracle CSV differs between runs; "};
  const std::string a = work + "/smoke-a", b = work + "/smoke-b";
  fs::remove_all(a);
  fs::remove_all(b);
  fm::CommandOptions opts;
  opts.jobs = 1;
  opts.out_dir = a;
  fm::CmdExperiment("teacher-smoke", opts);
  opts.out_dir = b;
  opts.jobs = 3;
  fm::CmdExperiment("teacher-smoke", opts);
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (e.path().extension() != ".csv") continue;
    const std::string rel = fs::relative(e.path(), a).string();
    ++files;
    const std::string twin = b + "/" + rel;
    if (!fs::exists(twin) || fm::ReadFile(e.path().string()) != fm::ReadFile(twin))
      det = {Verdict::kFail, det.detail + "teacher-smoke " + rel + " differs; "};
  }
  det.detail += Fmt("verify suites x2 and teacher-smoke x2: %.0f CSV files compared byte-for-byte",
                    static_cast<double>(files + 2));
  Line(10, "determinism (suites, teacher-smoke)", det, Now() - t0);
  std::printf("# invariance suite %.1fs, oracle suite %.1fs\n", inv_seconds, orc_seconds);
}

std::vector<fm::CorrelationRow> ReadCorrelations(const std::string& dir) {
  fm::CommandOptions o;
  return fm::Correlate({dir}, o, nullptr);
}

void DeskGroup(const std::string& work) {
  const std::string dir = fm::FindMnistDir(fm::DefaultDataRoot());
  if (dir.empty()) {
    const Outcome skip{Verdict::kSkip, "MNIST not found (set FLATMETER_DATA)"};
    Line(8, "desk-scale correlation (appendix-c-desk)", skip, 0.0);
    Line(9, "correlation stable under reparam", skip, 0.0);
    Line(10, "determinism (appendix-c-desk cell)", skip, 0.0);
    return;
  }
  const std::string out = work + "/appendix-c-desk";
  const bool reuse = std::getenv("FLATMETER_ACCEPTANCE_REUSE") != nullptr;
  if (!reuse) fs::remove_all(out);
  fm::CommandOptions opts;
  opts.jobs = 1;
  opts.out_dir = out;
  const double t0 = Now();
  fm::CmdExperiment("appendix-c-desk", opts);
  const double seconds = Now() - t0;

  const std::vector<fm::RunRecord> records = fm::LoadRecords(out);
  std::size_t converged = 0;
  for (const fm::RunRecord& r : records) converged += r.converged && !r.diverged;
  const std::vector<fm::CorrelationRow> before = ReadCorrelations(out);
  const std::vector<fm::CorrelationRow> after = ReadCorrelations(out + "/reparam");

  {
    std::size_t strong = 0, hidden = 0;
    std::string coefs;
    for (const fm::CorrelationRow& r : before) {
      if (r.measure.rfind("kappa_tau.l", 0) != 0 || r.gen_error != "gen_err_mean") continue;
      ++hidden;
      strong += r.result.coefficient >= 0.5;
      coefs += Fmt(" %.3f", r.result.coefficient);
    }
    Outcome o{Verdict::kPass, ""};
    o.detail = Fmt("%.0f/%.0f runs converged (need 16); spearman kappa_tau vs gen error:",
                   static_cast<double>(converged), static_cast<double>(records.size())) +
               coefs + Fmt(" -> %.0f of %.0f layers >= 0.5 (need 3 of 4)",
                           static_cast<double>(strong), static_cast<double>(hidden));
    if (converged < 16 || hidden != 4 || strong < 3) o.verdict = Verdict::kFail;
    if (reuse) {
      o.detail += "; runtime not judged (reused run directory)";
    } else if (seconds >= 1800.0) {
      o.verdict = Verdict::kFail;
      o.detail += "; over the 30 min budget";
    }
    Line(8, "desk-scale correlation (appendix-c-desk)", o, seconds);
  }
  {
    double worst = 0.0;
    Outcome o{Verdict::kPass, ""};
    if (before.size() != after.size() || before.empty()) o.verdict = Verdict::kFail;
    for (std::size_t i = 0; i < std::min(before.size(), after.size()); ++i)
      worst = std::max(worst, std::abs(before[i].result.coefficient - after[i].result.coefficient));
    if (!(worst < 1e-6)) o.verdict = Verdict::kFail;
    o.detail = Fmt("max |coefficient change| %.3g over %.0f measures (bound 1e-6)", worst,
                   static_cast<double>(before.size()));
    Line(9, "correlation stable under reparam", o, 0.0);
  }
  {
    // Retrain and measure the first cell alone from scratch; its CSV row must
    // match the full run's byte for byte.
    const double t1 = Now();
    fm::ExperimentConfig c = fm::LoadRunConfig(out);
    c.grid.init_schemes.resize(1);
    c.grid.batch_sizes.resize(1);
    c.grid.learning_rates.resize(1);
    c.grid.repeats = 1;
    const std::string solo = work + "/appendix-c-desk-cell0";
    fs::remove_all(solo);
    fm::TrainRunDir(c, solo, 1);
    fm::CmdMeasure(solo, fm::CommandOptions{});
    auto row = [](const std::string& csv, std::size_t n) {
      std::size_t pos = 0;
      for (std::size_t i = 0; i < n; ++i) pos = csv.find('\n', pos) + 1;
      return csv.substr(pos, csv.find('\n', pos) - pos);
    };
    const std::string full = fm::ReadFile(out + "/records.csv");
    const std::string one = fm::ReadFile(solo + "/records.csv");
    const bool same = row(full, 0) == row(one, 0) && row(full, 1) == row(one, 1);
    Line(10, "determinism (appendix-c-desk cell)",
         {same ? Verdict::kPass : Verdict::kFail,
          same ? "cell 0 retrained from scratch reproduces its records.csv row"
               : "cell 0 row differs after retraining"},
         Now() - t1);
  }
}

}  // namespace

int main(int argc, char** argv) {
  const std::string group = argc > 1 ? argv[1] : "fast";
  const std::string work = argc > 2 ? argv[2] : (fs::current_path() / "acceptance-work").string();
  if (group != "fast" && group != "desk" && group != "all") {
    std::fprintf(stderr, "usage: %s [fast|desk|all] [work_dir]\n", argv[0]);
    return 2;
  }
  fm::SetLogLevel(fm::LogLevel::kQuiet);
  fs::create_directories(work);
  try {
    if (group != "desk") FastGroup(work);
    if (group != "fast") DeskGroup(work);
  } catch (const std::exception& e) {
    std::printf("[FAIL] aborted: %s\n", e.what());
    return 1;
  }
  std::printf("# %d passed, %d failed, %d skipped\n", g_passes, g_failures, g_skips);
  if (g_failures > 0) return 1;
  return g_passes == 0 && g_skips > 0 ? kSkip : 0;
}
