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

#include "expstats/expstats.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "common/io.hpp"
#include "common/random.hpp"
#include "support/fixtures.hpp"

namespace flatmeter {
namespace {

using testing::CaughtCode;
using testing::RidgeData;
using testing::RidgeNet;

// Reference statistics computed the textbook way in long double.
double ReferencePearson(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  long double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  long double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

// rank = (#smaller) + (#equal + 1) / 2
std::vector<double> ReferenceRanks(const std::vector<double>& x) {
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double less = 0, equal = 0;
    for (double v : x) {
      less += v < x[i];
      equal += v == x[i];
    }
    r[i] = less + (equal + 1.0) / 2.0;
  }
  return r;
}

double Coef(const std::vector<double>& x, const std::vector<double>& y, StatKind kind) {
  return Correlation(x, y, kind).coefficient;
}

RunRecord MakeRecord(int i, bool converged) {
  RunRecord r;
  r.run_id = "run" + std::to_string(i);
  r.seed = static_cast<std::uint64_t>(i);
  r.init_scheme = i % 2 ? "xavier_normal" : "uniform_pm01";
  r.batch_size = 16;
  r.learning_rate = 0.1;
  r.converged = converged;
  r.diverged = !converged;
  r.train_error = converged ? 0.01 * i : std::numeric_limits<double>::infinity();
  r.test_error = 0.02 * i;
  r.gen_err_mean = 0.01 * i + 0.001;
  r.gen_err_scaled = 0.5 * i;
  r.report = FullReport(RidgeNet(), RidgeData(), LossKind::kSquared);
  return r;
}

TEST(GeneralizationErrorTest, Formulas) {
  EXPECT_EQ(GeneralizationError(RidgeNet(), RidgeData(), RidgeData(), LossKind::kSquared,
                                GenErrMode::kMeanDifference),
            0.0);
  EXPECT_EQ(GeneralizationErrorFromSums(400.0, 50000, 100.0, 10000, GenErrMode::kScaledSum),
            100.0);
  EXPECT_NEAR(GeneralizationErrorFromSums(0.3 * 50, 50, 0.5 * 10, 10, GenErrMode::kMeanDifference),
              0.2, 1e-15);
}

TEST(CorrelationTest, HandExamples) {
  const std::vector<double> x{1, 2, 3};
  EXPECT_DOUBLE_EQ(Coef(x, {1, 2, 3}, StatKind::kSpearman), 1.0);
  EXPECT_DOUBLE_EQ(Coef(x, {1, 2, 3}, StatKind::kPearson), 1.0);
  EXPECT_DOUBLE_EQ(Coef(x, {3, 2, 1}, StatKind::kSpearman), -1.0);
  EXPECT_NEAR(Coef(x, {1, 3, 2}, StatKind::kPearson), 0.5, 1e-15);
}

TEST(CorrelationTest, Errors) {
  EXPECT_EQ(CaughtCode([] { Correlation(std::vector<double>{1, 2}, std::vector<double>{1, 2},
                                        StatKind::kPearson); }),
            Errc::kTooFewRuns);
  EXPECT_EQ(CaughtCode([] { Correlation(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3},
                                        StatKind::kSpearman); }),
            Errc::kDegenerateVariance);
  EXPECT_EQ(CaughtCode([] { Correlation(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2},
                                        StatKind::kSpearman); }),
            Errc::kDimensionMismatch);
  EXPECT_EQ(CaughtCode([] { Correlation(std::vector<double>{1, NAN, 3},
                                        std::vector<double>{1, 2, 3}, StatKind::kSpearman); }),
            Errc::kNonFinite);
  EXPECT_EQ(ParseStatKind(StatKindName(StatKind::kPearson)), StatKind::kPearson);
}

TEST(CorrelationTest, MatchesReferenceOnRandomData) {
  Rng rng(4, 4);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(25), y(25);
    for (std::size_t i = 0; i < 25; ++i) {
      x[i] = std::floor(rng.Uniform(0, 8));  // ties on purpose
      y[i] = x[i] + rng.Normal();
    }
    EXPECT_NEAR(Coef(x, y, StatKind::kPearson), ReferencePearson(x, y), 1e-12);
    EXPECT_EQ(AverageRanks(x), ReferenceRanks(x));
    EXPECT_NEAR(Coef(x, y, StatKind::kSpearman),
                ReferencePearson(ReferenceRanks(x), ReferenceRanks(y)), 1e-12);
  }
}

TEST(CorrelationTest, SpearmanInvariantUnderMonotoneMaps) {
  Rng rng(6, 6);
  std::vector<double> x(30), y(30), ex(30), cy(30);
  for (std::size_t i = 0; i < 30; ++i) {
    x[i] = rng.Normal();
    y[i] = 0.5 * x[i] + rng.Normal();
    ex[i] = std::exp(x[i]);
    cy[i] = y[i] * y[i] * y[i];
  }
  const double base = Coef(x, y, StatKind::kSpearman);
  EXPECT_EQ(Coef(ex, y, StatKind::kSpearman), base);
  EXPECT_EQ(Coef(x, cy, StatKind::kSpearman), base);
  EXPECT_DOUBLE_EQ(Coef(x, x, StatKind::kSpearman), 1.0);
  EXPECT_DOUBLE_EQ(Coef(x, x, StatKind::kPearson), 1.0);
}

TEST(CsvTest, SchemaAndRows) {
  const std::vector<RunRecord> records{MakeRecord(1, true), MakeRecord(2, false)};
  const std::string csv = RecordsCsv(records, 1);
  const std::string header =
      "run_id,seed,init_scheme,batch_size,learning_rate,converged,train_error,test_error,"
      "gen_err_mean,gen_err_scaled,kappa.l1,kappa_tau.l1,rho.l1,rho_sigma.l1,kappa_max,kappa_sum,"
      "kappa_tau_max,kappa_tau_sum,rho_max,rho_sum,reparam_id";
  ASSERT_EQ(csv.substr(0, header.size() + 1), header + "\n");
  std::size_t lines = 0;
  for (char c : csv) lines += c == '\n';
  EXPECT_EQ(lines, 3u);
  EXPECT_NE(csv.find("run2,2,uniform_pm01,16,0.10000000000000001,false,inf"), std::string::npos);
  EXPECT_EQ(csv, RecordsCsv(records, 1));
  EXPECT_EQ(CsvColumns(4).size(), 11u + 4u * 4u + 6u);
}

TEST(CsvTest, RecordJsonRoundTrip) {
  const RunRecord r = MakeRecord(3, false);
  const RunRecord back = RecordFromJson(RecordToJson(r));
  EXPECT_EQ(back.run_id, r.run_id);
  EXPECT_TRUE(std::isinf(back.train_error));
  ASSERT_TRUE(back.report.has_value());
  EXPECT_EQ(*back.report, *r.report);
  EXPECT_EQ(RecordsCsv(std::vector<RunRecord>{back}, 1), RecordsCsv(std::vector<RunRecord>{r}, 1));
  EXPECT_EQ(RecordValue(r, "kappa.l1"), r.report->kappa_max);
  EXPECT_FALSE(RecordValue(r, "kappa.l9").has_value());
}

TEST(EmitTest, WritesCsvAndPlotsFromConvergedRecords) {
  const std::string dir =
      (std::filesystem::temp_directory_path() / "flatmeter_emit_test").string();
  std::filesystem::remove_all(dir);
  std::vector<RunRecord> records;
  for (int i = 1; i <= 4; ++i) records.push_back(MakeRecord(i, i != 4));
  const EmitResult out = Emit(records, dir, 1, {{"kappa_tau.l1", "gen_err_mean"}});
  const std::string csv = ReadFile(out.csv_path);
  EXPECT_NE(csv.find("run4"), std::string::npos);
  ASSERT_EQ(out.svg_paths.size(), 1u);
  const std::string svg = ReadFile(out.svg_paths[0]);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  std::size_t circles = 0;  // data markers; legend markers use r="5"
  for (std::size_t p = svg.find("r=\"4\""); p != std::string::npos; p = svg.find("r=\"4\"", p + 1))
    ++circles;
  EXPECT_EQ(circles, 3u);  // the diverged run is left out
  const EmitResult again = Emit(records, dir, 1, {{"kappa_tau.l1", "gen_err_mean"}});
  EXPECT_EQ(ReadFile(again.csv_path), csv);
  EXPECT_EQ(CaughtCode([&] { Emit({}, dir, 1, {}); }), Errc::kInvalidArgument);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace flatmeter
