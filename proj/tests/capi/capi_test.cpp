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

// Exercises the library strictly through its C interface.

#include "flatmeter/flatmeter.h"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

namespace {

namespace fs = std::filesystem;

struct Network {
  flm_network* p = nullptr;
  ~Network() { flm_network_free(p); }
};
struct Dataset {
  flm_dataset* p = nullptr;
  ~Dataset() { flm_dataset_free(p); }
};
struct Report {
  flm_report* p = nullptr;
  ~Report() { flm_report_free(p); }
};
struct String {
  char* p = nullptr;
  ~String() { flm_string_free(p); }
};

// w = [[3, 4]], samples (1,0) and (0,1), targets 0: H = I, kappa = 25.
void Ridge(Network& net, Dataset& data) {
  const size_t shape[] = {2, 1};
  const double w[] = {3.0, 4.0}, b[] = {0.0};
  ASSERT_EQ(flm_network_create(shape, 2, w, b, &net.p), FLM_OK) << flm_last_error();
  const double x[] = {1.0, 0.0, 0.0, 1.0}, y[] = {0.0, 0.0};
  ASSERT_EQ(flm_dataset_regression(x, y, 2, 2, 1, &data.p), FLM_OK) << flm_last_error();
}

TEST(CApiTest, RidgeMeasures) {
  Network net;
  Dataset data;
  Ridge(net, data);
  EXPECT_EQ(flm_network_num_layers(net.p), 1u);
  EXPECT_EQ(flm_network_num_params(net.p), 3u);
  EXPECT_EQ(flm_dataset_size(data.p), 2u);
  double err = 0.0;
  ASSERT_EQ(flm_empirical_error(net.p, data.p, FLM_LOSS_SQUARED, &err), FLM_OK);
  EXPECT_NEAR(err, 12.5, 1e-12);  // (9 + 16) / 2

  Report report;
  ASSERT_EQ(flm_measure(net.p, data.p, FLM_LOSS_SQUARED, nullptr, 0, "exact", &report.p), FLM_OK)
      << flm_last_error();
  double kappa = 0.0, kappa_tau = 0.0;
  ASSERT_EQ(flm_report_value(report.p, "kappa.l1", &kappa), FLM_OK);
  ASSERT_EQ(flm_report_value(report.p, "kappa_tau.l1", &kappa_tau), FLM_OK);
  EXPECT_NEAR(kappa, 25.0, 1e-9);
  EXPECT_NEAR(kappa_tau, 50.0, 1e-9);
  double missing = 0.0;
  EXPECT_EQ(flm_report_value(report.p, "kappa.l9", &missing), FLM_MISSING_LAYER);
  String json;
  ASSERT_EQ(flm_report_json(report.p, &json.p), FLM_OK);
  EXPECT_NE(std::string(json.p).find("kappa_tau"), std::string::npos);
}

TEST(CApiTest, ErrorsCarryStatusAndMessage) {
  Network net;
  Dataset data;
  Ridge(net, data);
  Report report;
  const size_t bad_layer[] = {2};
  EXPECT_EQ(flm_measure(net.p, data.p, FLM_LOSS_SQUARED, bad_layer, 1, nullptr, &report.p),
            FLM_MISSING_LAYER);
  EXPECT_EQ(report.p, nullptr);
  EXPECT_NE(std::string(flm_last_error()), "");
  EXPECT_STREQ(flm_status_string(FLM_MISSING_LAYER), "MissingLayer");
  EXPECT_EQ(flm_measure(net.p, data.p, FLM_LOSS_SQUARED, nullptr, 0, "bogus", &report.p),
            FLM_CONFIG_ERROR);
  EXPECT_EQ(flm_measure(nullptr, data.p, FLM_LOSS_SQUARED, nullptr, 0, nullptr, &report.p),
            FLM_INVALID_ARGUMENT);
  flm_network* none = nullptr;
  EXPECT_EQ(flm_network_load("/nonexistent/checkpoint.json", &none), FLM_MISSING_CHECKPOINT);
  EXPECT_STREQ(flm_status_string(FLM_OK), "ok");

  // A success clears the previous message.
  double err = 0.0;
  ASSERT_EQ(flm_empirical_error(net.p, data.p, FLM_LOSS_SQUARED, &err), FLM_OK);
  EXPECT_STREQ(flm_last_error(), "");
}

TEST(CApiTest, CheckpointRoundTrip) {
  Network net;
  Dataset data;
  Ridge(net, data);
  const std::string path = (fs::temp_directory_path() / "flatmeter-capi-ckpt.json").string();
  ASSERT_EQ(flm_network_save(net.p, path.c_str()), FLM_OK) << flm_last_error();
  Network back;
  ASSERT_EQ(flm_network_load(path.c_str(), &back.p), FLM_OK) << flm_last_error();
  double a = 0.0, b = 0.0;
  flm_empirical_error(net.p, data.p, FLM_LOSS_SQUARED, &a);
  flm_empirical_error(back.p, data.p, FLM_LOSS_SQUARED, &b);
  EXPECT_EQ(a, b);
  fs::remove(path);
}

TEST(CApiTest, ExperimentAndVerifyCommands) {
  flm_set_log_level(FLM_LOG_QUIET);
  const fs::path dir = fs::temp_directory_path() / "flatmeter-capi-run";
  fs::remove_all(dir);
  const std::string out = dir.string();
  flm_options o;
  flm_options_init(&o);
  EXPECT_EQ(o.struct_size, sizeof(flm_options));
  o.out_dir = out.c_str();
  String summary;
  ASSERT_EQ(flm_cmd_experiment("teacher-smoke", &o, &summary.p), FLM_OK) << flm_last_error();
  EXPECT_NE(std::string(summary.p).find("max_correlation_change"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "summary.json"));

  const char* dirs[] = {out.c_str()};
  flm_options c;
  flm_options_init(&c);
  c.stat = "pearson";
  String corr;
  ASSERT_EQ(flm_cmd_correlate(dirs, 1, &c, &corr.p), FLM_OK) << flm_last_error();
  EXPECT_NE(std::string(corr.p).find("pearson"), std::string::npos);

  EXPECT_EQ(flm_cmd_experiment("no-such-preset", &c, nullptr), FLM_CONFIG_ERROR);
  flm_options uninit{};
  EXPECT_EQ(flm_cmd_measure(out.c_str(), &uninit, nullptr), FLM_INVALID_ARGUMENT);

  int passed = -1;
  EXPECT_EQ(flm_cmd_verify("nonsense", &c, &passed, nullptr), FLM_INVALID_ARGUMENT);
  fs::remove_all(dir);
}

TEST(CApiTest, PresetList) {
  String names;
  ASSERT_EQ(flm_preset_names(&names.p), FLM_OK);
  EXPECT_NE(std::string(names.p).find("appendix-c-desk\n"), std::string::npos);
  EXPECT_NE(std::string(names.p).find("teacher-smoke\n"), std::string::npos);
  flm_string_free(nullptr);
  flm_network_free(nullptr);
}

}  // namespace
