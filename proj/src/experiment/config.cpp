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

#include "experiment/config.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <set>
#include <string>

#include <json.hpp>

#include "common/error.hpp"
#include "common/hash.hpp"
#include "common/random.hpp"

namespace flatmeter {
namespace {

using nlohmann::json;

[[noreturn]] void Bad(const std::string& what) { Fail(Errc::kConfigError, what); }

// Object reader that rejects keys nobody asked for.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) Bad(path_ + " must be an object");
  }
  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) Bad("unknown key " + path_ + "." + key);
  }

  const json* Find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  template <class T>
  void Get(const std::string& key, T& out) {
    if (const json* v = Find(key)) {
      try {
        out = v->get<T>();
      } catch (const json::exception&) {
        Bad(path_ + "." + key + " has the wrong type");
      }
    }
  }

  void GetSize(const std::string& key, std::size_t& out) {
    if (const json* v = Find(key)) {
      if (!v->is_number_unsigned()) Bad(path_ + "." + key + " must be a non-negative integer");
      out = v->get<std::size_t>();
    }
  }

  void GetSeed(const std::string& key, std::uint64_t& out) {
    if (const json* v = Find(key)) {
      if (!v->is_number_unsigned()) Bad(path_ + "." + key + " must be a non-negative integer");
      out = v->get<std::uint64_t>();
    }
  }

  std::string Path(const std::string& key) const { return path_ + "." + key; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class T, class F>
T Parsed(const std::string& what, F&& parse) {
  try {
    return parse();
  } catch (const Error& e) {
    Bad(what + ": " + e.what());
  }
}

std::string DatasetKindName(DatasetConfig::Kind kind) {
  return kind == DatasetConfig::Kind::kMnist ? "mnist" : "synthetic";
}

}  // namespace

std::optional<TraceMode> ParseTraceModeSpec(const std::string& text) {
  if (text == "auto") return std::nullopt;
  if (text == "exact" || text == "exact_basis") return TraceMode::Exact();
  if (text == "hutchinson") return TraceMode::Hutchinson(64);
  if (text.rfind("hutchinson:", 0) == 0) {
    const std::string n = text.substr(11);
    char* end = nullptr;
    const unsigned long long probes = std::strtoull(n.c_str(), &end, 10);
    if (!n.empty() && *end == '\0' && probes >= 1) return TraceMode::Hutchinson(probes);
  }
  Bad("trace mode must be auto, exact or hutchinson[:probes], got '" + text + "'");
}

std::string TraceModeSpec(const std::optional<TraceMode>& mode) {
  if (!mode) return "auto";
  if (mode->kind == TraceMode::Kind::kExactBasis) return "exact";
  return "hutchinson:" + std::to_string(mode->probes);
}

ExperimentConfig ParseConfig(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    Bad(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  Section top(root, "config");
  top.Get("name", c.name);
  if (const json* d = top.Find("dataset")) {
    Section s(*d, "dataset");
    std::string kind = DatasetKindName(c.dataset.kind);
    s.Get("kind", kind);
    if (kind == "mnist")
      c.dataset.kind = DatasetConfig::Kind::kMnist;
    else if (kind == "synthetic")
      c.dataset.kind = DatasetConfig::Kind::kSynthetic;
    else
      Bad("dataset.kind must be mnist or synthetic");
    s.Get("root", c.dataset.root);
    s.GetSize("train", c.dataset.train_count);
    s.GetSize("test", c.dataset.test_count);
    s.GetSeed("seed", c.dataset.seed);
    s.GetSize("input_dim", c.dataset.input_dim);
    s.Get("hidden", c.dataset.hidden);
    s.GetSize("output_dim", c.dataset.output_dim);
  }
  top.Get("shape", c.shape);
  if (const json* v = top.Find("loss"))
    c.loss = Parsed<LossKind>("loss", [&] { return ParseLossKind(v->get<std::string>()); });
  if (const json* g = top.Find("grid")) {
    Section s(*g, "grid");
    if (const json* v = s.Find("init_schemes")) {
      c.grid.init_schemes.clear();
      for (const json& name : *v)
        c.grid.init_schemes.push_back(Parsed<InitScheme>(
            "grid.init_schemes", [&] { return ParseInitScheme(name.get<std::string>()); }));
    }
    s.Get("batch_sizes", c.grid.batch_sizes);
    s.Get("learning_rates", c.grid.learning_rates);
    std::string pairing = c.grid.paired ? "zip" : "product";
    s.Get("pairing", pairing);
    if (pairing != "zip" && pairing != "product") Bad("grid.pairing must be zip or product");
    c.grid.paired = pairing == "zip";
    s.GetSize("repeats", c.grid.repeats);
    s.GetSeed("base_seed", c.grid.base_seed);
    s.GetSize("max_epochs", c.grid.max_epochs);
    s.Get("train_error_threshold", c.grid.train_error_threshold);
    s.GetSize("patience", c.grid.patience);
  }
  if (const json* m = top.Find("measure")) {
    Section s(*m, "measure");
    s.Get("layers", c.measure.layers);
    std::string mode = TraceModeSpec(c.measure.trace_mode);
    s.Get("trace_mode", mode);
    c.measure.trace_mode = ParseTraceModeSpec(mode);
    s.GetSize("max_iterations", c.measure.spectral.max_iterations);
    s.Get("tolerance", c.measure.spectral.tolerance);
    s.GetSeed("seed", c.measure.spectral.seed);
    s.GetSeed("trace_seed", c.measure.trace_seed);
  }
  if (const json* r = top.Find("reparam")) {
    Section s(*r, "reparam");
    if (const json* v = s.Find("kind"))
      c.reparam.kind = Parsed<ReparamSpec::Kind>(
          "reparam.kind", [&] { return ParseReparamKind(v->get<std::string>()); });
    std::vector<double> range{c.reparam.factor_lo, c.reparam.factor_hi};
    s.Get("factor_range", range);
    if (range.size() != 2) Bad("reparam.factor_range must be [lo, hi]");
    c.reparam.factor_lo = range[0];
    c.reparam.factor_hi = range[1];
    s.GetSize("repetitions", c.reparam.repetitions);
    s.GetSeed("seed", c.reparam.seed);
  }
  if (const json* k = top.Find("correlate")) {
    Section s(*k, "correlate");
    if (const json* v = s.Find("stat"))
      c.correlate.stat =
          Parsed<StatKind>("correlate.stat", [&] { return ParseStatKind(v->get<std::string>()); });
    s.Get("measures", c.correlate.measures);
    s.Get("gen_error", c.correlate.gen_error);
  }
  Validate(c);
  return c;
}

std::string ConfigToJson(const ExperimentConfig& c) {
  json j;
  j["name"] = c.name;
  json& d = j["dataset"];
  d["kind"] = DatasetKindName(c.dataset.kind);
  if (c.dataset.kind == DatasetConfig::Kind::kMnist) {
    d["root"] = c.dataset.root;
    d["train"] = c.dataset.train_count;
    d["test"] = c.dataset.test_count;
  } else {
    d["train"] = c.dataset.train_count;
    d["test"] = c.dataset.test_count;
    d["seed"] = c.dataset.seed;
    d["input_dim"] = c.dataset.input_dim;
    d["hidden"] = c.dataset.hidden;
    d["output_dim"] = c.dataset.output_dim;
  }
  j["shape"] = c.shape;
  j["loss"] = std::string(LossKindName(c.loss));
  json& g = j["grid"];
  g["init_schemes"] = json::array();
  for (InitScheme s : c.grid.init_schemes) g["init_schemes"].push_back(InitSchemeName(s));
  g["batch_sizes"] = c.grid.batch_sizes;
  g["learning_rates"] = c.grid.learning_rates;
  g["pairing"] = c.grid.paired ? "zip" : "product";
  g["repeats"] = c.grid.repeats;
  g["base_seed"] = c.grid.base_seed;
  g["max_epochs"] = c.grid.max_epochs;
  g["train_error_threshold"] = c.grid.train_error_threshold;
  g["patience"] = c.grid.patience;
  json& m = j["measure"];
  m["layers"] = c.measure.layers;
  m["trace_mode"] = TraceModeSpec(c.measure.trace_mode);
  m["max_iterations"] = c.measure.spectral.max_iterations;
  m["tolerance"] = c.measure.spectral.tolerance;
  m["seed"] = c.measure.spectral.seed;
  m["trace_seed"] = c.measure.trace_seed;
  json& r = j["reparam"];
  r["kind"] = std::string(ReparamKindName(c.reparam.kind));
  r["factor_range"] = {c.reparam.factor_lo, c.reparam.factor_hi};
  r["repetitions"] = c.reparam.repetitions;
  r["seed"] = c.reparam.seed;
  json& k = j["correlate"];
  k["stat"] = std::string(StatKindName(c.correlate.stat));
  k["measures"] = c.correlate.measures;
  k["gen_error"] = c.correlate.gen_error;
  return j.dump(2) + "\n";
}

std::string ConfigHash(const ExperimentConfig& config) { return HexHash(ConfigToJson(config)); }

void Validate(const ExperimentConfig& c) {
  const auto need = [](bool ok, const std::string& what) {
    if (!ok) Bad(what);
  };
  need(c.shape.size() >= 2, "shape needs at least an input and an output width");
  for (std::size_t w : c.shape) need(w >= 1, "shape widths must be >= 1");
  if (c.dataset.kind == DatasetConfig::Kind::kSynthetic) {
    need(c.dataset.train_count >= 1 && c.dataset.test_count >= 1,
         "synthetic dataset needs train >= 1 and test >= 1");
    need(c.dataset.input_dim >= 1 && c.dataset.output_dim >= 1, "synthetic dimensions must be >= 1");
    need(c.shape.front() == c.dataset.input_dim && c.shape.back() == c.dataset.output_dim,
         "shape must start at dataset.input_dim and end at dataset.output_dim");
    need(c.loss == LossKind::kSquared, "synthetic teacher data is regression: use squared loss");
  } else {
    need(c.shape.front() == 784 && c.shape.back() == 10, "MNIST shape must run 784 -> ... -> 10");
    need(c.loss == LossKind::kSoftmaxCrossEntropy, "MNIST uses softmax_cross_entropy");
  }
  const GridConfig& g = c.grid;
  need(!g.init_schemes.empty() && !g.batch_sizes.empty() && !g.learning_rates.empty(),
       "grid must be non-empty");
  need(g.repeats >= 1, "grid.repeats must be >= 1");
  need(!g.paired || g.batch_sizes.size() == g.learning_rates.size(),
       "zip pairing needs as many learning rates as batch sizes");
  for (std::size_t b : g.batch_sizes) need(b >= 1, "batch sizes must be >= 1");
  for (double lr : g.learning_rates)
    need(std::isfinite(lr) && lr > 0.0, "learning rates must be finite and > 0");
  need(g.max_epochs >= 1, "grid.max_epochs must be >= 1");
  need(g.patience >= 1, "grid.patience must be >= 1");
  need(std::isfinite(g.train_error_threshold) && g.train_error_threshold >= 0.0,
       "grid.train_error_threshold must be finite and >= 0");
  for (std::size_t l : c.measure.layers)
    need(l >= 1 && l < c.shape.size(), "measure.layers are 1-based layer indices");
  need(c.measure.spectral.tolerance > 0.0 && c.measure.spectral.max_iterations >= 1,
       "measure.tolerance must be > 0 and max_iterations >= 1");
  need(c.reparam.factor_lo > 0.0 && c.reparam.factor_lo <= c.reparam.factor_hi &&
           std::isfinite(c.reparam.factor_hi),
       "reparam.factor_range must satisfy 0 < lo <= hi");
  need(c.reparam.repetitions >= 1, "reparam.repetitions must be >= 1");
  need(c.correlate.gen_error == "gen_err_mean" || c.correlate.gen_error == "gen_err_scaled",
       "correlate.gen_error must be gen_err_mean or gen_err_scaled");
}

ExperimentConfig Preset(const std::string& name) {
  ExperimentConfig c;
  c.name = name;
  if (name == "appendix-c-desk") {
    // MNIST at one sixth of the training set; batch sizes shrink by the same
    // factor and so do the learning rates, which keeps the full-scale
    // learning-rate / batch-size ratio of 2e-4.
    c.dataset.kind = DatasetConfig::Kind::kMnist;
    c.dataset.train_count = 10000;
    c.dataset.test_count = 2000;
    c.shape = {784, 50, 50, 50, 30, 10};
    c.loss = LossKind::kSoftmaxCrossEntropy;
    c.grid.init_schemes = {InitScheme::kXavierNormal};
    c.grid.batch_sizes = {167, 333, 667, 1333};
    c.grid.learning_rates.clear();
    for (std::size_t b : c.grid.batch_sizes)
      c.grid.learning_rates.push_back(2e-4 * static_cast<double>(b));
    c.grid.repeats = 6;
    c.grid.base_seed = 2020;
    c.grid.max_epochs = 200;
    c.grid.train_error_threshold = 0.07;
    c.grid.patience = 5;
    c.correlate.measures = {"kappa_tau.l1", "kappa_tau.l2", "kappa_tau.l3", "kappa_tau.l4"};
  } else if (name == "teacher-smoke") {
    c.dataset.kind = DatasetConfig::Kind::kSynthetic;
    c.dataset.seed = 11;
    c.dataset.input_dim = 4;
    c.dataset.hidden = {6};
    c.dataset.output_dim = 1;
    c.dataset.train_count = 64;
    c.dataset.test_count = 256;
    c.shape = {4, 12, 8, 1};
    c.loss = LossKind::kSquared;
    c.grid.init_schemes = {InitScheme::kXavierNormal, InitScheme::kKaimingUniform};
    c.grid.batch_sizes = {4, 8, 16, 32};
    c.grid.learning_rates = {0.005, 0.01, 0.02, 0.04};
    c.grid.repeats = 2;
    c.grid.base_seed = 7;
    c.grid.max_epochs = 400;
    c.grid.train_error_threshold = 0.01;
    c.grid.patience = 5;
  } else {
    Bad("unknown preset '" + name + "'");
  }
  Validate(c);
  return c;
}

std::vector<std::string> PresetNames() { return {"appendix-c-desk", "teacher-smoke"}; }

std::vector<GridCell> ExpandGrid(const ExperimentConfig& c) {
  Validate(c);
  std::vector<std::pair<std::size_t, double>> pairs;
  if (c.grid.paired) {
    for (std::size_t i = 0; i < c.grid.batch_sizes.size(); ++i)
      pairs.emplace_back(c.grid.batch_sizes[i], c.grid.learning_rates[i]);
  } else {
    for (std::size_t b : c.grid.batch_sizes)
      for (double lr : c.grid.learning_rates) pairs.emplace_back(b, lr);
  }
  std::vector<GridCell> cells;
  for (InitScheme scheme : c.grid.init_schemes) {
    for (const auto& [batch, lr] : pairs) {
      for (std::size_t rep = 0; rep < c.grid.repeats; ++rep) {
        GridCell cell;
        cell.index = cells.size();
        cell.repeat = rep;
        TrainConfig& t = cell.train;
        t.init_scheme = scheme;
        t.batch_size = batch;
        t.learning_rate = lr;
        t.max_epochs = c.grid.max_epochs;
        t.train_error_threshold = c.grid.train_error_threshold;
        t.patience = c.grid.patience;
        t.loss = c.loss;
        std::uint64_t lr_bits;
        static_assert(sizeof lr_bits == sizeof lr);
        std::memcpy(&lr_bits, &lr, sizeof lr);
        t.seed = DeriveSeed(c.grid.base_seed,
                            {HashBytes(InitSchemeName(scheme)), batch, lr_bits, rep});
        char id[128];
        std::snprintf(id, sizeof id, "c%03zu-%s-bs%zu-lr%g-r%zu", cell.index,
                      std::string(InitSchemeName(scheme)).c_str(), batch, lr, rep);
        cell.run_id = id;
        cells.push_back(std::move(cell));
      }
    }
  }
  return cells;
}

std::vector<std::string> ConfigWarnings(const ExperimentConfig& c) {
  std::vector<std::string> out;
  double lo = INFINITY, hi = 0.0;
  for (const GridCell& cell : ExpandGrid(c)) {
    const double ratio = cell.train.learning_rate / static_cast<double>(cell.train.batch_size);
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
  }
  if (hi > lo * (1.0 + 1e-9)) {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "learning_rate / batch_size varies across the grid (%.6g .. %.6g); "
                  "the protocol keeps it constant",
                  lo, hi);
    out.emplace_back(buf);
  }
  if (c.dataset.kind == DatasetConfig::Kind::kSynthetic) {
    for (std::size_t b : c.grid.batch_sizes)
      if (b > c.dataset.train_count) {
        out.emplace_back("batch size " + std::to_string(b) + " exceeds the training set");
        break;
      }
  }
  return out;
}

std::string CellHash(const ExperimentConfig& c, const GridCell& cell) {
  json j = json::parse(ConfigToJson(c));
  json key;
  key["dataset"] = j["dataset"];
  key["shape"] = j["shape"];
  key["loss"] = j["loss"];
  key["init_scheme"] = InitSchemeName(cell.train.init_scheme);
  key["batch_size"] = cell.train.batch_size;
  key["learning_rate"] = cell.train.learning_rate;
  key["seed"] = cell.train.seed;
  key["max_epochs"] = cell.train.max_epochs;
  key["train_error_threshold"] = cell.train.train_error_threshold;
  key["patience"] = cell.train.patience;
  return HexHash(key.dump());
}

DatasetBundle LoadDataset(const DatasetConfig& d) {
  if (d.kind == DatasetConfig::Kind::kSynthetic)
    return SyntheticTeacher(d.seed, d.input_dim, d.hidden, d.train_count, d.test_count,
                            d.output_dim);
  const std::string root = d.root.empty() ? DefaultDataRoot() : d.root;
  const std::string dir = FindMnistDir(root);
  Require(!dir.empty(), Errc::kIoError,
          "MNIST IDX files not found under '" + root +
              "' (set FLATMETER_DATA or dataset.root to a directory holding mnist/)");
  return LoadMnistBundle(dir, d.train_count, d.test_count);
}

std::vector<std::string> DefaultMeasureKeys(const ExperimentConfig& c) {
  if (!c.correlate.measures.empty()) return c.correlate.measures;
  std::vector<std::string> keys;
  const std::size_t hidden = c.shape.size() - 2;
  for (std::size_t l = 1; l <= std::max<std::size_t>(hidden, 1); ++l)
    keys.push_back("kappa_tau.l" + std::to_string(l));
  return keys;
}

MeasureOptions ToMeasureOptions(const MeasureConfig& m) {
  MeasureOptions o;
  o.spectral = m.spectral;
  o.trace_mode = m.trace_mode;
  o.trace_seed = m.trace_seed;
  for (std::size_t l : m.layers) o.layers.push_back(l - 1);
  return o;
}

}  // namespace flatmeter
