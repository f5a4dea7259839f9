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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "common/error.hpp"
#include "common/io.hpp"
#include "common/reduce.hpp"

namespace flatmeter {
namespace {

using Json = nlohmann::ordered_json;

// JSON has no NaN/inf; those travel as strings.
Json Num(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

double FromNum(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  const std::string s = j.get<std::string>();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  Fail(Errc::kCorruptFile, "bad number '" + s + "'");
}

std::string LayerKey(const char* name, std::size_t layer) {
  return std::string(name) + ".l" + std::to_string(layer + 1);
}

double Pearson(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  const double mx = PairwiseSum(x) / n;
  const double my = PairwiseSum(y) / n;
  std::vector<double> sxy(x.size()), sxx(x.size()), syy(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy[i] = dx * dy;
    sxx[i] = dx * dx;
    syy[i] = dy * dy;
  }
  const double vx = PairwiseSum(sxx), vy = PairwiseSum(syy);
  Require(vx > 0.0 && vy > 0.0, Errc::kDegenerateVariance,
          "correlation is undefined for a constant variable");
  return std::clamp(PairwiseSum(sxy) / std::sqrt(vx * vy), -1.0, 1.0);
}

std::string Escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string Fmt(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

}  // namespace

std::string_view GenErrModeName(GenErrMode mode) {
  return mode == GenErrMode::kMeanDifference ? "mean_difference" : "scaled_sum";
}

double GeneralizationErrorFromSums(double train_sum, std::size_t train_count, double test_sum,
                                   std::size_t test_count, GenErrMode mode) {
  Require(train_count >= 1 && test_count >= 1, Errc::kInvalidArgument,
          "train and test sets must be nonempty");
  if (mode == GenErrMode::kMeanDifference)
    return test_sum / static_cast<double>(test_count) -
           train_sum / static_cast<double>(train_count);
  return static_cast<double>(train_count) / static_cast<double>(test_count) * test_sum - train_sum;
}

double GeneralizationError(const MlpNetwork& net, const LabeledSet& train, const LabeledSet& test,
                           LossKind loss, GenErrMode mode) {
  return GeneralizationErrorFromSums(SummedLoss(net, train, loss), train.size(),
                                     SummedLoss(net, test, loss), test.size(), mode);
}

std::string_view StatKindName(StatKind kind) {
  return kind == StatKind::kPearson ? "pearson" : "spearman";
}

StatKind ParseStatKind(std::string_view name) {
  if (name == "pearson") return StatKind::kPearson;
  if (name == "spearman") return StatKind::kSpearman;
  Fail(Errc::kInvalidArgument, "unknown statistic '" + std::string(name) + "'");
}

std::vector<double> AverageRanks(std::span<const double> xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

CorrelationResult Correlation(std::span<const double> xs, std::span<const double> ys,
                              StatKind kind, std::string key) {
  Require(xs.size() == ys.size(), Errc::kDimensionMismatch, "xs and ys differ in length");
  Require(xs.size() >= 3, Errc::kTooFewRuns, "correlation needs at least 3 pairs");
  for (std::size_t i = 0; i < xs.size(); ++i)
    Require(std::isfinite(xs[i]) && std::isfinite(ys[i]), Errc::kNonFinite,
            "correlation inputs must be finite");
  CorrelationResult r;
  r.key = std::move(key);
  r.kind = kind;
  r.count = xs.size();
  if (kind == StatKind::kPearson) {
    r.coefficient = Pearson(xs, ys);
  } else {
    const std::vector<double> rx = AverageRanks(xs), ry = AverageRanks(ys);
    r.coefficient = Pearson(rx, ry);
  }
  return r;
}

std::string RunRecord::SetupLabel() const {
  return init_scheme + "/bs" + std::to_string(batch_size);
}

std::optional<double> RecordValue(const RunRecord& r, std::string_view key) {
  if (key == "train_error") return r.train_error;
  if (key == "test_error") return r.test_error;
  if (key == "gen_err_mean") return r.gen_err_mean;
  if (key == "gen_err_scaled") return r.gen_err_scaled;
  if (key == "learning_rate") return r.learning_rate;
  if (key == "batch_size") return static_cast<double>(r.batch_size);
  if (!r.report) return std::nullopt;
  for (const auto& [k, v] : ToKeyValues(*r.report))
    if (k == key) return v;
  return std::nullopt;
}

std::vector<std::string> CsvColumns(std::size_t num_layers) {
  std::vector<std::string> cols = {"run_id",       "seed",         "init_scheme",
                                   "batch_size",   "learning_rate", "converged",
                                   "train_error",  "test_error",    "gen_err_mean",
                                   "gen_err_scaled"};
  for (const char* name : {"kappa", "kappa_tau", "rho", "rho_sigma"})
    for (std::size_t l = 0; l < num_layers; ++l) cols.push_back(LayerKey(name, l));
  for (const char* name :
       {"kappa_max", "kappa_sum", "kappa_tau_max", "kappa_tau_sum", "rho_max", "rho_sum"})
    cols.emplace_back(name);
  cols.emplace_back("reparam_id");
  return cols;
}

std::string RecordsCsv(std::span<const RunRecord> records, std::size_t num_layers) {
  const std::vector<std::string> cols = CsvColumns(num_layers);
  std::string out;
  for (std::size_t c = 0; c < cols.size(); ++c) out += (c ? "," : "") + cols[c];
  out += "\n";
  for (const RunRecord& r : records) {
    out += r.run_id + "," + std::to_string(r.seed) + "," + r.init_scheme + "," +
           std::to_string(r.batch_size) + "," + FormatDouble(r.learning_rate) + "," +
           (r.converged ? "true" : "false");
    for (std::size_t c = 6; c + 1 < cols.size(); ++c) {
      out += ",";
      if (auto v = RecordValue(r, cols[c])) out += FormatDouble(*v);
    }
    out += "," + r.reparam_id + "\n";
  }
  return out;
}

std::string ReportToJson(const FlatnessReport& report) {
  Json j;
  Json layers = Json::array();
  for (const LayerMeasures& m : report.layers) {
    Json rho = Json::array();
    for (double v : m.rho_neuron) rho.push_back(Num(v));
    layers.push_back({
        {"layer", m.layer},
        {"weight_norm_sq", Num(m.weight_norm_sq)},
        {"eig",
         {{"eigenvalue", Num(m.eig.eigenvalue)},
          {"residual", Num(m.eig.residual)},
          {"relative_residual", Num(m.eig.relative_residual)},
          {"iterations", m.eig.iterations},
          {"converged", m.eig.converged},
          {"min_ritz", Num(m.eig.min_ritz)},
          {"method", m.eig.method == SpectralMethod::kPower ? "power" : "lanczos"}}},
        {"trace",
         {{"trace", Num(m.trace.trace)},
          {"standard_error", Num(m.trace.standard_error)},
          {"mode", std::string(TraceModeName(m.trace.mode))},
          {"probes", m.trace.mode.probes}}},
        {"kappa", Num(m.kappa)},
        {"kappa_tau", Num(m.kappa_tau)},
        {"rho_neuron", std::move(rho)},
        {"rho", Num(m.rho)},
        {"rho_sigma", Num(m.rho_sigma)},
        {"psd", m.psd},
    });
  }
  j["layers"] = std::move(layers);
  j["kappa_max"] = Num(report.kappa_max);
  j["kappa_sum"] = Num(report.kappa_sum);
  j["kappa_tau_max"] = Num(report.kappa_tau_max);
  j["kappa_tau_sum"] = Num(report.kappa_tau_sum);
  j["rho_max"] = Num(report.rho_max);
  j["rho_sum"] = Num(report.rho_sum);
  j["psd"] = report.psd;
  return j.dump();
}

namespace {

FlatnessReport ReportFrom(const nlohmann::json& j) {
  FlatnessReport r;
  for (const auto& l : j.at("layers")) {
    LayerMeasures m;
    m.layer = l.at("layer").get<std::size_t>();
    m.weight_norm_sq = FromNum(l.at("weight_norm_sq"));
    const auto& e = l.at("eig");
    m.eig.eigenvalue = FromNum(e.at("eigenvalue"));
    m.eig.residual = FromNum(e.at("residual"));
    m.eig.relative_residual = FromNum(e.at("relative_residual"));
    m.eig.iterations = e.at("iterations").get<std::size_t>();
    m.eig.converged = e.at("converged").get<bool>();
    m.eig.min_ritz = FromNum(e.at("min_ritz"));
    m.eig.method = e.at("method").get<std::string>() == "power" ? SpectralMethod::kPower
                                                                : SpectralMethod::kLanczos;
    const auto& t = l.at("trace");
    m.trace.trace = FromNum(t.at("trace"));
    m.trace.standard_error = FromNum(t.at("standard_error"));
    m.trace.mode = t.at("mode").get<std::string>() == "hutchinson"
                       ? TraceMode::Hutchinson(t.at("probes").get<std::size_t>())
                       : TraceMode::Exact();
    m.kappa = FromNum(l.at("kappa"));
    m.kappa_tau = FromNum(l.at("kappa_tau"));
    for (const auto& v : l.at("rho_neuron")) m.rho_neuron.push_back(FromNum(v));
    m.rho = FromNum(l.at("rho"));
    m.rho_sigma = FromNum(l.at("rho_sigma"));
    m.psd = l.at("psd").get<bool>();
    r.layers.push_back(std::move(m));
  }
  r.kappa_max = FromNum(j.at("kappa_max"));
  r.kappa_sum = FromNum(j.at("kappa_sum"));
  r.kappa_tau_max = FromNum(j.at("kappa_tau_max"));
  r.kappa_tau_sum = FromNum(j.at("kappa_tau_sum"));
  r.rho_max = FromNum(j.at("rho_max"));
  r.rho_sum = FromNum(j.at("rho_sum"));
  r.psd = j.at("psd").get<bool>();
  return r;
}

}  // namespace

FlatnessReport ReportFromJson(const std::string& text) {
  try {
    return ReportFrom(nlohmann::json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    Fail(Errc::kCorruptFile, std::string("malformed flatness report: ") + e.what());
  }
}

std::string RecordToJson(const RunRecord& r) {
  Json j;
  j["run_id"] = r.run_id;
  j["seed"] = r.seed;
  j["init_scheme"] = r.init_scheme;
  j["batch_size"] = r.batch_size;
  j["learning_rate"] = Num(r.learning_rate);
  j["converged"] = r.converged;
  j["diverged"] = r.diverged;
  j["epochs"] = r.epochs;
  j["train_error"] = Num(r.train_error);
  j["test_error"] = Num(r.test_error);
  j["gen_err_mean"] = Num(r.gen_err_mean);
  j["gen_err_scaled"] = Num(r.gen_err_scaled);
  j["report"] = r.report ? Json::parse(ReportToJson(*r.report)) : Json(nullptr);
  j["reparam_id"] = r.reparam_id;
  return j.dump(1) + "\n";
}

RunRecord RecordFromJson(const std::string& text) {
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    RunRecord r;
    r.run_id = j.at("run_id").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.init_scheme = j.at("init_scheme").get<std::string>();
    r.batch_size = j.at("batch_size").get<std::size_t>();
    r.learning_rate = FromNum(j.at("learning_rate"));
    r.converged = j.at("converged").get<bool>();
    r.diverged = j.at("diverged").get<bool>();
    r.epochs = j.at("epochs").get<std::size_t>();
    r.train_error = FromNum(j.at("train_error"));
    r.test_error = FromNum(j.at("test_error"));
    r.gen_err_mean = FromNum(j.at("gen_err_mean"));
    r.gen_err_scaled = FromNum(j.at("gen_err_scaled"));
    if (!j.at("report").is_null()) r.report = ReportFrom(j.at("report"));
    r.reparam_id = j.at("reparam_id").get<std::string>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    Fail(Errc::kCorruptFile, std::string("malformed run record: ") + e.what());
  }
}

std::string ScatterSvg(const std::vector<ScatterSeries>& series, const std::string& title,
                       const std::string& x_label, const std::string& y_label) {
  constexpr double kW = 720, kH = 480, kLeft = 80, kRight = 180, kTop = 40, kBottom = 60;
  static const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                   "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      if (!(x > 0.0) || !std::isfinite(x) || !std::isfinite(y)) continue;
      xmin = std::min(xmin, std::log10(x));
      xmax = std::max(xmax, std::log10(x));
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  }
  if (!std::isfinite(xmin)) xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;
  xmin = std::floor(xmin);
  xmax = std::max(std::ceil(xmax), xmin + 1.0);
  if (ymax <= ymin) ymin -= 0.5, ymax += 0.5;
  const double pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;
  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  auto px = [&](double lx) { return kLeft + (lx - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return kTop + (ymax - y) / (ymax - ymin) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << kLeft + pw / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
    << Escape(title) << "</text>\n";
  o << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double d = xmin; d <= xmax + 1e-9; d += 1.0) {
    o << "<line x1=\"" << Fmt("%.2f", px(d)) << "\" y1=\"" << kTop + ph << "\" x2=\""
      << Fmt("%.2f", px(d)) << "\" y2=\"" << kTop + ph + 5 << "\" stroke=\"black\"/>\n";
    o << "<text x=\"" << Fmt("%.2f", px(d)) << "\" y=\"" << kTop + ph + 18
      << "\" text-anchor=\"middle\">1e" << static_cast<int>(d) << "</text>\n";
  }
  for (int i = 0; i <= 4; ++i) {
    const double y = ymin + (ymax - ymin) * i / 4.0;
    o << "<line x1=\"" << kLeft - 5 << "\" y1=\"" << Fmt("%.2f", py(y)) << "\" x2=\"" << kLeft
      << "\" y2=\"" << Fmt("%.2f", py(y)) << "\" stroke=\"black\"/>\n";
    o << "<text x=\"" << kLeft - 8 << "\" y=\"" << Fmt("%.2f", py(y) + 4)
      << "\" text-anchor=\"end\">" << Fmt("%.3g", y) << "</text>\n";
  }
  o << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kH - 15 << "\" text-anchor=\"middle\">"
    << Escape(x_label) << " (log scale)</text>\n";
  o << "<text transform=\"translate(18," << kTop + ph / 2
    << ") rotate(-90)\" text-anchor=\"middle\">" << Escape(y_label) << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % 10];
    for (const auto& [x, y] : series[s].points) {
      if (!(x > 0.0) || !std::isfinite(x) || !std::isfinite(y)) continue;
      o << "<circle cx=\"" << Fmt("%.2f", px(std::log10(x))) << "\" cy=\"" << Fmt("%.2f", py(y))
        << "\" r=\"4\" fill=\"" << color << "\" fill-opacity=\"0.8\"/>\n";
    }
    const double ly = kTop + 10 + 18.0 * static_cast<double>(s);
    o << "<circle cx=\"" << kW - kRight + 16 << "\" cy=\"" << ly << "\" r=\"5\" fill=\"" << color
      << "\"/>\n<text x=\"" << kW - kRight + 26 << "\" y=\"" << ly + 4 << "\">"
      << Escape(series[s].label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

EmitResult Emit(std::span<const RunRecord> records, const std::string& out_dir,
                std::size_t num_layers,
                const std::vector<std::pair<std::string, std::string>>& plots) {
  Require(!records.empty(), Errc::kInvalidArgument, "nothing to emit");
  EmitResult result;
  result.csv_path = out_dir + "/records.csv";
  WriteFileAtomic(result.csv_path, RecordsCsv(records, num_layers));
  for (const auto& [measure, gen] : plots) {
    std::map<std::string, ScatterSeries> by_setup;
    for (const RunRecord& r : records) {
      if (!r.converged) continue;
      const auto x = RecordValue(r, measure), y = RecordValue(r, gen);
      if (!x || !y) continue;
      auto& s = by_setup[r.SetupLabel()];
      s.label = r.SetupLabel();
      s.points.emplace_back(*x, *y);
    }
    std::vector<ScatterSeries> series;
    for (auto& [label, s] : by_setup) series.push_back(std::move(s));
    const std::string path = out_dir + "/plots/" + measure + "__" + gen + ".svg";
    WriteFileAtomic(path, ScatterSvg(series, measure + " vs " + gen, measure, gen));
    result.svg_paths.push_back(path);
  }
  return result;
}

}  // namespace flatmeter
