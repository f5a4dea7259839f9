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

#include "oracle/suites.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>

#include "common/error.hpp"
#include "common/io.hpp"
#include "common/log.hpp"
#include "common/random.hpp"
#include "experiment/pool.hpp"
#include "flatness/flatness.hpp"
#include "net/loss_surface.hpp"
#include "oracle/oracle.hpp"
#include "reparam/reparam.hpp"

namespace flatmeter {
namespace {

// Bounds each check is held to.
constexpr double kInvarianceTol = 1e-6;
constexpr double kCertificateTol = 1e-10;
constexpr double kScalingTol = 1e-3;
constexpr double kSpectralOracleTol = 1e-3;
constexpr double kTikhonovConstancyTol = 1e-8;
constexpr double kTikhonovClosedFormTol = 1e-6;
constexpr double kGradientTol = 1e-5;
constexpr double kHvpTol = 1e-4;
constexpr double kContractionSlack = 1e-10;
constexpr double kOrthogonalTol = 1e-12;

// Gradient differences use a smaller step than the Hessian oracle: the loss
// is smooth away from kinks and the smaller step keeps every probe inside
// the fixture's kink margin.
constexpr double kGradientFdStep = 1e-6;

double RelDev(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  if (scale == 0.0) return 0.0;
  return std::abs(a - b) / scale;
}

std::string Instance(const char* fmt, std::size_t a, std::size_t b = 0) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, a, b);
  return buf;
}

class Collector {
 public:
  Collector(std::string suite, const SuiteOptions& options, VerifyReport& report)
      : suite_(std::move(suite)),
        options_(options),
        report_(report),
        last_(std::chrono::steady_clock::now()) {}

  // Runs `count` independent instances; each fills its own row list. The
  // reported time is the wall time since the previous check, so work shared
  // by a pair of checks is charged to the first.
  void Run(const std::string& check, double tolerance, std::size_t count,
           const std::function<void(std::size_t, std::vector<std::pair<std::string, double>>&)>&
               instance) {
    std::vector<std::vector<std::pair<std::string, double>>> parts(count);
    ParallelFor(count, options_.jobs, [&](std::size_t i) { instance(i, parts[i]); });
    CheckSummary summary{suite_, check, 0, 0, 0.0, tolerance, 0.0};
    for (const auto& part : parts) {
      for (const auto& [name, value] : part) {
        const bool ok = value <= tolerance;  // NaN fails
        report_.rows.push_back({suite_, check, name, value, tolerance, ok});
        ++summary.count;
        summary.failures += !ok;
        summary.worst = std::isnan(value) ? value : std::max(summary.worst, value);
      }
    }
    const auto now = std::chrono::steady_clock::now();
    summary.seconds = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    Log(LogLevel::kInfo, "verify %s/%s: %zu rows, worst %.3g (bound %.0e), %zu failing, %.1fs",
        suite_.c_str(), check.c_str(), summary.count, summary.worst, tolerance, summary.failures,
        summary.seconds);
    report_.checks.push_back(summary);
  }

 private:
  std::string suite_;
  const SuiteOptions& options_;
  VerifyReport& report_;
  std::chrono::steady_clock::time_point last_;
};

void InvarianceChecks(const SuiteOptions& o, VerifyReport& report) {
  Collector c("invariance", o, report);
  struct Pair {
    double certificate = 0.0;
    std::vector<double> kappa, kappa_tau, rho;
  };
  auto study = [&](std::uint64_t stream, ReparamSpec::Kind kind, std::size_t i) {
    const std::uint64_t seed = DeriveSeed(o.seed, {stream, i});
    FixtureOptions fo;
    if (kind == ReparamSpec::Kind::kNeuronwise) fo.min_layers = 2;  // needs a hidden neuron
    const Fixture f = RandomFixture(seed, fo);
    const ReparamSpec spec =
        SampleRandom(f.net.shape(), kind, o.factor_lo, o.factor_hi, DeriveSeed(seed, {2}));
    const MlpNetwork moved = Apply(f.net, spec);
    Pair p;
    p.certificate = VerifyFunctionPreserving(f.net, moved, 100, seed).max_abs_deviation;
    const FlatnessReport a = FullReport(f.net, f.data, f.loss);
    const FlatnessReport b = FullReport(moved, f.data, f.loss);
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
      p.kappa.push_back(RelDev(a.layers[l].kappa, b.layers[l].kappa));
      p.kappa_tau.push_back(RelDev(a.layers[l].kappa_tau, b.layers[l].kappa_tau));
      double worst = 0.0;
      for (std::size_t j = 0; j < a.layers[l].rho_neuron.size(); ++j)
        worst = std::max(worst, RelDev(a.layers[l].rho_neuron[j], b.layers[l].rho_neuron[j]));
      p.rho.push_back(worst);
    }
    return p;
  };

  std::vector<Pair> layerwise(o.invariance_nets), neuronwise(o.invariance_nets);
  ParallelFor(o.invariance_nets, o.jobs, [&](std::size_t i) {
    layerwise[i] = study(1, ReparamSpec::Kind::kLayerwise, i);
  });
  c.Run("layerwise.certificate", kCertificateTol, o.invariance_nets, [&](std::size_t i, auto& rows) {
    rows.emplace_back(Instance("n%03zu", i), layerwise[i].certificate);
  });
  c.Run("layerwise.kappa", kInvarianceTol, o.invariance_nets, [&](std::size_t i, auto& rows) {
    for (std::size_t l = 0; l < layerwise[i].kappa.size(); ++l)
      rows.emplace_back(Instance("n%03zu.l%zu", i, l + 1), layerwise[i].kappa[l]);
  });
  c.Run("layerwise.kappa_tau", kInvarianceTol, o.invariance_nets, [&](std::size_t i, auto& rows) {
    for (std::size_t l = 0; l < layerwise[i].kappa_tau.size(); ++l)
      rows.emplace_back(Instance("n%03zu.l%zu", i, l + 1), layerwise[i].kappa_tau[l]);
  });
  ParallelFor(o.invariance_nets, o.jobs, [&](std::size_t i) {
    neuronwise[i] = study(3, ReparamSpec::Kind::kNeuronwise, i);
  });
  c.Run("neuronwise.certificate", kCertificateTol, o.invariance_nets,
        [&](std::size_t i, auto& rows) {
          rows.emplace_back(Instance("n%03zu", i), neuronwise[i].certificate);
        });
  // One row per layer: the worst column of that layer.
  c.Run("neuronwise.rho", kInvarianceTol, o.invariance_nets, [&](std::size_t i, auto& rows) {
    for (std::size_t l = 0; l < neuronwise[i].rho.size(); ++l)
      rows.emplace_back(Instance("n%03zu.l%zu", i, l + 1), neuronwise[i].rho[l]);
  });
}

void ScalingChecks(const SuiteOptions& o, Collector& c) {
  struct Result {
    double fd = 0.0, raw = 0.0;
    std::string name;
  };
  std::vector<Result> results(o.scaling_instances);
  ParallelFor(o.scaling_instances, o.jobs, [&](std::size_t i) {
    const std::uint64_t seed = DeriveSeed(o.seed, {10, i});
    FixtureOptions fo;
    fo.min_layers = 2;
    fo.max_params_per_layer = 500;
    const Fixture f = RandomFixture(seed, fo);
    Rng rng(seed, 11);
    const std::size_t depth = f.net.num_layers();
    const std::size_t l = rng.Below(depth);
    const std::size_t k = (l + 1 + rng.Below(depth - 1)) % depth;
    const double alpha = rng.Uniform(o.factor_lo, o.factor_hi);
    std::vector<double> alphas(depth, 1.0);
    alphas[l] = alpha;
    alphas[k] = 1.0 / alpha;
    const ReparamSpec spec = ReparamSpec::Layerwise(alphas);
    results[i].name = Instance("s%03zu.l%zu", i, l + 1);
    results[i].fd = ScalingLawCheck(f.net, spec, l, f.data, f.loss);
    const auto sel = ParamSelector::Layer(l);
    const SpectralConfig cfg;
    const double before =
        LambdaMax(LossSurface(f.net, f.data, f.loss).HessianOperator(sel), cfg).eigenvalue;
    const double after =
        LambdaMax(LossSurface(Apply(f.net, spec), f.data, f.loss).HessianOperator(sel), cfg)
            .eigenvalue;
    results[i].raw = RelDev(after * alpha * alpha, before);
  });
  c.Run("scaling_law.fd_hessian", kScalingTol, results.size(), [&](std::size_t i, auto& rows) {
    rows.emplace_back(results[i].name, results[i].fd);
  });
  c.Run("scaling_law.raw_lambda_ratio", kScalingTol, results.size(),
        [&](std::size_t i, auto& rows) { rows.emplace_back(results[i].name, results[i].raw); });
}

void SpectralOracleChecks(const SuiteOptions& o, Collector& c) {
  struct Result {
    std::vector<double> lambda, trace;
  };
  std::vector<Result> results(o.oracle_nets);
  ParallelFor(o.oracle_nets, o.jobs, [&](std::size_t i) {
    FixtureOptions fo;
    fo.max_params_per_layer = 500;
    const Fixture f = RandomFixture(DeriveSeed(o.seed, {20, i}), fo);
    const LossSurface surface(f.net, f.data, f.loss);
    for (std::size_t l = 0; l < f.net.num_layers(); ++l) {
      const auto sel = ParamSelector::Layer(l);
      const DenseMatrix fd = FdHessian(f.net, f.data, f.loss, sel);
      const SymmetricOperator op = surface.HessianOperator(sel);
      results[i].lambda.push_back(
          RelDev(LambdaMax(op, SpectralConfig{}).eigenvalue, DenseSymEig(fd).back()));
      results[i].trace.push_back(RelDev(TraceEstimate(op, TraceMode::Exact(), 0).trace, fd.Trace()));
    }
  });
  c.Run("oracle.lambda_max", kSpectralOracleTol, results.size(), [&](std::size_t i, auto& rows) {
    for (std::size_t l = 0; l < results[i].lambda.size(); ++l)
      rows.emplace_back(Instance("o%03zu.l%zu", i, l + 1), results[i].lambda[l]);
  });
  c.Run("oracle.trace", kSpectralOracleTol, results.size(), [&](std::size_t i, auto& rows) {
    for (std::size_t l = 0; l < results[i].trace.size(); ++l)
      rows.emplace_back(Instance("o%03zu.l%zu", i, l + 1), results[i].trace[l]);
  });
}

void TikhonovChecks(const SuiteOptions& o, Collector& c) {
  struct Result {
    double constancy = 0.0, closed_form = 0.0;
  };
  std::vector<Result> results(o.tikhonov_datasets);
  ParallelFor(o.tikhonov_datasets, o.jobs, [&](std::size_t d) {
    Rng rng(DeriveSeed(o.seed, {30, d}), 31);
    const std::size_t n = 1 + rng.Below(64), in = 1 + rng.Below(20), out = 1 + rng.Below(3);
    DenseMatrix x(n, in), y(n, out);
    for (double& v : x.data()) v = rng.Normal();
    for (double& v : y.data()) v = rng.Normal();
    const LabeledSet data = LabeledSet::Regression(x, y);
    DenseMatrix gram = Multiply(x.Transposed(), x);
    for (double& v : gram.data()) v *= 2.0 / static_cast<double>(n);
    const double reference = DenseSymEig(gram).back();
    double first = 0.0;
    for (std::size_t t = 0; t < o.tikhonov_weights; ++t) {
      Layer layer{DenseMatrix(out, in), std::vector<double>(out)};
      for (double& v : layer.weights.data()) v = rng.Normal();
      for (double& v : layer.bias) v = rng.Normal();
      const MlpNetwork net({layer});
      const double ratio = KappaLayer(net, data, LossKind::kSquared, 0, SpectralConfig{}) /
                           layer.weights.FrobeniusNormSquared();
      if (t == 0) first = ratio;
      results[d].constancy = std::max(results[d].constancy, RelDev(ratio, first));
      results[d].closed_form = std::max(results[d].closed_form, RelDev(ratio, reference));
    }
  });
  c.Run("tikhonov.constancy", kTikhonovConstancyTol, results.size(),
        [&](std::size_t d, auto& rows) {
          rows.emplace_back(Instance("t%03zu", d), results[d].constancy);
        });
  c.Run("tikhonov.closed_form", kTikhonovClosedFormTol, results.size(),
        [&](std::size_t d, auto& rows) {
          rows.emplace_back(Instance("t%03zu", d), results[d].closed_form);
        });
}

double MaxNormRel(std::span<const double> got, std::span<const double> want) {
  double scale = 0.0, diff = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    scale = std::max(scale, std::abs(want[i]));
    diff = std::max(diff, std::abs(got[i] - want[i]));
  }
  return scale == 0.0 ? diff : diff / scale;
}

void DerivativeChecks(const SuiteOptions& o, Collector& c) {
  struct Result {
    double gradient = 0.0;
    std::vector<double> hvp;
  };
  std::vector<Result> results(o.derivative_instances);
  ParallelFor(o.derivative_instances, o.jobs, [&](std::size_t i) {
    FixtureOptions fo;
    fo.max_params_per_layer = 300;
    const Fixture f = RandomFixture(DeriveSeed(o.seed, {40, i}), fo);
    FdConfig gcfg;
    gcfg.step = kGradientFdStep;
    results[i].gradient =
        MaxNormRel(Gradient(f.net, f.data, f.loss), FdGradient(f.net, f.data, f.loss, gcfg));
    const LossSurface surface(f.net, f.data, f.loss);
    for (std::size_t l = 0; l < f.net.num_layers(); ++l) {
      const auto sel = ParamSelector::Layer(l);
      const DenseMatrix fd = FdHessian(f.net, f.data, f.loss, sel);
      DenseMatrix hvp(fd.rows(), fd.cols());
      std::vector<double> e(fd.rows(), 0.0);
      for (std::size_t col = 0; col < fd.cols(); ++col) {
        e[col] = 1.0;
        const std::vector<double> h = surface.Hvp(sel, e);
        e[col] = 0.0;
        for (std::size_t r = 0; r < fd.rows(); ++r) hvp(r, col) = h[r];
      }
      results[i].hvp.push_back(MaxNormRel(hvp.data(), fd.data()));
    }
  });
  c.Run("derivatives.gradient_fd", kGradientTol, results.size(), [&](std::size_t i, auto& rows) {
    rows.emplace_back(Instance("d%03zu", i), results[i].gradient);
  });
  c.Run("derivatives.hvp_fd", kHvpTol, results.size(), [&](std::size_t i, auto& rows) {
    for (std::size_t l = 0; l < results[i].hvp.size(); ++l)
      rows.emplace_back(Instance("d%03zu.l%zu", i, l + 1), results[i].hvp[l]);
  });
}

void ContractionChecks(const SuiteOptions& o, Collector& c) {
  auto random = [](Rng& rng, std::size_t r, std::size_t k) {
    DenseMatrix m(r, k);
    for (double& v : m.data()) v = rng.Normal();
    return m;
  };
  c.Run("contraction.bound", kContractionSlack, o.contraction_pairs, [&](std::size_t i, auto& rows) {
    Rng rng(DeriveSeed(o.seed, {50, i}), 51);
    const std::size_t r = 1 + rng.Below(8), n = 1 + rng.Below(8), m = 1 + rng.Below(8);
    const DenseMatrix w = random(rng, r, n);
    DenseMatrix a = random(rng, n, m);
    // Spectral norm exactly at the bound for a quarter of the draws.
    const double target = rng.Below(4) == 0 ? 1.0 : rng.UniformOpen(0.0, 1.0);
    const double norm = SpectralNorm(a);
    for (double& v : a.data()) v *= target / norm;
    if (SpectralNorm(a) > 1.0) {
      // Rounding can land a hair above 1; the bound needs ||a|| <= 1.
      for (double& v : a.data()) v *= 1.0 - 1e-15;
    }
    const bool ok = FrobeniusContractionCheck(w, a);
    const double slack = Multiply(w, a).FrobeniusNorm() - w.FrobeniusNorm();
    rows.emplace_back(Instance("p%04zu", i), ok ? slack : std::max(slack, 1.0));
  });
  c.Run("contraction.orthogonal", kOrthogonalTol, o.contraction_pairs,
        [&](std::size_t i, auto& rows) {
          Rng rng(DeriveSeed(o.seed, {52, i}), 53);
          const std::size_t r = 1 + rng.Below(8), n = 1 + rng.Below(8);
          const DenseMatrix w = random(rng, r, n);
          const DenseMatrix q = RandomOrthogonal(n, DeriveSeed(o.seed, {54, i}));
          const double fw = w.FrobeniusNorm();
          rows.emplace_back(Instance("q%04zu", i),
                            std::abs(Multiply(w, q).FrobeniusNorm() - fw) / fw);
        });
}

}  // namespace

bool VerifyReport::passed() const {
  return !rows.empty() &&
         std::all_of(rows.begin(), rows.end(), [](const VerifyRow& r) { return r.passed; });
}

std::string VerifyReport::Csv() const {
  std::string out = "suite,check,instance,value,tolerance,passed\n";
  for (const VerifyRow& r : rows) {
    out += r.suite + "," + r.check + "," + r.instance + "," + FormatDouble(r.value) + "," +
           FormatDouble(r.tolerance) + "," + (r.passed ? "true" : "false") + "\n";
  }
  return out;
}

VerifyReport InvarianceSuite(const SuiteOptions& options) {
  VerifyReport report;
  InvarianceChecks(options, report);
  return report;
}

VerifyReport OracleSuite(const SuiteOptions& options) {
  VerifyReport report;
  Collector c("oracle", options, report);
  ScalingChecks(options, c);
  SpectralOracleChecks(options, c);
  TikhonovChecks(options, c);
  DerivativeChecks(options, c);
  ContractionChecks(options, c);
  return report;
}

VerifyReport RunSuite(const std::string& name, const SuiteOptions& options) {
  if (name == "invariance") return InvarianceSuite(options);
  if (name == "oracle") return OracleSuite(options);
  if (name == "all") {
    VerifyReport all = InvarianceSuite(options);
    VerifyReport oracle = OracleSuite(options);
    all.rows.insert(all.rows.end(), oracle.rows.begin(), oracle.rows.end());
    all.checks.insert(all.checks.end(), oracle.checks.begin(), oracle.checks.end());
    return all;
  }
  Fail(Errc::kInvalidArgument, "unknown verify suite '" + name + "' (invariance, oracle, all)");
}

}  // namespace flatmeter
