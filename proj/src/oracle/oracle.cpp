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

#include "oracle/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "common/error.hpp"
#include "common/random.hpp"
#include "common/reduce.hpp"
#include "numlin/spectral.hpp"

namespace flatmeter {
namespace {

constexpr std::uint64_t kFixtureStream = 0xf1c7;
constexpr std::uint64_t kOrthoStream = 0x0e7a;

// Shifts hidden biases, layer by layer, by the smallest multiple of the
// margin that keeps every pre-activation at least `margin` away from zero.
bool PushOffKinks(MlpNetwork& net, const LabeledSet& data, double margin) {
  std::vector<std::vector<double>> h(data.size());
  for (std::size_t s = 0; s < data.size(); ++s) {
    auto row = data.inputs().row(s);
    h[s].assign(row.begin(), row.end());
  }
  for (std::size_t l = 0; l + 1 < net.num_layers(); ++l) {
    Layer& layer = net.mutable_layer(l);
    std::vector<std::vector<double>> z(data.size());
    for (std::size_t s = 0; s < data.size(); ++s) z[s] = Multiply(layer.weights, h[s]);
    for (std::size_t i = 0; i < layer.weights.rows(); ++i) {
      // Aim past the margin so later re-evaluation in another summation
      // order cannot land a hair inside it.
      const double target = 1.5 * margin;
      bool placed = false;
      for (int k = 0; k < 400 && !placed; ++k) {
        // 0, +m, -m, +2m, -2m, ...
        const double shift = (k % 2 ? 1.0 : -1.0) * ((k + 1) / 2) * margin;
        const double b = layer.bias[i] + shift;
        placed = true;
        for (std::size_t s = 0; s < data.size() && placed; ++s)
          placed = std::abs(z[s][i] + b) >= target;
        if (placed) layer.bias[i] = b;
      }
      if (!placed) return false;
    }
    for (std::size_t s = 0; s < data.size(); ++s) {
      for (std::size_t i = 0; i < z[s].size(); ++i)
        z[s][i] = std::max(z[s][i] + layer.bias[i], 0.0);
      h[s] = std::move(z[s]);
    }
  }
  return true;
}

}  // namespace

std::vector<double> FdGradient(const MlpNetwork& net, const LabeledSet& data, LossKind loss,
                               const FdConfig& cfg) {
  Require(cfg.step > 0.0, Errc::kInvalidArgument, "finite-difference step must be > 0");
  Require(net.num_params() <= 10 * kFdMaxParams, Errc::kTooLarge,
          "finite-difference gradient limited to " + std::to_string(10 * kFdMaxParams) +
              " parameters");
  std::vector<double> p = net.FlatParams();
  std::vector<double> g(p.size());
  MlpNetwork probe = net;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double base = p[i];
    const double step = cfg.step * (1.0 + std::abs(base));
    p[i] = base + step;
    probe.SetFlatParams(p);
    const double up = EmpiricalError(probe, data, loss);
    p[i] = base - step;
    probe.SetFlatParams(p);
    const double down = EmpiricalError(probe, data, loss);
    p[i] = base;
    g[i] = (up - down) / (2.0 * step);
    Require(std::isfinite(g[i]), Errc::kNonFinite, "finite-difference gradient is not finite");
  }
  return g;
}

DenseMatrix FdHessian(const MlpNetwork& net, const LabeledSet& data, LossKind loss,
                      const ParamSelector& sel, const FdConfig& cfg) {
  Require(cfg.step > 0.0, Errc::kInvalidArgument, "finite-difference step must be > 0");
  const std::vector<std::size_t> idx = SelectedFlatIndices(net, sel);
  Require(idx.size() <= kFdMaxParams, Errc::kTooLarge,
          "finite-difference Hessian limited to " + std::to_string(kFdMaxParams) + " parameters");
  const std::size_t n = idx.size();
  DenseMatrix h(n, n);
  const std::vector<double> base = net.FlatParams();
  MlpNetwork probe = net;
  std::vector<double> p = base;
  for (std::size_t c = 0; c < n; ++c) {
    const double step = cfg.step * (1.0 + std::abs(base[idx[c]]));
    p[idx[c]] = base[idx[c]] + step;
    probe.SetFlatParams(p);
    const std::vector<double> gp = Gradient(probe, data, loss);
    p[idx[c]] = base[idx[c]] - step;
    probe.SetFlatParams(p);
    const std::vector<double> gm = Gradient(probe, data, loss);
    p[idx[c]] = base[idx[c]];
    for (std::size_t r = 0; r < n; ++r) {
      const double v = (gp[idx[r]] - gm[idx[r]]) / (2.0 * step);
      Require(std::isfinite(v), Errc::kNonFinite, "finite-difference Hessian is not finite");
      h(r, c) = v;
    }
  }
  if (cfg.symmetrize) {
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = r + 1; c < n; ++c) {
        const double v = 0.5 * (h(r, c) + h(c, r));
        h(r, c) = v;
        h(c, r) = v;
      }
  }
  return h;
}

double ScalingLawCheck(const MlpNetwork& net, const ReparamSpec& spec, std::size_t layer,
                       const LabeledSet& data, LossKind loss, const FdConfig& cfg) {
  Require(spec.kind == ReparamSpec::Kind::kLayerwise, Errc::kInvalidSpec,
          "the scaling law is stated for layer-wise specs");
  const MlpNetwork scaled = Apply(net, spec);
  const ParamSelector sel = ParamSelector::Layer(layer);
  const DenseMatrix before = FdHessian(net, data, loss, sel, cfg);
  const DenseMatrix after = FdHessian(scaled, data, loss, sel, cfg);
  const double a2 = spec.alphas[layer] * spec.alphas[layer];
  const double floor = 1e-10 * before.MaxAbs();
  double worst = 0.0;
  for (std::size_t k = 0; k < before.size(); ++k) {
    const double b = before.data()[k];
    if (std::abs(b) < floor || b == 0.0) continue;
    worst = std::max(worst, std::abs(b - a2 * after.data()[k]) / std::abs(b));
  }
  return worst;
}

double SpectralNorm(const DenseMatrix& a) {
  const DenseMatrix ata = Multiply(a.Transposed(), a);
  SpectralConfig cfg;
  cfg.tolerance = 1e-13;
  cfg.max_iterations = std::max<std::size_t>(ata.rows(), 1);
  const SpectralResult r = LambdaMax(MakeDenseOperator(ata), cfg);
  return std::sqrt(std::max(r.eigenvalue, 0.0));
}

bool FrobeniusContractionCheck(const DenseMatrix& w, const DenseMatrix& a) {
  Require(w.cols() == a.rows(), Errc::kDimensionMismatch, "w columns must match a rows");
  Require(SpectralNorm(a) <= 1.0 + 1e-12, Errc::kPreconditionViolated,
          "contraction check needs ||a||_2 <= 1");
  return Multiply(w, a).FrobeniusNorm() <= w.FrobeniusNorm() + 1e-10;
}

DenseMatrix RandomOrthogonal(std::size_t n, std::uint64_t seed) {
  Rng rng(seed, kOrthoStream);
  // Modified Gram-Schmidt on Gaussian columns, twice for stability.
  DenseMatrix q(n, n);
  for (double& v : q.data()) v = rng.Normal();
  for (std::size_t c = 0; c < n; ++c) {
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t p = 0; p < c; ++p) {
        double d = 0.0;
        for (std::size_t r = 0; r < n; ++r) d += q(r, p) * q(r, c);
        for (std::size_t r = 0; r < n; ++r) q(r, c) -= d * q(r, p);
      }
    }
    double norm = 0.0;
    for (std::size_t r = 0; r < n; ++r) norm += q(r, c) * q(r, c);
    norm = std::sqrt(norm);
    for (std::size_t r = 0; r < n; ++r) q(r, c) /= norm;
  }
  return q;
}

Fixture RandomFixture(std::uint64_t seed, const FixtureOptions& o) {
  Require(o.min_layers >= 1 && o.min_layers <= o.max_layers && o.max_width >= 1 &&
              o.max_samples >= 1,
          Errc::kInvalidArgument, "invalid fixture options");
  for (std::uint64_t attempt = 0;; ++attempt) {
    Rng rng(DeriveSeed(seed, {attempt}), kFixtureStream);
    const std::size_t depth = o.min_layers + rng.Below(o.max_layers - o.min_layers + 1);
    const bool ce = o.allow_cross_entropy && o.max_width >= 2 && (rng.NextBits() >> 63);
    std::vector<std::size_t> shape(depth + 1);
    for (std::size_t& w : shape) w = 1 + rng.Below(o.max_width);
    if (ce) shape.back() = 2 + rng.Below(o.max_width - 1);
    if (o.max_params_per_layer > 0) {
      for (std::size_t l = 1; l < shape.size(); ++l) {
        while (shape[l] * shape[l - 1] > o.max_params_per_layer) {
          if (shape[l] >= shape[l - 1] && shape[l] > (l + 1 == shape.size() && ce ? 2u : 1u))
            --shape[l];
          else if (shape[l - 1] > 1)
            --shape[l - 1];
          else
            --shape[l];
        }
      }
    }
    std::vector<Layer> layers;
    for (std::size_t l = 1; l < shape.size(); ++l) {
      Layer layer{DenseMatrix(shape[l], shape[l - 1]), std::vector<double>(shape[l])};
      const double sd = std::sqrt(2.0 / static_cast<double>(shape[l - 1]));
      for (double& v : layer.weights.data()) v = rng.Normal(0.0, sd);
      for (double& b : layer.bias) b = rng.Normal(0.0, 0.1);
      layers.push_back(std::move(layer));
    }
    Fixture f;
    f.seed = seed;
    f.net = MlpNetwork(std::move(layers));
    f.loss = ce ? LossKind::kSoftmaxCrossEntropy : LossKind::kSquared;
    const std::size_t n = 1 + rng.Below(o.max_samples);
    DenseMatrix x(n, shape.front());
    for (double& v : x.data()) v = rng.Normal();
    if (ce) {
      std::vector<std::uint32_t> y(n);
      for (auto& v : y) v = static_cast<std::uint32_t>(rng.Below(shape.back()));
      f.data = LabeledSet::Classification(std::move(x), std::move(y), shape.back());
    } else {
      DenseMatrix t(n, shape.back());
      for (double& v : t.data()) v = rng.Normal();
      f.data = LabeledSet::Regression(std::move(x), std::move(t));
    }
    if (o.kink_margin > 0.0) {
      if (!PushOffKinks(f.net, f.data, o.kink_margin)) continue;
      if (MinAbsPreactivation(f.net, f.data) < o.kink_margin) continue;
    }
    return f;
  }
}

}  // namespace flatmeter
