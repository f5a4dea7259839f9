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

#include "flatness/flatness.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "common/error.hpp"
#include "common/random.hpp"
#include "common/reduce.hpp"

namespace flatmeter {
namespace {

SpectralConfig LayerSpectralConfig(const SpectralConfig& cfg, std::size_t layer) {
  SpectralConfig c = cfg;
  c.seed = DeriveSeed(cfg.seed, {layer});
  return c;
}

std::string Key(const char* name, std::size_t layer) {
  return std::string(name) + ".l" + std::to_string(layer + 1);
}

}  // namespace

const LayerMeasures* FlatnessReport::Find(std::size_t layer) const {
  for (const LayerMeasures& m : layers)
    if (m.layer == layer) return &m;
  return nullptr;
}

double KappaLayer(const MlpNetwork& net, const LabeledSet& data, LossKind loss,
                  std::size_t layer, const SpectralConfig& cfg) {
  const ParamSelector sel = ParamSelector::Layer(layer);
  Validate(net, sel);
  const LossSurface surface(net, data, loss);
  const SpectralResult eig =
      LambdaMax(surface.HessianOperator(sel), LayerSpectralConfig(cfg, layer));
  return net.layer(layer).weights.FrobeniusNormSquared() * eig.eigenvalue;
}

double KappaTauLayer(const MlpNetwork& net, const LabeledSet& data, LossKind loss,
                     std::size_t layer, const TraceMode& mode, std::uint64_t seed) {
  const ParamSelector sel = ParamSelector::Layer(layer);
  Validate(net, sel);
  const LossSurface surface(net, data, loss);
  const TraceResult tr =
      TraceEstimate(surface.HessianOperator(sel), mode, DeriveSeed(seed, {layer}));
  return net.layer(layer).weights.FrobeniusNormSquared() * tr.trace;
}

double RhoNeuron(const MlpNetwork& net, const LabeledSet& data, LossKind loss,
                 std::size_t layer, std::size_t column) {
  const ParamSelector sel = ParamSelector::NeuronColumn(layer, column);
  Validate(net, sel);
  const std::vector<double> c = GatherSelected(net, sel);
  const std::vector<double> hc = LossSurface(net, data, loss).Hvp(sel, c);
  return Dot(c, hc);
}

TraceMode ResolveTraceMode(const std::optional<TraceMode>& requested, std::size_t params,
                           bool has_diagonal) {
  if (requested) return *requested;
  if (has_diagonal || params <= kExactTraceMaxParams) return TraceMode::Exact();
  return TraceMode::Hutchinson(64);
}

LayerMeasures MeasureLayer(const LossSurface& surface, std::size_t layer,
                           const MeasureOptions& options) {
  const MlpNetwork& net = surface.network();
  const ParamSelector sel = ParamSelector::Layer(layer);
  Validate(net, sel);
  const SymmetricOperator op = surface.HessianOperator(sel);

  LayerMeasures m;
  m.layer = layer;
  m.weight_norm_sq = net.layer(layer).weights.FrobeniusNormSquared();
  m.eig = LambdaMax(op, LayerSpectralConfig(options.spectral, layer));
  const TraceMode mode =
      ResolveTraceMode(options.trace_mode, op.dim, static_cast<bool>(op.diagonal));
  m.trace = TraceEstimate(op, mode, DeriveSeed(options.trace_seed, {layer}));
  m.kappa = m.weight_norm_sq * m.eig.eigenvalue;
  m.kappa_tau = m.weight_norm_sq * m.trace.trace;
  m.rho_neuron = surface.ColumnQuadraticForms(layer);
  if (m.eig.method == SpectralMethod::kLanczos) {
    const double floor = -options.spectral.tolerance * std::max(std::abs(m.eig.eigenvalue), 1.0);
    m.psd = m.eig.min_ritz >= floor;
  }
  return m;
}

FlatnessReport Aggregate(std::vector<LayerMeasures> layers) {
  Require(!layers.empty(), Errc::kMissingLayer, "no layer measures to aggregate");
  std::sort(layers.begin(), layers.end(),
            [](const LayerMeasures& a, const LayerMeasures& b) { return a.layer < b.layer; });
  std::set<std::size_t> seen;
  for (const LayerMeasures& m : layers) {
    Require(seen.insert(m.layer).second, Errc::kMissingLayer,
            "layer " + std::to_string(m.layer) + " appears twice");
    Require(!m.rho_neuron.empty(), Errc::kMissingLayer,
            "layer " + std::to_string(m.layer) + " has no per-neuron values");
  }

  FlatnessReport r;
  std::vector<double> kappa, kappa_tau, rho_sigma;
  for (LayerMeasures& m : layers) {
    m.rho = *std::max_element(m.rho_neuron.begin(), m.rho_neuron.end());
    m.rho_sigma = PairwiseSum(m.rho_neuron);
    kappa.push_back(m.kappa);
    kappa_tau.push_back(m.kappa_tau);
    rho_sigma.push_back(m.rho_sigma);
    r.rho_max = r.layers.empty() ? m.rho : std::max(r.rho_max, m.rho);
    r.psd = r.psd && m.psd;
    r.layers.push_back(std::move(m));
  }
  r.kappa_max = *std::max_element(kappa.begin(), kappa.end());
  r.kappa_sum = PairwiseSum(kappa);
  r.kappa_tau_max = *std::max_element(kappa_tau.begin(), kappa_tau.end());
  r.kappa_tau_sum = PairwiseSum(kappa_tau);
  r.rho_sum = PairwiseSum(rho_sigma);
  return r;
}

FlatnessReport FullReport(const MlpNetwork& net, const LabeledSet& data, LossKind loss,
                          const MeasureOptions& options) {
  Validate(options.spectral);
  std::vector<std::size_t> layers = options.layers;
  if (layers.empty()) {
    for (std::size_t l = 0; l < net.num_layers(); ++l) layers.push_back(l);
  }
  for (std::size_t l : layers) Validate(net, ParamSelector::Layer(l));
  const LossSurface surface(net, data, loss);
  std::vector<LayerMeasures> parts;
  for (std::size_t l : layers) parts.push_back(MeasureLayer(surface, l, options));
  return Aggregate(std::move(parts));
}

std::vector<std::pair<std::string, double>> ToKeyValues(const FlatnessReport& report) {
  std::vector<std::pair<std::string, double>> kv;
  for (const auto& m : report.layers) kv.emplace_back(Key("kappa", m.layer), m.kappa);
  for (const auto& m : report.layers) kv.emplace_back(Key("kappa_tau", m.layer), m.kappa_tau);
  for (const auto& m : report.layers) kv.emplace_back(Key("rho", m.layer), m.rho);
  for (const auto& m : report.layers) kv.emplace_back(Key("rho_sigma", m.layer), m.rho_sigma);
  for (const auto& m : report.layers) {
    for (std::size_t j = 0; j < m.rho_neuron.size(); ++j)
      kv.emplace_back(Key("rho", m.layer) + ".j" + std::to_string(j + 1), m.rho_neuron[j]);
  }
  kv.emplace_back("kappa_max", report.kappa_max);
  kv.emplace_back("kappa_sum", report.kappa_sum);
  kv.emplace_back("kappa_tau_max", report.kappa_tau_max);
  kv.emplace_back("kappa_tau_sum", report.kappa_tau_sum);
  kv.emplace_back("rho_max", report.rho_max);
  kv.emplace_back("rho_sum", report.rho_sum);
  kv.emplace_back("psd", report.psd ? 1.0 : 0.0);
  for (const auto& m : report.layers) {
    kv.emplace_back(Key("weight_norm_sq", m.layer), m.weight_norm_sq);
    kv.emplace_back(Key("lambda_max", m.layer), m.eig.eigenvalue);
    kv.emplace_back(Key("eig_residual", m.layer), m.eig.residual);
    kv.emplace_back(Key("eig_iterations", m.layer), static_cast<double>(m.eig.iterations));
    kv.emplace_back(Key("eig_converged", m.layer), m.eig.converged ? 1.0 : 0.0);
    kv.emplace_back(Key("min_ritz", m.layer), m.eig.min_ritz);
    kv.emplace_back(Key("trace", m.layer), m.trace.trace);
    kv.emplace_back(Key("trace_stderr", m.layer), m.trace.standard_error);
    kv.emplace_back(Key("psd", m.layer), m.psd ? 1.0 : 0.0);
  }
  return kv;
}

}  // namespace flatmeter
