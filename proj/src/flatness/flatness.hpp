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

// Hessian-based flatness measures. Layer indices are 0-based in this API and
// 1-based in serialized keys ("kappa.l1" is layer 0).
//
//   kappa[l]      = ||w_l||_F^2 * lambda_max(H_l)
//   kappa_tau[l]  = ||w_l||_F^2 * tr(H_l)
//   rho[l][j]     = c_j^T H_l c_j, c_j = column j of w_l in layer coordinates
//   rho[l]        = max_j rho[l][j],  rho_sigma[l] = sum_j rho[l][j]
//
// H_l is the Hessian of the mean loss with respect to w_l alone (biases and
// other layers fixed).

#ifndef FLATMETER_FLATNESS_FLATNESS_HPP_
#define FLATMETER_FLATNESS_FLATNESS_HPP_

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "net/loss_surface.hpp"
#include "net/mlp.hpp"
#include "numlin/spectral.hpp"

namespace flatmeter {

// Automatic trace mode: exact whenever the operator exposes its diagonal
// (layer Hessians always do), else exact up to this many weights and
// Hutchinson(64) beyond.
inline constexpr std::size_t kExactTraceMaxParams = 20000;

struct MeasureOptions {
  SpectralConfig spectral;
  std::optional<TraceMode> trace_mode;  // unset: automatic
  std::uint64_t trace_seed = 0x7ace;
  std::vector<std::size_t> layers;      // empty: every layer
};

struct LayerMeasures {
  std::size_t layer = 0;
  double weight_norm_sq = 0.0;
  SpectralResult eig;     // raw lambda_max of H_l plus diagnostics
  TraceResult trace;      // raw tr(H_l)
  double kappa = 0.0;
  double kappa_tau = 0.0;
  std::vector<double> rho_neuron;
  double rho = 0.0;
  double rho_sigma = 0.0;
  bool psd = true;        // no Ritz value below -tolerance * |lambda_max|

  friend bool operator==(const LayerMeasures&, const LayerMeasures&) = default;
};

struct FlatnessReport {
  std::vector<LayerMeasures> layers;  // ascending layer index
  double kappa_max = 0.0;
  double kappa_sum = 0.0;
  double kappa_tau_max = 0.0;
  double kappa_tau_sum = 0.0;
  double rho_max = 0.0;
  double rho_sum = 0.0;
  bool psd = true;

  const LayerMeasures* Find(std::size_t layer) const;

  friend bool operator==(const FlatnessReport&, const FlatnessReport&) = default;
};

double KappaLayer(const MlpNetwork& net, const LabeledSet& data, LossKind loss,
                  std::size_t layer, const SpectralConfig& cfg);

double KappaTauLayer(const MlpNetwork& net, const LabeledSet& data, LossKind loss,
                     std::size_t layer, const TraceMode& mode, std::uint64_t seed = 0x7ace);

// One Hessian-vector product and one inner product.
double RhoNeuron(const MlpNetwork& net, const LabeledSet& data, LossKind loss,
                 std::size_t layer, std::size_t column);

TraceMode ResolveTraceMode(const std::optional<TraceMode>& requested, std::size_t params,
                           bool has_diagonal);

// Measures one layer from an existing surface. rho_neuron comes from the
// batched Jacobian route, which agrees with RhoNeuron column by column.
LayerMeasures MeasureLayer(const LossSurface& surface, std::size_t layer,
                           const MeasureOptions& options);

// Fills per-layer rho/rho_sigma and every network aggregate. Throws
// MissingLayer on an empty list, a repeated layer, or a layer without
// per-neuron values.
FlatnessReport Aggregate(std::vector<LayerMeasures> layers);

FlatnessReport FullReport(const MlpNetwork& net, const LabeledSet& data, LossKind loss,
                          const MeasureOptions& options = {});

// Flat key/value view in a fixed order: per-layer measures, per-neuron rho,
// aggregates, then diagnostics.
std::vector<std::pair<std::string, double>> ToKeyValues(const FlatnessReport& report);

}  // namespace flatmeter

#endif  // FLATMETER_FLATNESS_FLATNESS_HPP_
