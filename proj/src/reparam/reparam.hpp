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

// Function-preserving rescalings of ReLU networks.
//
// Layer-wise: w_l <- a_l w_l and b_l <- (a_1 ... a_l) b_l, with prod a_l = 1.
// Neuron-wise: row j of w_l and b_l[j] scale by s, column j of w_{l+1} by 1/s.
// Both rely only on relu(s z) = s relu(z) for s > 0.

#ifndef FLATMETER_REPARAM_REPARAM_HPP_
#define FLATMETER_REPARAM_REPARAM_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "net/mlp.hpp"

namespace flatmeter {

struct NeuronScale {
  std::size_t layer = 0;   // 0-based; must not be the output layer
  std::size_t neuron = 0;  // row of w_layer
  double factor = 1.0;

  friend bool operator==(const NeuronScale&, const NeuronScale&) = default;
};

struct ReparamSpec {
  enum class Kind { kLayerwise, kNeuronwise };
  Kind kind = Kind::kLayerwise;
  std::vector<double> alphas;         // layerwise, one per layer
  std::vector<NeuronScale> neurons;   // neuronwise, applied in order
  std::optional<std::uint64_t> seed;  // set when sampled
  // Permits prod alpha != 1; only meaningful for losses invariant to output
  // scale. Never set by the sampler.
  bool allow_output_scaling = false;

  static ReparamSpec Layerwise(std::vector<double> alphas);
  static ReparamSpec Neuronwise(std::vector<NeuronScale> neurons);

  // Short stable identifier derived from the serialized form.
  std::string Id() const;

  friend bool operator==(const ReparamSpec&, const ReparamSpec&) = default;
};

std::string_view ReparamKindName(ReparamSpec::Kind kind);
ReparamSpec::Kind ParseReparamKind(std::string_view name);

// Relative tolerance on prod alpha == 1.
inline constexpr double kLayerwiseProductTolerance = 1e-12;

// Throws InvalidSpec or ShapeMismatch; shape = {n_0, ..., n_L}.
void Validate(const ReparamSpec& spec, std::span<const std::size_t> shape);

MlpNetwork Apply(const MlpNetwork& net, const ReparamSpec& spec);

ReparamSpec Inverse(const ReparamSpec& spec);

// Layerwise only: apply(apply(net, a), b) == apply(net, Compose(a, b)).
ReparamSpec Compose(const ReparamSpec& first, const ReparamSpec& second);

struct ProbeCertificate {
  double max_abs_deviation = 0.0;
  std::size_t probes = 0;
  bool passed = false;  // deviation <= tol
};

// Probes: all-zeros, +/- each unit axis, then standard-normal draws until
// `probes` inputs have been evaluated (at least the structured ones).
ProbeCertificate VerifyFunctionPreserving(const MlpNetwork& a, const MlpNetwork& b,
                                          std::size_t probes, std::uint64_t seed,
                                          double tol = 1e-10);

// Layerwise: L-1 factors uniform in [lo, hi], the last set to the inverse of
// their product. Neuronwise: each hidden neuron is picked with probability
// 1/2 (at least one overall) and gets a factor uniform in [lo, hi].
ReparamSpec SampleRandom(std::span<const std::size_t> shape, ReparamSpec::Kind kind, double lo,
                         double hi, std::uint64_t seed);

std::string SerializeSpec(const ReparamSpec& spec);
ReparamSpec ParseSpec(const std::string& text);

}  // namespace flatmeter

#endif  // FLATMETER_REPARAM_REPARAM_HPP_
