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

#include "reparam/reparam.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

#include <json.hpp>

#include "common/error.hpp"
#include "common/hash.hpp"
#include "common/random.hpp"

namespace flatmeter {
namespace {

constexpr std::uint64_t kProbeStream = 0x9b0be;
constexpr std::uint64_t kSampleStream = 0x5ca1e;

bool PositiveFinite(double x) { return std::isfinite(x) && x > 0.0; }

}  // namespace

ReparamSpec ReparamSpec::Layerwise(std::vector<double> alphas) {
  ReparamSpec s;
  s.kind = Kind::kLayerwise;
  s.alphas = std::move(alphas);
  return s;
}

ReparamSpec ReparamSpec::Neuronwise(std::vector<NeuronScale> neurons) {
  ReparamSpec s;
  s.kind = Kind::kNeuronwise;
  s.neurons = std::move(neurons);
  return s;
}

std::string ReparamSpec::Id() const {
  return HexHash(SerializeSpec(*this));
}

std::string_view ReparamKindName(ReparamSpec::Kind kind) {
  return kind == ReparamSpec::Kind::kLayerwise ? "layerwise" : "neuronwise";
}

ReparamSpec::Kind ParseReparamKind(std::string_view name) {
  if (name == "layerwise") return ReparamSpec::Kind::kLayerwise;
  if (name == "neuronwise") return ReparamSpec::Kind::kNeuronwise;
  Fail(Errc::kInvalidSpec, "unknown reparameterization kind '" + std::string(name) + "'");
}

void Validate(const ReparamSpec& spec, std::span<const std::size_t> shape) {
  Require(shape.size() >= 2, Errc::kShapeMismatch, "shape needs at least two entries");
  const std::size_t depth = shape.size() - 1;
  if (spec.kind == ReparamSpec::Kind::kLayerwise) {
    Require(spec.alphas.size() == depth, Errc::kShapeMismatch,
            "layerwise spec needs one factor per layer");
    double product = 1.0;
    for (double a : spec.alphas) {
      Require(PositiveFinite(a), Errc::kInvalidSpec, "factors must be positive and finite");
      product *= a;
    }
    if (!spec.allow_output_scaling) {
      Require(std::abs(product - 1.0) <= kLayerwiseProductTolerance, Errc::kInvalidSpec,
              "layerwise factors must multiply to 1");
    }
    return;
  }
  for (const NeuronScale& n : spec.neurons) {
    Require(n.layer + 1 < depth, Errc::kInvalidSpec,
            "neuron-wise scaling needs a downstream layer; output neurons are fixed");
    Require(n.neuron < shape[n.layer + 1], Errc::kShapeMismatch, "neuron index out of range");
    Require(PositiveFinite(n.factor), Errc::kInvalidSpec, "factors must be positive and finite");
  }
}

MlpNetwork Apply(const MlpNetwork& net, const ReparamSpec& spec) {
  Validate(spec, net.shape());
  MlpNetwork out = net;
  if (spec.kind == ReparamSpec::Kind::kLayerwise) {
    double cumulative = 1.0;
    for (std::size_t l = 0; l < out.num_layers(); ++l) {
      Layer& layer = out.mutable_layer(l);
      cumulative *= spec.alphas[l];
      for (double& w : layer.weights.data()) w *= spec.alphas[l];
      for (double& b : layer.bias) b *= cumulative;
    }
    return out;
  }
  for (const NeuronScale& n : spec.neurons) {
    Layer& in = out.mutable_layer(n.layer);
    for (double& w : in.weights.row(n.neuron)) w *= n.factor;
    in.bias[n.neuron] *= n.factor;
    DenseMatrix& next = out.mutable_layer(n.layer + 1).weights;
    for (std::size_t i = 0; i < next.rows(); ++i) next(i, n.neuron) /= n.factor;
  }
  return out;
}

ReparamSpec Inverse(const ReparamSpec& spec) {
  ReparamSpec inv = spec;
  inv.seed.reset();
  for (double& a : inv.alphas) a = 1.0 / a;
  std::reverse(inv.neurons.begin(), inv.neurons.end());
  for (NeuronScale& n : inv.neurons) n.factor = 1.0 / n.factor;
  return inv;
}

ReparamSpec Compose(const ReparamSpec& first, const ReparamSpec& second) {
  Require(first.kind == ReparamSpec::Kind::kLayerwise &&
              second.kind == ReparamSpec::Kind::kLayerwise,
          Errc::kInvalidSpec, "only layerwise specs compose into a single layerwise spec");
  Require(first.alphas.size() == second.alphas.size(), Errc::kShapeMismatch,
          "specs are for different depths");
  ReparamSpec c = ReparamSpec::Layerwise(first.alphas);
  for (std::size_t l = 0; l < c.alphas.size(); ++l) c.alphas[l] *= second.alphas[l];
  c.allow_output_scaling = first.allow_output_scaling || second.allow_output_scaling;
  return c;
}

ProbeCertificate VerifyFunctionPreserving(const MlpNetwork& a, const MlpNetwork& b,
                                          std::size_t probes, std::uint64_t seed, double tol) {
  Require(a.input_dim() == b.input_dim(), Errc::kDimensionMismatch,
          "networks have different input dimensions");
  const std::size_t d = a.input_dim();
  ProbeCertificate cert;
  auto check = [&](const std::vector<double>& x) {
    const std::vector<double> ya = Forward(a, x);
    const std::vector<double> yb = Forward(b, x);
    Require(ya.size() == yb.size(), Errc::kDimensionMismatch,
            "networks have different output dimensions");
    for (std::size_t i = 0; i < ya.size(); ++i) {
      double dev = std::abs(ya[i] - yb[i]);
      if (std::isnan(dev)) dev = std::numeric_limits<double>::infinity();
      cert.max_abs_deviation = std::max(cert.max_abs_deviation, dev);
    }
    ++cert.probes;
  };
  std::vector<double> x(d, 0.0);
  check(x);
  for (std::size_t i = 0; i < d; ++i) {
    for (double s : {1.0, -1.0}) {
      x[i] = s;
      check(x);
    }
    x[i] = 0.0;
  }
  Rng rng(seed, kProbeStream);
  while (cert.probes < probes) {
    for (double& v : x) v = rng.Normal();
    check(x);
  }
  cert.passed = cert.max_abs_deviation <= tol;
  return cert;
}

ReparamSpec SampleRandom(std::span<const std::size_t> shape, ReparamSpec::Kind kind, double lo,
                         double hi, std::uint64_t seed) {
  Require(std::isfinite(lo) && std::isfinite(hi) && lo > 0.0 && lo <= hi, Errc::kEmptyInterval,
          "factor interval must be a nonempty subset of (0, inf)");
  Require(shape.size() >= 2, Errc::kShapeMismatch, "shape needs at least two entries");
  const std::size_t depth = shape.size() - 1;
  Rng rng(seed, kSampleStream);
  ReparamSpec spec;
  spec.kind = kind;
  spec.seed = seed;
  if (kind == ReparamSpec::Kind::kLayerwise) {
    double product = 1.0;
    for (std::size_t l = 0; l + 1 < depth; ++l) {
      spec.alphas.push_back(rng.Uniform(lo, hi));
      product *= spec.alphas.back();
    }
    spec.alphas.push_back(1.0 / product);
    return spec;
  }
  for (std::size_t l = 0; l + 1 < depth; ++l) {
    for (std::size_t j = 0; j < shape[l + 1]; ++j) {
      const bool pick = (rng.NextBits() >> 63) != 0;
      const double factor = rng.Uniform(lo, hi);
      if (pick) spec.neurons.push_back({l, j, factor});
    }
  }
  if (spec.neurons.empty() && depth >= 2) {
    const std::size_t j = static_cast<std::size_t>(rng.Below(shape[1]));
    spec.neurons.push_back({0, j, rng.Uniform(lo, hi)});
  }
  return spec;
}

std::string SerializeSpec(const ReparamSpec& spec) {
  nlohmann::ordered_json j;
  j["kind"] = std::string(ReparamKindName(spec.kind));
  if (spec.kind == ReparamSpec::Kind::kLayerwise) {
    j["alphas"] = spec.alphas;
  } else {
    nlohmann::ordered_json list = nlohmann::ordered_json::array();
    for (const NeuronScale& n : spec.neurons)
      list.push_back({{"layer", n.layer}, {"neuron", n.neuron}, {"factor", n.factor}});
    j["neurons"] = std::move(list);
  }
  if (spec.seed) j["seed"] = *spec.seed;
  if (spec.allow_output_scaling) j["allow_output_scaling"] = true;
  return j.dump();
}

ReparamSpec ParseSpec(const std::string& text) {
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    ReparamSpec spec;
    spec.kind = ParseReparamKind(j.at("kind").get<std::string>());
    if (spec.kind == ReparamSpec::Kind::kLayerwise) {
      spec.alphas = j.at("alphas").get<std::vector<double>>();
    } else {
      for (const auto& n : j.at("neurons"))
        spec.neurons.push_back({n.at("layer").get<std::size_t>(),
                                n.at("neuron").get<std::size_t>(), n.at("factor").get<double>()});
    }
    if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
    spec.allow_output_scaling = j.value("allow_output_scaling", false);
    return spec;
  } catch (const nlohmann::json::exception& e) {
    Fail(Errc::kInvalidSpec, std::string("malformed reparameterization spec: ") + e.what());
  }
}

}  // namespace flatmeter
