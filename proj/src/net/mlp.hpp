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

#ifndef FLATMETER_NET_MLP_HPP_
#define FLATMETER_NET_MLP_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "numlin/dense_matrix.hpp"

namespace flatmeter {

// One affine layer: weights are n_out x n_in, so the layer computes w*x + b.
struct Layer {
  DenseMatrix weights;
  std::vector<double> bias;

  friend bool operator==(const Layer&, const Layer&) = default;
};

/// ReLU multilayer perceptron. Hidden layers apply ReLU, the output layer is
/// the identity; any output nonlinearity belongs to the loss.
///
/// Flat parameter layout (gradients, checkpoints, selectors): layers in
/// order, each layer's weights row-major followed by its bias.
class MlpNetwork {
 public:
  MlpNetwork() = default;
  explicit MlpNetwork(std::vector<Layer> layers);

  /// shape = {n_0, n_1, ..., n_L}; all parameters zero.
  static MlpNetwork Zeros(std::span<const std::size_t> shape);

  std::size_t num_layers() const { return layers_.size(); }
  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::vector<std::size_t> shape() const;

  const Layer& layer(std::size_t l) const { return layers_.at(l); }
  Layer& mutable_layer(std::size_t l) { return layers_.at(l); }
  std::span<const Layer> layers() const { return layers_; }

  std::size_t num_params() const;
  std::size_t layer_offset(std::size_t l) const;
  std::vector<double> FlatParams() const;
  void SetFlatParams(std::span<const double> params);

  bool AllFinite() const;

  friend bool operator==(const MlpNetwork&, const MlpNetwork&) = default;

 private:
  void ValidateChain() const;

  std::vector<Layer> layers_;
};

enum class LossKind { kSquared, kSoftmaxCrossEntropy };

std::string_view LossKindName(LossKind kind);
LossKind ParseLossKind(std::string_view name);

/// Samples with either regression targets (squared loss) or class indices
/// (softmax cross-entropy). Inputs are stored one sample per row.
class LabeledSet {
 public:
  LabeledSet() = default;

  static LabeledSet Regression(DenseMatrix inputs, DenseMatrix targets);
  static LabeledSet Classification(DenseMatrix inputs, std::vector<std::uint32_t> labels,
                                   std::size_t num_classes);

  std::size_t size() const { return inputs_.rows(); }
  std::size_t input_dim() const { return inputs_.cols(); }
  bool is_classification() const { return !labels_.empty(); }
  std::size_t num_classes() const { return num_classes_; }
  std::size_t target_dim() const { return targets_.cols(); }

  const DenseMatrix& inputs() const { return inputs_; }
  const DenseMatrix& targets() const { return targets_; }
  std::span<const std::uint32_t> labels() const { return labels_; }

  LabeledSet Subset(std::span<const std::size_t> indices) const;

  friend bool operator==(const LabeledSet&, const LabeledSet&) = default;

 private:
  DenseMatrix inputs_;
  DenseMatrix targets_;
  std::vector<std::uint32_t> labels_;
  std::size_t num_classes_ = 0;
};

/// Selects weight entries (never biases) of one layer: the whole matrix, or
/// column j of w_l (the weights leaving input unit j of that layer).
struct ParamSelector {
  enum class Kind { kLayer, kNeuronColumn };
  Kind kind = Kind::kLayer;
  std::size_t layer = 0;
  std::size_t column = 0;

  static ParamSelector Layer(std::size_t l) { return {Kind::kLayer, l, 0}; }
  static ParamSelector NeuronColumn(std::size_t l, std::size_t j) {
    return {Kind::kNeuronColumn, l, j};
  }
};

void Validate(const MlpNetwork& net, const ParamSelector& sel);
std::size_t SelectedCount(const MlpNetwork& net, const ParamSelector& sel);
// Positions of the selected entries inside the flat parameter vector.
std::vector<std::size_t> SelectedFlatIndices(const MlpNetwork& net, const ParamSelector& sel);
std::vector<double> GatherSelected(const MlpNetwork& net, const ParamSelector& sel);

std::vector<double> Forward(const MlpNetwork& net, std::span<const double> x);

// Mean per-sample loss.
double EmpiricalError(const MlpNetwork& net, const LabeledSet& data, LossKind loss);

// Sum of per-sample losses (used by the scaled generalization-error mode).
double SummedLoss(const MlpNetwork& net, const LabeledSet& data, LossKind loss);

// Gradient of EmpiricalError in the flat layout; sigma'(0) = 0.
std::vector<double> Gradient(const MlpNetwork& net, const LabeledSet& data, LossKind loss);

// Hessian of EmpiricalError restricted to the selected weights, times v.
std::vector<double> Hvp(const MlpNetwork& net, const LabeledSet& data, LossKind loss,
                        const ParamSelector& sel, std::span<const double> v);

// Smallest |pre-activation| over all hidden units and samples; +inf for
// single-layer networks.
double MinAbsPreactivation(const MlpNetwork& net, const LabeledSet& data);

}  // namespace flatmeter

#endif  // FLATMETER_NET_MLP_HPP_
