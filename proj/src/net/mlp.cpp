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

#include "net/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "common/error.hpp"
#include "common/reduce.hpp"
#include "net/engine.hpp"
#include "net/loss_surface.hpp"

namespace flatmeter {

MlpNetwork::MlpNetwork(std::vector<Layer> layers) : layers_(std::move(layers)) {
  ValidateChain();
}

void MlpNetwork::ValidateChain() const {
  Require(!layers_.empty(), Errc::kShapeMismatch, "network needs at least one layer");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    Require(layer.weights.rows() >= 1 && layer.weights.cols() >= 1, Errc::kShapeMismatch,
            "layer " + std::to_string(l) + " has an empty weight matrix");
    Require(layer.bias.size() == layer.weights.rows(), Errc::kShapeMismatch,
            "layer " + std::to_string(l) + " bias length differs from its row count");
    if (l > 0) {
      Require(layer.weights.cols() == layers_[l - 1].weights.rows(), Errc::kShapeMismatch,
              "layer " + std::to_string(l) + " input width does not chain");
    }
  }
  Require(AllFinite(), Errc::kNonFinite, "network parameters must be finite");
}

MlpNetwork MlpNetwork::Zeros(std::span<const std::size_t> shape) {
  Require(shape.size() >= 2, Errc::kShapeMismatch, "shape needs at least two entries");
  std::vector<Layer> layers;
  for (std::size_t l = 1; l < shape.size(); ++l) {
    layers.push_back({DenseMatrix(shape[l], shape[l - 1]), std::vector<double>(shape[l], 0.0)});
  }
  return MlpNetwork(std::move(layers));
}

std::size_t MlpNetwork::input_dim() const { return layers_.front().weights.cols(); }
std::size_t MlpNetwork::output_dim() const { return layers_.back().weights.rows(); }

std::vector<std::size_t> MlpNetwork::shape() const {
  std::vector<std::size_t> s{input_dim()};
  for (const Layer& layer : layers_) s.push_back(layer.weights.rows());
  return s;
}

std::size_t MlpNetwork::num_params() const {
  std::size_t n = 0;
  for (const Layer& layer : layers_) n += layer.weights.size() + layer.bias.size();
  return n;
}

std::size_t MlpNetwork::layer_offset(std::size_t l) const {
  std::size_t n = 0;
  for (std::size_t k = 0; k < l; ++k) n += layers_[k].weights.size() + layers_[k].bias.size();
  return n;
}

std::vector<double> MlpNetwork::FlatParams() const {
  std::vector<double> out;
  out.reserve(num_params());
  for (const Layer& layer : layers_) {
    out.insert(out.end(), layer.weights.data().begin(), layer.weights.data().end());
    out.insert(out.end(), layer.bias.begin(), layer.bias.end());
  }
  return out;
}

void MlpNetwork::SetFlatParams(std::span<const double> params) {
  Require(params.size() == num_params(), Errc::kDimensionMismatch,
          "flat parameter vector has the wrong length");
  std::size_t pos = 0;
  for (Layer& layer : layers_) {
    auto w = layer.weights.data();
    std::copy_n(params.begin() + static_cast<std::ptrdiff_t>(pos), w.size(), w.begin());
    pos += w.size();
    std::copy_n(params.begin() + static_cast<std::ptrdiff_t>(pos), layer.bias.size(),
                layer.bias.begin());
    pos += layer.bias.size();
  }
}

bool MlpNetwork::AllFinite() const {
  for (const Layer& layer : layers_) {
    if (!layer.weights.AllFinite()) return false;
    for (double b : layer.bias)
      if (!std::isfinite(b)) return false;
  }
  return true;
}

std::string_view LossKindName(LossKind kind) {
  return kind == LossKind::kSquared ? "squared" : "softmax_cross_entropy";
}

LossKind ParseLossKind(std::string_view name) {
  if (name == "squared") return LossKind::kSquared;
  if (name == "softmax_cross_entropy" || name == "cross_entropy")
    return LossKind::kSoftmaxCrossEntropy;
  Fail(Errc::kInvalidArgument, "unknown loss '" + std::string(name) + "'");
}

LabeledSet LabeledSet::Regression(DenseMatrix inputs, DenseMatrix targets) {
  Require(inputs.rows() >= 1, Errc::kInvalidArgument, "labeled set must be nonempty");
  Require(inputs.rows() == targets.rows(), Errc::kDimensionMismatch,
          "inputs and targets differ in sample count");
  LabeledSet s;
  s.inputs_ = std::move(inputs);
  s.targets_ = std::move(targets);
  return s;
}

LabeledSet LabeledSet::Classification(DenseMatrix inputs, std::vector<std::uint32_t> labels,
                                      std::size_t num_classes) {
  Require(inputs.rows() >= 1, Errc::kInvalidArgument, "labeled set must be nonempty");
  Require(inputs.rows() == labels.size(), Errc::kDimensionMismatch,
          "inputs and labels differ in sample count");
  for (std::uint32_t y : labels)
    Require(y < num_classes, Errc::kInvalidArgument, "label outside [0, num_classes)");
  LabeledSet s;
  s.inputs_ = std::move(inputs);
  s.labels_ = std::move(labels);
  s.num_classes_ = num_classes;
  return s;
}

LabeledSet LabeledSet::Subset(std::span<const std::size_t> indices) const {
  DenseMatrix x(indices.size(), input_dim());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    Require(indices[i] < size(), Errc::kInvalidArgument, "subset index out of range");
    std::copy_n(inputs_.row(indices[i]).begin(), input_dim(), x.row(i).begin());
  }
  if (is_classification()) {
    std::vector<std::uint32_t> y(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) y[i] = labels_[indices[i]];
    return Classification(std::move(x), std::move(y), num_classes_);
  }
  DenseMatrix t(indices.size(), target_dim());
  for (std::size_t i = 0; i < indices.size(); ++i)
    std::copy_n(targets_.row(indices[i]).begin(), target_dim(), t.row(i).begin());
  return Regression(std::move(x), std::move(t));
}

void Validate(const MlpNetwork& net, const ParamSelector& sel) {
  Require(sel.layer < net.num_layers(), Errc::kMissingLayer,
          "layer index " + std::to_string(sel.layer) + " out of range");
  if (sel.kind == ParamSelector::Kind::kNeuronColumn) {
    Require(sel.column < net.layer(sel.layer).weights.cols(), Errc::kInvalidArgument,
            "column index out of range");
  }
}

std::size_t SelectedCount(const MlpNetwork& net, const ParamSelector& sel) {
  Validate(net, sel);
  const DenseMatrix& w = net.layer(sel.layer).weights;
  return sel.kind == ParamSelector::Kind::kLayer ? w.size() : w.rows();
}

std::vector<std::size_t> SelectedFlatIndices(const MlpNetwork& net, const ParamSelector& sel) {
  Validate(net, sel);
  const DenseMatrix& w = net.layer(sel.layer).weights;
  const std::size_t offset = net.layer_offset(sel.layer);
  std::vector<std::size_t> idx;
  if (sel.kind == ParamSelector::Kind::kLayer) {
    for (std::size_t k = 0; k < w.size(); ++k) idx.push_back(offset + k);
  } else {
    for (std::size_t i = 0; i < w.rows(); ++i) idx.push_back(offset + i * w.cols() + sel.column);
  }
  return idx;
}

std::vector<double> GatherSelected(const MlpNetwork& net, const ParamSelector& sel) {
  Validate(net, sel);
  const DenseMatrix& w = net.layer(sel.layer).weights;
  if (sel.kind == ParamSelector::Kind::kLayer)
    return {w.data().begin(), w.data().end()};
  return w.column(sel.column);
}

std::vector<double> Forward(const MlpNetwork& net, std::span<const double> x) {
  Require(x.size() == net.input_dim(), Errc::kDimensionMismatch,
          "input dimension does not match the network");
  std::vector<double> h(x.begin(), x.end());
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const Layer& layer = net.layer(l);
    std::vector<double> z = Multiply(layer.weights, h);
    for (std::size_t i = 0; i < z.size(); ++i) {
      z[i] += layer.bias[i];
      if (l + 1 < net.num_layers()) z[i] = std::max(z[i], 0.0);
    }
    h = std::move(z);
  }
  return h;
}

double SummedLoss(const MlpNetwork& net, const LabeledSet& data, LossKind loss) {
  const auto pass = engine::RunForward(net, engine::ViewOf(data), loss, false);
  const double total = PairwiseSum(pass.losses);
  Require(std::isfinite(total), Errc::kNonFinite, "loss is not finite");
  return total;
}

double EmpiricalError(const MlpNetwork& net, const LabeledSet& data, LossKind loss) {
  return SummedLoss(net, data, loss) / static_cast<double>(data.size());
}

std::vector<double> Gradient(const MlpNetwork& net, const LabeledSet& data, LossKind loss) {
  return LossSurface(net, data, loss).Gradient();
}

std::vector<double> Hvp(const MlpNetwork& net, const LabeledSet& data, LossKind loss,
                        const ParamSelector& sel, std::span<const double> v) {
  return LossSurface(net, data, loss).Hvp(sel, v);
}

double MinAbsPreactivation(const MlpNetwork& net, const LabeledSet& data) {
  const engine::BatchView view = engine::ViewOf(data);
  Require(view.dim == net.input_dim(), Errc::kDimensionMismatch, "input dimension");
  double m = std::numeric_limits<double>::infinity();
  engine::Mat h = view.inputs();
  for (std::size_t l = 0; l + 1 < net.num_layers(); ++l) {
    engine::Mat z = engine::Weights(net.layer(l)) * h;
    z.colwise() += engine::Bias(net.layer(l));
    m = std::min(m, z.cwiseAbs().minCoeff());
    h = z.cwiseMax(0.0);
  }
  return m;
}

}  // namespace flatmeter
