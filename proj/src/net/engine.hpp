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

// Batched column-major kernels behind the network API. Samples are columns.

#ifndef FLATMETER_NET_ENGINE_HPP_
#define FLATMETER_NET_ENGINE_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "net/mlp.hpp"

namespace flatmeter::engine {

using Mat = Eigen::MatrixXd;
using ConstMap = Eigen::Map<const Mat>;
using RowMajorMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using WeightMap = Eigen::Map<const RowMajorMat>;

inline WeightMap Weights(const Layer& layer) {
  return WeightMap(layer.weights.data().data(), static_cast<Eigen::Index>(layer.weights.rows()),
                   static_cast<Eigen::Index>(layer.weights.cols()));
}

inline Eigen::Map<const Eigen::VectorXd> Bias(const Layer& layer) {
  return {layer.bias.data(), static_cast<Eigen::Index>(layer.bias.size())};
}

// Non-owning view of a batch; x is d x count, targets k x count.
struct BatchView {
  const double* x = nullptr;
  std::size_t dim = 0;
  std::size_t count = 0;
  const std::uint32_t* labels = nullptr;
  const double* targets = nullptr;
  std::size_t target_dim = 0;

  ConstMap inputs() const {
    return {x, static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(count)};
  }
  ConstMap target_matrix() const {
    return {targets, static_cast<Eigen::Index>(target_dim), static_cast<Eigen::Index>(count)};
  }
};

BatchView ViewOf(const LabeledSet& data);

struct ForwardPass {
  std::vector<Mat> pre;   // z_1 .. z_L
  std::vector<Mat> post;  // h_1 .. h_{L-1}
  Mat probs;              // softmax(z_L), cross-entropy only
  Mat dloss;              // d loss / d z_L per sample, unscaled
  std::vector<double> losses;
};

ForwardPass RunForward(const MlpNetwork& net, const BatchView& batch, LossKind loss,
                       bool with_loss_grad);

// h_{l} feeding layer l (0-based), i.e. the inputs for l == 0.
Eigen::Ref<const Mat> LayerInput(const ForwardPass& pass, const BatchView& batch,
                                 std::size_t l);

// Mean-loss gradient in the flat layout.
void Backward(const MlpNetwork& net, const BatchView& batch, const ForwardPass& pass,
              std::span<double> grad);

// Zeroes entries whose pre-activation is <= 0 (sigma'(0) = 0).
void ApplyReluMask(Mat& m, const Eigen::Ref<const Mat>& pre);

void CheckTargets(const MlpNetwork& net, const BatchView& batch, LossKind loss);

}  // namespace flatmeter::engine

#endif  // FLATMETER_NET_ENGINE_HPP_
