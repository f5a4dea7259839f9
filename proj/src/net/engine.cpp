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

#include "net/engine.hpp"

#include <cmath>
#include <utility>

#include "common/error.hpp"

namespace flatmeter::engine {

BatchView ViewOf(const LabeledSet& data) {
  BatchView v;
  v.x = data.inputs().data().data();
  v.dim = data.input_dim();
  v.count = data.size();
  if (data.is_classification()) {
    v.labels = data.labels().data();
  } else {
    v.targets = data.targets().data().data();
    v.target_dim = data.target_dim();
  }
  return v;
}

void CheckTargets(const MlpNetwork& net, const BatchView& batch, LossKind loss) {
  Require(batch.count >= 1, Errc::kInvalidArgument, "dataset is empty");
  Require(batch.dim == net.input_dim(), Errc::kDimensionMismatch,
          "input dimension does not match the network");
  if (loss == LossKind::kSquared) {
    Require(batch.targets != nullptr && batch.target_dim == net.output_dim(),
            Errc::kDimensionMismatch, "squared loss needs targets of the output dimension");
  } else {
    Require(batch.labels != nullptr, Errc::kDimensionMismatch,
            "cross-entropy loss needs class labels");
    for (std::size_t i = 0; i < batch.count; ++i) {
      Require(batch.labels[i] < net.output_dim(), Errc::kDimensionMismatch,
              "class label exceeds the output dimension");
    }
  }
}

ForwardPass RunForward(const MlpNetwork& net, const BatchView& batch, LossKind loss,
                       bool with_loss_grad) {
  CheckTargets(net, batch, loss);
  const std::size_t depth = net.num_layers();
  const auto n = static_cast<Eigen::Index>(batch.count);
  ForwardPass pass;
  pass.pre.resize(depth);
  pass.post.resize(depth - 1);
  for (std::size_t l = 0; l < depth; ++l) {
    const Layer& layer = net.layer(l);
    Eigen::Ref<const Mat> in = LayerInput(pass, batch, l);
    pass.pre[l].noalias() = Weights(layer) * in;
    pass.pre[l].colwise() += Bias(layer);
    if (l + 1 < depth) pass.post[l] = pass.pre[l].cwiseMax(0.0);
  }

  const Mat& out = pass.pre.back();
  pass.losses.resize(batch.count);
  if (with_loss_grad) pass.dloss.resize(out.rows(), n);
  if (loss == LossKind::kSquared) {
    const ConstMap y = batch.target_matrix();
    for (Eigen::Index c = 0; c < n; ++c) {
      const Eigen::VectorXd diff = out.col(c) - y.col(c);
      pass.losses[c] = diff.squaredNorm();
      if (with_loss_grad) pass.dloss.col(c) = 2.0 * diff;
    }
  } else {
    pass.probs.resize(out.rows(), n);
    for (Eigen::Index c = 0; c < n; ++c) {
      const double m = out.col(c).maxCoeff();
      Eigen::VectorXd e = (out.col(c).array() - m).exp();
      const double s = e.sum();
      pass.probs.col(c) = e / s;
      const std::uint32_t y = batch.labels[c];
      pass.losses[c] = std::log(s) + m - out(y, c);
      if (with_loss_grad) {
        pass.dloss.col(c) = pass.probs.col(c);
        pass.dloss(y, c) -= 1.0;
      }
    }
  }
  return pass;
}

void ApplyReluMask(Mat& m, const Eigen::Ref<const Mat>& pre) {
  m.array() *= (pre.array() > 0.0).cast<double>();
}

Eigen::Ref<const Mat> LayerInput(const ForwardPass& pass, const BatchView& batch,
                                 std::size_t l) {
  if (l == 0) return batch.inputs();
  return pass.post[l - 1];
}

void Backward(const MlpNetwork& net, const BatchView& batch, const ForwardPass& pass,
              std::span<double> grad) {
  const std::size_t depth = net.num_layers();
  Mat delta = pass.dloss / static_cast<double>(batch.count);
  for (std::size_t l = depth; l-- > 0;) {
    const Layer& layer = net.layer(l);
    const std::size_t offset = net.layer_offset(l);
    const auto rows = static_cast<Eigen::Index>(layer.weights.rows());
    const auto cols = static_cast<Eigen::Index>(layer.weights.cols());
    Eigen::Map<RowMajorMat> gw(grad.data() + offset, rows, cols);
    gw.noalias() = delta * LayerInput(pass, batch, l).transpose();
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + offset + rows * cols, rows);
    gb = delta.rowwise().sum();
    if (l > 0) {
      Mat up = Weights(layer).transpose() * delta;
      ApplyReluMask(up, pass.pre[l - 1]);
      delta = std::move(up);
    }
  }
}

}  // namespace flatmeter::engine
