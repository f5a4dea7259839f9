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

#include "net/loss_surface.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "common/error.hpp"
#include "common/reduce.hpp"
#include "net/engine.hpp"

namespace flatmeter {

using engine::Mat;

struct LossSurface::State {
  MlpNetwork net;
  engine::BatchView batch;
  LossKind loss;
  engine::ForwardPass pass;
};

namespace {

// Samples per block when materializing per-sample output Jacobians.
constexpr Eigen::Index kJacobianChunk = 1024;

Mat InputBlock(const LossSurface::State& s, std::size_t l, Eigen::Index c0, Eigen::Index n) {
  return engine::LayerInput(s.pass, s.batch, l).middleCols(c0, n);
}

// Applies the output-loss Hessian Q to tangents at z_L, divided by N.
void ApplyOutputCurvature(const LossSurface::State& s, Mat& t) {
  const double inv_n = 1.0 / static_cast<double>(s.batch.count);
  if (s.loss == LossKind::kSquared) {
    t *= 2.0 * inv_n;
    return;
  }
  const Mat& p = s.pass.probs;
  const Eigen::RowVectorXd pt = p.cwiseProduct(t).colwise().sum();
  t = p.cwiseProduct(t - pt.replicate(t.rows(), 1)) * inv_n;
}

// Column block of d z_L[o] / d z_l, one column per sample in [c0, c0 + n).
Mat OutputJacobianRow(const LossSurface::State& s, std::size_t l, std::size_t o,
                      Eigen::Index c0, Eigen::Index n) {
  const std::size_t depth = s.net.num_layers();
  Mat d = Mat::Zero(static_cast<Eigen::Index>(s.net.output_dim()), n);
  d.row(static_cast<Eigen::Index>(o)).setOnes();
  for (std::size_t k = depth - 1; k > l; --k) {
    Mat up = engine::Weights(s.net.layer(k)).transpose() * d;
    engine::ApplyReluMask(up, s.pass.pre[k - 1].middleCols(c0, n));
    d = std::move(up);
  }
  return d;
}

// Accumulates, for a block of samples, the per-sample curvature weight
//   squared:        2 sum_o g_o^2
//   cross-entropy:  sum_o p_o g_o^2 - (sum_o p_o g_o)^2
// where g_o = project(delta_o) is some linear image of the Jacobian row.
// Samples run along columns of g unless samples_in_rows is set.
template <typename Project>
Mat CurvatureWeights(const LossSurface::State& s, std::size_t l, Eigen::Index c0,
                     Eigen::Index n, bool samples_in_rows, Project project) {
  const bool ce = s.loss == LossKind::kSoftmaxCrossEntropy;
  Mat second;
  Mat first;
  for (std::size_t o = 0; o < s.net.output_dim(); ++o) {
    const Mat g = project(OutputJacobianRow(s, l, o, c0, n));
    if (second.size() == 0) {
      second = Mat::Zero(g.rows(), g.cols());
      if (ce) first = Mat::Zero(g.rows(), g.cols());
    }
    if (!ce) {
      second += 2.0 * g.cwiseAbs2();
      continue;
    }
    const auto prow = s.pass.probs.row(static_cast<Eigen::Index>(o)).segment(c0, n);
    if (!samples_in_rows) {
      second += g.cwiseAbs2().cwiseProduct(prow.replicate(g.rows(), 1));
      first += g.cwiseProduct(prow.replicate(g.rows(), 1));
    } else {
      second += g.cwiseAbs2().cwiseProduct(prow.transpose().replicate(1, g.cols()));
      first += g.cwiseProduct(prow.transpose().replicate(1, g.cols()));
    }
  }
  if (ce) second -= first.cwiseAbs2();
  return second;
}

}  // namespace

LossSurface::LossSurface(const MlpNetwork& net, const LabeledSet& data, LossKind loss) {
  Require(net.AllFinite(), Errc::kNonFinite, "network parameters must be finite");
  auto state = std::make_shared<State>();
  state->net = net;
  state->batch = engine::ViewOf(data);
  state->loss = loss;
  state->pass = engine::RunForward(state->net, state->batch, loss, true);
  state_ = std::move(state);
}

const MlpNetwork& LossSurface::network() const { return state_->net; }
LossKind LossSurface::loss() const { return state_->loss; }
std::size_t LossSurface::sample_count() const { return state_->batch.count; }

double LossSurface::EmpiricalError() const {
  const double total = PairwiseSum(state_->pass.losses);
  Require(std::isfinite(total), Errc::kNonFinite, "loss is not finite");
  return total / static_cast<double>(state_->batch.count);
}

std::vector<double> LossSurface::Gradient() const {
  std::vector<double> grad(state_->net.num_params());
  engine::Backward(state_->net, state_->batch, state_->pass, grad);
  return grad;
}

std::vector<double> LossSurface::Hvp(const ParamSelector& sel, std::span<const double> v) const {
  const State& s = *state_;
  Require(v.size() == SelectedCount(s.net, sel), Errc::kDimensionMismatch,
          "direction length does not match the selected parameters");
  for (double x : v) Require(std::isfinite(x), Errc::kNonFinite, "direction is not finite");
  const std::size_t depth = s.net.num_layers();
  const std::size_t l = sel.layer;
  const Layer& layer = s.net.layer(l);
  const auto rows = static_cast<Eigen::Index>(layer.weights.rows());
  const auto cols = static_cast<Eigen::Index>(layer.weights.cols());
  const Eigen::Ref<const Mat> in = engine::LayerInput(s.pass, s.batch, l);
  const bool column = sel.kind == ParamSelector::Kind::kNeuronColumn;
  const auto j = static_cast<Eigen::Index>(sel.column);

  // Forward tangent of z_l, pushed to the output with the mask frozen.
  Mat t;
  if (column) {
    const Eigen::Map<const Eigen::VectorXd> vj(v.data(), rows);
    t.noalias() = vj * in.row(j);
  } else {
    const Eigen::Map<const engine::RowMajorMat> vm(v.data(), rows, cols);
    t.noalias() = vm * in;
  }
  for (std::size_t k = l; k + 1 < depth; ++k) {
    engine::ApplyReluMask(t, s.pass.pre[k]);
    Mat next = engine::Weights(s.net.layer(k + 1)) * t;
    t = std::move(next);
  }
  ApplyOutputCurvature(s, t);
  for (std::size_t k = depth - 1; k > l; --k) {
    Mat up = engine::Weights(s.net.layer(k)).transpose() * t;
    engine::ApplyReluMask(up, s.pass.pre[k - 1]);
    t = std::move(up);
  }

  if (column) {
    std::vector<double> out(static_cast<std::size_t>(rows));
    Eigen::Map<Eigen::VectorXd>(out.data(), rows).noalias() = t * in.row(j).transpose();
    return out;
  }
  std::vector<double> out(static_cast<std::size_t>(rows * cols));
  Eigen::Map<engine::RowMajorMat>(out.data(), rows, cols).noalias() = t * in.transpose();
  return out;
}

std::vector<double> LossSurface::HessianDiagonal(const ParamSelector& sel) const {
  const State& s = *state_;
  Validate(s.net, sel);
  const std::size_t l = sel.layer;
  const Layer& layer = s.net.layer(l);
  const auto rows = static_cast<Eigen::Index>(layer.weights.rows());
  const auto cols = static_cast<Eigen::Index>(layer.weights.cols());
  const auto total = static_cast<Eigen::Index>(s.batch.count);
  engine::RowMajorMat diag = engine::RowMajorMat::Zero(rows, cols);
  for (Eigen::Index c0 = 0; c0 < total; c0 += kJacobianChunk) {
    const Eigen::Index n = std::min(kJacobianChunk, total - c0);
    const Mat w = CurvatureWeights(s, l, c0, n, false, [](Mat d) { return d; });  // rows x n
    const Mat h = InputBlock(s, l, c0, n);
    diag.noalias() += w * h.cwiseAbs2().transpose();
  }
  diag /= static_cast<double>(s.batch.count);
  if (sel.kind == ParamSelector::Kind::kNeuronColumn) {
    const Eigen::VectorXd c = diag.col(static_cast<Eigen::Index>(sel.column));
    return {c.data(), c.data() + c.size()};
  }
  return {diag.data(), diag.data() + diag.size()};
}

std::vector<double> LossSurface::ColumnQuadraticForms(std::size_t l) const {
  const State& s = *state_;
  Validate(s.net, ParamSelector::Layer(l));
  const auto w = engine::Weights(s.net.layer(l));
  const auto cols = static_cast<Eigen::Index>(w.cols());
  const auto total = static_cast<Eigen::Index>(s.batch.count);
  Eigen::VectorXd rho = Eigen::VectorXd::Zero(cols);
  for (Eigen::Index c0 = 0; c0 < total; c0 += kJacobianChunk) {
    const Eigen::Index n = std::min(kJacobianChunk, total - c0);
    // u_o[x, j] = sum_i delta_o[i, x] w[i, j]; the output tangent of column
    // direction c_j at sample x is h_j(x) u[x, j].
    const Mat q = CurvatureWeights(s, l, c0, n, true, [&](const Mat& d) -> Mat {
      return d.transpose() * w;
    });  // n x cols
    const Mat h = InputBlock(s, l, c0, n);  // cols x n
    rho.noalias() += q.cwiseProduct(h.transpose().cwiseAbs2()).colwise().sum().transpose();
  }
  rho /= static_cast<double>(s.batch.count);
  return {rho.data(), rho.data() + rho.size()};
}

SymmetricOperator LossSurface::HessianOperator(const ParamSelector& sel) const {
  SymmetricOperator op;
  op.dim = SelectedCount(state_->net, sel);
  LossSurface self = *this;
  op.apply = [self, sel](std::span<const double> in, std::span<double> out) {
    const std::vector<double> r = self.Hvp(sel, in);
    std::copy(r.begin(), r.end(), out.begin());
  };
  op.diagonal = [self, sel] { return self.HessianDiagonal(sel); };
  return op;
}

}  // namespace flatmeter
