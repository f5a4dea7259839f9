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

#include "trainer/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "common/error.hpp"
#include "common/random.hpp"
#include "common/reduce.hpp"
#include "net/engine.hpp"

namespace flatmeter {
namespace {

constexpr std::uint64_t kInitStream = 0x1417;
constexpr std::uint64_t kShuffleStream = 0x5f1e;

// Contiguous copy of selected samples; the engine reads rows as columns.
struct GatheredBatch {
  std::vector<double> x;
  std::vector<double> targets;
  std::vector<std::uint32_t> labels;
  engine::BatchView view;
};

void Gather(const LabeledSet& data, std::span<const std::size_t> idx, GatheredBatch& out) {
  const std::size_t d = data.input_dim();
  out.x.resize(idx.size() * d);
  for (std::size_t i = 0; i < idx.size(); ++i)
    std::copy_n(data.inputs().row(idx[i]).begin(), d, out.x.begin() + i * d);
  out.view = {};
  out.view.x = out.x.data();
  out.view.dim = d;
  out.view.count = idx.size();
  if (data.is_classification()) {
    out.labels.resize(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) out.labels[i] = data.labels()[idx[i]];
    out.view.labels = out.labels.data();
  } else {
    const std::size_t k = data.target_dim();
    out.targets.resize(idx.size() * k);
    for (std::size_t i = 0; i < idx.size(); ++i)
      std::copy_n(data.targets().row(idx[i]).begin(), k, out.targets.begin() + i * k);
    out.view.targets = out.targets.data();
    out.view.target_dim = k;
  }
}

void Step(MlpNetwork& net, std::span<const double> grad, double lr) {
  std::size_t pos = 0;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    Layer& layer = net.mutable_layer(l);
    for (double& w : layer.weights.data()) w -= lr * grad[pos++];
    for (double& b : layer.bias) b -= lr * grad[pos++];
  }
}

}  // namespace

std::string_view InitSchemeName(InitScheme scheme) {
  switch (scheme) {
    case InitScheme::kXavierNormal: return "xavier_normal";
    case InitScheme::kKaimingUniform: return "kaiming_uniform";
    case InitScheme::kUniformPm01: return "uniform_pm01";
    case InitScheme::kNormalSigma: return "normal_sigma";
  }
  return "unknown";
}

InitScheme ParseInitScheme(std::string_view name) {
  for (InitScheme s : {InitScheme::kXavierNormal, InitScheme::kKaimingUniform,
                       InitScheme::kUniformPm01, InitScheme::kNormalSigma}) {
    if (InitSchemeName(s) == name) return s;
  }
  Fail(Errc::kUnknownScheme, "unknown initialization scheme '" + std::string(name) + "'");
}

MlpNetwork Initialize(std::span<const std::size_t> shape, InitScheme scheme,
                      std::uint64_t seed) {
  MlpNetwork net = MlpNetwork::Zeros(shape);
  Rng rng(seed, kInitStream);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    DenseMatrix& w = net.mutable_layer(l).weights;
    const double fan_in = static_cast<double>(w.cols());
    const double fan_out = static_cast<double>(w.rows());
    for (double& v : w.data()) {
      switch (scheme) {
        case InitScheme::kXavierNormal:
          v = rng.Normal(0.0, std::sqrt(2.0 / (fan_in + fan_out)));
          break;
        case InitScheme::kKaimingUniform: {
          const double bound = std::sqrt(6.0 / fan_in);
          v = rng.Uniform(-bound, bound);
          break;
        }
        case InitScheme::kUniformPm01:
          v = rng.UniformOpen(-0.1, 0.1);
          break;
        case InitScheme::kNormalSigma:
          v = rng.Normal(0.0, std::sqrt(0.1));
          break;
      }
    }
  }
  return net;
}

void Validate(const TrainConfig& cfg) {
  Require(cfg.batch_size >= 1, Errc::kInvalidArgument, "batch_size must be >= 1");
  Require(std::isfinite(cfg.learning_rate) && cfg.learning_rate >= 0.0, Errc::kInvalidArgument,
          "learning_rate must be finite and non-negative");
  Require(cfg.max_epochs >= 1, Errc::kInvalidArgument, "max_epochs must be >= 1");
  Require(cfg.patience >= 1, Errc::kInvalidArgument, "patience must be >= 1");
}

TrainOutcome SgdTrain(MlpNetwork net, const LabeledSet& train, const TrainConfig& cfg) {
  Validate(cfg);
  Require(train.size() >= 1, Errc::kInvalidArgument, "training set is empty");
  Require(cfg.batch_size <= train.size(), Errc::kInvalidArgument,
          "batch_size exceeds the training set size");
  const engine::BatchView full = engine::ViewOf(train);
  engine::CheckTargets(net, full, cfg.loss);

  const std::size_t n = train.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> grad(net.num_params());
  GatheredBatch batch;
  Rng shuffle(cfg.seed, kShuffleStream);

  TrainOutcome out;
  std::size_t streak = 0;
  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    // Fisher-Yates on the running order with the run's own stream.
    for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[shuffle.Below(i + 1)]);
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, n - start);
      Gather(train, std::span<const std::size_t>(order).subspan(start, count), batch);
      const engine::ForwardPass pass = engine::RunForward(net, batch.view, cfg.loss, true);
      if (!std::isfinite(PairwiseSum(pass.losses))) {
        out.diverged = true;
        break;
      }
      engine::Backward(net, batch.view, pass, grad);
      Step(net, grad, cfg.learning_rate);
    }
    out.epochs = epoch + 1;
    if (out.diverged) break;
    const double err =
        PairwiseSum(engine::RunForward(net, full, cfg.loss, false).losses) / static_cast<double>(n);
    out.loss_history.push_back(err);
    out.final_train_error = err;
    if (!std::isfinite(err) || !net.AllFinite()) {
      out.diverged = true;
      break;
    }
    streak = err <= cfg.train_error_threshold ? streak + 1 : 0;
    if (streak >= cfg.patience) {
      out.converged = true;
      break;
    }
  }
  if (out.diverged) out.final_train_error = std::numeric_limits<double>::infinity();
  out.network = std::move(net);
  return out;
}

}  // namespace flatmeter
