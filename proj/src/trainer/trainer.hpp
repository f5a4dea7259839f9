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

#ifndef FLATMETER_TRAINER_TRAINER_HPP_
#define FLATMETER_TRAINER_TRAINER_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "net/mlp.hpp"

namespace flatmeter {

enum class InitScheme { kXavierNormal, kKaimingUniform, kUniformPm01, kNormalSigma };

std::string_view InitSchemeName(InitScheme scheme);
InitScheme ParseInitScheme(std::string_view name);  // throws UnknownScheme

// Weights per scheme, biases zero:
//   xavier_normal    N(0, 2 / (fan_in + fan_out))
//   kaiming_uniform  U[-sqrt(6 / fan_in), sqrt(6 / fan_in)]
//   uniform_pm01     U(-0.1, 0.1), open
//   normal_sigma     N(0, 0.1)
MlpNetwork Initialize(std::span<const std::size_t> shape, InitScheme scheme, std::uint64_t seed);

struct TrainConfig {
  InitScheme init_scheme = InitScheme::kXavierNormal;
  std::size_t batch_size = 32;
  double learning_rate = 0.01;
  std::uint64_t seed = 0;
  std::size_t max_epochs = 3000;
  double train_error_threshold = 0.07;
  std::size_t patience = 5;
  LossKind loss = LossKind::kSoftmaxCrossEntropy;
};

void Validate(const TrainConfig& cfg);

struct TrainOutcome {
  MlpNetwork network;
  std::size_t epochs = 0;
  double final_train_error = 0.0;  // +inf for diverged runs
  bool converged = false;
  bool diverged = false;
  std::vector<double> loss_history;  // mean training loss after each epoch

  friend bool operator==(const TrainOutcome&, const TrainOutcome&) = default;
};

// Plain mini-batch SGD. Each epoch visits a fresh permutation drawn from the
// run seed; the last batch may be short. Training stops once the full-set
// training loss has been <= threshold for `patience` consecutive epochs, at
// max_epochs, or when the loss becomes non-finite (diverged).
TrainOutcome SgdTrain(MlpNetwork net, const LabeledSet& train, const TrainConfig& cfg);

}  // namespace flatmeter

#endif  // FLATMETER_TRAINER_TRAINER_HPP_
