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

#ifndef FLATMETER_DATA_DATASETS_HPP_
#define FLATMETER_DATA_DATASETS_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "net/mlp.hpp"

namespace flatmeter {

struct DatasetBundle {
  std::string name;
  LabeledSet train;
  LabeledSet test;
  std::optional<MlpNetwork> teacher;  // synthetic bundles only
};

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

// IDX image + label pair. Pixels are divided by 255; labels must be 0..9.
// Errors: IoError, BadMagic, TruncatedFile, CountMismatch.
LabeledSet LoadMnistIdx(const std::string& images_path, const std::string& labels_path);

// Indices of the first samples in dataset order such that each class gets
// n / C entries (the first n % C classes one more). Classes that run short
// are topped up from the remaining samples, still in order. Sorted.
std::vector<std::size_t> StratifiedPrefix(const LabeledSet& set, std::size_t n);

// Dataset root: $FLATMETER_DATA if set, else the build-time default (may be
// empty).
std::string DefaultDataRoot();

// Directory holding the four MNIST IDX files under `root` (root/mnist or
// root itself); empty if neither has them.
std::string FindMnistDir(const std::string& root);

// Official split, optionally reduced by StratifiedPrefix (0 keeps all).
DatasetBundle LoadMnistBundle(const std::string& dir, std::size_t train_count,
                              std::size_t test_count);

// Inputs ~ N(0, I); targets = teacher(x) for a frozen random ReLU teacher
// with the given hidden widths (Kaiming-uniform weights, small biases).
DatasetBundle SyntheticTeacher(std::uint64_t seed, std::size_t input_dim,
                               const std::vector<std::size_t>& hidden, std::size_t n_train,
                               std::size_t n_test, std::size_t output_dim = 1);

}  // namespace flatmeter

#endif  // FLATMETER_DATA_DATASETS_HPP_
