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

#include "data/datasets.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>

#include "common/error.hpp"
#include "common/io.hpp"
#include "common/random.hpp"
#include "trainer/trainer.hpp"

#ifndef FLATMETER_DEFAULT_DATA_ROOT
#define FLATMETER_DEFAULT_DATA_ROOT ""
#endif

namespace flatmeter {
namespace {

constexpr std::size_t kMnistClasses = 10;
constexpr std::uint64_t kTeacherStream = 0x7eac4e;
constexpr std::uint64_t kInputStream = 0x1a907;

std::uint32_t BigEndian32(const std::string& bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (std::size_t i = 0; i < 4; ++i)
    v = (v << 8) | static_cast<unsigned char>(bytes[offset + i]);
  return v;
}

void CheckHeader(const std::string& bytes, std::size_t header, std::uint32_t magic,
                 const std::string& path) {
  Require(bytes.size() >= 4, Errc::kTruncatedFile, "'" + path + "' is shorter than its magic");
  const std::uint32_t got = BigEndian32(bytes, 0);
  Require(got == magic, Errc::kBadMagic,
          "'" + path + "' has magic " + std::to_string(got) + ", expected " +
              std::to_string(magic));
  Require(bytes.size() >= header, Errc::kTruncatedFile, "'" + path + "' header is truncated");
}

}  // namespace

LabeledSet LoadMnistIdx(const std::string& images_path, const std::string& labels_path) {
  const std::string images = ReadFile(images_path);
  const std::string labels = ReadFile(labels_path);
  CheckHeader(images, 16, kIdxImageMagic, images_path);
  CheckHeader(labels, 8, kIdxLabelMagic, labels_path);

  const std::size_t count = BigEndian32(images, 4);
  const std::size_t rows = BigEndian32(images, 8);
  const std::size_t cols = BigEndian32(images, 12);
  const std::size_t label_count = BigEndian32(labels, 4);
  Require(count == label_count, Errc::kCountMismatch,
          "image file has " + std::to_string(count) + " items, label file " +
              std::to_string(label_count));
  Require(count >= 1 && rows >= 1 && cols >= 1, Errc::kCountMismatch, "IDX file declares no data");
  const std::size_t dim = rows * cols;
  Require(images.size() >= 16 + count * dim, Errc::kTruncatedFile,
          "'" + images_path + "' is shorter than its header declares");
  Require(labels.size() >= 8 + count, Errc::kTruncatedFile,
          "'" + labels_path + "' is shorter than its header declares");

  DenseMatrix x(count, dim);
  auto data = x.data();
  for (std::size_t i = 0; i < count * dim; ++i)
    data[i] = static_cast<unsigned char>(images[16 + i]) / 255.0;
  std::vector<std::uint32_t> y(count);
  for (std::size_t i = 0; i < count; ++i) {
    y[i] = static_cast<unsigned char>(labels[8 + i]);
    Require(y[i] < kMnistClasses, Errc::kCountMismatch, "label outside 0..9");
  }
  return LabeledSet::Classification(std::move(x), std::move(y), kMnistClasses);
}

std::vector<std::size_t> StratifiedPrefix(const LabeledSet& set, std::size_t n) {
  Require(set.is_classification(), Errc::kInvalidArgument,
          "stratified subsets need class labels");
  Require(n >= 1 && n <= set.size(), Errc::kInvalidArgument, "subset size out of range");
  const std::size_t classes = set.num_classes();
  std::vector<std::size_t> quota(classes, n / classes);
  for (std::size_t c = 0; c < n % classes; ++c) ++quota[c];
  std::vector<bool> taken(set.size(), false);
  std::size_t picked = 0;
  for (std::size_t i = 0; i < set.size() && picked < n; ++i) {
    const std::uint32_t y = set.labels()[i];
    if (quota[y] > 0) {
      --quota[y];
      taken[i] = true;
      ++picked;
    }
  }
  for (std::size_t i = 0; i < set.size() && picked < n; ++i) {
    if (!taken[i]) {
      taken[i] = true;
      ++picked;
    }
  }
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < set.size(); ++i)
    if (taken[i]) idx.push_back(i);
  return idx;
}

std::string DefaultDataRoot() {
  if (const char* env = std::getenv("FLATMETER_DATA"); env != nullptr && *env != '\0') return env;
  return FLATMETER_DEFAULT_DATA_ROOT;
}

std::string FindMnistDir(const std::string& root) {
  if (root.empty()) return {};
  for (const std::string& dir : {root + "/mnist", root}) {
    if (FileExists(dir + "/train-images-idx3-ubyte") &&
        FileExists(dir + "/train-labels-idx1-ubyte") &&
        FileExists(dir + "/t10k-images-idx3-ubyte") && FileExists(dir + "/t10k-labels-idx1-ubyte"))
      return dir;
  }
  return {};
}

DatasetBundle LoadMnistBundle(const std::string& dir, std::size_t train_count,
                              std::size_t test_count) {
  DatasetBundle b;
  b.name = "mnist";
  b.train = LoadMnistIdx(dir + "/train-images-idx3-ubyte", dir + "/train-labels-idx1-ubyte");
  b.test = LoadMnistIdx(dir + "/t10k-images-idx3-ubyte", dir + "/t10k-labels-idx1-ubyte");
  if (train_count > 0) b.train = b.train.Subset(StratifiedPrefix(b.train, train_count));
  if (test_count > 0) b.test = b.test.Subset(StratifiedPrefix(b.test, test_count));
  return b;
}

DatasetBundle SyntheticTeacher(std::uint64_t seed, std::size_t input_dim,
                               const std::vector<std::size_t>& hidden, std::size_t n_train,
                               std::size_t n_test, std::size_t output_dim) {
  Require(input_dim >= 1 && output_dim >= 1, Errc::kInvalidArgument,
          "teacher dimensions must be >= 1");
  Require(n_train >= 1 && n_test >= 1, Errc::kInvalidArgument,
          "synthetic train and test sets must be nonempty");
  std::vector<std::size_t> shape{input_dim};
  shape.insert(shape.end(), hidden.begin(), hidden.end());
  shape.push_back(output_dim);
  MlpNetwork teacher =
      Initialize(shape, InitScheme::kKaimingUniform, DeriveSeed(seed, {kTeacherStream}));
  Rng bias_rng(seed, kTeacherStream);
  for (std::size_t l = 0; l < teacher.num_layers(); ++l)
    for (double& b : teacher.mutable_layer(l).bias) b = bias_rng.Uniform(-0.1, 0.1);

  Rng rng(seed, kInputStream);
  auto make = [&](std::size_t n) {
    DenseMatrix x(n, input_dim);
    for (double& v : x.data()) v = rng.Normal();
    DenseMatrix y(n, output_dim);
    for (std::size_t i = 0; i < n; ++i) {
      const std::vector<double> out = Forward(teacher, x.row(i));
      std::copy(out.begin(), out.end(), y.row(i).begin());
    }
    return LabeledSet::Regression(std::move(x), std::move(y));
  };
  DatasetBundle b;
  b.name = "synthetic_teacher";
  b.train = make(n_train);
  b.test = make(n_test);
  b.teacher = std::move(teacher);
  return b;
}

}  // namespace flatmeter
