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

#include <gtest/gtest.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "common/io.hpp"
#include "data/checkpoint.hpp"
#include "support/fixtures.hpp"
#include "trainer/trainer.hpp"

namespace flatmeter {
namespace {

namespace fs = std::filesystem;
using testing::CaughtCode;

class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() /
            (std::string("flatmeter_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string File(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

void PutBe32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

void WriteBytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

// Two 2x2 images with labels {3, 7}.
struct IdxPair {
  std::vector<std::uint8_t> images, labels;
};

IdxPair TinyIdx() {
  IdxPair p;
  PutBe32(p.images, kIdxImageMagic);
  PutBe32(p.images, 2);
  PutBe32(p.images, 2);
  PutBe32(p.images, 2);
  for (std::uint8_t v : {0, 255, 51, 102, 255, 0, 0, 255}) p.images.push_back(v);
  PutBe32(p.labels, kIdxLabelMagic);
  PutBe32(p.labels, 2);
  p.labels.push_back(3);
  p.labels.push_back(7);
  return p;
}

TEST(IdxTest, ParsesAndNormalizes) {
  TempDir dir;
  const IdxPair p = TinyIdx();
  WriteBytes(dir.File("img"), p.images);
  WriteBytes(dir.File("lbl"), p.labels);
  const LabeledSet s = LoadMnistIdx(dir.File("img"), dir.File("lbl"));
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s.input_dim(), 4u);
  EXPECT_EQ(s.inputs()(0, 1), 1.0);
  EXPECT_EQ(s.inputs()(0, 2), 0.2);
  EXPECT_EQ(s.labels()[0], 3u);
  EXPECT_EQ(s.labels()[1], 7u);
}

TEST(IdxTest, WrongMagicIsRejected) {
  TempDir dir;
  IdxPair p = TinyIdx();
  WriteBytes(dir.File("img"), p.images);
  p.labels[3] = 0x03;  // label file claiming to be images
  WriteBytes(dir.File("lbl"), p.labels);
  EXPECT_EQ(CaughtCode([&] { LoadMnistIdx(dir.File("img"), dir.File("lbl")); }), Errc::kBadMagic);
}

TEST(IdxTest, TruncatedPayloadIsRejected) {
  TempDir dir;
  IdxPair p = TinyIdx();
  p.images[7] = 0x60;  // declare 96 items; the file still holds 2
  p.images[6] = 0xEA;  // 60000 = 0xEA60
  WriteBytes(dir.File("img"), p.images);
  PutBe32(p.labels, 0);
  p.labels[6] = 0xEA;
  p.labels[7] = 0x60;
  WriteBytes(dir.File("lbl"), p.labels);
  EXPECT_EQ(CaughtCode([&] { LoadMnistIdx(dir.File("img"), dir.File("lbl")); }),
            Errc::kTruncatedFile);
}

TEST(IdxTest, CountMismatchAndMissingFile) {
  TempDir dir;
  IdxPair p = TinyIdx();
  WriteBytes(dir.File("img"), p.images);
  p.labels[7] = 1;
  p.labels.pop_back();
  WriteBytes(dir.File("lbl"), p.labels);
  EXPECT_EQ(CaughtCode([&] { LoadMnistIdx(dir.File("img"), dir.File("lbl")); }),
            Errc::kCountMismatch);
  EXPECT_EQ(CaughtCode([&] { LoadMnistIdx(dir.File("nope"), dir.File("lbl")); }), Errc::kIoError);
}

TEST(MnistTest, OfficialSplitWhenAvailable) {
  const std::string dir = FindMnistDir(DefaultDataRoot());
  if (dir.empty()) GTEST_SKIP() << "MNIST not found under FLATMETER_DATA";
  const DatasetBundle b = LoadMnistBundle(dir, 0, 0);
  ASSERT_EQ(b.train.size(), 60000u);
  ASSERT_EQ(b.test.size(), 10000u);
  for (const LabeledSet* s : {&b.train, &b.test}) {
    EXPECT_EQ(s->input_dim(), 784u);
    for (double v : s->inputs().data()) ASSERT_TRUE(v >= 0.0 && v <= 1.0);
    for (std::uint32_t y : s->labels()) ASSERT_LT(y, 10u);
  }
}

TEST(StratifiedPrefixTest, BalancedAndDeterministic) {
  DenseMatrix x(30, 1);
  std::vector<std::uint32_t> y(30);
  for (std::size_t i = 0; i < 30; ++i) y[i] = i < 20 ? 0 : static_cast<std::uint32_t>(1 + i % 2);
  const auto set = LabeledSet::Classification(x, y, 3);
  const auto idx = StratifiedPrefix(set, 9);
  ASSERT_EQ(idx.size(), 9u);
  std::vector<int> counts(3, 0);
  for (std::size_t i : idx) ++counts[y[i]];
  EXPECT_EQ(counts, (std::vector<int>{3, 3, 3}));
  EXPECT_EQ(idx, StratifiedPrefix(set, 9));
}

TEST(SyntheticTeacherTest, DeterministicAndRealizable) {
  const DatasetBundle a = SyntheticTeacher(5, 3, {4}, 20, 8);
  const DatasetBundle b = SyntheticTeacher(5, 3, {4}, 20, 8);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
  ASSERT_TRUE(a.teacher.has_value());
  // Targets come from the per-sample forward path, the loss from the batched
  // one; only rounding separates them.
  EXPECT_LE(EmpiricalError(*a.teacher, a.train, LossKind::kSquared), 1e-24);
  EXPECT_LE(EmpiricalError(*a.teacher, a.test, LossKind::kSquared), 1e-24);
  EXPECT_NE(SyntheticTeacher(6, 3, {4}, 20, 8).train, a.train);
  EXPECT_EQ(CaughtCode([] { SyntheticTeacher(1, 3, {4}, 0, 8); }), Errc::kInvalidArgument);
}

TEST(CheckpointTest, ExactRoundTrip) {
  MlpNetwork net = Initialize(std::vector<std::size_t>{5, 7, 3}, InitScheme::kXavierNormal, 8);
  net.mutable_layer(0).weights(0, 0) = 0.1;
  net.mutable_layer(0).weights(0, 1) = 1.0 / 3.0;
  net.mutable_layer(0).weights(0, 2) = std::numeric_limits<double>::denorm_min();
  net.mutable_layer(0).weights(0, 3) = -std::numeric_limits<double>::max();
  net.mutable_layer(1).bias[2] = -0.0;
  const CheckpointMetadata meta{42, "abc123"};
  const Checkpoint back = ParseCheckpoint(SerializeCheckpoint(net, meta));
  const auto p = net.FlatParams(), q = back.network.FlatParams();
  ASSERT_EQ(p.size(), q.size());
  for (std::size_t i = 0; i < p.size(); ++i)
    EXPECT_EQ(std::memcmp(&p[i], &q[i], sizeof(double)), 0) << i;
  EXPECT_EQ(back.metadata, meta);
}

TEST(CheckpointTest, EmpiricalErrorBitIdenticalAfterReload) {
  TempDir dir;
  const DatasetBundle b = SyntheticTeacher(3, 4, {6}, 30, 5);
  const MlpNetwork net = Initialize(std::vector<std::size_t>{4, 6, 1}, InitScheme::kNormalSigma, 2);
  SaveCheckpoint(dir.File("sub/net.json"), net, {});
  const Checkpoint back = LoadCheckpoint(dir.File("sub/net.json"));
  EXPECT_EQ(EmpiricalError(back.network, b.train, LossKind::kSquared),
            EmpiricalError(net, b.train, LossKind::kSquared));
  EXPECT_EQ(CaughtCode([&] { LoadCheckpoint(dir.File("absent.json")); }),
            Errc::kMissingCheckpoint);
}

TEST(CheckpointTest, VersionAndCorruption) {
  const MlpNetwork net = Initialize(std::vector<std::size_t>{2, 2}, InitScheme::kNormalSigma, 2);
  std::string text = SerializeCheckpoint(net, {});
  const auto pos = text.find("\"version\"");
  ASSERT_NE(pos, std::string::npos);
  std::string future = text;
  const auto colon = future.find(':', pos);
  future.replace(colon + 1, future.find_first_of(",}\n", colon) - colon - 1, " 99");
  EXPECT_EQ(CaughtCode([&] { ParseCheckpoint(future); }), Errc::kVersionMismatch);
  EXPECT_EQ(CaughtCode([&] { ParseCheckpoint(text.substr(0, text.size() / 2)); }),
            Errc::kCorruptFile);
}

}  // namespace
}  // namespace flatmeter
