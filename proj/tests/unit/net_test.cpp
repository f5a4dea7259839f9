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

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "common/random.hpp"
#include "net/loss_surface.hpp"
#include "oracle/oracle.hpp"
#include "support/fixtures.hpp"

namespace flatmeter {
namespace {

using testing::CaughtCode;
using testing::MaxRelErr;
using testing::RidgeData;
using testing::RidgeNet;
using testing::TinyReluNet;

std::vector<double> RandomVector(std::size_t n, std::uint64_t seed) {
  Rng rng(seed, 2);
  std::vector<double> v(n);
  for (double& x : v) x = rng.Normal();
  return v;
}

double Inner(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Central differences of the loss itself: an independent route to the gradient.
std::vector<double> LossDifferenceGradient(const MlpNetwork& net, const LabeledSet& data,
                                           LossKind loss) {
  std::vector<double> p = net.FlatParams();
  std::vector<double> g(p.size());
  MlpNetwork probe = net;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double base = p[i];
    const double h = 1e-6 * (1.0 + std::abs(base));
    p[i] = base + h;
    probe.SetFlatParams(p);
    const double up = EmpiricalError(probe, data, loss);
    p[i] = base - h;
    probe.SetFlatParams(p);
    const double down = EmpiricalError(probe, data, loss);
    p[i] = base;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

TEST(ForwardTest, HandExamples) {
  const MlpNetwork tiny = TinyReluNet();
  EXPECT_EQ(Forward(tiny, std::vector<double>{2.0}), std::vector<double>{2.0});
  EXPECT_EQ(Forward(tiny, std::vector<double>{0.0}), std::vector<double>{0.0});
  const MlpNetwork lin({Layer{DenseMatrix{{3.0, 4.0}}, {0.0}}});
  EXPECT_EQ(Forward(lin, std::vector<double>{1.0, 1.0}), std::vector<double>{7.0});
}

TEST(ForwardTest, DimensionMismatch) {
  EXPECT_EQ(CaughtCode([] { Forward(TinyReluNet(), std::vector<double>{1.0, 2.0}); }),
            Errc::kDimensionMismatch);
}

TEST(MlpNetworkTest, ChainAndFiniteness) {
  EXPECT_EQ(CaughtCode([] {
              MlpNetwork({Layer{DenseMatrix(2, 3), {0, 0}}, Layer{DenseMatrix(1, 4), {0}}});
            }),
            Errc::kShapeMismatch);
  EXPECT_EQ(CaughtCode([] { MlpNetwork({Layer{DenseMatrix{{NAN}}, {0}}}); }), Errc::kNonFinite);
}

TEST(MlpNetworkTest, FlatLayoutIsWeightsRowMajorThenBias) {
  MlpNetwork net({Layer{DenseMatrix{{1, 2}, {3, 4}}, {5, 6}}, Layer{DenseMatrix{{7, 8}}, {9}}});
  EXPECT_EQ(net.FlatParams(), (std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8, 9}));
  EXPECT_EQ(net.layer_offset(1), 6u);
  EXPECT_EQ(SelectedFlatIndices(net, ParamSelector::NeuronColumn(0, 1)),
            (std::vector<std::size_t>{1, 3}));
  EXPECT_EQ(GatherSelected(net, ParamSelector::NeuronColumn(0, 1)), (std::vector<double>{2, 4}));
  EXPECT_EQ(CaughtCode([&] { Validate(net, ParamSelector::Layer(2)); }), Errc::kMissingLayer);
  EXPECT_EQ(CaughtCode([&] { Validate(net, ParamSelector::NeuronColumn(1, 2)); }),
            Errc::kInvalidArgument);
}

TEST(EmpiricalErrorTest, HandExamples) {
  const MlpNetwork tiny = TinyReluNet();  // f(2) = 2
  const auto one = LabeledSet::Regression(DenseMatrix{{2.0}}, DenseMatrix{{0.0}});
  EXPECT_EQ(EmpiricalError(tiny, one, LossKind::kSquared), 4.0);
  const auto two = LabeledSet::Regression(DenseMatrix{{2.0}, {2.0}}, DenseMatrix{{0.0}, {2.0}});
  EXPECT_EQ(EmpiricalError(tiny, two, LossKind::kSquared), 2.0);

  for (std::size_t k : {2u, 3u, 10u}) {
    MlpNetwork zero = MlpNetwork::Zeros(std::vector<std::size_t>{4, k});
    const auto data = LabeledSet::Classification(DenseMatrix{{1, 2, 3, 4}, {0, 0, 1, 0}},
                                                 {0u, static_cast<std::uint32_t>(k - 1)}, k);
    EXPECT_NEAR(EmpiricalError(zero, data, LossKind::kSoftmaxCrossEntropy),
                std::log(static_cast<double>(k)), 1e-15);
  }
}

TEST(EmpiricalErrorTest, CrossEntropyIsStableForLargeLogits) {
  MlpNetwork net({Layer{DenseMatrix{{1000.0}, {-1000.0}}, {0.0, 0.0}}});
  const auto data = LabeledSet::Classification(DenseMatrix{{1.0}}, {1u}, 2);
  EXPECT_NEAR(EmpiricalError(net, data, LossKind::kSoftmaxCrossEntropy), 2000.0, 1e-9);
}

TEST(GradientTest, SingleLinearUnit) {
  const MlpNetwork net({Layer{DenseMatrix{{3.0}}, {0.0}}});
  const auto data = LabeledSet::Regression(DenseMatrix{{1.0}}, DenseMatrix{{0.0}});
  const auto g = Gradient(net, data, LossKind::kSquared);
  ASSERT_EQ(g.size(), 2u);
  EXPECT_EQ(g[0], 6.0);
  EXPECT_EQ(g[1], 6.0);  // bias sees the same residual
}

TEST(GradientTest, ZeroAtExactFit) {
  MlpNetwork net({Layer{DenseMatrix{{1, 2}, {-1, 1}}, {0.5, 0.1}}, Layer{DenseMatrix{{1, -2}}, {0}}});
  DenseMatrix x{{1, 0}, {0.3, 0.7}, {-1, 2}};
  DenseMatrix y(3, 1);
  for (std::size_t s = 0; s < 3; ++s) y(s, 0) = Forward(net, x.row(s))[0];
  const auto g = Gradient(net, LabeledSet::Regression(x, y), LossKind::kSquared);
  for (double v : g) EXPECT_EQ(v, 0.0);
}

TEST(GradientTest, MatchesLossDifferences) {
  FixtureOptions opts;
  opts.max_width = 6;
  opts.max_samples = 12;
  opts.max_layers = 3;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Fixture f = RandomFixture(seed, opts);
    const auto g = Gradient(f.net, f.data, f.loss);
    const auto fd = LossDifferenceGradient(f.net, f.data, f.loss);
    EXPECT_LE(MaxRelErr(g, fd, 1e-8), 1e-5) << "seed " << seed;
  }
}

TEST(HvpTest, RidgeHessianIsIdentity) {
  const auto h1 = Hvp(RidgeNet(), RidgeData(), LossKind::kSquared, ParamSelector::Layer(0),
                      std::vector<double>{1.0, 0.0});
  EXPECT_EQ(h1, (std::vector<double>{1.0, 0.0}));
  const auto h0 = Hvp(RidgeNet(), RidgeData(), LossKind::kSquared, ParamSelector::Layer(0),
                      std::vector<double>{0.0, 0.0});
  EXPECT_EQ(h0, (std::vector<double>{0.0, 0.0}));
}

TEST(HvpTest, LinearSquaredHessianIndependentOfWeights) {
  Rng rng(1, 1);
  DenseMatrix x(7, 3), y(7, 2);
  for (double& v : x.data()) v = rng.Normal();
  for (double& v : y.data()) v = rng.Normal();
  const auto data = LabeledSet::Regression(x, y);
  MlpNetwork net({Layer{DenseMatrix{{1, 2, 3}, {-1, 0.5, 2}}, {0.1, -0.2}}});
  MlpNetwork doubled = net;
  for (double& v : doubled.mutable_layer(0).weights.data()) v *= 2.0;
  const auto v = RandomVector(6, 4);
  EXPECT_EQ(Hvp(net, data, LossKind::kSquared, ParamSelector::Layer(0), v),
            Hvp(doubled, data, LossKind::kSquared, ParamSelector::Layer(0), v));
}

TEST(HvpTest, ErrorsOnBadVector) {
  EXPECT_EQ(CaughtCode([] {
              Hvp(RidgeNet(), RidgeData(), LossKind::kSquared, ParamSelector::Layer(0),
                  std::vector<double>{1.0});
            }),
            Errc::kDimensionMismatch);
  EXPECT_EQ(CaughtCode([] {
              Hvp(RidgeNet(), RidgeData(), LossKind::kSquared, ParamSelector::Layer(0),
                  std::vector<double>{NAN, 0.0});
            }),
            Errc::kNonFinite);
}

TEST(HvpTest, MatchesFiniteDifferenceHessianOnSmallNet) {
  // 2-3-1 nets, both losses where the output width allows.
  FixtureOptions opts;
  opts.min_layers = 2;
  opts.max_layers = 2;
  opts.max_width = 3;
  opts.max_samples = 10;
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    const Fixture f = RandomFixture(seed, opts);
    for (std::size_t l = 0; l < f.net.num_layers(); ++l) {
      const auto sel = ParamSelector::Layer(l);
      const DenseMatrix fd = FdHessian(f.net, f.data, f.loss, sel);
      const std::size_t n = fd.rows();
      const auto v = RandomVector(n, seed);
      const auto hv = Hvp(f.net, f.data, f.loss, sel, v);
      const auto want = Multiply(fd, v);
      EXPECT_LE(MaxRelErr(hv, want, 1e-8), 1e-4) << seed << " layer " << l;
    }
  }
}

TEST(HvpTest, SymmetricAndLinear) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Fixture f = RandomFixture(seed);
    for (std::size_t l = 0; l < f.net.num_layers(); ++l) {
      const auto sel = ParamSelector::Layer(l);
      const std::size_t n = SelectedCount(f.net, sel);
      const auto u = RandomVector(n, 2 * seed), v = RandomVector(n, 2 * seed + 1);
      const auto hu = Hvp(f.net, f.data, f.loss, sel, u);
      const auto hv = Hvp(f.net, f.data, f.loss, sel, v);
      const LossSurface surface(f.net, f.data, f.loss);
      const double norm = std::max(1.0, LambdaMax(surface.HessianOperator(sel), {}).eigenvalue);
      EXPECT_LE(std::abs(Inner(u, hv) - Inner(v, hu)),
                1e-8 * std::sqrt(Inner(u, u) * Inner(v, v)) * norm);
      std::vector<double> mix(n);
      for (std::size_t i = 0; i < n; ++i) mix[i] = 3.0 * u[i] + 0.25 * v[i];
      const auto hmix = Hvp(f.net, f.data, f.loss, sel, mix);
      std::vector<double> lin(n);
      for (std::size_t i = 0; i < n; ++i) lin[i] = 3.0 * hu[i] + 0.25 * hv[i];
      EXPECT_LE(MaxRelErr(hmix, lin, 1e-300), 1e-10);
    }
  }
}

TEST(HvpTest, ColumnSelectorIsSubBlockOfLayer) {
  const Fixture f = RandomFixture(5);
  const std::size_t l = 0;
  const Layer& layer = f.net.layer(l);
  const std::size_t rows = layer.weights.rows(), cols = layer.weights.cols();
  for (std::size_t j = 0; j < cols; ++j) {
    const auto v = RandomVector(rows, j);
    std::vector<double> embedded(rows * cols, 0.0);
    for (std::size_t i = 0; i < rows; ++i) embedded[i * cols + j] = v[i];
    const auto full = Hvp(f.net, f.data, f.loss, ParamSelector::Layer(l), embedded);
    const auto col = Hvp(f.net, f.data, f.loss, ParamSelector::NeuronColumn(l, j), v);
    for (std::size_t i = 0; i < rows; ++i)
      EXPECT_NEAR(col[i], full[i * cols + j], 1e-12 * (1.0 + std::abs(full[i * cols + j])));
  }
}

TEST(LossSurfaceTest, DiagonalHookMatchesBasisLoop) {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const Fixture f = RandomFixture(seed);
    const LossSurface surface(f.net, f.data, f.loss);
    for (std::size_t l = 0; l < f.net.num_layers(); ++l) {
      for (const ParamSelector sel : {ParamSelector::Layer(l), ParamSelector::NeuronColumn(l, 0)}) {
        const std::size_t n = SelectedCount(f.net, sel);
        const auto diag = surface.HessianDiagonal(sel);
        std::vector<double> e(n, 0.0), loop(n);
        for (std::size_t i = 0; i < n; ++i) {
          e[i] = 1.0;
          loop[i] = surface.Hvp(sel, e)[i];
          e[i] = 0.0;
        }
        EXPECT_LE(MaxRelErr(diag, loop, 1e-300), 1e-12) << seed << " layer " << l;
      }
    }
  }
}

TEST(LossSurfaceTest, ColumnQuadraticFormsMatchHvp) {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const Fixture f = RandomFixture(seed);
    const LossSurface surface(f.net, f.data, f.loss);
    for (std::size_t l = 0; l < f.net.num_layers(); ++l) {
      const auto q = surface.ColumnQuadraticForms(l);
      const Layer& layer = f.net.layer(l);
      std::vector<double> via_hvp(layer.weights.cols());
      for (std::size_t j = 0; j < via_hvp.size(); ++j) {
        std::vector<double> c(layer.weights.size(), 0.0);
        for (std::size_t i = 0; i < layer.weights.rows(); ++i)
          c[i * layer.weights.cols() + j] = layer.weights(i, j);
        via_hvp[j] = Inner(c, surface.Hvp(ParamSelector::Layer(l), c));
      }
      EXPECT_LE(MaxRelErr(q, via_hvp, 1e-300), 1e-10) << seed << " layer " << l;
    }
  }
}

TEST(LossSurfaceTest, LargeSampleCountCrossesChunks) {
  // More samples than one Jacobian chunk so the chunked sums are exercised.
  Rng rng(8, 8);
  DenseMatrix x(2500, 3);
  for (double& v : x.data()) v = rng.Normal();
  std::vector<std::uint32_t> y(2500);
  for (auto& v : y) v = static_cast<std::uint32_t>(rng.Below(3));
  const auto data = LabeledSet::Classification(x, y, 3);
  MlpNetwork net({Layer{DenseMatrix{{1, -1, 0.5}, {0.2, 0.3, -0.4}}, {0.1, 0.0}},
                  Layer{DenseMatrix{{1, 2}, {-1, 0.5}, {0.3, 0.3}}, {0, 0, 0}}});
  const LossSurface surface(net, data, LossKind::kSoftmaxCrossEntropy);
  const auto sel = ParamSelector::Layer(0);
  const auto diag = surface.HessianDiagonal(sel);
  std::vector<double> e(6, 0.0);
  for (std::size_t i = 0; i < 6; ++i) {
    e[i] = 1.0;
    EXPECT_NEAR(diag[i], surface.Hvp(sel, e)[i], 1e-12 * (1.0 + std::abs(diag[i])));
    e[i] = 0.0;
  }
}

}  // namespace
}  // namespace flatmeter
