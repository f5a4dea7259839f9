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

// Brute-force references. Nothing here shares code with the curvature
// kernels: Hessians come from differencing the analytic gradient.

#ifndef FLATMETER_ORACLE_ORACLE_HPP_
#define FLATMETER_ORACLE_ORACLE_HPP_

#include <cstddef>
#include <cstdint>
#include <vector>

#include "net/mlp.hpp"
#include "numlin/dense_matrix.hpp"
#include "reparam/reparam.hpp"

namespace flatmeter {

struct FdConfig {
  double step = 1e-4;  // coordinate i uses step * (1 + |w_i|)
  bool symmetrize = true;
};

inline constexpr std::size_t kFdMaxParams = 2000;

// Central differences of the empirical error over every parameter,
// step * (1 + |w_i|) per coordinate. Errors: TooLarge beyond 20000
// parameters, NonFinite.
std::vector<double> FdGradient(const MlpNetwork& net, const LabeledSet& data, LossKind loss,
                               const FdConfig& cfg = {});

// Central differences of the gradient over the selected coordinates;
// (H + H^T) / 2 when symmetrizing. Errors: TooLarge, NonFinite.
DenseMatrix FdHessian(const MlpNetwork& net, const LabeledSet& data, LossKind loss,
                      const ParamSelector& sel, const FdConfig& cfg = {});

// Max relative elementwise deviation between H_l(net) and
// alpha_l^2 * H_l(Apply(net, spec)), both by FdHessian; entries below
// 1e-10 * max|H| are skipped.
double ScalingLawCheck(const MlpNetwork& net, const ReparamSpec& spec, std::size_t layer,
                       const LabeledSet& data, LossKind loss, const FdConfig& cfg = {});

// Largest singular value of a, via the top eigenvalue of a^T a.
double SpectralNorm(const DenseMatrix& a);

// ||w a||_F <= ||w||_F + 1e-10. PreconditionViolated if ||a||_2 > 1 + 1e-12.
bool FrobeniusContractionCheck(const DenseMatrix& w, const DenseMatrix& a);

// Random Haar-ish orthogonal matrix (QR of a Gaussian matrix, sign-fixed).
DenseMatrix RandomOrthogonal(std::size_t n, std::uint64_t seed);

struct FixtureOptions {
  std::size_t max_layers = 4;        // depth drawn from [1, max_layers]
  std::size_t min_layers = 1;
  std::size_t max_width = 50;        // every layer width drawn from [1, max_width]
  std::size_t max_samples = 64;      // sample count drawn from [1, max_samples]
  std::size_t max_params_per_layer = 0;  // 0: no cap
  double kink_margin = 1e-3;         // resample if any |pre-activation| is below this
  bool allow_cross_entropy = true;
};

struct Fixture {
  MlpNetwork net;
  LabeledSet data;
  LossKind loss = LossKind::kSquared;
  std::uint64_t seed = 0;
};

// Random (net, data, loss) away from ReLU kinks; deterministic per seed.
Fixture RandomFixture(std::uint64_t seed, const FixtureOptions& options = {});

}  // namespace flatmeter

#endif  // FLATMETER_ORACLE_ORACLE_HPP_
