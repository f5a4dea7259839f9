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

#ifndef FLATMETER_NUMLIN_SPECTRAL_HPP_
#define FLATMETER_NUMLIN_SPECTRAL_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "numlin/dense_matrix.hpp"

namespace flatmeter {

/// Implicit symmetric linear map. `apply` writes op(in) into out and must be
/// callable concurrently. `diagonal`, when set, returns the exact diagonal of
/// the map; exact traces use it instead of dim basis applications.
struct SymmetricOperator {
  std::size_t dim = 0;
  std::function<void(std::span<const double> in, std::span<double> out)> apply;
  std::function<std::vector<double>()> diagonal;

  std::vector<double> operator()(std::span<const double> in) const {
    std::vector<double> out(dim);
    apply(in, out);
    return out;
  }
};

SymmetricOperator MakeDenseOperator(DenseMatrix m);
SymmetricOperator ScaledOperator(SymmetricOperator op, double factor);

enum class SpectralMethod { kAuto, kPower, kLanczos };

struct SpectralConfig {
  std::size_t max_iterations = 300;
  double tolerance = 1e-9;  // relative residual ||Av - tv|| / |t|
  std::uint64_t seed = 0x5eed;
  SpectralMethod method = SpectralMethod::kAuto;
};

void Validate(const SpectralConfig& cfg);

struct SpectralResult {
  double eigenvalue = 0.0;
  double residual = 0.0;           // ||op(v) - eigenvalue v|| / ||v||
  double relative_residual = 0.0;  // residual / |eigenvalue|
  std::size_t iterations = 0;
  bool converged = false;
  // Smallest Ritz value seen by Lanczos; NaN for power iteration.
  double min_ritz = 0.0;
  SpectralMethod method = SpectralMethod::kLanczos;

  friend bool operator==(const SpectralResult&, const SpectralResult&) = default;
};

// Largest algebraic eigenvalue. A run that exhausts max_iterations returns
// its best estimate with converged == false.
SpectralResult LambdaMax(const SymmetricOperator& op, const SpectralConfig& cfg);

// Krylov dimension above which kAuto switches from Lanczos to shifted power
// iteration; the bound is on basis memory, not on dim alone.
inline constexpr std::size_t kLanczosDenseDim = 5000;
inline constexpr std::size_t kLanczosBasisBudgetBytes = std::size_t{512} << 20;

/// Full spectrum of a symmetric matrix by cyclic Jacobi rotations, ascending.
std::vector<double> DenseSymEig(const DenseMatrix& m);

struct SymEigDecomposition {
  std::vector<double> values;  // ascending
  DenseMatrix vectors;         // column k pairs with values[k]
};
SymEigDecomposition DenseSymEigVectors(const DenseMatrix& m);

struct TraceMode {
  enum class Kind { kExactBasis, kHutchinson };
  Kind kind = Kind::kExactBasis;
  std::size_t probes = 64;

  static TraceMode Exact() { return {Kind::kExactBasis, 0}; }
  static TraceMode Hutchinson(std::size_t probes = 64) {
    return {Kind::kHutchinson, probes};
  }

  friend bool operator==(const TraceMode&, const TraceMode&) = default;
};

std::string_view TraceModeName(const TraceMode& mode);

struct TraceResult {
  double trace = 0.0;
  double standard_error = 0.0;
  TraceMode mode;

  friend bool operator==(const TraceResult&, const TraceResult&) = default;
};

TraceResult TraceEstimate(const SymmetricOperator& op, const TraceMode& mode,
                          std::uint64_t seed);

}  // namespace flatmeter

#endif  // FLATMETER_NUMLIN_SPECTRAL_HPP_
