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

// Randomized verification suites behind `flatmeter verify`. Each row is one
// measured deviation next to the bound it is held to; callers that want
// different bounds can re-judge `value` themselves.

#ifndef FLATMETER_ORACLE_SUITES_HPP_
#define FLATMETER_ORACLE_SUITES_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace flatmeter {

struct VerifyRow {
  std::string suite;
  std::string check;
  std::string instance;
  double value = 0.0;      // a deviation: smaller is better
  double tolerance = 0.0;  // passes when value <= tolerance
  bool passed = false;
};

struct CheckSummary {
  std::string suite;
  std::string check;
  std::size_t count = 0;
  std::size_t failures = 0;
  double worst = 0.0;
  double tolerance = 0.0;
  double seconds = 0.0;
};

struct VerifyReport {
  std::vector<VerifyRow> rows;
  std::vector<CheckSummary> checks;  // in execution order
  bool passed() const;
  std::string Csv() const;  // suite,check,instance,value,tolerance,passed
};

struct SuiteOptions {
  std::uint64_t seed = 0x5eed;
  std::size_t jobs = 1;
  // Population sizes; defaults are the acceptance sizes.
  std::size_t invariance_nets = 100;
  std::size_t scaling_instances = 50;
  std::size_t oracle_nets = 30;
  std::size_t tikhonov_datasets = 10;
  std::size_t tikhonov_weights = 20;
  std::size_t derivative_instances = 100;
  std::size_t contraction_pairs = 1000;
  double factor_lo = 5.0;
  double factor_hi = 25.0;
};

// Layer-wise (kappa, kappa_tau) and neuron-wise (rho) invariance under
// sampled function-preserving rescalings, with their probe certificates.
VerifyReport InvarianceSuite(const SuiteOptions& options);

// Finite-difference Hessian scaling law and raw-eigenvalue ratio, matrix-free
// vs dense spectra, the ridge reduction, gradient/HVP vs finite differences,
// and the Frobenius contraction bound.
VerifyReport OracleSuite(const SuiteOptions& options);

// "invariance", "oracle" or "all". InvalidArgument otherwise.
VerifyReport RunSuite(const std::string& name, const SuiteOptions& options);

}  // namespace flatmeter

#endif  // FLATMETER_ORACLE_SUITES_HPP_
