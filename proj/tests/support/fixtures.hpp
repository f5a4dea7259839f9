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

// Small hand-checkable networks and comparison helpers shared by the tests.

#ifndef FLATMETER_TESTS_SUPPORT_FIXTURES_HPP_
#define FLATMETER_TESTS_SUPPORT_FIXTURES_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "common/error.hpp"
#include "net/mlp.hpp"
#include "numlin/dense_matrix.hpp"

namespace flatmeter::testing {

// One linear layer w = [[3, 4]], b = 0, two unit-axis samples with target 0.
// Under squared loss the weight Hessian is (1/2) * sum 2 x x^T = I_2.
inline MlpNetwork RidgeNet() {
  return MlpNetwork({Layer{DenseMatrix{{3.0, 4.0}}, {0.0}}});
}

inline LabeledSet RidgeData() {
  return LabeledSet::Regression(DenseMatrix{{1.0, 0.0}, {0.0, 1.0}}, DenseMatrix{{0.0}, {0.0}});
}

// 1-1-1 net: w1 = [[1]], b1 = [-1], w2 = [[2]], b2 = [0].
inline MlpNetwork TinyReluNet() {
  return MlpNetwork({Layer{DenseMatrix{{1.0}}, {-1.0}}, Layer{DenseMatrix{{2.0}}, {0.0}}});
}

inline double RelErr(double got, double want) {
  return std::abs(got - want) / std::max(std::abs(want), 1e-300);
}

// max_i |a_i - b_i| / max(max_i |b_i|, floor)
inline double MaxRelErr(std::span<const double> a, std::span<const double> b,
                        double floor = 1e-300) {
  double scale = floor, worst = 0.0;
  for (double v : b) scale = std::max(scale, std::abs(v));
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst / scale;
}

template <class F>
Errc CaughtCode(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return static_cast<Errc>(-1);
}

}  // namespace flatmeter::testing

#endif  // FLATMETER_TESTS_SUPPORT_FIXTURES_HPP_
