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

#ifndef FLATMETER_NET_LOSS_SURFACE_HPP_
#define FLATMETER_NET_LOSS_SURFACE_HPP_

#include <memory>
#include <span>
#include <vector>

#include "net/mlp.hpp"
#include "numlin/spectral.hpp"

namespace flatmeter {

/// Empirical loss of a fixed network over a fixed dataset, with the primal
/// pass cached so repeated curvature queries only pay for the tangent and
/// adjoint sweeps. The dataset must outlive the surface and every operator
/// obtained from it. Copies share the cache and are safe to use concurrently.
///
/// Curvature is taken with the activation pattern frozen (sigma'' = 0). For a
/// single layer's weights the network output is then linear in those weights,
/// so the restricted Hessian is J^T Q J with Q the loss Hessian at the output.
class LossSurface {
 public:
  LossSurface(const MlpNetwork& net, const LabeledSet& data, LossKind loss);

  const MlpNetwork& network() const;
  LossKind loss() const;
  std::size_t sample_count() const;

  double EmpiricalError() const;
  std::vector<double> Gradient() const;

  // H_sel v via a forward tangent sweep and an adjoint sweep over the cache.
  std::vector<double> Hvp(const ParamSelector& sel, std::span<const double> v) const;

  // Exact diagonal of H_sel, from the per-sample output Jacobian.
  std::vector<double> HessianDiagonal(const ParamSelector& sel) const;

  // For every column j of w_l: c_j^T H c_j where c_j is column j embedded in
  // the layer's parameter space. Equals <c_j, Hvp(c_j)> for each j.
  std::vector<double> ColumnQuadraticForms(std::size_t layer) const;

  SymmetricOperator HessianOperator(const ParamSelector& sel) const;

  struct State;

 private:
  std::shared_ptr<const State> state_;
};

}  // namespace flatmeter

#endif  // FLATMETER_NET_LOSS_SURFACE_HPP_
