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

#include "numlin/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <utility>

#include <Eigen/Eigenvalues>

#include "common/error.hpp"
#include "common/random.hpp"
#include "common/reduce.hpp"

namespace flatmeter {
namespace {

constexpr std::uint64_t kStartVectorStream = 0x1a2c05;

double Norm(std::span<const double> v) { return std::sqrt(Dot(v, v)); }

void Scale(std::span<double> v, double s) {
  for (double& x : v) x *= s;
}

void Axpy(double a, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

void ApplyChecked(const SymmetricOperator& op, std::span<const double> in,
                  std::span<double> out) {
  op.apply(in, out);
  for (double v : out) {
    if (!std::isfinite(v)) Fail(Errc::kNonFiniteOperator, "operator produced a non-finite value");
  }
}

std::vector<double> StartVector(std::size_t dim, std::uint64_t seed) {
  Rng rng(seed, kStartVectorStream);
  std::vector<double> v(dim);
  for (double& x : v) x = rng.Normal();
  const double n = Norm(v);
  if (n == 0.0) v[0] = 1.0;
  else Scale(v, 1.0 / n);
  return v;
}

void Finish(const SymmetricOperator& op, std::span<const double> ritz,
            SpectralResult& result) {
  std::vector<double> av(op.dim);
  ApplyChecked(op, ritz, av);
  const double norm = Norm(ritz);
  Axpy(-result.eigenvalue, ritz, av);
  result.residual = norm > 0.0 ? Norm(av) / norm : 0.0;
  result.relative_residual =
      result.eigenvalue != 0.0 ? result.residual / std::abs(result.eigenvalue)
                               : result.residual;
}

SpectralResult Lanczos(const SymmetricOperator& op, const SpectralConfig& cfg) {
  const std::size_t n = op.dim;
  const std::size_t k_max = std::min(cfg.max_iterations, n);
  std::vector<std::vector<double>> basis;
  basis.reserve(k_max);
  basis.push_back(StartVector(n, cfg.seed));
  std::vector<double> alpha, beta;
  std::vector<double> w(n);

  SpectralResult result;
  result.method = SpectralMethod::kLanczos;
  Eigen::VectorXd top_vector;
  double scale = 0.0;

  for (std::size_t j = 0; j < k_max; ++j) {
    ApplyChecked(op, basis[j], w);
    const double a = Dot(basis[j], w);
    alpha.push_back(a);
    Axpy(-a, basis[j], w);
    if (j > 0) Axpy(-beta[j - 1], basis[j - 1], w);
    // Full reorthogonalization, two passes of classical Gram-Schmidt.
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& q : basis) Axpy(-Dot(q, w), q, w);
    }
    const double b = Norm(w);
    scale = std::max({scale, std::abs(a), b});

    const std::size_t k = alpha.size();
    const bool invariant = b <= 1e-14 * std::max(scale, 1e-300) || scale == 0.0;
    const bool last = j + 1 == k_max;
    if (!(k <= 64 || k % 8 == 0 || invariant || last)) {
      beta.push_back(b);
      basis.push_back(w);
      Scale(basis.back(), 1.0 / b);
      continue;
    }
    Eigen::VectorXd diag = Eigen::Map<const Eigen::VectorXd>(alpha.data(), k);
    Eigen::VectorXd sub = Eigen::Map<const Eigen::VectorXd>(beta.data(), k - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tri;
    tri.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    const double theta = tri.eigenvalues()(k - 1);
    top_vector = tri.eigenvectors().col(k - 1);
    result.eigenvalue = theta;
    result.min_ritz = tri.eigenvalues()(0);
    result.iterations = k;

    const double estimate = b * std::abs(top_vector(k - 1));
    if (invariant || estimate <= cfg.tolerance * std::abs(theta)) {
      result.converged = true;
      break;
    }
    if (last) break;
    beta.push_back(b);
    basis.push_back(w);
    Scale(basis.back(), 1.0 / b);
  }

  std::vector<double> ritz(n, 0.0);
  for (std::size_t i = 0; i < static_cast<std::size_t>(top_vector.size()); ++i)
    Axpy(top_vector(i), basis[i], ritz);
  Finish(op, ritz, result);
  // A Krylov space that spans everything is exact even if the estimate lagged.
  if (!result.converged && result.iterations == n) result.converged = true;
  return result;
}

SpectralResult ShiftedPower(const SymmetricOperator& op, const SpectralConfig& cfg) {
  const std::size_t n = op.dim;
  std::vector<double> v = StartVector(n, cfg.seed);
  std::vector<double> av(n);

  // Operator-norm estimate from plain power steps (largest magnitude).
  double shift = 0.0;
  {
    std::vector<double> u = v;
    for (int i = 0; i < 20; ++i) {
      ApplyChecked(op, u, av);
      const double norm = Norm(av);
      shift = std::max(shift, norm);
      if (norm == 0.0) break;
      u = av;
      Scale(u, 1.0 / norm);
    }
  }

  SpectralResult result;
  result.method = SpectralMethod::kPower;
  result.min_ritz = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t it = 1; it <= cfg.max_iterations; ++it) {
    ApplyChecked(op, v, av);
    const double theta = Dot(v, av);
    result.eigenvalue = theta;
    result.iterations = it;
    std::vector<double> r = av;
    Axpy(-theta, v, r);
    const double res = Norm(r);
    if (res <= cfg.tolerance * std::abs(theta) || res == 0.0) {
      result.converged = true;
      break;
    }
    Axpy(shift, v, av);  // (op + shift I) v
    const double norm = Norm(av);
    if (norm == 0.0) break;
    v = av;
    Scale(v, 1.0 / norm);
  }
  Finish(op, v, result);
  return result;
}

}  // namespace

SymmetricOperator MakeDenseOperator(DenseMatrix m) {
  Require(m.is_square(), Errc::kNotSquare, "operator matrix must be square");
  SymmetricOperator op;
  op.dim = m.rows();
  auto shared = std::make_shared<const DenseMatrix>(std::move(m));
  op.apply = [shared](std::span<const double> in, std::span<double> out) {
    const DenseMatrix& a = *shared;
    for (std::size_t i = 0; i < a.rows(); ++i) out[i] = Dot(a.row(i), in);
  };
  op.diagonal = [shared] {
    std::vector<double> d(shared->rows());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = (*shared)(i, i);
    return d;
  };
  return op;
}

SymmetricOperator ScaledOperator(SymmetricOperator op, double factor) {
  SymmetricOperator scaled;
  scaled.dim = op.dim;
  auto inner = op.apply;
  scaled.apply = [inner, factor](std::span<const double> in, std::span<double> out) {
    inner(in, out);
    for (double& v : out) v *= factor;
  };
  if (op.diagonal) {
    auto diag = op.diagonal;
    scaled.diagonal = [diag, factor] {
      auto d = diag();
      for (double& v : d) v *= factor;
      return d;
    };
  }
  return scaled;
}

void Validate(const SpectralConfig& cfg) {
  Require(cfg.tolerance > 0.0, Errc::kInvalidArgument, "spectral tolerance must be > 0");
  Require(cfg.max_iterations >= 1, Errc::kInvalidArgument,
          "spectral max_iterations must be >= 1");
}

SpectralResult LambdaMax(const SymmetricOperator& op, const SpectralConfig& cfg) {
  Validate(cfg);
  Require(op.dim >= 1, Errc::kInvalidArgument, "operator dimension must be >= 1");
  SpectralMethod method = cfg.method;
  if (method == SpectralMethod::kAuto) {
    const std::size_t krylov = std::min(cfg.max_iterations, op.dim);
    const bool fits = op.dim <= kLanczosDenseDim ||
                      krylov * op.dim * sizeof(double) <= kLanczosBasisBudgetBytes;
    method = fits ? SpectralMethod::kLanczos : SpectralMethod::kPower;
  }
  return method == SpectralMethod::kLanczos ? Lanczos(op, cfg) : ShiftedPower(op, cfg);
}

namespace {

// Cyclic Jacobi on a symmetric copy of m; rotations accumulate into *v when
// given. Returns the eigenvalues in the order they sit on the diagonal.
std::vector<double> JacobiEig(const DenseMatrix& m, DenseMatrix* v) {
  Require(m.is_square(), Errc::kNotSquare, "eigen-decomposition needs a square matrix");
  Require(m.AllFinite(), Errc::kNonFinite, "matrix has non-finite entries");
  const std::size_t n = m.rows();
  const double max_abs = m.MaxAbs();
  DenseMatrix a(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      Require(std::abs(m(i, j) - m(j, i)) <= 1e-9 * max_abs, Errc::kInvalidArgument,
              "matrix is not symmetric");
      a(i, j) = 0.5 * (m(i, j) + m(j, i));
    }
  }
  if (v) *v = DenseMatrix::Identity(n);
  const double threshold = 1e-12 * a.FrobeniusNorm();
  // Entries this small together contribute under threshold / 2 to the
  // off-diagonal norm, so rotating them away is wasted work. FD Hessians are
  // low rank and most of their null block sits below this line.
  const double negligible = 0.5 * threshold / static_cast<double>(std::max<std::size_t>(n, 1));

  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) s += 2.0 * a(i, j) * a(i, j);
    return std::sqrt(s);
  };

  for (int sweep = 0; sweep < 100 && off_norm() > threshold; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= negligible) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        // Rows p and q are contiguous; symmetry gives the columns for free.
        double* rp = &a(p, 0);
        double* rq = &a(q, 0);
        for (std::size_t k = 0; k < n; ++k) {
          if (k == p || k == q) continue;
          const double akp = rp[k], akq = rq[k];
          rp[k] = c * akp - s * akq;
          rq[k] = s * akp + c * akq;
          a(k, p) = rp[k];
          a(k, q) = rq[k];
        }
        a(p, p) -= t * apq;
        a(q, q) += t * apq;
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        if (v) {
          for (std::size_t k = 0; k < n; ++k) {
            const double vkp = (*v)(k, p), vkq = (*v)(k, q);
            (*v)(k, p) = c * vkp - s * vkq;
            (*v)(k, q) = s * vkp + c * vkq;
          }
        }
      }
    }
  }
  std::vector<double> diag(n);
  for (std::size_t i = 0; i < n; ++i) diag[i] = a(i, i);
  return diag;
}

std::vector<std::size_t> AscendingOrder(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return values[x] < values[y]; });
  return order;
}

}  // namespace

SymEigDecomposition DenseSymEigVectors(const DenseMatrix& m) {
  DenseMatrix v;
  const std::vector<double> diag = JacobiEig(m, &v);
  const std::size_t n = diag.size();
  const std::vector<std::size_t> order = AscendingOrder(diag);
  SymEigDecomposition out{std::vector<double>(n), DenseMatrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = diag[order[k]];
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
  }
  return out;
}

std::vector<double> DenseSymEig(const DenseMatrix& m) {
  std::vector<double> values = JacobiEig(m, nullptr);
  std::sort(values.begin(), values.end());
  return values;
}

std::string_view TraceModeName(const TraceMode& mode) {
  return mode.kind == TraceMode::Kind::kExactBasis ? "exact_basis" : "hutchinson";
}

TraceResult TraceEstimate(const SymmetricOperator& op, const TraceMode& mode,
                          std::uint64_t seed) {
  Require(op.dim >= 1, Errc::kInvalidArgument, "operator dimension must be >= 1");
  TraceResult result;
  result.mode = mode;
  if (mode.kind == TraceMode::Kind::kExactBasis) {
    std::vector<double> diag;
    if (op.diagonal) {
      diag = op.diagonal();
      Require(diag.size() == op.dim, Errc::kDimensionMismatch, "diagonal length");
      for (double d : diag)
        if (!std::isfinite(d)) Fail(Errc::kNonFiniteOperator, "non-finite diagonal");
    } else {
      diag.resize(op.dim);
      std::vector<double> e(op.dim, 0.0), out(op.dim);
      for (std::size_t i = 0; i < op.dim; ++i) {
        e[i] = 1.0;
        ApplyChecked(op, e, out);
        diag[i] = out[i];
        e[i] = 0.0;
      }
    }
    result.trace = PairwiseSum(diag);
    return result;
  }

  Require(mode.probes >= 1, Errc::kInvalidArgument, "hutchinson needs >= 1 probe");
  std::vector<double> samples(mode.probes);
  std::vector<double> z(op.dim), out(op.dim);
  for (std::size_t p = 0; p < mode.probes; ++p) {
    for (std::size_t i = 0; i < op.dim; ++i) z[i] = CounterRademacher(seed, p, i);
    ApplyChecked(op, z, out);
    samples[p] = Dot(z, out);
  }
  const double mean = PairwiseSum(samples) / static_cast<double>(mode.probes);
  result.trace = mean;
  if (mode.probes > 1) {
    std::vector<double> dev(mode.probes);
    for (std::size_t p = 0; p < mode.probes; ++p)
      dev[p] = (samples[p] - mean) * (samples[p] - mean);
    const double var = PairwiseSum(dev) / static_cast<double>(mode.probes - 1);
    result.standard_error = std::sqrt(var / static_cast<double>(mode.probes));
  }
  return result;
}

}  // namespace flatmeter
