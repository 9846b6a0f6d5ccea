#pragma once

// Restarted GMRES(m), unpreconditioned, modified Gram-Schmidt Arnoldi with
// Givens rotations. The `transposed` flag routes every product through
// apply_transpose, which is how adjoint systems are solved.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "adjopt/dense.hpp"
#include "adjopt/linalg/operator.hpp"

namespace adjopt::linalg {

struct GmresSettings {
  double rtol = 1e-5;
  double atol = 1e-50;
  std::size_t max_iters = 10000;
  std::size_t restart = 30;
};

struct GmresResult {
  Vector x;
  std::size_t iterations = 0;
  bool converged = false;
  double residual_norm = 0.0;
  /// Arnoldi residual estimate after every inner iteration.
  std::vector<double> residual_history;
  /// Index into residual_history where each restart cycle begins.
  std::vector<std::size_t> cycle_starts;
};

inline GmresResult gmres(const LinearOperator& op, std::span<const double> b,
                         std::span<const double> x0, const GmresSettings& settings = {},
                         bool transposed = false) {
  const std::size_t n = op.rows();
  if (op.cols() != n) throw DimensionError("gmres: operator must be square");
  require_size(b.size(), n, "gmres rhs");
  require_size(x0.size(), n, "gmres initial guess");
  const std::size_t m = std::max<std::size_t>(settings.restart, 1);

  auto matvec = [&](std::span<const double> v, std::span<double> w) {
    if (transposed) {
      op.apply_transpose(v, w);
    } else {
      op.apply(v, w);
    }
  };

  GmresResult res;
  res.x.assign(x0.begin(), x0.end());
  const double target = std::max(settings.rtol * norm2(b), settings.atol);

  Vector r(n);
  auto true_residual = [&]() {
    matvec(res.x, r);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
    return norm2(r);
  };

  double beta = true_residual();
  res.residual_norm = beta;
  if (beta <= target) {
    res.converged = true;
    return res;
  }

  std::vector<Vector> basis(m + 1, Vector(n));
  std::vector<double> hess((m + 1) * m, 0.0);  // column-major, (m+1) x m
  auto H = [&](std::size_t i, std::size_t j) -> double& { return hess[j * (m + 1) + i]; };
  std::vector<double> cs(m), sn(m), g(m + 1), y(m);

  while (res.iterations < settings.max_iters) {
    for (std::size_t i = 0; i < n; ++i) basis[0][i] = r[i] / beta;
    std::fill(g.begin(), g.end(), 0.0);
    g[0] = beta;
    res.cycle_starts.push_back(res.residual_history.size());

    std::size_t k = 0;
    bool breakdown = false;
    while (k < m && res.iterations < settings.max_iters) {
      Vector& w = basis[k + 1];
      matvec(basis[k], w);
      ++res.iterations;
      const double w_norm = norm2(w);
      for (std::size_t i = 0; i <= k; ++i) {
        const double h = dot(w, basis[i]);
        H(i, k) = h;
        axpy(-h, basis[i], w);
      }
      const double h_next = norm2(w);
      H(k + 1, k) = h_next;

      for (std::size_t i = 0; i < k; ++i) {
        const double t = cs[i] * H(i, k) + sn[i] * H(i + 1, k);
        H(i + 1, k) = -sn[i] * H(i, k) + cs[i] * H(i + 1, k);
        H(i, k) = t;
      }
      const double denom = std::hypot(H(k, k), H(k + 1, k));
      if (denom == 0.0) {
        breakdown = true;
        break;
      }
      cs[k] = H(k, k) / denom;
      sn[k] = H(k + 1, k) / denom;
      H(k, k) = denom;
      H(k + 1, k) = 0.0;
      g[k + 1] = -sn[k] * g[k];
      g[k] = cs[k] * g[k];

      const double estimate = std::abs(g[k + 1]);
      res.residual_history.push_back(estimate);
      ++k;
      if (h_next <= 1e-14 * w_norm) {
        breakdown = true;
        break;
      }
      if (estimate <= target) break;
      for (std::size_t i = 0; i < n; ++i) w[i] /= h_next;
    }

    // Back substitution on the k x k triangle, then update the iterate.
    for (std::size_t i = k; i-- > 0;) {
      double s = g[i];
      for (std::size_t j = i + 1; j < k; ++j) s -= H(i, j) * y[j];
      y[i] = s / H(i, i);
    }
    for (std::size_t j = 0; j < k; ++j) axpy(y[j], basis[j], res.x);

    beta = true_residual();
    res.residual_norm = beta;
    if (beta <= target) {
      res.converged = true;
      return res;
    }
    if (breakdown) return res;
  }
  return res;
}

}  // namespace adjopt::linalg
