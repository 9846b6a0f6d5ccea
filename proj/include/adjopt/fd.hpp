#pragma once

// Central finite-difference Jacobians of a vector function given as
// `void(std::span<const double> x, std::span<double> f)`.

#include <cmath>
#include <span>
#include <vector>

#include "adjopt/dense.hpp"
#include "adjopt/linalg/csr.hpp"
#include "adjopt/sparse/coloring.hpp"

namespace adjopt::fd {

/// Column-by-column central differences, one pair of evaluations per
/// column. Entries with |J_ij| <= drop_tol are not stored.
template <class Function>
linalg::CsrMatrix jacobian(Function&& f, std::span<const double> x, std::size_t m, double eps,
                           double drop_tol = 1e-12) {
  if (!(eps > 0.0)) throw Error("fd::jacobian: eps must be positive");
  const std::size_t n = x.size();
  Vector xp(x.begin(), x.end());
  Vector fp(m), fm(m);
  std::vector<linalg::Triplet> entries;
  for (std::size_t j = 0; j < n; ++j) {
    const double xj = xp[j];
    xp[j] = xj + eps;
    f(std::span<const double>(xp), std::span<double>(fp));
    xp[j] = xj - eps;
    f(std::span<const double>(xp), std::span<double>(fm));
    xp[j] = xj;
    for (std::size_t i = 0; i < m; ++i) {
      const double d = (fp[i] - fm[i]) / (2.0 * eps);
      if (std::abs(d) > drop_tol)
        entries.push_back({static_cast<linalg::Index>(i), static_cast<linalg::Index>(j), d});
    }
  }
  return linalg::CsrMatrix::from_triplets(m, n, std::move(entries));
}

/// Curtis-Powell-Reid: perturbs all columns of one color together, so the
/// cost is 2p evaluations. `out` must carry the pattern's structure.
template <class Function>
void colored_jacobian(Function&& f, std::span<const double> x, const sparse::Coloring& coloring,
                      const sparse::RecoveryMatrix& recovery, double eps, linalg::CsrMatrix& out) {
  if (!(eps > 0.0)) throw Error("fd::colored_jacobian: eps must be positive");
  const std::size_t n = x.size();
  const std::size_t m = recovery.n_rows();
  const std::size_t p = coloring.n_colors;
  sparse::CompressedJacobian jc{DenseMatrix(m, p)};
  Vector xp(n), xm(n), fp(m), fm(m);
  for (std::size_t c = 0; c < p; ++c) {
    for (std::size_t j = 0; j < n; ++j) {
      const double shift = coloring.color_of[j] == static_cast<sparse::Index>(c) ? eps : 0.0;
      xp[j] = x[j] + shift;
      xm[j] = x[j] - shift;
    }
    f(std::span<const double>(xp), std::span<double>(fp));
    f(std::span<const double>(xm), std::span<double>(fm));
    for (std::size_t i = 0; i < m; ++i) jc.values(i, c) = (fp[i] - fm[i]) / (2.0 * eps);
  }
  sparse::recover_into(jc, recovery, out);
}

}  // namespace adjopt::fd
