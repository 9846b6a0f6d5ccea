#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <ostream>
#include <span>
#include <tuple>
#include <vector>

#include "adjopt/dense.hpp"
#include "adjopt/error.hpp"
#include "adjopt/sparse/pattern.hpp"

namespace adjopt::linalg {

using Index = std::int32_t;

struct Triplet {
  Index row;
  Index col;
  double value;
};

/// Compressed sparse row matrix. Column indices are sorted within each row.
class CsrMatrix {
public:
  CsrMatrix() = default;

  CsrMatrix(std::size_t n_rows, std::size_t n_cols, std::vector<Index> row_offsets,
            std::vector<Index> col_indices, std::vector<double> values)
      : n_rows_(n_rows),
        n_cols_(n_cols),
        row_offsets_(std::move(row_offsets)),
        col_indices_(std::move(col_indices)),
        values_(std::move(values)) {
    require_size(row_offsets_.size(), n_rows_ + 1, "CsrMatrix row_offsets");
    require_size(values_.size(), col_indices_.size(), "CsrMatrix values");
    require_size(col_indices_.size(), static_cast<std::size_t>(row_offsets_.back()),
                 "CsrMatrix nnz");
  }

  /// Zero-valued matrix with the structure of `pattern`.
  static CsrMatrix from_pattern(const sparse::SparsityPattern& pattern) {
    const auto off = pattern.offsets();
    const auto cols = pattern.columns();
    return {pattern.n_rows(), pattern.n_cols(), {off.begin(), off.end()},
            {cols.begin(), cols.end()}, std::vector<double>(cols.size(), 0.0)};
  }

  /// Duplicate entries are summed.
  static CsrMatrix from_triplets(std::size_t n_rows, std::size_t n_cols,
                                 std::vector<Triplet> triplets) {
    std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
      return std::tie(a.row, a.col) < std::tie(b.row, b.col);
    });
    std::vector<Index> offsets(n_rows + 1, 0);
    std::vector<Index> cols;
    std::vector<double> vals;
    for (std::size_t k = 0; k < triplets.size(); ++k) {
      const auto& t = triplets[k];
      if (t.row < 0 || static_cast<std::size_t>(t.row) >= n_rows || t.col < 0 ||
          static_cast<std::size_t>(t.col) >= n_cols)
        throw DimensionError("CsrMatrix::from_triplets: index out of range");
      if (k > 0 && triplets[k - 1].row == t.row && triplets[k - 1].col == t.col) {
        vals.back() += t.value;
        continue;
      }
      cols.push_back(t.col);
      vals.push_back(t.value);
      ++offsets[t.row + 1];
    }
    for (std::size_t i = 0; i < n_rows; ++i) offsets[i + 1] += offsets[i];
    return {n_rows, n_cols, std::move(offsets), std::move(cols), std::move(vals)};
  }

  /// Keeps entries with |a_ij| > drop_tol.
  static CsrMatrix from_dense(const DenseMatrix& a, double drop_tol = 0.0) {
    std::vector<Index> offsets{0};
    std::vector<Index> cols;
    std::vector<double> vals;
    for (std::size_t i = 0; i < a.rows(); ++i) {
      for (std::size_t j = 0; j < a.cols(); ++j) {
        if (std::abs(a(i, j)) > drop_tol) {
          cols.push_back(static_cast<Index>(j));
          vals.push_back(a(i, j));
        }
      }
      offsets.push_back(static_cast<Index>(cols.size()));
    }
    return {a.rows(), a.cols(), std::move(offsets), std::move(cols), std::move(vals)};
  }

  static CsrMatrix identity(std::size_t n) { return from_dense(DenseMatrix::identity(n)); }

  std::size_t n_rows() const noexcept { return n_rows_; }
  std::size_t n_cols() const noexcept { return n_cols_; }
  std::size_t nnz() const noexcept { return col_indices_.size(); }

  std::span<const Index> row_offsets() const noexcept { return row_offsets_; }
  std::span<const Index> col_indices() const noexcept { return col_indices_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }

  std::span<const Index> row_cols(std::size_t i) const noexcept {
    return {col_indices_.data() + row_offsets_[i],
            static_cast<std::size_t>(row_offsets_[i + 1] - row_offsets_[i])};
  }
  std::span<const double> row_values(std::size_t i) const noexcept {
    return {values_.data() + row_offsets_[i],
            static_cast<std::size_t>(row_offsets_[i + 1] - row_offsets_[i])};
  }
  std::span<double> row_values(std::size_t i) noexcept {
    return {values_.data() + row_offsets_[i],
            static_cast<std::size_t>(row_offsets_[i + 1] - row_offsets_[i])};
  }

  /// Entry (i, j); zero when structurally absent.
  double at(std::size_t i, Index j) const noexcept {
    const auto cols = row_cols(i);
    const auto it = std::lower_bound(cols.begin(), cols.end(), j);
    if (it == cols.end() || *it != j) return 0.0;
    return values_[row_offsets_[i] + (it - cols.begin())];
  }

  DenseMatrix to_dense() const {
    DenseMatrix d(n_rows_, n_cols_);
    for (std::size_t i = 0; i < n_rows_; ++i)
      for (Index k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k)
        d(i, col_indices_[k]) += values_[k];
    return d;
  }

  CsrMatrix transposed() const {
    std::vector<Index> offsets(n_cols_ + 1, 0);
    for (Index j : col_indices_) ++offsets[j + 1];
    for (std::size_t j = 0; j < n_cols_; ++j) offsets[j + 1] += offsets[j];
    std::vector<Index> cols(nnz());
    std::vector<double> vals(nnz());
    std::vector<Index> fill(offsets.begin(), offsets.end() - 1);
    for (std::size_t i = 0; i < n_rows_; ++i) {
      for (Index k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
        const Index dst = fill[col_indices_[k]]++;
        cols[dst] = static_cast<Index>(i);
        vals[dst] = values_[k];
      }
    }
    return {n_cols_, n_rows_, std::move(offsets), std::move(cols), std::move(vals)};
  }

  sparse::SparsityPattern pattern() const {
    std::vector<std::vector<sparse::Index>> rows(n_rows_);
    for (std::size_t i = 0; i < n_rows_; ++i) {
      const auto c = row_cols(i);
      rows[i].assign(c.begin(), c.end());
    }
    return {n_rows_, n_cols_, std::move(rows)};
  }

  void scale(double alpha) noexcept {
    for (double& v : values_) v *= alpha;
  }

private:
  std::size_t n_rows_ = 0;
  std::size_t n_cols_ = 0;
  std::vector<Index> row_offsets_{0};
  std::vector<Index> col_indices_;
  std::vector<double> values_;
};

inline void spmv(const CsrMatrix& a, std::span<const double> v, std::span<double> w) {
  require_size(v.size(), a.n_cols(), "spmv input");
  require_size(w.size(), a.n_rows(), "spmv output");
  const auto off = a.row_offsets();
  const auto cols = a.col_indices();
  const auto vals = a.values();
  for (std::size_t i = 0; i < a.n_rows(); ++i) {
    double s = 0.0;
    for (Index k = off[i]; k < off[i + 1]; ++k) s += vals[k] * v[cols[k]];
    w[i] = s;
  }
}

inline Vector spmv(const CsrMatrix& a, std::span<const double> v) {
  Vector w(a.n_rows());
  spmv(a, v, w);
  return w;
}

inline void spmv_transpose(const CsrMatrix& a, std::span<const double> v, std::span<double> w) {
  require_size(v.size(), a.n_rows(), "spmv_transpose input");
  require_size(w.size(), a.n_cols(), "spmv_transpose output");
  std::fill(w.begin(), w.end(), 0.0);
  const auto off = a.row_offsets();
  const auto cols = a.col_indices();
  const auto vals = a.values();
  for (std::size_t i = 0; i < a.n_rows(); ++i) {
    const double vi = v[i];
    for (Index k = off[i]; k < off[i + 1]; ++k) w[cols[k]] += vals[k] * vi;
  }
}

inline Vector spmv_transpose(const CsrMatrix& a, std::span<const double> v) {
  Vector w(a.n_cols());
  spmv_transpose(a, v, w);
  return w;
}

/// MatrixMarket coordinate (real general) export.
inline void write_matrix_market(std::ostream& os, const CsrMatrix& a) {
  os << "%%MatrixMarket matrix coordinate real general\n";
  os << a.n_rows() << ' ' << a.n_cols() << ' ' << a.nnz() << '\n';
  os << std::setprecision(17);
  for (std::size_t i = 0; i < a.n_rows(); ++i) {
    const auto cols = a.row_cols(i);
    const auto vals = a.row_values(i);
    for (std::size_t k = 0; k < cols.size(); ++k)
      os << i + 1 << ' ' << cols[k] + 1 << ' ' << vals[k] << '\n';
  }
}

}  // namespace adjopt::linalg
