#pragma once

#include <algorithm>
#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

#include "adjopt/error.hpp"

namespace adjopt::sparse {

using Index = std::int32_t;

/// Structural nonzero pattern in compressed-row form. Column lists are sorted
/// and duplicate-free.
class SparsityPattern {
public:
  SparsityPattern() = default;

  SparsityPattern(std::size_t n_rows, std::size_t n_cols, std::vector<std::vector<Index>> rows)
      : n_rows_(n_rows), n_cols_(n_cols) {
    require_size(rows.size(), n_rows, "SparsityPattern rows");
    offsets_.assign(1, 0);
    offsets_.reserve(n_rows + 1);
    for (auto& r : rows) {
      std::sort(r.begin(), r.end());
      r.erase(std::unique(r.begin(), r.end()), r.end());
      for (Index j : r) {
        if (j < 0 || static_cast<std::size_t>(j) >= n_cols)
          throw DimensionError("SparsityPattern: column index out of range");
        cols_.push_back(j);
      }
      offsets_.push_back(static_cast<Index>(cols_.size()));
    }
  }

  static SparsityPattern diagonal(std::size_t n) {
    std::vector<std::vector<Index>> rows(n);
    for (std::size_t i = 0; i < n; ++i) rows[i] = {static_cast<Index>(i)};
    return {n, n, std::move(rows)};
  }

  static SparsityPattern dense(std::size_t n_rows, std::size_t n_cols) {
    std::vector<Index> all(n_cols);
    for (std::size_t j = 0; j < n_cols; ++j) all[j] = static_cast<Index>(j);
    return {n_rows, n_cols, std::vector<std::vector<Index>>(n_rows, all)};
  }

  std::size_t n_rows() const noexcept { return n_rows_; }
  std::size_t n_cols() const noexcept { return n_cols_; }
  std::size_t nnz() const noexcept { return cols_.size(); }

  std::span<const Index> row(std::size_t i) const noexcept {
    return {cols_.data() + offsets_[i], static_cast<std::size_t>(offsets_[i + 1] - offsets_[i])};
  }

  std::span<const Index> offsets() const noexcept { return offsets_; }
  std::span<const Index> columns() const noexcept { return cols_; }

  bool contains(std::size_t i, Index j) const noexcept {
    auto r = row(i);
    return std::binary_search(r.begin(), r.end(), j);
  }

  /// Column-major view: for each column, the rows holding a nonzero in it.
  std::vector<std::vector<Index>> column_rows() const {
    std::vector<std::vector<Index>> out(n_cols_);
    for (std::size_t i = 0; i < n_rows_; ++i)
      for (Index j : row(i)) out[j].push_back(static_cast<Index>(i));
    return out;
  }

  void dump(std::ostream& os) const {
    for (std::size_t i = 0; i < n_rows_; ++i) {
      os << i << ':';
      for (Index j : row(i)) os << ' ' << j;
      os << '\n';
    }
  }

  friend bool operator==(const SparsityPattern&, const SparsityPattern&) = default;

private:
  std::size_t n_rows_ = 0;
  std::size_t n_cols_ = 0;
  std::vector<Index> offsets_{0};
  std::vector<Index> cols_;
};

}  // namespace adjopt::sparse
