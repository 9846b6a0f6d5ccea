#pragma once

// Column coloring of a Jacobian sparsity pattern and the seed/recovery pair
// used for lossless compressed Jacobian evaluation.
//
// Two columns may share a color iff no row has a nonzero in both (structural
// orthogonality, i.e. distance-2 coloring of the column intersection graph).

#include <algorithm>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "adjopt/ad/sweeps.hpp"
#include "adjopt/dense.hpp"
#include "adjopt/linalg/csr.hpp"
#include "adjopt/sparse/pattern.hpp"

namespace adjopt::sparse {

struct Coloring {
  std::vector<Index> color_of;
  std::size_t n_colors = 0;

  std::size_t n_cols() const noexcept { return color_of.size(); }

  void dump(std::ostream& os) const {
    for (std::size_t j = 0; j < color_of.size(); ++j) os << j << ": " << color_of[j] << '\n';
  }

  friend bool operator==(const Coloring&, const Coloring&) = default;
};

enum class ColumnOrder { natural, smallest_last };

namespace detail {

// Distance-2 neighbours of every column (columns sharing a row), excluding
// the column itself.
inline std::vector<std::vector<Index>> column_conflicts(const SparsityPattern& pattern) {
  const auto col_rows = pattern.column_rows();
  std::vector<std::vector<Index>> adj(pattern.n_cols());
  std::vector<Index> seen(pattern.n_cols(), -1);
  for (std::size_t j = 0; j < pattern.n_cols(); ++j) {
    seen[j] = static_cast<Index>(j);
    for (Index i : col_rows[j]) {
      for (Index k : pattern.row(i)) {
        if (seen[k] != static_cast<Index>(j)) {
          seen[k] = static_cast<Index>(j);
          adj[j].push_back(k);
        }
      }
    }
  }
  return adj;
}

// Smallest-last ordering: repeatedly strip a vertex of minimum remaining
// degree; colour in reverse stripping order.
inline std::vector<Index> smallest_last_order(const std::vector<std::vector<Index>>& adj) {
  const std::size_t n = adj.size();
  std::vector<std::size_t> degree(n);
  std::size_t max_degree = 0;
  for (std::size_t v = 0; v < n; ++v) {
    degree[v] = adj[v].size();
    max_degree = std::max(max_degree, degree[v]);
  }
  std::vector<std::vector<Index>> buckets(max_degree + 1);
  for (std::size_t v = 0; v < n; ++v) buckets[degree[v]].push_back(static_cast<Index>(v));
  std::vector<bool> removed(n, false);
  std::vector<Index> order;
  order.reserve(n);
  std::size_t low = 0;
  while (order.size() < n) {
    low = std::min(low, max_degree);
    while (buckets[low].empty()) ++low;
    const Index v = buckets[low].back();
    buckets[low].pop_back();
    if (removed[v] || degree[v] != low) continue;  // stale bucket entry
    removed[v] = true;
    order.push_back(v);
    for (Index w : adj[v]) {
      if (removed[w]) continue;
      --degree[w];
      buckets[degree[w]].push_back(w);
      if (degree[w] < low) low = degree[w];
    }
  }
  std::reverse(order.begin(), order.end());
  return order;
}

}  // namespace detail

namespace detail {

inline Coloring greedy_in_sequence(const SparsityPattern& pattern, const std::vector<Index>& sequence) {
  const auto col_rows = pattern.column_rows();
  Coloring out;
  out.color_of.assign(pattern.n_cols(), -1);
  std::vector<Index> forbidden;  // forbidden[c] == j  <=>  c is taken for column j
  for (Index j : sequence) {
    for (Index i : col_rows[j])
      for (Index k : pattern.row(i))
        if (out.color_of[k] >= 0) forbidden[out.color_of[k]] = j;
    std::size_t c = 0;
    while (c < forbidden.size() && forbidden[c] == j) ++c;
    if (c == forbidden.size()) forbidden.push_back(-1);
    out.color_of[j] = static_cast<Index>(c);
  }
  out.n_colors = forbidden.size();
  return out;
}

}  // namespace detail

/// Greedy distance-2 coloring: each column receives the smallest color not
/// used by any column it shares a row with. Deterministic for a given
/// pattern and order.
inline Coloring color_columns(const SparsityPattern& pattern,
                              ColumnOrder order = ColumnOrder::natural) {
  const std::size_t n = pattern.n_cols();
  std::vector<Index> sequence(n);
  for (std::size_t j = 0; j < n; ++j) sequence[j] = static_cast<Index>(j);
  if (order == ColumnOrder::smallest_last)
    sequence = detail::smallest_last_order(detail::column_conflicts(pattern));
  return detail::greedy_in_sequence(pattern, sequence);
}

/// Iterated greedy: recolor with the color classes visited from the highest
/// color down. A pass never uses more colors than its input. Stops after
/// `patience` passes without a reduction or `max_passes` in total.
inline Coloring refine_coloring(const SparsityPattern& pattern, Coloring coloring,
                                std::size_t patience = 8, std::size_t max_passes = 64) {
  require_size(coloring.n_cols(), pattern.n_cols(), "coloring columns");
  std::size_t stalled = 0;
  for (std::size_t pass = 0; pass < max_passes && stalled < patience; ++pass) {
    std::vector<std::vector<Index>> classes(coloring.n_colors);
    for (std::size_t j = 0; j < coloring.n_cols(); ++j)
      classes[static_cast<std::size_t>(coloring.color_of[j])].push_back(static_cast<Index>(j));
    std::vector<Index> sequence;
    sequence.reserve(coloring.n_cols());
    for (auto c = classes.rbegin(); c != classes.rend(); ++c) sequence.insert(sequence.end(), c->begin(), c->end());
    auto next = detail::greedy_in_sequence(pattern, sequence);
    stalled = next.n_colors < coloring.n_colors ? 0 : stalled + 1;
    coloring = std::move(next);
  }
  return coloring;
}

/// Row holding two same-colored columns, if any.
inline std::optional<std::size_t> find_conflict(const SparsityPattern& pattern,
                                                const Coloring& coloring) {
  require_size(coloring.n_cols(), pattern.n_cols(), "coloring columns");
  std::vector<std::size_t> stamp(coloring.n_colors, static_cast<std::size_t>(-1));
  for (std::size_t i = 0; i < pattern.n_rows(); ++i) {
    for (Index j : pattern.row(i)) {
      const auto c = static_cast<std::size_t>(coloring.color_of[j]);
      if (stamp[c] == i) return i;
      stamp[c] = i;
    }
  }
  return std::nullopt;
}

/// Largest number of distinct columns any column shares a row with.
inline std::size_t max_distance2_degree(const SparsityPattern& pattern) {
  std::size_t best = 0;
  for (const auto& nbrs : detail::column_conflicts(pattern)) best = std::max(best, nbrs.size());
  return best;
}

/// n x p 0/1 seed: S(j, color_of[j]) = 1.
inline DenseMatrix build_seed(const Coloring& coloring, std::size_t n) {
  require_size(coloring.n_cols(), n, "build_seed");
  DenseMatrix seed(n, coloring.n_colors);
  for (std::size_t j = 0; j < n; ++j) seed(j, coloring.color_of[j]) = 1.0;
  return seed;
}

/// entries(i, c) is the column of color c with a nonzero in row i, or -1.
class RecoveryMatrix {
public:
  RecoveryMatrix() = default;
  RecoveryMatrix(std::size_t n_rows, std::size_t n_colors)
      : n_rows_(n_rows), n_colors_(n_colors), entries_(n_rows * n_colors, -1) {}

  std::size_t n_rows() const noexcept { return n_rows_; }
  std::size_t n_colors() const noexcept { return n_colors_; }
  Index operator()(std::size_t i, std::size_t c) const noexcept { return entries_[i * n_colors_ + c]; }
  Index& operator()(std::size_t i, std::size_t c) noexcept { return entries_[i * n_colors_ + c]; }

private:
  std::size_t n_rows_ = 0;
  std::size_t n_colors_ = 0;
  std::vector<Index> entries_;
};

inline RecoveryMatrix build_recovery(const SparsityPattern& pattern, const Coloring& coloring) {
  require_size(coloring.n_cols(), pattern.n_cols(), "build_recovery");
  RecoveryMatrix rec(pattern.n_rows(), coloring.n_colors);
  for (std::size_t i = 0; i < pattern.n_rows(); ++i) {
    for (Index j : pattern.row(i)) {
      Index& slot = rec(i, coloring.color_of[j]);
      if (slot >= 0) throw Error("coloring conflict at row " + std::to_string(i));
      slot = j;
    }
  }
  return rec;
}

/// J * S: column c sums the Jacobian columns colored c.
struct CompressedJacobian {
  DenseMatrix values;
};

inline CompressedJacobian compressed_jacobian(const ad::Tape& tape, std::span<const double> x,
                                              const Coloring& coloring) {
  require_size(coloring.n_cols(), tape.n_independent(), "compressed_jacobian coloring");
  return {ad::forward_propagate(tape, x, build_seed(coloring, tape.n_independent())).Y};
}

/// Scatters a compressed Jacobian into `out`, which must carry the structure
/// of the pattern the recovery matrix was built from.
inline void recover_into(const CompressedJacobian& jc, const RecoveryMatrix& recovery,
                         linalg::CsrMatrix& out) {
  require_size(jc.values.rows(), recovery.n_rows(), "recover rows");
  require_size(jc.values.cols(), recovery.n_colors(), "recover colors");
  const std::size_t p = recovery.n_colors();
  for (std::size_t i = 0; i < recovery.n_rows(); ++i) {
    const auto cols = out.row_cols(i);
    auto vals = out.row_values(i);
    for (std::size_t c = 0; c < p; ++c) {
      const Index j = recovery(i, c);
      if (j < 0) continue;
      const auto pos = std::lower_bound(cols.begin(), cols.end(), j) - cols.begin();
      vals[pos] = jc.values(i, c);
    }
  }
}

/// For each (row, color) the index into `structure.values()` that the
/// compressed entry lands on, or -1. Lets repeated recoveries skip the
/// column search.
inline std::vector<std::int64_t> recovery_positions(const RecoveryMatrix& recovery,
                                                    const linalg::CsrMatrix& structure) {
  require_size(structure.n_rows(), recovery.n_rows(), "recovery_positions rows");
  const std::size_t p = recovery.n_colors();
  const auto off = structure.row_offsets();
  const auto cols = structure.col_indices();
  std::vector<std::int64_t> pos(recovery.n_rows() * p, -1);
  for (std::size_t i = 0; i < recovery.n_rows(); ++i)
    for (std::size_t c = 0; c < p; ++c) {
      const Index j = recovery(i, c);
      if (j < 0) continue;
      const auto first = cols.begin() + off[i], last = cols.begin() + off[i + 1];
      const auto it = std::lower_bound(first, last, j);
      if (it == last || *it != j) throw Error("recovery_positions: structure lacks a recovered entry");
      pos[i * p + c] = it - cols.begin();
    }
  return pos;
}

inline void recover_into(const CompressedJacobian& jc, std::span<const std::int64_t> positions,
                         linalg::CsrMatrix& out) {
  require_size(positions.size(), jc.values.data().size(), "recover positions");
  const auto src = jc.values.data();
  auto vals = out.values();
  for (std::size_t k = 0; k < positions.size(); ++k)
    if (positions[k] >= 0) vals[static_cast<std::size_t>(positions[k])] = src[k];
}

inline linalg::CsrMatrix recover(const CompressedJacobian& jc, const RecoveryMatrix& recovery,
                                 const SparsityPattern& pattern) {
  auto out = linalg::CsrMatrix::from_pattern(pattern);
  recover_into(jc, recovery, out);
  return out;
}

}  // namespace adjopt::sparse
