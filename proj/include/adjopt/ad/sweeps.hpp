#pragma once

// Sweeps over a recorded Tape: primal replay, forward (tangent) propagation
// of a seed matrix, reverse (adjoint) propagation of a weight matrix and
// structural sparsity extraction.

#include <algorithm>
#include <iterator>
#include <utility>
#include <span>
#include <vector>

#include "adjopt/ad/tape.hpp"
#include "adjopt/dense.hpp"
#include "adjopt/sparse/pattern.hpp"

namespace adjopt::ad {

/// Scratch storage for tangent and adjoint sweeps. One per concurrent caller.
struct SweepWorkspace {
  std::vector<double> tangents;
  std::vector<double> adjoints;
  std::vector<double> values;
};

namespace detail {

// Evaluates every record at `x`. `values` receives all slot values; when
// `partials` is non-empty it receives the two local partials per record.
inline void primal_sweep(const Tape& tape, std::span<const double> x, std::span<double> values,
                         std::span<double> partials) {
  const std::size_t n_in = tape.n_independent();
  std::copy(x.begin(), x.end(), values.begin());
  const auto records = tape.records();
  const bool want_partials = !partials.empty();
  for (std::size_t k = 0; k < records.size(); ++k) {
    const OpRecord& rec = records[k];
    const double a = values[rec.arg0];
    const double b = rec.arg1 != kNoSlot ? values[rec.arg1] : 0.0;
    const double r = evaluate(rec.op, a, b, rec.constant);
    values[n_in + k] = r;
    if (want_partials) {
      const auto [d0, d1] = detail::partials(rec.op, a, b, r, rec.constant);
      partials[2 * k] = d0;
      partials[2 * k + 1] = d1;
    }
  }
}

}  // namespace detail

/// F(x) evaluated by replaying the tape.
inline Vector replay_primal(const Tape& tape, std::span<const double> x) {
  require_size(x.size(), tape.n_independent(), "replay_primal input");
  Vector values(tape.n_slots());
  detail::primal_sweep(tape, x, values, {});
  Vector y(tape.n_dependent());
  const auto deps = tape.dependents();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = values[deps[i]];
  return y;
}

/// A tape evaluated at a fixed point x: holds F(x) and the local partials of
/// every record, so Jacobian products at x need no further primal work.
class Linearization {
public:
  Linearization(const Tape& tape, std::span<const double> x) : tape_(&tape) { relinearize(x); }

  void relinearize(std::span<const double> x) {
    require_size(x.size(), tape_->n_independent(), "Linearization point");
    values_.resize(tape_->n_slots());
    partials_.resize(2 * tape_->records().size());
    detail::primal_sweep(*tape_, x, values_, partials_);
    y_.resize(tape_->n_dependent());
    const auto deps = tape_->dependents();
    for (std::size_t i = 0; i < y_.size(); ++i) y_[i] = values_[deps[i]];
  }

  const Tape& tape() const noexcept { return *tape_; }
  std::size_t n() const noexcept { return tape_->n_independent(); }
  std::size_t m() const noexcept { return tape_->n_dependent(); }
  std::span<const double> output() const noexcept { return y_; }
  std::span<const double> point() const noexcept { return {values_.data(), n()}; }

  /// Y = J * S with all p tangent directions carried in a single sweep.
  void tangent(const DenseMatrix& seed, DenseMatrix& out, SweepWorkspace& ws) const {
    const std::size_t p = seed.cols();
    require_size(seed.rows(), n(), "tangent seed rows");
    if (out.rows() != m() || out.cols() != p) out = DenseMatrix(m(), p);
    tangent_impl(seed.data().data(), p, out.data().data(), ws);
  }

  DenseMatrix tangent(const DenseMatrix& seed) const {
    SweepWorkspace ws;
    DenseMatrix out;
    tangent(seed, out, ws);
    return out;
  }

  /// out = J * v
  void jvp(std::span<const double> v, std::span<double> out, SweepWorkspace& ws) const {
    require_size(v.size(), n(), "jvp input");
    require_size(out.size(), m(), "jvp output");
    tangent_impl(v.data(), 1, out.data(), ws);
  }

  /// out = W^T-products, i.e. J^T * W for an m x q weight matrix.
  void adjoint(const DenseMatrix& weights, DenseMatrix& out, SweepWorkspace& ws) const {
    require_size(weights.rows(), m(), "adjoint weight rows");
    const std::size_t q = weights.cols();
    if (out.rows() != n() || out.cols() != q) out = DenseMatrix(n(), q);
    adjoint_impl(weights.data().data(), q, out.data().data(), ws);
  }

  DenseMatrix adjoint(const DenseMatrix& weights) const {
    SweepWorkspace ws;
    DenseMatrix out;
    adjoint(weights, out, ws);
    return out;
  }

  /// out = J^T * w
  void vjp(std::span<const double> w, std::span<double> out, SweepWorkspace& ws) const {
    require_size(w.size(), m(), "vjp input");
    require_size(out.size(), n(), "vjp output");
    adjoint_impl(w.data(), 1, out.data(), ws);
  }

private:
  void tangent_impl(const double* seed, std::size_t p, double* out, SweepWorkspace& ws) const {
    const Tape& tape = *tape_;
    const std::size_t n_in = tape.n_independent();
    const auto records = tape.records();
    const auto regs = tape.registers();
    const auto dep_off = tape.dependent_offsets();
    const auto dep_rows = tape.dependent_rows_by_slot();
    ws.tangents.resize(tape.n_registers() * p);
    double* work = ws.tangents.data();

    auto tangent_of = [&](Slot s) -> const double* {
      return static_cast<std::size_t>(s) < n_in ? seed + static_cast<std::size_t>(s) * p
                                                : work + static_cast<std::size_t>(regs[s]) * p;
    };
    auto emit = [&](std::size_t slot, const double* t) {
      for (auto k = dep_off[slot]; k < dep_off[slot + 1]; ++k)
        std::copy(t, t + p, out + static_cast<std::size_t>(dep_rows[k]) * p);
    };

    for (std::size_t s = 0; s < n_in; ++s) emit(s, seed + s * p);

    for (std::size_t k = 0; k < records.size(); ++k) {
      const OpRecord& rec = records[k];
      const double d0 = partials_[2 * k];
      const double* ta = tangent_of(rec.arg0);
      double* t = work + static_cast<std::size_t>(regs[rec.result]) * p;
      if (rec.arg1 != kNoSlot) {
        const double d1 = partials_[2 * k + 1];
        const double* tb = tangent_of(rec.arg1);
        for (std::size_t q = 0; q < p; ++q) t[q] = d0 * ta[q] + d1 * tb[q];
      } else {
        for (std::size_t q = 0; q < p; ++q) t[q] = d0 * ta[q];
      }
      emit(n_in + k, t);
    }
  }

  void adjoint_impl(const double* weights, std::size_t q, double* out, SweepWorkspace& ws) const {
    const Tape& tape = *tape_;
    const std::size_t n_in = tape.n_independent();
    const auto records = tape.records();
    const auto deps = tape.dependents();
    ws.adjoints.assign(tape.n_slots() * q, 0.0);
    double* adj = ws.adjoints.data();

    for (std::size_t i = 0; i < deps.size(); ++i) {
      double* a = adj + static_cast<std::size_t>(deps[i]) * q;
      const double* w = weights + i * q;
      for (std::size_t c = 0; c < q; ++c) a[c] += w[c];
    }
    for (std::size_t k = records.size(); k-- > 0;) {
      const OpRecord& rec = records[k];
      const double* a = adj + (n_in + k) * q;
      double* a0 = adj + static_cast<std::size_t>(rec.arg0) * q;
      const double d0 = partials_[2 * k];
      for (std::size_t c = 0; c < q; ++c) a0[c] += d0 * a[c];
      if (rec.arg1 != kNoSlot) {
        double* a1 = adj + static_cast<std::size_t>(rec.arg1) * q;
        const double d1 = partials_[2 * k + 1];
        for (std::size_t c = 0; c < q; ++c) a1[c] += d1 * a[c];
      }
    }
    std::copy(adj, adj + n_in * q, out);
  }

  const Tape* tape_;
  std::vector<double> values_;
  std::vector<double> partials_;
  std::vector<double> y_;
};

namespace detail {

// Lane updates for fused_tangent. The restrict qualifiers let the compiler
// vectorize; callers guarantee that t never overlaps ta or tb.
template <std::size_t P>
inline void lanes_binary(double* __restrict t, const double* __restrict ta,
                         const double* __restrict tb, double d0, double d1, std::size_t p) {
  const std::size_t w = P ? P : p;
  for (std::size_t q = 0; q < w; ++q) t[q] = d0 * ta[q] + d1 * tb[q];
}

template <std::size_t P>
inline void lanes_unary(double* __restrict t, const double* __restrict ta, double d0, std::size_t p) {
  const std::size_t w = P ? P : p;
  for (std::size_t q = 0; q < w; ++q) t[q] = d0 * ta[q];
}

// Width-P kernel for fused_tangent. P == 0 means the width is only known at
// run time.
template <std::size_t P>
void fused_tangent_kernel(const Tape& tape, std::span<const double> x, const double* seed,
                          std::size_t p_runtime, double* out, SweepWorkspace& ws) {
  const std::size_t p = P ? P : p_runtime;
  const std::size_t n_in = tape.n_independent();
  const std::size_t rows = n_in + tape.n_sweep_registers();
  const auto dep_off = tape.dependent_offsets();
  const auto dep_rows = tape.dependent_rows_by_slot();
  ws.values.resize(rows);
  ws.tangents.resize(rows * p);
  double* const val = ws.values.data();
  double* const tan = ws.tangents.data();
  std::copy(x.begin(), x.end(), val);
  std::copy(seed, seed + n_in * p, tan);

  auto emit_all = [&](std::size_t slot, const double* t) {
    for (auto k = dep_off[slot]; k < dep_off[slot + 1]; ++k)
      std::copy(t, t + p, out + static_cast<std::size_t>(dep_rows[k]) * p);
  };
  for (std::size_t s = 0; s < n_in; ++s) emit_all(s, seed + s * p);

  const auto steps = tape.sweep_steps();
  for (const SweepStep& st : steps) {
    const auto ls = step(st.op, val[st.a], val[st.b], st.constant);
    val[st.r] = ls.value;
    // Result rows never overlap argument rows; see Tape::assign_registers.
    double* t = tan + static_cast<std::size_t>(st.r) * p;
    const double* ta = tan + static_cast<std::size_t>(st.a) * p;
    if (st.binary) {
      lanes_binary<P>(t, ta, tan + static_cast<std::size_t>(st.b) * p, ls.d0, ls.d1, p);
    } else {
      lanes_unary<P>(t, ta, ls.d0, p);
    }
    if (st.out_row >= 0) {
      std::copy(t, t + p, out + static_cast<std::size_t>(st.out_row) * p);
    } else if (st.out_row == -2) {
      emit_all(st.slot, t);
    }
  }
}

template <std::size_t... P>
void fused_tangent_dispatch(std::index_sequence<P...>, const Tape& tape, std::span<const double> x,
                            const double* seed, std::size_t p, double* out, SweepWorkspace& ws) {
  const bool fixed = ((p == P + 1 ? (fused_tangent_kernel<P + 1>(tape, x, seed, p, out, ws), true) : false) || ...);
  if (!fixed) fused_tangent_kernel<0>(tape, x, seed, p, out, ws);
}

}  // namespace detail

/// Y = J(x) * S computed in one pass that keeps primal values and tangents
/// in the tape's register plan only. Gives the same bits as
/// Linearization::tangent without storing per-record partials.
inline void fused_tangent(const Tape& tape, std::span<const double> x, const DenseMatrix& seed,
                          DenseMatrix& out, SweepWorkspace& ws) {
  require_size(x.size(), tape.n_independent(), "fused_tangent input");
  require_size(seed.rows(), tape.n_independent(), "fused_tangent seed rows");
  const std::size_t p = seed.cols();
  if (out.rows() != tape.n_dependent() || out.cols() != p) out = DenseMatrix(tape.n_dependent(), p);
  detail::fused_tangent_dispatch(std::make_index_sequence<16>{}, tape, x, seed.data().data(), p,
                                 out.data().data(), ws);
}

struct ForwardResult {
  Vector y;
  DenseMatrix Y;
};

/// y = F(x) and Y = J(x) * S.
inline ForwardResult forward_propagate(const Tape& tape, std::span<const double> x,
                                       const DenseMatrix& seed) {
  require_size(x.size(), tape.n_independent(), "forward_propagate input");
  require_size(seed.rows(), tape.n_independent(), "forward_propagate seed rows");
  Linearization lin(tape, x);
  ForwardResult res;
  res.y.assign(lin.output().begin(), lin.output().end());
  res.Y = lin.tangent(seed);
  return res;
}

/// J(x)^T * W for an m x q weight matrix W.
inline DenseMatrix reverse_propagate(const Tape& tape, std::span<const double> x,
                                     const DenseMatrix& weights) {
  require_size(x.size(), tape.n_independent(), "reverse_propagate input");
  require_size(weights.rows(), tape.n_dependent(), "reverse_propagate weight rows");
  return Linearization(tape, x).adjoint(weights);
}

/// Structural Jacobian pattern by propagating index sets through the records.
inline sparse::SparsityPattern extract_sparsity(const Tape& tape) {
  using sparse::Index;
  const std::size_t n_in = tape.n_independent();
  std::vector<std::vector<Index>> sets(tape.n_slots());
  for (std::size_t j = 0; j < n_in; ++j) sets[j] = {static_cast<Index>(j)};
  const auto records = tape.records();
  for (std::size_t k = 0; k < records.size(); ++k) {
    const OpRecord& rec = records[k];
    auto& dst = sets[n_in + k];
    if (rec.arg1 == kNoSlot) {
      dst = sets[rec.arg0];
    } else {
      const auto& a = sets[rec.arg0];
      const auto& b = sets[rec.arg1];
      dst.reserve(a.size() + b.size());
      std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(dst));
    }
  }
  std::vector<std::vector<Index>> rows;
  rows.reserve(tape.n_dependent());
  for (Slot s : tape.dependents()) rows.push_back(sets[s]);
  return {tape.n_dependent(), n_in, std::move(rows)};
}

}  // namespace adjopt::ad
