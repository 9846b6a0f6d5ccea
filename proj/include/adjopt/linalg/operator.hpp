#pragma once

#include <memory>
#include <span>
#include <vector>

#include "adjopt/ad/sweeps.hpp"
#include "adjopt/dense.hpp"
#include "adjopt/linalg/csr.hpp"
#include "adjopt/profile.hpp"

namespace adjopt::linalg {

/// Anything that can act on a vector and on a vector by its transpose.
class LinearOperator {
public:
  virtual ~LinearOperator() = default;

  virtual std::size_t rows() const = 0;
  virtual std::size_t cols() const = 0;
  virtual void apply(std::span<const double> v, std::span<double> w) const = 0;
  virtual void apply_transpose(std::span<const double> v, std::span<double> w) const = 0;

  Vector apply(std::span<const double> v) const {
    Vector w(rows());
    apply(v, w);
    return w;
  }
  Vector apply_transpose(std::span<const double> v) const {
    Vector w(cols());
    apply_transpose(v, w);
    return w;
  }
};

/// Assembled matrix.
class CsrOperator final : public LinearOperator {
public:
  explicit CsrOperator(CsrMatrix a) : a_(std::move(a)) {}

  std::size_t rows() const override { return a_.n_rows(); }
  std::size_t cols() const override { return a_.n_cols(); }
  void apply(std::span<const double> v, std::span<double> w) const override { spmv(a_, v, w); }
  void apply_transpose(std::span<const double> v, std::span<double> w) const override {
    spmv_transpose(a_, v, w);
  }

  const CsrMatrix& matrix() const noexcept { return a_; }
  CsrMatrix& matrix() noexcept { return a_; }

  using LinearOperator::apply;
  using LinearOperator::apply_transpose;

private:
  CsrMatrix a_;
};

/// Matrix-free Jacobian of a tape at a linearization point: products are
/// forward sweeps, transposed products are reverse sweeps. Never forms J.
///
/// Not safe for concurrent apply() calls; it owns one sweep workspace.
class AdShellOperator final : public LinearOperator {
public:
  AdShellOperator(const ad::Tape& tape, std::span<const double> x, Profiler* prof = nullptr)
      : lin_(tape, x), prof_(prof) {}

  /// Re-point the shell at a new linearization state.
  void relinearize(std::span<const double> x) { lin_.relinearize(x); }

  std::size_t rows() const override { return lin_.m(); }
  std::size_t cols() const override { return lin_.n(); }

  void apply(std::span<const double> v, std::span<double> w) const override {
    Profiler::Scope scope(prof_, Phase::forward_propagation);
    if (prof_) prof_->add(Counter::forward_vectors);
    lin_.jvp(v, w, ws_);
  }

  void apply_transpose(std::span<const double> v, std::span<double> w) const override {
    Profiler::Scope scope(prof_, Phase::reverse_propagation);
    if (prof_) prof_->add(Counter::reverse_vectors);
    lin_.vjp(v, w, ws_);
  }

  const ad::Linearization& linearization() const noexcept { return lin_; }

  using LinearOperator::apply;
  using LinearOperator::apply_transpose;

private:
  ad::Linearization lin_;
  Profiler* prof_;
  mutable ad::SweepWorkspace ws_;
};

/// sigma * I + scale * inner. With sigma = 1/h and scale = theta this is the
/// Newton matrix of an implicit theta step for a residual-form model.
class ShiftedOperator final : public LinearOperator {
public:
  ShiftedOperator(double sigma, const LinearOperator& inner, double scale = 1.0)
      : sigma_(sigma), scale_(scale), inner_(&inner) {}

  double sigma() const noexcept { return sigma_; }
  double scale() const noexcept { return scale_; }
  const LinearOperator& inner() const noexcept { return *inner_; }

  std::size_t rows() const override { return inner_->rows(); }
  std::size_t cols() const override { return inner_->cols(); }

  void apply(std::span<const double> v, std::span<double> w) const override {
    inner_->apply(v, w);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = sigma_ * v[i] + scale_ * w[i];
  }

  void apply_transpose(std::span<const double> v, std::span<double> w) const override {
    inner_->apply_transpose(v, w);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = sigma_ * v[i] + scale_ * w[i];
  }

  using LinearOperator::apply;
  using LinearOperator::apply_transpose;

private:
  double sigma_;
  double scale_;
  const LinearOperator* inner_;
};

/// The zero map on R^n.
class ZeroOperator final : public LinearOperator {
public:
  explicit ZeroOperator(std::size_t n) : n_(n) {}
  std::size_t rows() const override { return n_; }
  std::size_t cols() const override { return n_; }
  void apply(std::span<const double>, std::span<double> w) const override {
    std::fill(w.begin(), w.end(), 0.0);
  }
  void apply_transpose(std::span<const double>, std::span<double> w) const override {
    std::fill(w.begin(), w.end(), 0.0);
  }
  using LinearOperator::apply;
  using LinearOperator::apply_transpose;

private:
  std::size_t n_;
};

}  // namespace adjopt::linalg
