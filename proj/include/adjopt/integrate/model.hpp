#pragma once

#include <concepts>
#include <span>

#include "adjopt/ad/tape.hpp"
#include "adjopt/linalg/csr.hpp"

namespace adjopt::integrate {

/// A semi-discrete system in residual form F(u) = u_t - f(u) evaluated at
/// u_t = 0, i.e. F(u) = -f(u). `evaluate` must be a template over the scalar
/// type so the same code can be recorded.
template <class M>
concept ResidualModel = requires(const M& m, std::span<const double> u, std::span<double> f,
                                 std::span<const ad::ActiveScalar> ua,
                                 std::span<ad::ActiveScalar> fa) {
  { m.size() } -> std::convertible_to<std::size_t>;
  m.template evaluate<double>(u, f);
  m.template evaluate<ad::ActiveScalar>(ua, fa);
  { m.analytic_jacobian(u) } -> std::same_as<linalg::CsrMatrix>;
};

/// u_t = A u, so F(u) = -A u.
class LinearModel {
public:
  explicit LinearModel(linalg::CsrMatrix a) : a_(std::move(a)), neg_a_(a_) {
    if (a_.n_rows() != a_.n_cols()) throw DimensionError("LinearModel: A must be square");
    neg_a_.scale(-1.0);
  }

  std::size_t size() const noexcept { return a_.n_rows(); }
  const linalg::CsrMatrix& matrix() const noexcept { return a_; }

  template <class T>
  void evaluate(std::span<const T> u, std::span<T> f) const {
    require_size(u.size(), size(), "LinearModel state");
    require_size(f.size(), size(), "LinearModel output");
    for (std::size_t i = 0; i < size(); ++i) {
      const auto cols = neg_a_.row_cols(i);
      const auto vals = neg_a_.row_values(i);
      if (cols.empty()) {
        // An empty row still needs an active dependent when recording.
        f[i] = 0.0 * u[i];
        continue;
      }
      T acc = vals[0] * u[cols[0]];
      for (std::size_t k = 1; k < cols.size(); ++k) acc = acc + vals[k] * u[cols[k]];
      f[i] = acc;
    }
  }

  linalg::CsrMatrix analytic_jacobian(std::span<const double>) const { return neg_a_; }

private:
  linalg::CsrMatrix a_;
  linalg::CsrMatrix neg_a_;
};

}  // namespace adjopt::integrate
