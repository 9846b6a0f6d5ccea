#pragma once

// Discrete adjoint of the theta step. With J = dF/du the step map
// x_n -> x_{n+1} has derivative
//
//   (I + h theta J(x_{n+1}))^{-1} (I - h (1 - theta) J(x_n))
//
// so one backward step solves (I + h theta J(x_{n+1}))^T mu = lambda_{n+1}
// and sets lambda_n = mu - h (1 - theta) J(x_n)^T mu.

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adjopt/dense.hpp"
#include "adjopt/error.hpp"
#include "adjopt/grayscott/grayscott.hpp"
#include "adjopt/integrate/jacobian.hpp"
#include "adjopt/integrate/theta.hpp"
#include "adjopt/linalg/gmres.hpp"
#include "adjopt/profile.hpp"

namespace adjopt::adjoint {

/// psi(x_N) = x_N at one grid node and species.
struct Objective {
  std::size_t node_i = 0;
  std::size_t node_j = 0;
  grayscott::Species species = grayscott::Species::u;
  std::size_t mx = 0;
  std::size_t my = 0;

  static Objective at(const grayscott::GrayScottParams& p, std::size_t i, std::size_t j,
                      grayscott::Species s) {
    if (i >= p.mx || j >= p.my)
      throw Error("objective node (" + std::to_string(i) + "," + std::to_string(j) +
                  ") outside the grid");
    return {i, j, s, p.mx, p.my};
  }

  /// Node nearest the domain centre; ties resolve to the lower index.
  static Objective centre(const grayscott::GrayScottParams& p,
                          grayscott::Species s = grayscott::Species::u) {
    return at(p, p.mx / 2, p.my / 2, s);
  }

  std::size_t dof() const noexcept {
    return 2 * (node_j * mx + node_i) + static_cast<std::size_t>(species);
  }
  std::size_t n_dofs() const noexcept { return 2 * mx * my; }

  double value(std::span<const double> x_final) const { return x_final[dof()]; }
};

/// lambda_N = (dpsi/dx)^T, a unit vector for a point functional.
inline Vector terminal_seed(const Objective& objective, std::span<const double> x_final) {
  require_size(x_final.size(), objective.n_dofs(), "terminal_seed state");
  Vector lambda(x_final.size(), 0.0);
  lambda[objective.dof()] = 1.0;
  return lambda;
}

struct AdjointSettings {
  linalg::GmresSettings linear{1e-10, 1e-50, 10000, 30};
};

struct AdjointStats {
  std::vector<std::size_t> linear_iters;  // per backward step, in sweep order
  std::size_t total_linear = 0;
  std::size_t reverse_vectors = 0;
  std::size_t linearizations = 0;
  double wall_seconds = 0.0;
};

class AdjointFailure : public Error {
public:
  AdjointFailure(std::size_t step, const std::string& what)
      : Error("adjoint step " + std::to_string(step) + ": " + what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

private:
  std::size_t step_;
};

/// Reuses the Jacobian at x_n between backward steps n and n-1.
template <integrate::ResidualModel M>
class LinearizationCache {
public:
  explicit LinearizationCache(const integrate::JacobianEngine<M>& engine) : engine_(&engine) {}

  const linalg::LinearOperator& at(const integrate::Trajectory& traj, std::size_t n) {
    if (!cached_ || index_ != n) {
      op_ = engine_->linearize(traj.states.at(n));
      index_ = n;
      cached_ = true;
      ++builds_;
    }
    return *op_;
  }
  std::size_t builds() const noexcept { return builds_; }

private:
  const integrate::JacobianEngine<M>* engine_;
  std::unique_ptr<linalg::LinearOperator> op_;
  std::size_t index_ = 0;
  bool cached_ = false;
  std::size_t builds_ = 0;
};

struct StepResult {
  Vector lambda;
  std::size_t linear_iters = 0;
};

template <integrate::ResidualModel M>
StepResult adjoint_step(LinearizationCache<M>& cache, const integrate::Trajectory& traj,
                        std::size_t n, std::span<const double> lambda_next,
                        const AdjointSettings& settings, Profiler* prof = nullptr) {
  if (n >= traj.steps()) throw Error("adjoint_step: step index out of range");
  const double h = traj.h, theta = traj.theta;

  StepResult out;
  linalg::GmresResult lin;
  {
    const auto& j_next = cache.at(traj, n + 1);
    const linalg::ShiftedOperator a(1.0, j_next, h * theta);
    const Vector zero(lambda_next.size(), 0.0);
    Profiler::Scope scope(prof, Phase::adjoint_transpose_solve);
    lin = linalg::gmres(a, lambda_next, zero, settings.linear, /*transposed=*/true);
  }
  if (!lin.converged)
    throw AdjointFailure(n, "transposed solve did not converge (residual " +
                                std::to_string(lin.residual_norm) + ")");
  out.linear_iters = lin.iterations;
  out.lambda = std::move(lin.x);

  if (theta < 1.0) {
    const auto& j_prev = cache.at(traj, n);
    const Vector jt_mu = j_prev.apply_transpose(out.lambda);
    axpy(-h * (1.0 - theta), jt_mu, out.lambda);
  }
  return out;
}

template <integrate::ResidualModel M>
StepResult adjoint_step(const integrate::JacobianEngine<M>& engine,
                        const integrate::Trajectory& traj, std::size_t n,
                        std::span<const double> lambda_next, const AdjointSettings& settings = {}) {
  LinearizationCache<M> cache(engine);
  return adjoint_step(cache, traj, n, lambda_next, settings, engine.profiler());
}

struct AdjointResult {
  Vector gradient;  // lambda_0
  AdjointStats stats;
};

/// Runs lambda backwards from `terminal` over the whole trajectory.
template <integrate::ResidualModel M>
AdjointResult adjoint_sweep(const integrate::JacobianEngine<M>& engine,
                            const integrate::Trajectory& traj, std::span<const double> terminal,
                            const AdjointSettings& settings = {}) {
  if (traj.states.empty()) throw Error("adjoint_sweep: empty trajectory");
  require_size(terminal.size(), traj.states.back().size(), "adjoint_sweep terminal seed");
  Profiler* prof = engine.profiler();
  const std::size_t reverse_before = prof ? prof->count(Counter::reverse_vectors) : 0;
  const auto start = Profiler::Clock::now();

  AdjointResult out;
  out.gradient.assign(terminal.begin(), terminal.end());
  LinearizationCache<M> cache(engine);
  for (std::size_t n = traj.steps(); n-- > 0;) {
    auto step = adjoint_step(cache, traj, n, out.gradient, settings, prof);
    out.gradient = std::move(step.lambda);
    out.stats.linear_iters.push_back(step.linear_iters);
    out.stats.total_linear += step.linear_iters;
  }
  out.stats.linearizations = cache.builds();
  out.stats.reverse_vectors = prof ? prof->count(Counter::reverse_vectors) - reverse_before : 0;
  out.stats.wall_seconds = std::chrono::duration<double>(Profiler::Clock::now() - start).count();
  return out;
}

template <integrate::ResidualModel M>
AdjointResult adjoint_sweep(const integrate::JacobianEngine<M>& engine,
                            const integrate::Trajectory& traj, const Objective& objective,
                            const AdjointSettings& settings = {}) {
  return adjoint_sweep(engine, traj, terminal_seed(objective, traj.states.back()), settings);
}

}  // namespace adjopt::adjoint
