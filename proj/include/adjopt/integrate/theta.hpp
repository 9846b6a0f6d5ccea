#pragma once

// Theta-method time stepping (theta = 1 backward Euler, theta = 1/2
// Crank-Nicolson) with an inexact Newton-Krylov solve per step. Each step
// finds u_{n+1} with
//
//   G(u_{n+1}) = (u_{n+1} - u_n)/h + theta F(u_{n+1}) + (1 - theta) F(u_n) = 0
//
// where F = -f is the model residual at u_t = 0. The Newton matrix is
// G' = (1/h) I + theta dF/du.

#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "adjopt/dense.hpp"
#include "adjopt/error.hpp"
#include "adjopt/integrate/jacobian.hpp"
#include "adjopt/integrate/model.hpp"
#include "adjopt/linalg/gmres.hpp"
#include "adjopt/linalg/operator.hpp"
#include "adjopt/profile.hpp"

namespace adjopt::integrate {

struct ThetaScheme {
  double theta = 0.5;
  double h = 0.5;
  std::size_t steps = 100;

  void validate() const {
    if (!(h > 0.0)) throw Error("stepsize must be positive");
    if (!(theta > 0.0 && theta <= 1.0)) throw Error("theta must lie in (0, 1]");
  }
};

struct NewtonSettings {
  double rtol = 1e-8;
  double atol = 1e-12;
  std::size_t max_newton = 50;
  linalg::GmresSettings linear{};
};

struct StepStats {
  std::size_t newton_iters = 0;
  std::size_t linear_iters = 0;
  double initial_norm = 0.0;
  double final_norm = 0.0;
};

struct SolveStats {
  std::vector<StepStats> steps;
  std::size_t total_newton = 0;
  std::size_t total_linear = 0;
  double wall_seconds = 0.0;
};

/// All accepted states x_0..x_N, kept in memory for the adjoint sweep.
struct Trajectory {
  std::vector<Vector> states;
  double h = 0.0;
  double theta = 1.0;

  std::size_t steps() const noexcept { return states.empty() ? 0 : states.size() - 1; }
};

class NewtonFailure : public Error {
public:
  NewtonFailure(const std::string& what, Vector best, double initial_norm, double final_norm)
      : Error(what), best_(std::move(best)), initial_norm_(initial_norm), final_norm_(final_norm) {}

  const Vector& best_iterate() const noexcept { return best_; }
  double initial_norm() const noexcept { return initial_norm_; }
  double final_norm() const noexcept { return final_norm_; }

private:
  Vector best_;
  double initial_norm_;
  double final_norm_;
};

namespace detail {

template <ResidualModel M>
void eval_model(const M& model, std::span<const double> u, std::span<double> f, Profiler* prof) {
  Profiler::Scope scope(prof, Phase::residual_eval);
  if (prof) prof->add(Counter::residual_evals);
  model.template evaluate<double>(u, f);
}

// G given F(u_next) and F(u_prev).
inline void combine_step_residual(std::span<const double> u_next, std::span<const double> u_prev,
                                  std::span<const double> f_next, std::span<const double> f_prev,
                                  const ThetaScheme& scheme, std::span<double> g) {
  const double inv_h = 1.0 / scheme.h;
  const double th = scheme.theta, one_minus = 1.0 - scheme.theta;
  for (std::size_t i = 0; i < g.size(); ++i)
    g[i] = (u_next[i] - u_prev[i]) * inv_h + th * f_next[i] + one_minus * f_prev[i];
}

}  // namespace detail

template <ResidualModel M>
Vector step_residual(const M& model, std::span<const double> u_next,
                     std::span<const double> u_prev, const ThetaScheme& scheme) {
  require_size(u_next.size(), model.size(), "step_residual u_next");
  require_size(u_prev.size(), model.size(), "step_residual u_prev");
  Vector f_next(model.size()), f_prev(model.size()), g(model.size());
  model.template evaluate<double>(u_next, f_next);
  model.template evaluate<double>(u_prev, f_prev);
  detail::combine_step_residual(u_next, u_prev, f_next, f_prev, scheme, g);
  return g;
}

/// Newton matrix (1/h) I + theta dF/du at u_next. Owns the inner Jacobian
/// operator; `op` refers to it, so keep the object alive while using `op`.
struct StepOperator {
  std::unique_ptr<linalg::LinearOperator> jacobian;
  linalg::ShiftedOperator op;

  StepOperator(std::unique_ptr<linalg::LinearOperator> jac, double sigma, double scale)
      : jacobian(std::move(jac)), op(sigma, *jacobian, scale) {}
};

template <ResidualModel M>
StepOperator step_jacobian_operator(const JacobianEngine<M>& engine,
                                    std::span<const double> u_next, const ThetaScheme& scheme) {
  return StepOperator(engine.linearize(u_next), 1.0 / scheme.h, scheme.theta);
}

struct NewtonResult {
  Vector u_next;
  StepStats stats;
};

template <ResidualModel M>
NewtonResult newton_solve(const M& model, const JacobianEngine<M>& engine,
                          std::span<const double> u_prev, const ThetaScheme& scheme,
                          const NewtonSettings& settings) {
  const std::size_t n = model.size();
  require_size(u_prev.size(), n, "newton_solve u_prev");
  Profiler* prof = engine.profiler();

  NewtonResult res;
  res.u_next.assign(u_prev.begin(), u_prev.end());
  Vector f_prev(n), f_next(n), g(n), rhs(n);
  detail::eval_model(model, u_prev, f_prev, prof);
  f_next = f_prev;
  detail::combine_step_residual(res.u_next, u_prev, f_next, f_prev, scheme, g);

  double norm = norm2(g);
  res.stats.initial_norm = norm;
  const double tol = std::max(settings.rtol * norm, settings.atol);
  const Vector zero(n, 0.0);

  while (norm > tol) {
    if (!std::isfinite(norm) || res.stats.newton_iters >= settings.max_newton) {
      res.stats.final_norm = norm;
      throw NewtonFailure("Newton did not converge: |G| = " + std::to_string(norm) +
                              " after " + std::to_string(res.stats.newton_iters) +
                              " iterations (initial " + std::to_string(res.stats.initial_norm) + ")",
                          res.u_next, res.stats.initial_norm, norm);
    }
    const StepOperator step = step_jacobian_operator(engine, res.u_next, scheme);
    for (std::size_t i = 0; i < n; ++i) rhs[i] = -g[i];
    linalg::GmresResult lin;
    {
      Profiler::Scope scope(prof, Phase::linear_solve);
      lin = linalg::gmres(step.op, rhs, zero, settings.linear);
    }
    axpy(1.0, lin.x, res.u_next);
    ++res.stats.newton_iters;
    res.stats.linear_iters += lin.iterations;

    detail::eval_model(model, res.u_next, f_next, prof);
    detail::combine_step_residual(res.u_next, u_prev, f_next, f_prev, scheme, g);
    norm = norm2(g);
  }
  res.stats.final_norm = norm;
  return res;
}

/// Error raised when a step fails, carrying the step index.
class StepFailure : public NewtonFailure {
public:
  StepFailure(std::size_t step, const NewtonFailure& cause)
      : NewtonFailure("step " + std::to_string(step) + ": " + cause.what(), cause.best_iterate(),
                      cause.initial_norm(), cause.final_norm()),
        step_(step) {}
  std::size_t step() const noexcept { return step_; }

private:
  std::size_t step_;
};

struct IntegrationResult {
  Trajectory trajectory;
  SolveStats stats;
};

template <ResidualModel M>
IntegrationResult integrate(const M& model, std::span<const double> x0, const ThetaScheme& scheme,
                            const JacobianEngine<M>& engine, const NewtonSettings& settings = {}) {
  require_size(x0.size(), model.size(), "integrate initial state");
  scheme.validate();
  const auto start = Profiler::Clock::now();
  IntegrationResult out;
  out.trajectory.h = scheme.h;
  out.trajectory.theta = scheme.theta;
  out.trajectory.states.reserve(scheme.steps + 1);
  out.trajectory.states.emplace_back(x0.begin(), x0.end());
  for (std::size_t k = 0; k < scheme.steps; ++k) {
    NewtonResult step;
    try {
      step = newton_solve(model, engine, out.trajectory.states.back(), scheme, settings);
    } catch (const NewtonFailure& e) {
      throw StepFailure(k, e);
    }
    out.stats.total_newton += step.stats.newton_iters;
    out.stats.total_linear += step.stats.linear_iters;
    out.stats.steps.push_back(step.stats);
    out.trajectory.states.push_back(std::move(step.u_next));
  }
  out.stats.wall_seconds =
      std::chrono::duration<double>(Profiler::Clock::now() - start).count();
  return out;
}

/// Convenience overload that sets up the Jacobian engine at x0.
template <ResidualModel M>
IntegrationResult integrate(const M& model, std::span<const double> x0, const ThetaScheme& scheme,
                            JacobianStrategy strategy, const NewtonSettings& settings = {},
                            Profiler* prof = nullptr) {
  JacobianEngine<M> engine(model, strategy, x0, prof);
  return integrate(model, x0, scheme, engine, settings);
}

}  // namespace adjopt::integrate
