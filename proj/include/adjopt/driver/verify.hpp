#pragma once

// Bundled derivative checks for small grids: analytic vs AD vs finite
// differences, lossless compression, the dot-product identity, shell vs
// assembled products, and adjoint gradient vs finite differences of the
// objective.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "adjopt/ad/sweeps.hpp"
#include "adjopt/adjoint/adjoint.hpp"
#include "adjopt/driver/config.hpp"
#include "adjopt/driver/run.hpp"
#include "adjopt/grayscott/grayscott.hpp"
#include "adjopt/integrate/jacobian.hpp"
#include "adjopt/integrate/theta.hpp"
#include "adjopt/linalg/operator.hpp"
#include "adjopt/sparse/coloring.hpp"

namespace adjopt::driver {

inline constexpr std::size_t kMaxVerifyGrid = 32;

struct VerifyOptions {
  /// Test hook: perturb one analytic Jacobian entry before comparing.
  bool corrupt_analytic = false;
  std::size_t random_states = 3;
};

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct VerifyOutcome {
  int status = exit_code::ok;
  std::string message;
  std::vector<CheckResult> checks;
};

/// max over the union of structures of |a_ij - b_ij| / scale_ij with
/// scale_ij = max(|a_ij|, |b_ij|, max_k |a_ik|, max_k |b_ik|). The row floor
/// keeps entries that cancel to near zero from amplifying roundoff.
inline double max_relative_diff(const linalg::CsrMatrix& a, const linalg::CsrMatrix& b) {
  require_size(b.n_rows(), a.n_rows(), "max_relative_diff rows");
  double worst = 0.0;
  auto row_max = [](const linalg::CsrMatrix& m, std::size_t i) {
    double r = 0.0;
    for (double v : m.row_values(i)) r = std::max(r, std::abs(v));
    return r;
  };
  for (std::size_t i = 0; i < a.n_rows(); ++i) {
    const double floor = std::max(row_max(a, i), row_max(b, i));
    auto scan = [&](const linalg::CsrMatrix& x, const linalg::CsrMatrix& y) {
      const auto cols = x.row_cols(i);
      const auto vals = x.row_values(i);
      for (std::size_t k = 0; k < cols.size(); ++k) {
        const double u = vals[k], w = y.at(i, cols[k]);
        const double scale = std::max({std::abs(u), std::abs(w), floor});
        if (scale > 0.0) worst = std::max(worst, std::abs(u - w) / scale);
      }
    };
    scan(a, b);
    scan(b, a);
  }
  return worst;
}

inline double max_absolute_diff(const linalg::CsrMatrix& a, const linalg::CsrMatrix& b) {
  double worst = 0.0;
  auto scan = [&](const linalg::CsrMatrix& x, const linalg::CsrMatrix& y) {
    for (std::size_t i = 0; i < x.n_rows(); ++i) {
      const auto cols = x.row_cols(i);
      const auto vals = x.row_values(i);
      for (std::size_t k = 0; k < cols.size(); ++k)
        worst = std::max(worst, std::abs(vals[k] - y.at(i, cols[k])));
    }
  };
  scan(a, b);
  scan(b, a);
  return worst;
}

/// A state with u in [0.2, 1] and v in [0, 0.5] at every node.
inline Vector random_state(const grayscott::GrayScottParams& p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> du(0.2, 1.0), dv(0.0, 0.5);
  Vector x(p.n_dofs());
  for (std::size_t k = 0; k < p.n_nodes(); ++k) {
    x[2 * k] = du(rng);
    x[2 * k + 1] = dv(rng);
  }
  return x;
}

/// Forward settings tight enough that the objective is smooth in the
/// initial condition at the level finite differences can resolve.
inline integrate::NewtonSettings tight_newton() {
  integrate::NewtonSettings s;
  s.rtol = 1e-14;
  s.atol = 1e-13;
  s.max_newton = 50;
  s.linear.rtol = 1e-13;
  return s;
}

/// Central difference of psi(x_N) with respect to initial-condition DOF k.
inline double objective_fd(const grayscott::GrayScottModel& model, std::span<const double> x0,
                           const integrate::ThetaScheme& scheme, const adjoint::Objective& obj,
                           std::size_t k, double eps) {
  const integrate::JacobianEngine<grayscott::GrayScottModel> engine(
      model, integrate::JacobianStrategy::analytic, x0);
  const auto settings = tight_newton();
  Vector xp(x0.begin(), x0.end());
  xp[k] += eps;
  const double fp =
      obj.value(integrate::integrate(model, xp, scheme, engine, settings).trajectory.states.back());
  xp[k] = x0[k] - eps;
  const double fm =
      obj.value(integrate::integrate(model, xp, scheme, engine, settings).trajectory.states.back());
  return (fp - fm) / (2.0 * eps);
}

inline std::string sci(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << v;
  return os.str();
}

inline VerifyOutcome verify(const RunConfig& config, const VerifyOptions& options = {}) {
  using grayscott::GrayScottModel;
  using integrate::JacobianEngine;
  using integrate::JacobianStrategy;

  VerifyOutcome out;
  try {
    config.validate();
  } catch (const ConfigError& e) {
    out.status = exit_code::config;
    out.message = e.what();
    return out;
  }
  const auto& p = config.params;
  if (p.mx > kMaxVerifyGrid || p.my > kMaxVerifyGrid) {
    out.status = exit_code::config;
    out.message = "grid too large for verify";
    return out;
  }

  std::mt19937_64 rng(config.seed);
  const GrayScottModel model(p);
  const Vector x0 = grayscott::initial_conditions(p);
  const ad::Tape tape = grayscott::record_residual(x0, p);
  const JacobianEngine<GrayScottModel> uncompressed(model, JacobianStrategy::ad_uncompressed, x0);
  const JacobianEngine<GrayScottModel> compressed(model, JacobianStrategy::ad_compressed, x0);

  std::vector<Vector> states;
  for (std::size_t k = 0; k < options.random_states; ++k) states.push_back(random_state(p, rng));

  auto analytic_at = [&](const Vector& x) {
    auto j = grayscott::analytic_jacobian(x, p);
    if (options.corrupt_analytic) j.values()[0] += 1e-3;
    return j;
  };

  {
    double worst = 0.0;
    for (const auto& x : states)
      worst = std::max(worst, max_relative_diff(analytic_at(x), uncompressed.assemble(x)));
    out.checks.push_back({"analytic_vs_ad", worst <= 1e-13,
                          "max relative entry difference " + sci(worst)});
  }
  {
    double worst = 0.0;
    for (const auto& x : states)
      worst = std::max(worst, max_absolute_diff(analytic_at(x), grayscott::fd_jacobian(x, p, 1e-7)));
    out.checks.push_back({"analytic_vs_fd", worst <= 1e-6,
                          "max absolute entry difference " + sci(worst)});
  }
  {
    bool exact = true;
    for (const auto& x : states) {
      const auto a = compressed.assemble(x);
      const auto b = uncompressed.assemble(x);
      exact = exact && max_absolute_diff(a, b) == 0.0;
    }
    const bool valid = !sparse::find_conflict(*compressed.pattern(), *compressed.coloring());
    out.checks.push_back({"compressed_lossless", exact && valid,
                          std::to_string(compressed.colors_used()) + " colors, coloring " +
                              (valid ? "valid" : "INVALID")});
  }
  {
    std::normal_distribution<double> g;
    double worst = 0.0;
    for (const auto& x : states) {
      Vector v(p.n_dofs()), w(p.n_dofs());
      for (auto& e : v) e = g(rng);
      for (auto& e : w) e = g(rng);
      const ad::Linearization lin(tape, x);
      ad::SweepWorkspace ws;
      Vector jv(p.n_dofs()), jtw(p.n_dofs());
      lin.jvp(v, jv, ws);
      lin.vjp(w, jtw, ws);
      const double gap = std::abs(dot(jv, w) - dot(v, jtw)) / (norm2(jv) * norm2(w));
      worst = std::max(worst, gap);
    }
    out.checks.push_back(
        {"dot_product", worst <= 1e-12, "max scaled gap " + sci(worst)});
  }
  {
    std::normal_distribution<double> g;
    double worst = 0.0;
    for (const auto& x : states) {
      const linalg::AdShellOperator shell(tape, x);
      const linalg::CsrOperator assembled(compressed.assemble(x));
      Vector v(p.n_dofs());
      for (auto& e : v) e = g(rng);
      const Vector a = assembled.apply(v), s = shell.apply(v);
      const Vector at = assembled.apply_transpose(v), st = shell.apply_transpose(v);
      worst = std::max(worst, max_abs_diff(a, s) / (1.0 + norm_inf(a)));
      worst = std::max(worst, max_abs_diff(at, st) / (1.0 + norm_inf(at)));
    }
    out.checks.push_back(
        {"shell_vs_assembled", worst <= 1e-12, "max scaled difference " + sci(worst)});
  }
  {
    integrate::ThetaScheme scheme = config.scheme();
    scheme.steps = std::min<std::size_t>(scheme.steps, 10);
    const auto obj = config.objective.resolve(p);
    const JacobianEngine<GrayScottModel> engine(model, JacobianStrategy::analytic, x0);
    try {
      const auto fwd = integrate::integrate(model, x0, scheme, engine, tight_newton());
      const auto grad = adjoint::adjoint_sweep(engine, fwd.trajectory, obj, config.adjoint).gradient;
      std::vector<std::size_t> order(grad.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::partial_sort(order.begin(), order.begin() + 5, order.end(),
                        [&](auto a, auto b) { return std::abs(grad[a]) > std::abs(grad[b]); });
      double worst = 0.0;
      for (std::size_t r = 0; r < 5; ++r) {
        const std::size_t k = order[r];
        if (std::abs(grad[k]) <= 1e-8) continue;
        const double fd = objective_fd(model, x0, scheme, obj, k, 1e-5);
        worst = std::max(worst, std::abs(fd - grad[k]) / std::abs(grad[k]));
      }
      out.checks.push_back({"gradient_vs_fd", worst <= 1e-4,
                            "max relative error " + sci(worst) + " over " +
                                std::to_string(scheme.steps) + " steps"});
    } catch (const Error& e) {
      out.checks.push_back({"gradient_vs_fd", false, e.what()});
    }
  }

  const bool all = std::all_of(out.checks.begin(), out.checks.end(),
                               [](const CheckResult& c) { return c.passed; });
  out.status = all ? exit_code::ok : exit_code::check_failed;
  if (!all) {
    for (const auto& c : out.checks)
      if (!c.passed) {
        out.message = "check failed: " + c.name;
        break;
      }
  }
  return out;
}

inline void print_checks(std::ostream& os, const VerifyOutcome& v) {
  for (const auto& c : v.checks)
    os << (c.passed ? "PASS  " : "FAIL  ") << c.name << "  (" << c.detail << ")\n";
}

}  // namespace adjopt::driver
