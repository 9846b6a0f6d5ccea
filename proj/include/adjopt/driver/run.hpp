#pragma once

// Forward + adjoint run of the Gray-Scott benchmark under one Jacobian
// strategy, with phase timings and iteration counts collected into a JSON
// report.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "adjopt/adjoint/adjoint.hpp"
#include "adjopt/driver/config.hpp"
#include "adjopt/driver/io.hpp"
#include "adjopt/grayscott/grayscott.hpp"
#include "adjopt/integrate/jacobian.hpp"
#include "adjopt/integrate/theta.hpp"
#include "adjopt/profile.hpp"

namespace adjopt::driver {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int check_failed = 1;
inline constexpr int config = 2;
inline constexpr int solver = 3;
inline constexpr int io = 4;
}  // namespace exit_code

struct RunOutcome {
  int status = exit_code::ok;
  std::string message;
  nlohmann::json report;
  Vector final_state;
  Vector gradient;
  std::vector<std::filesystem::path> files;
};

inline nlohmann::json config_json(const RunConfig& c) {
  return {
      {"mx", c.params.mx},
      {"my", c.params.my},
      {"dt", c.dt},
      {"steps", c.steps},
      {"theta", c.theta},
      {"strategy", integrate::strategy_name(c.strategy)},
      {"objective", c.objective.str()},
      {"D1", c.params.D1},
      {"D2", c.params.D2},
      {"gamma", c.params.gamma},
      {"kappa", c.params.kappa},
      {"seed", c.seed},
      {"threads", c.threads},
  };
}

inline nlohmann::json phases_json(const Profiler& prof) {
  nlohmann::json out = nlohmann::json::object();
  for (std::size_t k = 0; k < kPhaseCount; ++k) {
    const auto ph = static_cast<Phase>(k);
    out[phase_name(ph)] = prof.seconds(ph);
  }
  return out;
}

/// Runs integrate then adjoint_sweep and writes solution.csv, gradient.csv
/// and report.json into config.out_dir. Never throws for solver or I/O
/// failures; those are reported through `status`.
inline RunOutcome run(const RunConfig& config, std::ostream& log = std::cerr) {
  RunOutcome out;
  try {
    config.validate();
  } catch (const ConfigError& e) {
    out.status = exit_code::config;
    out.message = e.what();
    return out;
  }
  if (config.params.mx < 8 || config.params.my < 8)
    log << "warning: grids below 8x8 wrap the stencil onto itself; the coloring may need "
           "many colors\n";

  const auto wall_start = Profiler::Clock::now();
  const grayscott::GrayScottModel model(config.params);
  const auto objective = config.objective.resolve(config.params);
  const Vector x0 = grayscott::initial_conditions(config.params);

  Profiler prof;
  integrate::JacobianOptions opts;
  opts.threads = config.threads;
  const integrate::JacobianEngine<grayscott::GrayScottModel> engine(model, config.strategy, x0,
                                                                    &prof, opts);
  const double setup_seconds =
      std::chrono::duration<double>(Profiler::Clock::now() - wall_start).count();

  integrate::IntegrationResult fwd;
  adjoint::AdjointResult adj;
  try {
    fwd = integrate::integrate(model, x0, config.scheme(), engine, config.newton);
    adj = adjoint::adjoint_sweep(engine, fwd.trajectory, objective, config.adjoint);
  } catch (const Error& e) {
    out.status = exit_code::solver;
    out.message = e.what();
    return out;
  }
  const double total_seconds =
      std::chrono::duration<double>(Profiler::Clock::now() - wall_start).count();

  out.final_state = fwd.trajectory.states.back();
  out.gradient = adj.gradient;

  std::vector<std::size_t> newton_per_step;
  std::vector<std::size_t> linear_per_step;
  for (const auto& s : fwd.stats.steps) {
    newton_per_step.push_back(s.newton_iters);
    linear_per_step.push_back(s.linear_iters);
  }

  nlohmann::json& r = out.report;
  r["config"] = config_json(config);
  r["phases"] = phases_json(prof);
  r["totals"] = {{"setup_seconds", setup_seconds},
                 {"forward_seconds", fwd.stats.wall_seconds},
                 {"adjoint_seconds", adj.stats.wall_seconds},
                 {"total_seconds", total_seconds}};
  r["newton_iters"] = newton_per_step;
  r["linear_iters_per_step"] = linear_per_step;
  r["linear_iters"] = {{"forward", fwd.stats.total_linear}, {"adjoint", adj.stats.total_linear}};
  r["colors_used"] = engine.colors_used();
  r["counts"] = {{"forward_vectors", prof.count(Counter::forward_vectors)},
                 {"reverse_vectors", prof.count(Counter::reverse_vectors)},
                 {"jacobian_builds", prof.count(Counter::jacobian_builds)},
                 {"residual_evals", prof.count(Counter::residual_evals)}};
  r["reverse_propagations"] = prof.count(Counter::reverse_vectors);
  r["objective_value"] = objective.value(out.final_state);
  r["gradient_norm"] = norm2(adj.gradient);

  try {
    std::filesystem::create_directories(config.out_dir);
    const auto solution = config.out_dir / "solution.csv";
    const auto gradient = config.out_dir / "gradient.csv";
    const auto report = config.out_dir / "report.json";
    write_field_csv(solution, config.params, out.final_state, "u,v");
    write_field_csv(gradient, config.params, out.gradient, "du,dv");
    write_text(report, r.dump(2) + "\n");
    out.files = {solution, gradient, report};
  } catch (const std::exception& e) {
    out.status = exit_code::io;
    out.message = e.what();
  }
  return out;
}

}  // namespace adjopt::driver
