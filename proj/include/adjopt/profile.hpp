#pragma once

#include <array>
#include <chrono>
#include <cstddef>
#include <utility>
#include <vector>

namespace adjopt {

enum class Phase : std::size_t {
  tape_record,
  sparsity,
  coloring_seed,
  forward_propagation,
  recovery,
  jacobian_assembly,
  linear_solve,
  residual_eval,
  adjoint_transpose_solve,
  reverse_propagation,
};
inline constexpr std::size_t kPhaseCount = 10;

inline const char* phase_name(Phase p) noexcept {
  constexpr std::array<const char*, kPhaseCount> names{
      "tape_record",         "sparsity",         "coloring_seed",
      "forward_propagation", "recovery",         "jacobian_assembly",
      "linear_solve",        "residual_eval",    "adjoint_transpose_solve",
      "reverse_propagation"};
  return names[static_cast<std::size_t>(p)];
}

enum class Counter : std::size_t {
  forward_vectors,  // seed directions pushed through tangent sweeps
  reverse_vectors,  // weight directions pulled through adjoint sweeps
  jacobian_builds,
  residual_evals,
};
inline constexpr std::size_t kCounterCount = 4;

/// Wall-clock accounting per phase. Nested scopes charge time to the
/// innermost phase only.
class Profiler {
public:
  using Clock = std::chrono::steady_clock;

  class Scope {
  public:
    Scope(Profiler* prof, Phase phase) : prof_(prof) {
      if (prof_) prof_->push(phase);
    }
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;
    ~Scope() {
      if (prof_) prof_->pop();
    }

  private:
    Profiler* prof_;
  };

  double seconds(Phase p) const noexcept { return seconds_[static_cast<std::size_t>(p)]; }
  std::size_t entries(Phase p) const noexcept { return entries_[static_cast<std::size_t>(p)]; }
  std::size_t count(Counter c) const noexcept { return counters_[static_cast<std::size_t>(c)]; }
  void add(Counter c, std::size_t n = 1) noexcept { counters_[static_cast<std::size_t>(c)] += n; }

  double total_seconds() const noexcept {
    double s = 0.0;
    for (double x : seconds_) s += x;
    return s;
  }

private:
  void push(Phase phase) {
    const auto now = Clock::now();
    if (!stack_.empty()) charge(stack_.back().first, now - stack_.back().second);
    stack_.emplace_back(phase, now);
    ++entries_[static_cast<std::size_t>(phase)];
  }

  void pop() {
    const auto now = Clock::now();
    charge(stack_.back().first, now - stack_.back().second);
    stack_.pop_back();
    if (!stack_.empty()) stack_.back().second = now;
  }

  void charge(Phase phase, Clock::duration d) {
    seconds_[static_cast<std::size_t>(phase)] += std::chrono::duration<double>(d).count();
  }

  std::array<double, kPhaseCount> seconds_{};
  std::array<std::size_t, kPhaseCount> entries_{};
  std::array<std::size_t, kCounterCount> counters_{};
  std::vector<std::pair<Phase, Clock::time_point>> stack_;
};

}  // namespace adjopt
