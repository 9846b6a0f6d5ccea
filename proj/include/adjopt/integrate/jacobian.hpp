#pragma once

// Produces the model Jacobian dF/du at a state under one of five strategies:
// hand-derived, finite differences, AD with the identity seed, AD with a
// coloring-compressed seed, or AD matrix-free.

#include <algorithm>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "adjopt/ad/sweeps.hpp"
#include "adjopt/fd.hpp"
#include "adjopt/integrate/model.hpp"
#include "adjopt/linalg/operator.hpp"
#include "adjopt/profile.hpp"
#include "adjopt/sparse/coloring.hpp"

namespace adjopt::integrate {

enum class JacobianStrategy { analytic, fd, ad_uncompressed, ad_compressed, ad_matrix_free };

inline constexpr std::array<JacobianStrategy, 5> kAllStrategies{
    JacobianStrategy::analytic, JacobianStrategy::fd, JacobianStrategy::ad_uncompressed,
    JacobianStrategy::ad_compressed, JacobianStrategy::ad_matrix_free};

inline const char* strategy_name(JacobianStrategy s) noexcept {
  switch (s) {
    case JacobianStrategy::analytic: return "analytic";
    case JacobianStrategy::fd: return "fd";
    case JacobianStrategy::ad_uncompressed: return "uncompressed";
    case JacobianStrategy::ad_compressed: return "compressed";
    case JacobianStrategy::ad_matrix_free: return "matrix-free";
  }
  return "?";
}

inline std::optional<JacobianStrategy> parse_strategy(std::string_view name) {
  for (auto s : kAllStrategies)
    if (name == strategy_name(s)) return s;
  return std::nullopt;
}

inline bool is_ad(JacobianStrategy s) noexcept {
  return s == JacobianStrategy::ad_uncompressed || s == JacobianStrategy::ad_compressed ||
         s == JacobianStrategy::ad_matrix_free;
}

struct JacobianOptions {
  int tape_tag = 1;
  double fd_eps = 1e-6;
  /// Identity-seed columns pushed per tangent sweep in uncompressed mode.
  std::size_t seed_block = 32;
  /// Worker threads for uncompressed seed blocks; results do not depend on it.
  std::size_t threads = 1;
  sparse::ColumnOrder column_order = sparse::ColumnOrder::natural;
  bool refine_coloring = true;
};

template <class M>
ad::Tape record_model(const M& model, std::span<const double> x, int tag) {
  auto session = ad::begin_recording(tag);
  std::vector<ad::ActiveScalar> u;
  u.reserve(x.size());
  for (double xi : x) u.push_back(session.mark_independent(xi));
  std::vector<ad::ActiveScalar> f(model.size());
  model.template evaluate<ad::ActiveScalar>(std::span<const ad::ActiveScalar>(u),
                                            std::span<ad::ActiveScalar>(f));
  for (const auto& fi : f) session.mark_dependent(fi);
  return session.end();
}

/// Builds Jacobian operators for one model under one strategy. Everything
/// that does not depend on the state (tape, pattern, coloring, seed,
/// recovery) is set up once in the constructor.
template <ResidualModel M>
class JacobianEngine {
public:
  JacobianEngine(const M& model, JacobianStrategy strategy, std::span<const double> record_point,
                 Profiler* prof = nullptr, JacobianOptions options = {})
      : model_(&model), strategy_(strategy), prof_(prof), opts_(options) {
    require_size(record_point.size(), model.size(), "JacobianEngine record point");
    if (is_ad(strategy_)) {
      Profiler::Scope scope(prof_, Phase::tape_record);
      tape_ = record_model(model, record_point, opts_.tape_tag);
    }
    if (strategy_ == JacobianStrategy::ad_compressed) {
      {
        Profiler::Scope scope(prof_, Phase::sparsity);
        pattern_ = ad::extract_sparsity(*tape_);
      }
      setup_coloring();
    }
    if (strategy_ == JacobianStrategy::fd) {
      // The stencil is known to the model; colored differences reuse it.
      {
        Profiler::Scope scope(prof_, Phase::sparsity);
        pattern_ = model.analytic_jacobian(record_point).pattern();
      }
      setup_coloring();
    }
  }

  JacobianStrategy strategy() const noexcept { return strategy_; }
  const std::optional<ad::Tape>& tape() const noexcept { return tape_; }
  const std::optional<sparse::SparsityPattern>& pattern() const noexcept { return pattern_; }
  const std::optional<sparse::Coloring>& coloring() const noexcept { return coloring_; }
  std::size_t colors_used() const noexcept { return coloring_ ? coloring_->n_colors : 0; }
  Profiler* profiler() const noexcept { return prof_; }

  /// dF/du at u, assembled or matrix-free according to the strategy.
  std::unique_ptr<linalg::LinearOperator> linearize(std::span<const double> u) const {
    require_size(u.size(), model_->size(), "linearize state");
    if (prof_) prof_->add(Counter::jacobian_builds);
    if (strategy_ == JacobianStrategy::ad_matrix_free) {
      Profiler::Scope scope(prof_, Phase::forward_propagation);
      return std::make_unique<linalg::AdShellOperator>(*tape_, u, prof_);
    }
    return std::make_unique<linalg::CsrOperator>(assemble(u));
  }

  /// Assembled dF/du; throws for the matrix-free strategy.
  linalg::CsrMatrix assemble(std::span<const double> u) const {
    switch (strategy_) {
      case JacobianStrategy::analytic: {
        Profiler::Scope scope(prof_, Phase::jacobian_assembly);
        return model_->analytic_jacobian(u);
      }
      case JacobianStrategy::fd: return assemble_fd(u);
      case JacobianStrategy::ad_uncompressed: return assemble_uncompressed(u);
      case JacobianStrategy::ad_compressed: return assemble_compressed(u);
      case JacobianStrategy::ad_matrix_free: break;
    }
    throw Error("matrix-free strategy never assembles the Jacobian");
  }

private:
  void setup_coloring() {
    Profiler::Scope scope(prof_, Phase::coloring_seed);
    coloring_ = sparse::color_columns(*pattern_, opts_.column_order);
    if (opts_.refine_coloring) coloring_ = sparse::refine_coloring(*pattern_, std::move(*coloring_));
    seed_ = sparse::build_seed(*coloring_, pattern_->n_cols());
    recovery_ = sparse::build_recovery(*pattern_, *coloring_);
    structure_ = linalg::CsrMatrix::from_pattern(*pattern_);
    positions_ = sparse::recovery_positions(recovery_, structure_);
  }

  linalg::CsrMatrix assemble_fd(std::span<const double> u) const {
    Profiler::Scope scope(prof_, Phase::jacobian_assembly);
    auto f = [this](std::span<const double> x, std::span<double> out) {
      model_->template evaluate<double>(x, out);
    };
    linalg::CsrMatrix out = structure_;
    fd::colored_jacobian(f, u, *coloring_, recovery_, opts_.fd_eps, out);
    return out;
  }

  linalg::CsrMatrix assemble_compressed(std::span<const double> u) const {
    sparse::CompressedJacobian jc;
    {
      Profiler::Scope scope(prof_, Phase::forward_propagation);
      if (prof_) prof_->add(Counter::forward_vectors, seed_.cols());
      ad::SweepWorkspace ws;
      ad::fused_tangent(*tape_, u, seed_, jc.values, ws);
    }
    Profiler::Scope scope(prof_, Phase::recovery);
    linalg::CsrMatrix out = structure_;
    sparse::recover_into(jc, positions_, out);
    return out;
  }

  // Pushes the identity through the tape in column blocks and keeps the
  // exact nonzeros.
  linalg::CsrMatrix assemble_uncompressed(std::span<const double> u) const {
    const std::size_t n = tape_->n_independent();
    const std::size_t m = tape_->n_dependent();
    const std::size_t block = std::max<std::size_t>(opts_.seed_block, 1);
    const std::size_t n_blocks = (n + block - 1) / block;
    const std::size_t n_threads = std::clamp<std::size_t>(opts_.threads, 1, n_blocks);

    std::vector<std::vector<std::vector<linalg::Triplet>>> per_thread(n_threads);
    {
      Profiler::Scope scope(prof_, Phase::forward_propagation);
      if (prof_) prof_->add(Counter::forward_vectors, n);
      ad::Linearization lin(*tape_, u);

      auto worker = [&](std::size_t t) {
        ad::SweepWorkspace ws;
        DenseMatrix seed(n, block);
        DenseMatrix y(m, block);
        auto& found = per_thread[t];
        for (std::size_t b = t; b < n_blocks; b += n_threads) {
          const std::size_t j0 = b * block;
          const std::size_t width = std::min(block, n - j0);
          for (std::size_t q = 0; q < width; ++q) seed(j0 + q, q) = 1.0;
          lin.tangent(seed, y, ws);
          for (std::size_t q = 0; q < width; ++q) seed(j0 + q, q) = 0.0;
          std::vector<linalg::Triplet> entries;
          for (std::size_t i = 0; i < m; ++i) {
            const auto row = y.row(i);
            for (std::size_t q = 0; q < width; ++q)
              if (row[q] != 0.0)
                entries.push_back({static_cast<linalg::Index>(i),
                                   static_cast<linalg::Index>(j0 + q), row[q]});
          }
          found.push_back(std::move(entries));
        }
      };

      if (n_threads == 1) {
        worker(0);
      } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker, t);
      }
    }
    Profiler::Scope scope(prof_, Phase::jacobian_assembly);
    std::vector<linalg::Triplet> all;
    for (auto& chunks : per_thread)
      for (auto& c : chunks) all.insert(all.end(), c.begin(), c.end());
    return linalg::CsrMatrix::from_triplets(m, n, std::move(all));
  }

  const M* model_;
  JacobianStrategy strategy_;
  Profiler* prof_;
  JacobianOptions opts_;
  std::optional<ad::Tape> tape_;
  std::optional<sparse::SparsityPattern> pattern_;
  std::optional<sparse::Coloring> coloring_;
  DenseMatrix seed_;
  sparse::RecoveryMatrix recovery_;
  linalg::CsrMatrix structure_;
  std::vector<std::int64_t> positions_;
};

}  // namespace adjopt::integrate
