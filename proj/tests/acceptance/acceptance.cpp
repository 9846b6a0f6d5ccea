// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "adjopt/adjopt.hpp"
#include "oracles.hpp"

using namespace adjopt;
using grayscott::GrayScottModel;
using grayscott::GrayScottParams;
using integrate::JacobianEngine;
using integrate::JacobianStrategy;
using integrate::ThetaScheme;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

GrayScottParams grid(std::size_t m) {
  GrayScottParams p;
  p.mx = p.my = m;
  return p;
}

// Entrywise relative difference with a per-row floor, so entries that cancel
// to near zero are judged against the size of their row.
double rel_diff(const DenseMatrix& a, const DenseMatrix& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double scale = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) scale = std::max({scale, std::abs(a(i, j)), std::abs(b(i, j))});
    for (std::size_t j = 0; j < a.cols(); ++j) {
      const double d = std::abs(a(i, j) - b(i, j));
      if (d > 0.0) worst = std::max(worst, d / scale);
    }
  }
  return worst;
}

double abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) worst = std::max(worst, std::abs(a(i, j) - b(i, j)));
  return worst;
}

integrate::NewtonSettings tight() {
  integrate::NewtonSettings s;
  s.rtol = 1e-14;
  s.atol = 1e-13;
  s.linear.rtol = 1e-13;
  return s;
}

struct Outcome {
  bool passed = true;
  std::string detail;
};

struct Row {
  int id;
  const char* name;
  double limit_seconds;  // <= 0 means no limit
  std::function<Outcome()> body;
};

// ---------------------------------------------------------------------------

Outcome jacobian_triple() {
  double worst_rel = 0.0, worst_fd = 0.0;
  std::mt19937_64 rng(1001);
  for (std::size_t m : {8u, 16u}) {
    const auto p = grid(m);
    const GrayScottModel model(p);
    const JacobianEngine<GrayScottModel> ad(model, JacobianStrategy::ad_uncompressed,
                                            grayscott::initial_conditions(p));
    for (int k = 0; k < 10; ++k) {
      const Vector x = oracle::random_gs_state(p, rng);
      const auto ja = grayscott::analytic_jacobian(x, p).to_dense();
      const auto jad = ad.assemble(x).to_dense();
      const auto jfd = grayscott::fd_jacobian(x, p, 1e-7).to_dense();
      worst_rel = std::max(worst_rel, rel_diff(ja, jad));
      worst_fd = std::max({worst_fd, abs_diff(ja, jfd), abs_diff(jad, jfd)});
    }
  }
  return {worst_rel <= 1e-13 && worst_fd <= 1e-6,
          "analytic vs AD rel " + fmt("%.2e", worst_rel) + " (<= 1e-13), vs FD abs " + fmt("%.2e", worst_fd) +
              " (<= 1e-6)"};
}

Outcome lossless_compression() {
  bool ok = true;
  std::string detail;
  std::mt19937_64 rng(1002);
  for (std::size_t m : {8u, 12u, 16u, 24u, 32u}) {
    const auto p = grid(m);
    const GrayScottModel model(p);
    const auto x0 = grayscott::initial_conditions(p);
    const JacobianEngine<GrayScottModel> comp(model, JacobianStrategy::ad_compressed, x0);
    const JacobianEngine<GrayScottModel> full(model, JacobianStrategy::ad_uncompressed, x0);

    // Row scan: no row may touch two columns of the same color.
    const auto& pat = *comp.pattern();
    const auto& col = *comp.coloring();
    bool valid = true;
    for (std::size_t i = 0; i < pat.n_rows(); ++i) {
      std::vector<char> seen(col.n_colors, 0);
      for (auto j : pat.row(i)) {
        auto& s = seen[static_cast<std::size_t>(col.color_of[static_cast<std::size_t>(j)])];
        if (s) valid = false;
        s = 1;
      }
    }
    double worst = 0.0;
    for (int k = 0; k < 3; ++k) {
      const Vector x = oracle::random_gs_state(p, rng);
      worst = std::max(worst, abs_diff(comp.assemble(x).to_dense(), full.assemble(x).to_dense()));
    }
    ok = ok && valid && worst == 0.0;
    detail += std::to_string(m) + ":" + (valid ? "valid" : "INVALID") + "/" + fmt("%.1e", worst) + " ";
  }
  return {ok, detail + "(max diff must be exactly 0)"};
}

Outcome color_count() {
  std::vector<std::size_t> ps;
  for (std::size_t m : {8u, 16u, 32u}) {
    const auto p = grid(m);
    const GrayScottModel model(p);
    const JacobianEngine<GrayScottModel> e(model, JacobianStrategy::ad_compressed, grayscott::initial_conditions(p));
    ps.push_back(e.colors_used());
  }
  const bool same = ps[0] == ps[1] && ps[1] == ps[2];
  const bool in_range = ps[0] >= 6 && ps[0] <= 10;
  return {same && in_range, "p = " + std::to_string(ps[0]) + "/" + std::to_string(ps[1]) + "/" +
                                std::to_string(ps[2]) + " on 8/16/32 (identical, 6..10)"};
}

Outcome matrix_free_consistency() {
  const auto p = grid(16);
  const GrayScottModel model(p);
  std::mt19937_64 rng(1004);
  const Vector x = oracle::random_gs_state(p, rng);
  const auto x0 = grayscott::initial_conditions(p);
  const JacobianEngine<GrayScottModel> mf(model, JacobianStrategy::ad_matrix_free, x0);
  const JacobianEngine<GrayScottModel> comp(model, JacobianStrategy::ad_compressed, x0);
  const auto shell = mf.linearize(x);
  const auto a = comp.assemble(x);
  double worst_apply = 0.0, worst_dot = 0.0;
  for (int k = 0; k < 100; ++k) {
    const Vector v = oracle::random_vector(p.n_dofs(), rng);
    const Vector w = oracle::random_vector(p.n_dofs(), rng);
    const Vector jv = shell->apply(v), jtw = shell->apply_transpose(w);
    const Vector av = linalg::spmv(a, v), atw = linalg::spmv_transpose(a, w);
    worst_apply = std::max({worst_apply, max_abs_diff(jv, av) / norm_inf(av), max_abs_diff(jtw, atw) / norm_inf(atw)});
    const double gap = std::abs(dot(jv, w) - dot(v, jtw));
    worst_dot = std::max(worst_dot, gap / (norm2(jv) * norm2(w)));
  }
  return {worst_apply <= 1e-12 && worst_dot <= 1e-12,
          "shell vs assembled rel " + fmt("%.2e", worst_apply) + ", dot-product gap " + fmt("%.2e", worst_dot) +
              " (both <= 1e-12)"};
}

Outcome adjoint_gradient() {
  const auto p = grid(16);
  const GrayScottModel model(p);
  const auto x0 = grayscott::initial_conditions(p);
  const auto obj = adjoint::Objective::centre(p, grayscott::Species::u);
  const ThetaScheme sch{0.5, 0.5, 10};

  std::vector<Vector> grads;
  for (auto s : {JacobianStrategy::analytic, JacobianStrategy::ad_compressed, JacobianStrategy::ad_matrix_free}) {
    const JacobianEngine<GrayScottModel> e(model, s, x0);
    const auto fwd = integrate::integrate(model, x0, sch, e, tight());
    grads.push_back(adjoint::adjoint_sweep(e, fwd.trajectory, obj).gradient);
  }
  double pair = 0.0;
  for (std::size_t a = 0; a < grads.size(); ++a)
    for (std::size_t b = a + 1; b < grads.size(); ++b) pair = std::max(pair, max_abs_diff(grads[a], grads[b]));

  const Vector& g = grads[0];
  std::vector<std::size_t> order(g.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return std::abs(g[a]) > std::abs(g[b]); });
  const JacobianEngine<GrayScottModel> e(model, JacobianStrategy::analytic, x0);
  const double eps = 1e-5;
  double worst = 0.0;
  std::size_t sampled = 0;
  for (std::size_t r = 0; r < 20; ++r) {
    const std::size_t k = order[r];
    if (std::abs(g[k]) <= 1e-8) continue;
    Vector xp = x0, xm = x0;
    xp[k] += eps;
    xm[k] -= eps;
    const double fp = obj.value(integrate::integrate(model, xp, sch, e, tight()).trajectory.states.back());
    const double fm = obj.value(integrate::integrate(model, xm, sch, e, tight()).trajectory.states.back());
    worst = std::max(worst, std::abs((fp - fm) / (2 * eps) - g[k]) / std::abs(g[k]));
    ++sampled;
  }
  return {sampled > 0 && worst <= 1e-4 && pair <= 1e-9,
          "FD rel err " + fmt("%.2e", worst) + " over " + std::to_string(sampled) + " DOFs (<= 1e-4), strategy gap " +
              fmt("%.2e", pair) + " (<= 1e-9)"};
}

// Shared by criteria 6 and 7.
struct ForwardRun {
  JacobianStrategy strategy;
  Vector final_state;
  std::size_t linear = 0;
  double seconds = 0.0;
  double propagation = 0.0;
  double recovery = 0.0;
};

std::vector<ForwardRun> g_runs;

ForwardRun forward_run(JacobianStrategy s, std::size_t repeats) {
  const auto p = grid(65);
  const GrayScottModel model(p);
  const auto x0 = grayscott::initial_conditions(p);
  ForwardRun best;
  best.strategy = s;
  best.seconds = 1e300;
  for (std::size_t r = 0; r < repeats; ++r) {
    Profiler prof;
    const auto t0 = Clock::now();
    const JacobianEngine<GrayScottModel> e(model, s, x0, &prof);
    auto res = integrate::integrate(model, x0, ThetaScheme{0.5, 0.5, 100}, e);
    const double t = since(t0);
    if (t < best.seconds) {
      best.seconds = t;
      best.final_state = std::move(res.trajectory.states.back());
      best.linear = res.stats.total_linear;
      best.propagation = prof.seconds(Phase::forward_propagation);
      best.recovery = prof.seconds(Phase::recovery);
    }
  }
  return best;
}

const ForwardRun& run_of(JacobianStrategy s) {
  for (const auto& r : g_runs)
    if (r.strategy == s) return r;
  throw Error("missing run");
}

Outcome strategy_invariance() {
  for (auto s : integrate::kAllStrategies)
    g_runs.push_back(forward_run(s, s == JacobianStrategy::ad_uncompressed ? 1 : 3));
  double worst = 0.0;
  for (std::size_t a = 0; a < g_runs.size(); ++a)
    for (std::size_t b = a + 1; b < g_runs.size(); ++b)
      worst = std::max(worst, max_abs_diff(g_runs[a].final_state, g_runs[b].final_state));
  const double la = static_cast<double>(run_of(JacobianStrategy::ad_compressed).linear);
  const double lm = static_cast<double>(run_of(JacobianStrategy::ad_matrix_free).linear);
  const double spread = std::abs(la - lm) / std::max(la, lm);
  return {worst <= 1e-8 && spread <= 0.02,
          "final-state gap " + fmt("%.2e", worst) + " (<= 1e-8), linear iters " + fmt("%.0f", la) + " vs " +
              fmt("%.0f", lm) + " (within 2%)"};
}

Outcome performance_ordering() {
  if (g_runs.empty()) return {false, "no 65x65 runs available"};
  const double ta = run_of(JacobianStrategy::analytic).seconds;
  const double tc = run_of(JacobianStrategy::ad_compressed).seconds;
  const double tu = run_of(JacobianStrategy::ad_uncompressed).seconds;
  const auto& c = run_of(JacobianStrategy::ad_compressed);
  std::string detail = "analytic " + fmt("%.3f", ta) + " s, compressed " + fmt("%.3f", tc) + " s, uncompressed " +
                       fmt("%.2f", tu) + " s, fd " + fmt("%.3f", run_of(JacobianStrategy::fd).seconds) +
                       " s, matrix-free " + fmt("%.3f", run_of(JacobianStrategy::ad_matrix_free).seconds) +
                       " s; uncompressed/compressed " + fmt("%.1f", tu / tc) + " (> 5), compressed/analytic " +
                       fmt("%.2f", tc / ta) + " (<= 3); recovery " + fmt("%.3f", c.recovery) + " s vs propagation " +
                       fmt("%.3f", c.propagation) + " s";
  return {tu > 5.0 * tc && tc <= 3.0 * ta, detail};
}

Outcome equilibrium_symmetry() {
  const auto p = grid(16);
  const GrayScottModel model(p);
  const auto xe = grayscott::uniform_state(p, 1.0, 0.0);
  const JacobianEngine<GrayScottModel> e(model, JacobianStrategy::ad_compressed, xe);
  const auto traj = integrate::integrate(model, xe, ThetaScheme{0.5, 0.5, 100}, e).trajectory;
  double drift = 0.0;
  for (std::size_t n = 1; n < traj.states.size(); ++n)
    drift = std::max(drift, max_abs_diff(traj.states[n], traj.states[n - 1]));

  std::mt19937_64 rng(1008);
  double shift_err = 0.0;
  for (auto q : {grid(16), [] {
                   GrayScottParams r;
                   r.mx = 12;
                   r.my = 9;
                   return r;
                 }()}) {
    const Vector x = oracle::random_gs_state(q, rng);
    const Vector zero(q.n_dofs(), 0.0);
    const auto f = grayscott::residual_passive(x, zero, q);
    for (std::size_t a : {1u, 3u})
      for (std::size_t b : {0u, 2u}) {
        Vector xs(x.size()), fs_expected(x.size());
        for (std::size_t j = 0; j < q.my; ++j)
          for (std::size_t i = 0; i < q.mx; ++i)
            for (auto s : {grayscott::Species::u, grayscott::Species::v}) {
              const auto to = q.dof((i + a) % q.mx, (j + b) % q.my, s);
              xs[to] = x[q.dof(i, j, s)];
              fs_expected[to] = f[q.dof(i, j, s)];
            }
        shift_err = std::max(shift_err, max_abs_diff(grayscott::residual_passive(xs, zero, q), fs_expected));
      }
  }
  return {drift <= 1e-12 && shift_err <= 1e-15,
          "equilibrium drift per step " + fmt("%.2e", drift) + " (<= 1e-12), shift error " + fmt("%.2e", shift_err) +
              " (<= 1e-15)"};
}

Outcome closed_form() {
  auto a = linalg::CsrMatrix::identity(1);
  a.scale(-1.0);
  const integrate::LinearModel model(a);
  double worst = 0.0;
  for (auto [theta, expect] : {std::pair{1.0, 2.0 / 3.0}, std::pair{0.5, 0.6}}) {
    const JacobianEngine<integrate::LinearModel> e(model, JacobianStrategy::analytic, Vector{1.0});
    const auto fwd = integrate::integrate(model, Vector{1.0}, ThetaScheme{theta, 0.5, 1}, e);
    const auto lam = adjoint::adjoint_sweep(e, fwd.trajectory, Vector{1.0}).gradient;
    worst = std::max({worst, std::abs(fwd.trajectory.states[1][0] - expect), std::abs(lam[0] - expect)});
  }
  return {worst <= 1e-15, "max deviation from 2/3 and 0.6 is " + fmt("%.2e", worst) + " (<= 1e-15)"};
}

}  // namespace

int main() {
  const std::vector<Row> rows{
      {1, "jacobian triple agreement", 5.0, jacobian_triple},
      {2, "lossless compression", 10.0, lossless_compression},
      {3, "color count", 5.0, color_count},
      {4, "matrix-free consistency", 5.0, matrix_free_consistency},
      {5, "adjoint gradient", 60.0, adjoint_gradient},
      {6, "strategy-invariant forward solution", 600.0, strategy_invariance},
      {7, "performance ordering", 0.0, performance_ordering},
      {8, "equilibrium and shift symmetry", 5.0, equilibrium_symmetry},
      {9, "closed-form integrator", 1.0, closed_form},
  };
  int failures = 0;
  for (const auto& row : rows) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = row.body();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double t = since(t0);
    const bool in_time = row.limit_seconds <= 0.0 || t < row.limit_seconds;
    const bool ok = o.passed && in_time;
    failures += ok ? 0 : 1;
    std::string timing = fmt("%.2f s", t);
    if (row.limit_seconds > 0.0) timing += fmt(" / %.0f s", row.limit_seconds);
    std::printf("%s  [%d] %s: %s [%s]\n", ok ? "PASS" : "FAIL", row.id, row.name, o.detail.c_str(),
                timing.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(rows.size()) - failures, rows.size());
  return failures == 0 ? 0 : 1;
}
