#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "adjopt/ad/sweeps.hpp"
#include "adjopt/fd.hpp"
#include "adjopt/grayscott/grayscott.hpp"
#include "adjopt/integrate/jacobian.hpp"
#include "oracles.hpp"

using namespace adjopt;
using grayscott::GrayScottParams;
using grayscott::Species;

namespace {

GrayScottParams grid(std::size_t mx, std::size_t my) {
  GrayScottParams p;
  p.mx = mx;
  p.my = my;
  return p;
}

// Per-entry relative difference, floored by the row's largest magnitude so
// that entries cancelling to near zero are judged on the row's scale.
double max_rel_entry_diff(const linalg::CsrMatrix& a, const linalg::CsrMatrix& b) {
  const auto da = a.to_dense(), db = b.to_dense();
  double worst = 0.0;
  for (std::size_t i = 0; i < da.rows(); ++i) {
    double floor = 0.0;
    for (std::size_t j = 0; j < da.cols(); ++j)
      floor = std::max({floor, std::abs(da(i, j)), std::abs(db(i, j))});
    for (std::size_t j = 0; j < da.cols(); ++j) {
      const double s = std::max({std::abs(da(i, j)), std::abs(db(i, j)), floor});
      if (s > 0) worst = std::max(worst, std::abs(da(i, j) - db(i, j)) / s);
    }
  }
  return worst;
}

double max_abs_entry_diff(const linalg::CsrMatrix& a, const linalg::CsrMatrix& b) {
  const auto da = a.to_dense(), db = b.to_dense();
  double worst = 0.0;
  for (std::size_t i = 0; i < da.rows(); ++i)
    for (std::size_t j = 0; j < da.cols(); ++j)
      worst = std::max(worst, std::abs(da(i, j) - db(i, j)));
  return worst;
}

}  // namespace

TEST(Params, Validation) {
  EXPECT_NO_THROW(grid(5, 5).validate());
  EXPECT_THROW(grid(4, 8).validate(), Error);
  GrayScottParams p;
  p.D1 = 0.0;
  EXPECT_THROW(p.validate(), Error);
  p = GrayScottParams{};
  p.kappa = -1.0;
  EXPECT_THROW(p.validate(), Error);
}

TEST(Layout, InterleavedDofs) {
  const auto p = grid(65, 65);
  EXPECT_EQ(p.dof(0, 0, Species::u), 0u);
  EXPECT_EQ(p.dof(0, 0, Species::v), 1u);
  EXPECT_EQ(p.dof(32, 32, Species::u), 2u * (32 * 65 + 32));
  EXPECT_EQ(p.dof(3, 1, Species::v), 2u * (65 + 3) + 1);
}

TEST(Geometry, SpacingDividesByNodeCount) {
  const auto g = grayscott::GridGeometry::of(grid(10, 20));
  EXPECT_DOUBLE_EQ(g.hx, 0.25);
  EXPECT_DOUBLE_EQ(g.hy, 0.125);
  EXPECT_DOUBLE_EQ(g.sx, 16.0);
  EXPECT_DOUBLE_EQ(g.sy, 64.0);
}

TEST(InitialConditions, OutsideSquareIsUnperturbed) {
  const auto p = grid(10, 10);  // node 2 sits at x = 0.5
  const auto x = grayscott::initial_conditions(p);
  EXPECT_EQ(x[p.dof(2, 2, Species::v)], 0.0);
  EXPECT_EQ(x[p.dof(2, 2, Species::u)], 1.0);
}

TEST(InitialConditions, PeakValue) {
  const auto p = grid(80, 80);  // node 36 sits at x = 1.125
  const auto x = grayscott::initial_conditions(p);
  EXPECT_NEAR(x[p.dof(36, 36, Species::v)], 0.25, 1e-15);
  EXPECT_NEAR(x[p.dof(36, 36, Species::u)], 0.5, 1e-15);
}

TEST(InitialConditions, ClosedFormAtEveryNode) {
  const auto p = grid(33, 40);
  const auto x = grayscott::initial_conditions(p);
  const double hx = 2.5 / 33, hy = 2.5 / 40;
  for (std::size_t j = 0; j < p.my; ++j)
    for (std::size_t i = 0; i < p.mx; ++i) {
      const double xx = i * hx, yy = j * hy;
      const bool inside = xx >= 1.0 && xx <= 1.5 && yy >= 1.0 && yy <= 1.5;
      const double sx = std::sin(4 * std::numbers::pi * xx), sy = std::sin(4 * std::numbers::pi * yy);
      const double v = inside ? 0.25 * sx * sx * sy * sy : 0.0;
      EXPECT_NEAR(x[p.dof(i, j, Species::v)], v, 1e-15);
      EXPECT_EQ(x[p.dof(i, j, Species::u)] + 2 * x[p.dof(i, j, Species::v)], 1.0);
    }
}

TEST(Residual, EquilibriumIsExactlyZero) {
  const auto p = grid(9, 7);
  const auto x = grayscott::uniform_state(p, 1.0, 0.0);
  const auto f = grayscott::residual_passive(x, Vector(p.n_dofs(), 0.0), p);
  for (double e : f) EXPECT_EQ(e, 0.0);
}

TEST(Residual, ZeroStateLeavesFeedTerm) {
  const auto p = grid(6, 6);
  const auto f =
      grayscott::residual_passive(Vector(p.n_dofs(), 0.0), Vector(p.n_dofs(), 0.0), p);
  for (std::size_t k = 0; k < p.n_nodes(); ++k) {
    EXPECT_EQ(f[2 * k], -p.gamma);
    EXPECT_EQ(f[2 * k + 1], 0.0);
  }
}

TEST(Residual, TimeDerivativeEntersAdditively) {
  const auto p = grid(6, 6);
  std::mt19937_64 rng(30);
  const auto x = oracle::random_gs_state(p, rng);
  const auto udot = oracle::random_vector(p.n_dofs(), rng);
  const auto f0 = grayscott::residual_passive(x, Vector(p.n_dofs(), 0.0), p);
  const auto f1 = grayscott::residual_passive(x, udot, p);
  for (std::size_t i = 0; i < f0.size(); ++i) EXPECT_NEAR(f1[i] - f0[i], udot[i], 1e-15);
}

TEST(Residual, MatchesStraightLineStencil) {
  for (auto [mx, my] : {std::pair{4, 4}, std::pair{5, 7}, std::pair{12, 9}}) {
    const auto p = grid(mx, my);
    std::mt19937_64 rng(31);
    const auto x = oracle::random_gs_state(p, rng);
    const auto f = grayscott::residual_passive(x, Vector(p.n_dofs(), 0.0), p);
    const auto ref = oracle::gray_scott_stencil(p, x);
    for (std::size_t i = 0; i < f.size(); ++i) EXPECT_NEAR(f[i], ref[i], 1e-15 * std::max(1.0, std::abs(ref[i])));
  }
}

TEST(Residual, PeriodicShiftEquivariance) {
  const auto p = grid(9, 6);
  std::mt19937_64 rng(32);
  const auto x = oracle::random_gs_state(p, rng);
  Vector shifted(x.size());
  for (std::size_t j = 0; j < p.my; ++j)
    for (std::size_t i = 0; i < p.mx; ++i)
      for (auto s : {Species::u, Species::v})
        shifted[p.dof((i + 1) % p.mx, j, s)] = x[p.dof(i, j, s)];
  const Vector zero(p.n_dofs(), 0.0);
  const auto f = grayscott::residual_passive(x, zero, p);
  const auto fs = grayscott::residual_passive(shifted, zero, p);
  for (std::size_t j = 0; j < p.my; ++j)
    for (std::size_t i = 0; i < p.mx; ++i)
      for (auto s : {Species::u, Species::v})
        EXPECT_LE(std::abs(fs[p.dof((i + 1) % p.mx, j, s)] - f[p.dof(i, j, s)]), 1e-15);
}

TEST(Residual, DimensionMismatch) {
  const auto p = grid(5, 5);
  EXPECT_THROW(grayscott::residual_passive(Vector(3), Vector(p.n_dofs()), p), DimensionError);
}

TEST(Recording, TapeShapeAndSelfConsistency) {
  const auto p = grid(4, 4);
  std::mt19937_64 rng(33);
  const auto x = oracle::random_gs_state(p, rng);
  const auto tape = grayscott::record_residual(x, p, 9);
  EXPECT_EQ(tape.n_independent(), 32u);
  EXPECT_EQ(tape.n_dependent(), 32u);
  EXPECT_EQ(tape.tag(), 9);
  const auto f = grayscott::residual_passive(x, Vector(32, 0.0), p);
  const auto rec = tape.recorded_outputs();
  const auto rep = ad::replay_primal(tape, x);
  for (std::size_t i = 0; i < 32; ++i) {
    EXPECT_EQ(rec[i], f[i]);
    EXPECT_EQ(rep[i], f[i]);
  }
}

TEST(Recording, SixNonzerosPerRow) {
  for (std::size_t m : {5u, 6u, 11u}) {
    const auto p = grid(m, m + 1);
    const auto pat =
        ad::extract_sparsity(grayscott::record_residual(grayscott::initial_conditions(p), p));
    EXPECT_EQ(pat.nnz(), 12 * p.mx * p.my);
    for (std::size_t i = 0; i < pat.n_rows(); ++i) {
      const auto r = pat.row(i);
      EXPECT_EQ(std::vector<sparse::Index>(r.begin(), r.end()),
                oracle::gray_scott_row_columns(p.mx, p.my, i));
    }
  }
}

TEST(AnalyticJacobian, EquilibriumEntries) {
  const auto p = grid(8, 10);
  const auto j = grayscott::analytic_jacobian(grayscott::uniform_state(p, 1.0, 0.0), p);
  const auto g = grayscott::GridGeometry::of(p);
  const auto r = p.dof(3, 4, Species::u);
  EXPECT_DOUBLE_EQ(j.at(r, static_cast<linalg::Index>(r)), 2 * p.D1 * (g.sx + g.sy) + p.gamma);
  EXPECT_EQ(j.at(r, static_cast<linalg::Index>(p.dof(3, 4, Species::v))), 0.0);
  EXPECT_DOUBLE_EQ(j.at(r, static_cast<linalg::Index>(p.dof(4, 4, Species::u))), -p.D1 * g.sx);
  EXPECT_DOUBLE_EQ(j.at(r, static_cast<linalg::Index>(p.dof(3, 5, Species::u))), -p.D1 * g.sy);
}

TEST(AnalyticJacobian, StructureAndClosedForms) {
  const auto p = grid(6, 7);
  std::mt19937_64 rng(34);
  const auto x = oracle::random_gs_state(p, rng);
  const auto j = grayscott::analytic_jacobian(x, p);
  const auto g = grayscott::GridGeometry::of(p);
  EXPECT_EQ(j.nnz(), 12 * p.n_nodes());
  const std::size_t i = 2, jj = 5;
  const double uc = x[p.dof(i, jj, Species::u)], vc = x[p.dof(i, jj, Species::v)];
  const auto ru = p.dof(i, jj, Species::u), rv = p.dof(i, jj, Species::v);
  auto at = [&](std::size_t r, std::size_t c) { return j.at(r, static_cast<linalg::Index>(c)); };
  EXPECT_DOUBLE_EQ(at(ru, ru), 2 * p.D1 * (g.sx + g.sy) + vc * vc + p.gamma);
  EXPECT_DOUBLE_EQ(at(ru, rv), 2 * uc * vc);
  EXPECT_DOUBLE_EQ(at(rv, rv), 2 * p.D2 * (g.sx + g.sy) - 2 * uc * vc + p.gamma + p.kappa);
  EXPECT_DOUBLE_EQ(at(rv, ru), -vc * vc);
  EXPECT_DOUBLE_EQ(at(rv, p.dof(i, (jj + 1) % p.my, Species::v)), -p.D2 * g.sy);
  EXPECT_DOUBLE_EQ(at(rv, p.dof((i + p.mx - 1) % p.mx, jj, Species::v)), -p.D2 * g.sx);
}

TEST(AnalyticJacobian, TripleAgreementAtRandomStates) {
  for (std::size_t m : {8u, 16u}) {
    const auto p = grid(m, m);
    std::mt19937_64 rng(35 + m);
    const auto tape = grayscott::record_residual(grayscott::initial_conditions(p), p);
    for (int k = 0; k < 10; ++k) {
      const auto x = oracle::random_gs_state(p, rng);
      const auto ja = grayscott::analytic_jacobian(x, p);
      const auto jad = linalg::CsrMatrix::from_dense(
          ad::forward_propagate(tape, x, DenseMatrix::identity(p.n_dofs())).Y);
      const auto jfd = grayscott::fd_jacobian(x, p, 1e-7);
      EXPECT_LE(max_rel_entry_diff(ja, jad), 1e-13);
      EXPECT_LE(max_abs_entry_diff(ja, jfd), 1e-6);
      EXPECT_LE(max_abs_entry_diff(jad, jfd), 1e-6);
    }
  }
}

TEST(FdJacobian, RecoversLinearMap) {
  std::mt19937_64 rng(36);
  const auto a = oracle::random_csr(15, 0.3, rng);
  const Vector x = oracle::random_vector(15, rng);
  auto f = [&](std::span<const double> v, std::span<double> out) { linalg::spmv(a, v, out); };
  const auto j = fd::jacobian(f, x, 15, 1e-6);
  EXPECT_LE(max_abs_entry_diff(j, a), 1e-9);
}

TEST(FdJacobian, EquilibriumMatchesAnalytic) {
  const auto p = grid(8, 8);
  const auto x = grayscott::uniform_state(p, 1.0, 0.0);
  EXPECT_LE(max_abs_entry_diff(grayscott::fd_jacobian(x, p, 1e-6), grayscott::analytic_jacobian(x, p)),
            1e-7);
}

TEST(FdJacobian, ThresholdedPatternWithinTapePattern) {
  const auto p = grid(7, 7);
  std::mt19937_64 rng(37);
  const auto x = oracle::random_gs_state(p, rng);
  const auto pat = ad::extract_sparsity(grayscott::record_residual(x, p));
  const auto jfd = grayscott::fd_jacobian(x, p, 1e-7);
  for (std::size_t i = 0; i < jfd.n_rows(); ++i)
    for (auto c : jfd.row_cols(i)) EXPECT_TRUE(pat.contains(i, c)) << i << ' ' << c;
}

TEST(FdJacobian, ColoredMatchesColumnByColumn) {
  const auto p = grid(8, 8);
  std::mt19937_64 rng(38);
  const auto x = oracle::random_gs_state(p, rng);
  const grayscott::GrayScottModel model(p);
  const integrate::JacobianEngine<grayscott::GrayScottModel> engine(model, integrate::JacobianStrategy::fd, x);
  const auto colored = engine.assemble(x);
  const auto plain = grayscott::fd_jacobian(x, p, 1e-6);
  EXPECT_LE(max_abs_entry_diff(colored, plain), 1e-8);
  EXPECT_LE(max_abs_entry_diff(colored, grayscott::analytic_jacobian(x, p)), 1e-6);
}

TEST(Model, ActiveAndPassiveEvaluationsAgree) {
  const auto p = grid(6, 6);
  const grayscott::GrayScottModel model(p);
  EXPECT_EQ(model.size(), 72u);
  std::mt19937_64 rng(39);
  const auto x = oracle::random_gs_state(p, rng);
  Vector f(72);
  model.evaluate<double>(x, f);
  EXPECT_EQ(f, grayscott::residual_passive(x, Vector(72, 0.0), p));
  EXPECT_THROW(grayscott::GrayScottModel(grid(4, 4)), Error);
}
