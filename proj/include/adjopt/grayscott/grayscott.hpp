#pragma once

// Gray-Scott reaction-diffusion on the doubly periodic square [0, L]^2,
// second-order centred differences on an mx x my node grid.
//
//   u_t = D1 lap(u) - u v^2 + gamma (1 - u)
//   v_t = D2 lap(v) + u v^2 - (gamma + kappa) v
//
// Written in residual form F(u, u_t) = u_t - rhs. The state is interleaved
// per node: node (i, j) holds u at 2 (j mx + i) and v right after it.

#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "adjopt/ad/tape.hpp"
#include "adjopt/dense.hpp"
#include "adjopt/error.hpp"
#include "adjopt/fd.hpp"
#include "adjopt/linalg/csr.hpp"

namespace adjopt::grayscott {

enum class Species : std::size_t { u = 0, v = 1 };

struct GrayScottParams {
  double D1 = 8.0e-5;
  double D2 = 4.0e-5;
  double gamma = 0.024;
  double kappa = 0.06;
  double L = 2.5;
  std::size_t mx = 65;
  std::size_t my = 65;

  std::size_t n_nodes() const noexcept { return mx * my; }
  std::size_t n_dofs() const noexcept { return 2 * mx * my; }

  std::size_t dof(std::size_t i, std::size_t j, Species s) const noexcept {
    return 2 * (j * mx + i) + static_cast<std::size_t>(s);
  }

  void validate() const {
    if (!(D1 > 0.0) || !(D2 > 0.0)) throw Error("diffusion coefficients must be positive");
    if (!(gamma > 0.0) || !(kappa > 0.0)) throw Error("reaction constants must be positive");
    if (!(L > 0.0)) throw Error("domain length must be positive");
    if (mx < 5 || my < 5) throw Error("grid must have at least 5 nodes per dimension");
  }
};

struct GridGeometry {
  double hx, hy, sx, sy;

  static GridGeometry of(const GrayScottParams& p) {
    GridGeometry g{};
    g.hx = p.L / static_cast<double>(p.mx);
    g.sx = 1.0 / (g.hx * g.hx);
    g.hy = p.L / static_cast<double>(p.my);
    g.sy = 1.0 / (g.hy * g.hy);
    return g;
  }
};

/// Residual F(u, udot) with periodic wrap. T is double or ad::ActiveScalar;
/// udot is always passive.
template <class T>
void residual(const GrayScottParams& p, std::span<const T> u, std::span<const double> udot,
              std::span<T> f) {
  require_size(u.size(), p.n_dofs(), "grayscott residual state");
  require_size(udot.size(), p.n_dofs(), "grayscott residual udot");
  require_size(f.size(), p.n_dofs(), "grayscott residual output");
  const auto geo = GridGeometry::of(p);
  const double sx = geo.sx, sy = geo.sy;
  const std::size_t mx = p.mx, my = p.my;
  for (std::size_t j = 0; j < my; ++j) {
    const std::size_t jn = (j + 1) % my, js = (j + my - 1) % my;
    for (std::size_t i = 0; i < mx; ++i) {
      const std::size_t ie = (i + 1) % mx, iw = (i + mx - 1) % mx;
      const std::size_t c = 2 * (j * mx + i);
      const std::size_t w = 2 * (j * mx + iw), e = 2 * (j * mx + ie);
      const std::size_t s = 2 * (js * mx + i), n = 2 * (jn * mx + i);

      const T uc = u[c];
      const T vc = u[c + 1];
      const T u2 = -2.0 * uc;
      const T v2 = -2.0 * vc;
      const T uxx = (u2 + u[w] + u[e]) * sx;
      const T uyy = (u2 + u[s] + u[n]) * sy;
      const T vxx = (v2 + u[w + 1] + u[e + 1]) * sx;
      const T vyy = (v2 + u[s + 1] + u[n + 1]) * sy;
      const T uvv = uc * vc * vc;
      // udot - D1 lap(u) + u v^2 - gamma (1 - u)
      f[c] = uvv - p.D1 * (uxx + uyy) + p.gamma * uc + (udot[c] - p.gamma);
      f[c + 1] = (p.gamma + p.kappa) * vc - p.D2 * (vxx + vyy) - uvv + udot[c + 1];
    }
  }
}

inline Vector residual_passive(std::span<const double> state, std::span<const double> state_dot,
                               const GrayScottParams& p) {
  Vector f(p.n_dofs());
  residual<double>(p, state, state_dot, f);
  return f;
}

/// v = 1/4 sin^2(4 pi x) sin^2(4 pi y) on [1, 1.5]^2, zero elsewhere;
/// u = 1 - 2 v. Nodes sit at (i hx, j hy).
inline Vector initial_conditions(const GrayScottParams& p) {
  const auto geo = GridGeometry::of(p);
  Vector x(p.n_dofs());
  auto bump = [](double t) {
    if (t < 1.0 || t > 1.5) return 0.0;
    const double s = std::sin(4.0 * std::numbers::pi * t);
    return s * s;
  };
  for (std::size_t j = 0; j < p.my; ++j) {
    const double y = static_cast<double>(j) * geo.hy;
    for (std::size_t i = 0; i < p.mx; ++i) {
      const double xx = static_cast<double>(i) * geo.hx;
      const double v = 0.25 * bump(xx) * bump(y);
      x[p.dof(i, j, Species::u)] = 1.0 - 2.0 * v;
      x[p.dof(i, j, Species::v)] = v;
    }
  }
  return x;
}

/// Uniform (u, v) state.
inline Vector uniform_state(const GrayScottParams& p, double u, double v) {
  Vector x(p.n_dofs());
  for (std::size_t k = 0; k < p.n_nodes(); ++k) {
    x[2 * k] = u;
    x[2 * k + 1] = v;
  }
  return x;
}

/// Records F(., 0) at `state`: every DOF independent, every residual entry
/// dependent, in layout order.
inline ad::Tape record_residual(std::span<const double> state, const GrayScottParams& p,
                                int tag = 1) {
  require_size(state.size(), p.n_dofs(), "record_residual state");
  auto session = ad::begin_recording(tag);
  std::vector<ad::ActiveScalar> u;
  u.reserve(state.size());
  for (double s : state) u.push_back(session.mark_independent(s));
  std::vector<ad::ActiveScalar> f(state.size());
  const Vector udot(state.size(), 0.0);
  residual<ad::ActiveScalar>(p, u, udot, f);
  for (const auto& fi : f) session.mark_dependent(fi);
  return session.end();
}

/// Hand-derived dF/du at udot = 0. Every row carries its six structural
/// entries, including those that vanish at the given state.
inline linalg::CsrMatrix analytic_jacobian(std::span<const double> state,
                                           const GrayScottParams& p) {
  require_size(state.size(), p.n_dofs(), "analytic_jacobian state");
  if (p.mx < 3 || p.my < 3) throw Error("analytic_jacobian: stencil needs at least 3x3 nodes");
  const auto geo = GridGeometry::of(p);
  const std::size_t n = p.n_dofs();
  const std::size_t mx = p.mx, my = p.my;
  std::vector<linalg::Index> offsets(n + 1);
  std::vector<linalg::Index> cols(6 * n);
  std::vector<double> vals(6 * n);

  using Entry = std::pair<linalg::Index, double>;
  auto emit_row = [&](std::size_t row, std::array<Entry, 6> e) {
    // insertion sort; rows are tiny
    for (std::size_t a = 1; a < e.size(); ++a)
      for (std::size_t b = a; b > 0 && e[b].first < e[b - 1].first; --b) std::swap(e[b], e[b - 1]);
    std::size_t k = 6 * row;
    for (const auto& [col, val] : e) {
      cols[k] = col;
      vals[k] = val;
      ++k;
    }
    offsets[row + 1] = static_cast<linalg::Index>(6 * (row + 1));
  };

  for (std::size_t j = 0; j < my; ++j) {
    const std::size_t jn = (j + 1) % my, js = (j + my - 1) % my;
    for (std::size_t i = 0; i < mx; ++i) {
      const std::size_t ie = (i + 1) % mx, iw = (i + mx - 1) % mx;
      const auto c = static_cast<linalg::Index>(2 * (j * mx + i));
      const auto w = static_cast<linalg::Index>(2 * (j * mx + iw));
      const auto e = static_cast<linalg::Index>(2 * (j * mx + ie));
      const auto s = static_cast<linalg::Index>(2 * (js * mx + i));
      const auto nn = static_cast<linalg::Index>(2 * (jn * mx + i));
      const double uc = state[c], vc = state[c + 1];

      emit_row(c, {Entry{c, 2.0 * p.D1 * (geo.sx + geo.sy) + vc * vc + p.gamma},
                   Entry{c + 1, 2.0 * uc * vc},
                   Entry{w, -p.D1 * geo.sx},
                   Entry{e, -p.D1 * geo.sx},
                   Entry{s, -p.D1 * geo.sy},
                   Entry{nn, -p.D1 * geo.sy}});
      emit_row(c + 1, {Entry{c + 1, 2.0 * p.D2 * (geo.sx + geo.sy) - 2.0 * uc * vc + p.gamma + p.kappa},
                       Entry{c, -vc * vc},
                       Entry{w + 1, -p.D2 * geo.sx},
                       Entry{e + 1, -p.D2 * geo.sx},
                       Entry{s + 1, -p.D2 * geo.sy},
                       Entry{nn + 1, -p.D2 * geo.sy}});
    }
  }
  return {n, n, std::move(offsets), std::move(cols), std::move(vals)};
}

/// Column-by-column central-difference Jacobian of F(., 0).
inline linalg::CsrMatrix fd_jacobian(std::span<const double> state, const GrayScottParams& p,
                                     double eps) {
  const Vector udot(p.n_dofs(), 0.0);
  auto f = [&](std::span<const double> x, std::span<double> out) {
    residual<double>(p, x, udot, out);
  };
  return fd::jacobian(f, state, p.n_dofs(), eps);
}

/// The Gray-Scott residual packaged for the time integrator.
class GrayScottModel {
public:
  explicit GrayScottModel(GrayScottParams params) : params_(params), zero_(params.n_dofs(), 0.0) {
    params_.validate();
  }

  const GrayScottParams& params() const noexcept { return params_; }
  std::size_t size() const noexcept { return params_.n_dofs(); }

  template <class T>
  void evaluate(std::span<const T> u, std::span<T> f) const {
    residual<T>(params_, u, zero_, f);
  }

  linalg::CsrMatrix analytic_jacobian(std::span<const double> u) const {
    return grayscott::analytic_jacobian(u, params_);
  }

private:
  GrayScottParams params_;
  Vector zero_;
};

}  // namespace adjopt::grayscott
