// u' = -u with Crank-Nicolson: one step and its discrete adjoint.

#include <iostream>

#include "adjopt/adjopt.hpp"

int main() {
  using namespace adjopt;
  linalg::CsrMatrix a = linalg::CsrMatrix::identity(1);
  a.scale(-1.0);
  const integrate::LinearModel model(a);
  const Vector x0{1.0};
  const integrate::ThetaScheme scheme{0.5, 0.5, 1};
  const integrate::JacobianEngine<integrate::LinearModel> engine(
      model, integrate::JacobianStrategy::ad_compressed, x0);

  const auto fwd = integrate::integrate(model, x0, scheme, engine);
  const auto adj = adjoint::adjoint_sweep(engine, fwd.trajectory, Vector{1.0});
  std::cout << "u_1 = " << fwd.trajectory.states.back()[0] << " (exact 0.6)\n"
            << "dpsi/du_0 = " << adj.gradient[0] << " (exact 0.6)\n";
}
