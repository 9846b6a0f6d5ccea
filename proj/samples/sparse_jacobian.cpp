// Records a small periodic stencil, colors its Jacobian pattern and recovers
// the full Jacobian from p forward propagations.

#include <iostream>
#include <vector>

#include "adjopt/adjopt.hpp"

int main() {
  using namespace adjopt;
  const std::size_t n = 12;
  Vector x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = 0.5 + 0.1 * static_cast<double>(i);

  auto session = ad::begin_recording(7);
  std::vector<ad::ActiveScalar> a;
  for (double xi : x) a.push_back(ad::mark_independent(session, xi));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& l = a[(i + n - 1) % n];
    const auto& r = a[(i + 1) % n];
    ad::mark_dependent(session, l - 2.0 * a[i] + r + a[i] * a[i] * r);
  }
  const ad::Tape tape = ad::end_recording(session);

  const auto pattern = ad::extract_sparsity(tape);
  const auto coloring = sparse::color_columns(pattern);
  const auto recovery = sparse::build_recovery(pattern, coloring);
  const auto jc = sparse::compressed_jacobian(tape, x, coloring);
  const auto jac = sparse::recover(jc, recovery, pattern);

  std::cout << tape.records().size() << " records, " << pattern.nnz() << " nonzeros, "
            << coloring.n_colors << " colors for " << n << " columns\n";
  const auto dense = jac.to_dense();
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < n; ++j) std::cout << ' ' << dense(i, j);
    std::cout << '\n';
  }
}
