// Estimates a few exponents through the library API.

#include <cstdio>

#include "qlyap/qlyap.hpp"

int main() {
  using namespace qlyap;

  const auto contraction = contraction_model(0.5, 2);
  auto est = lyapunov_q(contraction, pauli::x(), pauli::x(), 200);
  std::printf("contraction: %.6f (%s)\n", est.estimate.value(), std::string(to_string(est.verdict)).c_str());

  Operator rho = Operator::Zero(2, 2);
  rho(0, 0) = 1.0;
  rho(1, 1) = 0.3;
  est = lyapunov_q(quadratic_model(2), rho, rho, 40);
  std::printf("rho -> rho^2: %.6f (%s)\n", est.estimate.value(), std::string(to_string(est.verdict)).c_str());

  const auto squeezed = squeezed_light_model(squeezing_coupling(0.4), FockConfig(64));
  est = lyapunov_param(squeezed, squeezed.default_epsilon, 200);
  std::printf("squeezed light: %.6f (%s)\n", est.estimate.value(), std::string(to_string(est.verdict)).c_str());
  return 0;
}
