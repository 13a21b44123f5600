#ifndef QLYAP_TESTS_SUPPORT_HPP
#define QLYAP_TESTS_SUPPORT_HPP

#include <random>

#include "qlyap/models.hpp"

namespace qtest {

using qlyap::cplx;
using qlyap::Operator;

inline Operator random_matrix(Eigen::Index n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Operator m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = cplx(nd(rng), nd(rng));
  return m;
}

inline Operator random_hermitian(Eigen::Index n, std::mt19937_64& rng, double scale = 1.0) {
  const Operator m = random_matrix(n, rng, scale);
  return 0.5 * (m + m.adjoint());
}

/// Full-rank density matrix G G* / Tr(G G*).
inline Operator random_density(Eigen::Index n, std::mt19937_64& rng) {
  const Operator g = random_matrix(n, rng);
  Operator rho = g * g.adjoint();
  rho /= rho.trace().real();
  return 0.5 * (rho + rho.adjoint());
}

/// Hermitian with spectral norm `radius`, and not a projector for radius < 1.
inline Operator random_unit_ball_hermitian(Eigen::Index n, std::mt19937_64& rng, double radius = 0.9) {
  const Operator h = random_hermitian(n, rng);
  return radius * h / qlyap::spectral_norm(h);
}

inline qlyap::ClassicalVector random_vector(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  qlyap::ClassicalVector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = nd(rng);
  return v;
}

/// Entrywise scalar map on diagonal matrices: the abelian reduction test bed.
template <class F, class DF>
qlyap::DynamicalModel<Operator> diagonal_model(F f, DF df) {
  qlyap::DynamicalModel<Operator> m;
  m.name = "diagonal";
  m.step = [f](const Operator& x) -> Operator {
    Operator y = Operator::Zero(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) y(i, i) = f(x(i, i).real());
    return y;
  };
  m.analytic_tangent = [df](const Operator& x, const Operator& v) -> Operator {
    Operator y = Operator::Zero(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) y(i, i) = df(x(i, i).real()) * v(i, i);
    return y;
  };
  return m;
}

}  // namespace qtest

#endif  // QLYAP_TESTS_SUPPORT_HPP
