#ifndef QLYAP_OPERATOR_CORE_HPP
#define QLYAP_OPERATOR_CORE_HPP

// Dense complex operator algebra on truncated Hilbert spaces. hbar = 1.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <type_traits>
#include <utility>

#include <Eigen/Dense>

#include "qlyap/error.hpp"

namespace qlyap {

using cplx = std::complex<double>;
using Operator = Eigen::MatrixXcd;

inline constexpr double kHermitianTolerance = 1e-10;
inline constexpr double kDefaultTailTolerance = 1e-6;

/// Truncated boson space: the lowest `cutoff` number states.
class FockConfig {
 public:
  explicit FockConfig(int cutoff, double tail_tolerance = kDefaultTailTolerance)
      : cutoff_(cutoff), tail_tolerance_(tail_tolerance) {
    if (cutoff < 2) throw Error(ErrorKind::InvalidParam, "Fock cutoff must be >= 2");
    if (!(tail_tolerance >= 0.0 && tail_tolerance < 1.0))
      throw Error(ErrorKind::InvalidParam, "tail_tolerance must lie in [0, 1)");
  }

  int cutoff() const noexcept { return cutoff_; }
  double tail_tolerance() const noexcept { return tail_tolerance_; }

 private:
  int cutoff_;
  double tail_tolerance_;
};

/// Phase angle reduced into [0, 2pi).
class QuadratureAngle {
 public:
  explicit QuadratureAngle(double angle) : angle_(reduce(angle)) {}
  double value() const noexcept { return angle_; }

 private:
  static double reduce(double a) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double r = std::fmod(a, two_pi);
    if (r < 0.0) r += two_pi;
    if (r >= two_pi) r = 0.0;
    return r;
  }
  double angle_;
};

inline bool is_finite(const Operator& a) { return a.allFinite(); }

inline void require_finite(const Operator& a, const char* what = "operator") {
  if (a.size() == 0) throw Error(ErrorKind::InvalidOperator, std::string(what) + " is empty");
  if (!a.allFinite()) throw Error(ErrorKind::InvalidOperator, std::string(what) + " has non-finite entries");
}

/// Largest singular value.
inline double spectral_norm(const Operator& a) {
  require_finite(a);
  if (a.cols() == 1 || a.rows() == 1) return a.norm();
  Eigen::BDCSVD<Operator> svd(a);
  return svd.singularValues()(0);
}

inline Operator dagger(const Operator& a) { return a.adjoint(); }

inline Operator commutator(const Operator& a, const Operator& b) { return a * b - b * a; }

inline Operator identity(Eigen::Index dim) { return Operator::Identity(dim, dim); }

inline Operator kron(const Operator& a, const Operator& b) {
  Operator out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline Operator matrix_unit(Eigen::Index dim, Eigen::Index i, Eigen::Index j) {
  Operator e = Operator::Zero(dim, dim);
  e(i, j) = 1.0;
  return e;
}

namespace pauli {
inline Operator x() {
  Operator m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}
inline Operator y() {
  Operator m(2, 2);
  m << 0, cplx(0, -1), cplx(0, 1), 0;
  return m;
}
inline Operator z() {
  Operator m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}
}  // namespace pauli

/// Relative Hermiticity test in the spectral norm.
inline bool is_hermitian(const Operator& h, double tol = kHermitianTolerance) {
  if (h.rows() != h.cols()) return false;
  const Operator skew = h - h.adjoint();
  const double scale = spectral_norm(h);
  return spectral_norm(skew) <= tol * (scale > 0.0 ? scale : 1.0);
}

namespace detail {

inline Eigen::SelfAdjointEigenSolver<Operator> hermitian_eigen(const Operator& h) {
  require_finite(h, "Hermitian argument");
  if (!is_hermitian(h)) throw Error(ErrorKind::NotHermitian, "matrix is not Hermitian within tolerance");
  const Operator sym = 0.5 * (h + h.adjoint());
  Eigen::SelfAdjointEigenSolver<Operator> es(sym);
  if (es.info() != Eigen::Success) throw Error(ErrorKind::InvalidOperator, "eigendecomposition failed");
  return es;
}

template <class F>
cplx apply_scalar(F& f, double x) {
  return cplx(f(x));
}

}  // namespace detail

/// f(H) = V f(Lambda) V* for Hermitian H; f maps reals to reals or complex numbers.
template <class F>
Operator hermitian_function(const Operator& h, F&& f) {
  const auto es = detail::hermitian_eigen(h);
  const auto& v = es.eigenvectors();
  const Eigen::VectorXd& lam = es.eigenvalues();
  Eigen::VectorXcd fl(lam.size());
  for (Eigen::Index i = 0; i < lam.size(); ++i) fl(i) = detail::apply_scalar(f, lam(i));
  return v * fl.asDiagonal() * v.adjoint();
}

/// Frechet derivative of H -> f(H) at Hermitian H in direction dh (Daleckii-Krein).
template <class F, class DF>
Operator hermitian_function_derivative(const Operator& h, const Operator& dh, F&& f, DF&& df) {
  const auto es = detail::hermitian_eigen(h);
  const auto& v = es.eigenvectors();
  const Eigen::VectorXd& lam = es.eigenvalues();
  const Eigen::Index n = lam.size();
  Eigen::VectorXcd fl(n), dfl(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    fl(i) = detail::apply_scalar(f, lam(i));
    dfl(i) = detail::apply_scalar(df, lam(i));
  }
  Operator m = v.adjoint() * dh * v;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double gap = lam(i) - lam(j);
      const double scale = std::max({1.0, std::abs(lam(i)), std::abs(lam(j))});
      cplx divided;
      if (std::abs(gap) <= 1e-8 * scale) {
        divided = detail::apply_scalar(df, 0.5 * (lam(i) + lam(j)));
      } else {
        divided = (fl(i) - fl(j)) / gap;
      }
      m(i, j) *= divided;
    }
  }
  return v * m * v.adjoint();
}

/// Truncated annihilator a (a[n-1, n] = sqrt(n)) and its adjoint.
inline std::pair<Operator, Operator> fock_pair(const FockConfig& cfg) {
  const int d = cfg.cutoff();
  Operator a = Operator::Zero(d, d);
  for (int n = 1; n < d; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  Operator ad = a.adjoint();
  return {std::move(a), std::move(ad)};
}

inline Operator number_operator(const FockConfig& cfg) {
  auto [a, ad] = fock_pair(cfg);
  return ad * a;
}

/// P = (e^{i t} a + e^{-i t} a*)/2,  Q = (e^{i t} a - e^{-i t} a*)/(2i).
inline std::pair<Operator, Operator> quadratures(const Operator& a, QuadratureAngle theta) {
  const cplx ph = std::polar(1.0, theta.value());
  const Operator ea = ph * a;
  const Operator eat = ea.adjoint();
  Operator p = 0.5 * (ea + eat);
  Operator q = (ea - eat) / cplx(0.0, 2.0);
  return {std::move(p), std::move(q)};
}

/// Leakage of an operator on C^m (x) C^D into the top Fock level.
///
/// Ratio of the block mapping the lower half of the Fock space into level
/// D-1 to the whole lower-half block.
inline double top_level_weight(const Operator& a, int fock_dim, int multiplicity = 1) {
  const Eigen::Index dim = static_cast<Eigen::Index>(fock_dim) * multiplicity;
  if (a.rows() != dim || a.cols() != dim)
    throw Error(ErrorKind::InvalidOperator, "operator dimension does not match Fock layout");
  const int low = std::max(1, fock_dim / 2);
  Operator to_top = Operator::Zero(multiplicity, low * multiplicity);
  Operator low_block = Operator::Zero(dim, low * multiplicity);
  for (int s = 0; s < multiplicity; ++s) {
    for (int t = 0; t < multiplicity; ++t) {
      for (int n = 0; n < low; ++n) {
        const Eigen::Index col = t * fock_dim + n;
        to_top(s, t * low + n) = a(s * fock_dim + fock_dim - 1, col);
      }
    }
  }
  for (int t = 0; t < multiplicity; ++t)
    for (int n = 0; n < low; ++n) low_block.col(t * low + n) = a.col(t * fock_dim + n);
  const double denom = spectral_norm(low_block);
  if (denom == 0.0) return 0.0;
  return spectral_norm(to_top) / denom;
}

}  // namespace qlyap

#endif  // QLYAP_OPERATOR_CORE_HPP
