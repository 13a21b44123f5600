#ifndef QLYAP_MODELS_HPP
#define QLYAP_MODELS_HPP

#include <cmath>
#include <complex>
#include <functional>
#include <map>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "qlyap/operator_core.hpp"

namespace qlyap {

/// The (Phi, Pi) quadrature pair of a single mode, a = Phi + i Pi.
struct OperatorPair {
  Operator first;
  Operator second;
};

inline OperatorPair operator+(const OperatorPair& a, const OperatorPair& b) {
  return {a.first + b.first, a.second + b.second};
}
inline OperatorPair operator-(const OperatorPair& a, const OperatorPair& b) {
  return {a.first - b.first, a.second - b.second};
}
inline OperatorPair operator*(double s, const OperatorPair& a) { return {s * a.first, s * a.second}; }
inline OperatorPair operator*(const OperatorPair& a, double s) { return s * a; }
inline OperatorPair operator/(const OperatorPair& a, double s) { return {a.first / s, a.second / s}; }

using ClassicalVector = Eigen::VectorXd;

// C*-norms: spectral norm, max over the summands of A (+) A, Euclidean.
inline double norm_of(const Operator& a) { return spectral_norm(a); }
inline double norm_of(const OperatorPair& p) { return std::max(spectral_norm(p.first), spectral_norm(p.second)); }
inline double norm_of(const ClassicalVector& v) { return v.norm(); }
inline double norm_of(double v) { return std::abs(v); }

inline bool all_finite(const Operator& a) { return a.allFinite(); }
inline bool all_finite(const OperatorPair& p) { return p.first.allFinite() && p.second.allFinite(); }
inline bool all_finite(const ClassicalVector& v) { return v.allFinite(); }

inline Operator zero_like(const Operator& a) { return Operator::Zero(a.rows(), a.cols()); }
inline OperatorPair zero_like(const OperatorPair& p) { return {zero_like(p.first), zero_like(p.second)}; }
inline ClassicalVector zero_like(const ClassicalVector& v) { return ClassicalVector::Zero(v.size()); }

inline bool is_exact_zero(const Operator& a) { return (a.array() == cplx(0.0)).all(); }
inline bool is_exact_zero(const OperatorPair& p) { return is_exact_zero(p.first) && is_exact_zero(p.second); }
inline bool is_exact_zero(const ClassicalVector& v) { return (v.array() == 0.0).all(); }

enum class StateKind { observable, density_matrix, operator_pair, classical_vector };
enum class VariationMode { direction, parameter };

inline std::string_view to_string(StateKind k) {
  switch (k) {
    case StateKind::observable: return "observable";
    case StateKind::density_matrix: return "density_matrix";
    case StateKind::operator_pair: return "operator_pair";
    case StateKind::classical_vector: return "classical_vector";
  }
  return "unknown";
}

enum class Warning {
  CutoffExceeded,
  NumericalOverflow,
  SlowConvergence,
  ZeroDerivation,
  StateProjected,
};

inline std::string_view to_string(Warning w) {
  switch (w) {
    case Warning::CutoffExceeded: return "CutoffExceeded";
    case Warning::NumericalOverflow: return "NumericalOverflow";
    case Warning::SlowConvergence: return "SlowConvergence";
    case Warning::ZeroDerivation: return "ZeroDerivation";
    case Warning::StateProjected: return "StateProjected";
  }
  return "Unknown";
}

inline void add_warning(std::vector<Warning>& ws, Warning w) {
  for (Warning x : ws)
    if (x == w) return;
  ws.push_back(w);
}

using ModelParams = std::map<std::string, double>;

inline double require_param(const ModelParams& p, const std::string& key) {
  auto it = p.find(key);
  if (it == p.end()) throw Error(ErrorKind::InvalidParam, "missing parameter '" + key + "'");
  return it->second;
}

/// A dynamical map tau on states of type S, with its linearization.
///
/// `step` is one discrete iterate or one fixed-dt sample of a flow; estimators
/// normalize by elapsed time n * dt. The parameter-mode members describe a
/// one-parameter family of initial states x(eps) and a readout R(state, eps)
/// that is real-linear in the state.
template <class S>
struct DynamicalModel {
  using State = S;

  std::string name;
  StateKind state_kind = StateKind::observable;
  VariationMode variation_mode = VariationMode::direction;
  double dt = 1.0;
  ModelParams params;

  std::function<S(const S&)> step;
  std::function<S(const S&, const S&)> analytic_tangent;

  /// Validates (and possibly projects) an initial state.
  std::function<S(const S&, std::vector<Warning>&)> prepare;
  /// Returns false when the orbit left the model's domain.
  std::function<bool(const S&)> in_domain;
  bool zero_state_in_domain = true;

  std::function<double(const S&)> leakage;
  double tail_tolerance = kDefaultTailTolerance;

  std::function<S(double)> family;
  std::function<S(double)> family_derivative;
  std::function<Operator(const S&, double)> readout;
  std::function<Operator(const S&, double)> readout_derivative;
  double default_epsilon = 0.0;

  bool has_analytic_tangent() const { return static_cast<bool>(analytic_tangent); }

  S prepared(const S& x, std::vector<Warning>& warnings) const { return prepare ? prepare(x, warnings) : x; }
};

namespace detail {

inline void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw Error(ErrorKind::InvalidParam, std::string(what) + " must be > 0");
}

inline void require_square(const Operator& a, Eigen::Index dim, const char* what) {
  if (a.rows() != dim || a.cols() != dim)
    throw Error(ErrorKind::InvalidState, std::string(what) + " has wrong dimension");
}

}  // namespace detail

/// tau = identity on dim x dim operators.
inline DynamicalModel<Operator> identity_model(int dim) {
  DynamicalModel<Operator> m;
  m.name = "identity";
  m.params = {{"dim", static_cast<double>(dim)}};
  m.step = [](const Operator& x) { return x; };
  m.analytic_tangent = [](const Operator&, const Operator& y) { return y; };
  return m;
}

/// Semigroup of contractions S_t x = e^{-lambda t} x sampled at dt.
inline DynamicalModel<Operator> contraction_model(double lambda, int dim, double dt = 1.0) {
  detail::require_positive(lambda, "lambda");
  detail::require_positive(dt, "dt");
  if (dim < 1) throw Error(ErrorKind::InvalidParam, "dim must be >= 1");
  const double factor = std::exp(-lambda * dt);
  DynamicalModel<Operator> m;
  m.name = "contraction";
  m.dt = dt;
  m.params = {{"lambda", lambda}, {"dim", static_cast<double>(dim)}};
  m.step = [factor](const Operator& x) -> Operator { return factor * x; };
  m.analytic_tangent = [factor](const Operator&, const Operator& y) -> Operator { return factor * y; };
  m.prepare = [dim](const Operator& x, std::vector<Warning>&) {
    detail::require_square(x, dim, "state");
    return x;
  };
  return m;
}

/// Density-matrix check within `tol`, followed by projection onto the state space.
inline Operator project_density_matrix(const Operator& rho, std::vector<Warning>& warnings, double tol = kHermitianTolerance) {
  require_finite(rho, "density matrix");
  if (rho.rows() != rho.cols()) throw Error(ErrorKind::InvalidState, "density matrix must be square");
  if (!is_hermitian(rho, tol)) throw Error(ErrorKind::InvalidState, "density matrix is not Hermitian");
  const Operator sym = 0.5 * (rho + rho.adjoint());
  Eigen::SelfAdjointEigenSolver<Operator> es(sym);
  Eigen::VectorXd lam = es.eigenvalues();
  if (lam.minCoeff() < -tol) throw Error(ErrorKind::InvalidState, "density matrix is not positive semidefinite");
  if (std::abs(sym.trace().real() - 1.0) > tol) throw Error(ErrorKind::InvalidState, "density matrix trace differs from 1");
  lam = lam.cwiseMax(0.0);
  lam /= lam.sum();
  Operator out = es.eigenvectors() * lam.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
  if ((out - rho).norm() > 1e-14 * std::max(1.0, rho.norm())) add_warning(warnings, Warning::StateProjected);
  return out;
}

/// Mean-field (Hartree-type) flow rho -> exp(-i Tr(Q rho) Q dt) rho exp(i Tr(Q rho) Q dt).
///
/// The trace multiplier is treated holomorphically so that the step is
/// defined on complex directions as well; on density matrices the two
/// exponentials are mutually adjoint.
inline DynamicalModel<Operator> hartree_model(const Operator& q, double dt = 1.0) {
  require_finite(q, "Q");
  if (!is_hermitian(q)) throw Error(ErrorKind::NotHermitian, "Q must be Hermitian");
  detail::require_positive(dt, "dt");
  const Operator qs = 0.5 * (q + q.adjoint());
  Eigen::SelfAdjointEigenSolver<Operator> es(qs);
  const Operator v = es.eigenvectors();
  const Eigen::VectorXd lam = es.eigenvalues();
  const Eigen::Index dim = q.rows();

  auto exp_q = [v, lam](cplx coeff) -> Operator {
    Eigen::VectorXcd d(lam.size());
    for (Eigen::Index i = 0; i < lam.size(); ++i) d(i) = std::exp(coeff * lam(i));
    return v * d.asDiagonal() * v.adjoint();
  };

  DynamicalModel<Operator> m;
  m.name = "hartree";
  m.state_kind = StateKind::density_matrix;
  m.dt = dt;
  m.params = {{"dt", dt}, {"dim", static_cast<double>(dim)}};
  m.zero_state_in_domain = false;
  m.step = [qs, exp_q, dt](const Operator& rho) -> Operator {
    const cplx t = (qs * rho).trace();
    const cplx i(0.0, 1.0);
    return exp_q(-i * t * dt) * rho * exp_q(i * t * dt);
  };
  m.analytic_tangent = [qs, exp_q, dt](const Operator& rho, const Operator& drho) -> Operator {
    const cplx t = (qs * rho).trace();
    const cplx dtr = (qs * drho).trace();
    const cplx i(0.0, 1.0);
    const Operator inner = drho - i * dtr * dt * commutator(qs, rho);
    return exp_q(-i * t * dt) * inner * exp_q(i * t * dt);
  };
  m.prepare = [dim](const Operator& rho, std::vector<Warning>& w) {
    detail::require_square(rho, dim, "density matrix");
    return project_density_matrix(rho, w);
  };
  return m;
}

/// rho -> rho^2 on Hermitian operators of the unit ball.
inline DynamicalModel<Operator> quadratic_model(int dim) {
  if (dim < 1) throw Error(ErrorKind::InvalidParam, "dim must be >= 1");
  DynamicalModel<Operator> m;
  m.name = "quadratic";
  m.params = {{"dim", static_cast<double>(dim)}};
  m.step = [](const Operator& rho) -> Operator { return rho * rho; };
  m.analytic_tangent = [](const Operator& rho, const Operator& y) -> Operator { return rho * y + y * rho; };
  m.prepare = [dim](const Operator& rho, std::vector<Warning>&) {
    detail::require_square(rho, dim, "state");
    require_finite(rho, "state");
    if (!is_hermitian(rho)) throw Error(ErrorKind::InvalidState, "state must be Hermitian");
    if (spectral_norm(rho) > 1.0 + kHermitianTolerance) throw Error(ErrorKind::InvalidState, "state must lie in the unit ball");
    const double scale = std::max(1.0, spectral_norm(rho));
    if (spectral_norm(rho * rho - rho) <= kHermitianTolerance * scale)
      throw Error(ErrorKind::DegenerateState, "state is a projector (or the identity)");
    return rho;
  };
  return m;
}

/// Two-level system coupled to one field mode, Heisenberg picture on C^2 (x) C^D:
/// H = w0/2 sz + w (a*a + 1/2) + l0 sx (a + a*),  A -> e^{iH dt} A e^{-iH dt}.
inline Operator two_level_hamiltonian(double omega0, double omega, double lambda0, const FockConfig& cfg) {
  const auto [a, ad] = fock_pair(cfg);
  const Eigen::Index d = cfg.cutoff();
  const Operator id_f = identity(d);
  return 0.5 * omega0 * kron(pauli::z(), id_f) + omega * kron(identity(2), ad * a + 0.5 * id_f) +
         lambda0 * kron(pauli::x(), a + ad);
}

inline Operator embed_qubit(const Operator& op2, const FockConfig& cfg) { return kron(op2, identity(cfg.cutoff())); }
inline Operator embed_field(const Operator& opf) { return kron(identity(2), opf); }

inline DynamicalModel<Operator> two_level_field_model(double omega0, double omega, double lambda0, const FockConfig& cfg,
                                                      double dt = 0.1) {
  if (cfg.cutoff() < 4) throw Error(ErrorKind::InvalidParam, "two-level field model needs cutoff >= 4");
  detail::require_positive(dt, "dt");
  const Operator h = two_level_hamiltonian(omega0, omega, lambda0, cfg);
  const Operator u = hermitian_function(h, [dt](double e) { return std::polar(1.0, e * dt); });
  const Operator ud = u.adjoint();
  const int d = cfg.cutoff();

  DynamicalModel<Operator> m;
  m.name = "two_level";
  m.dt = dt;
  m.params = {{"omega0", omega0}, {"omega", omega}, {"lambda0", lambda0}, {"cutoff", static_cast<double>(d)}, {"dt", dt}};
  m.step = [u, ud](const Operator& x) -> Operator { return u * x * ud; };
  m.analytic_tangent = [u, ud](const Operator&, const Operator& y) -> Operator { return u * y * ud; };
  m.leakage = [d](const Operator& x) { return top_level_weight(x, d, 2); };
  m.tail_tolerance = cfg.tail_tolerance();
  m.prepare = [d](const Operator& x, std::vector<Warning>&) {
    detail::require_square(x, 2 * d, "observable");
    return x;
  };
  return m;
}

/// Parametrically kicked Kerr oscillator acting on the quadrature pair (Phi, Pi).
///
/// One step is the free Kerr evolution over t0 followed by the kick:
///   B = Phi^2 + Pi^2 - 1,
///   Phi_r = e^{-i mu/2} ( cos(mu B) Phi + sin(mu B) Pi),
///   Pi_r  = e^{-i mu/2} (-sin(mu B) Phi + cos(mu B) Pi),
///   a_r = Phi_r + i Pi_r,
///   Phi' = e^{r}  (a_r + a_r*)/2,   Pi' = e^{-r} (a_r - a_r*)/(2i).
/// The rotated pair is re-split into Hermitian quadratures before the kick so
/// that B stays Hermitian along the orbit. For canonical initial data and
/// r = 0 this reproduces a -> e^{-i mu a*a} a.
class KickedKerrMap {
 public:
  KickedKerrMap(double mu, double r) : mu_(mu), r_(r) {}

  OperatorPair operator()(const OperatorPair& x) const {
    const auto [c, s] = trig(x);
    return finish(rotate(c, s, x));
  }

  OperatorPair tangent(const OperatorPair& x, const OperatorPair& dx) const {
    const auto [c, s] = trig(x);
    const Operator b = generator(x);
    const Operator db = x.first * dx.first + dx.first * x.first + x.second * dx.second + dx.second * x.second;
    const double mu = mu_;
    const Operator dc = hermitian_function_derivative(
        b, db, [mu](double l) { return std::cos(mu * l); }, [mu](double l) { return -mu * std::sin(mu * l); });
    const Operator ds = hermitian_function_derivative(
        b, db, [mu](double l) { return std::sin(mu * l); }, [mu](double l) { return mu * std::cos(mu * l); });
    const cplx ph = std::polar(1.0, -0.5 * mu_);
    OperatorPair rot;
    rot.first = ph * (dc * x.first + c * dx.first + ds * x.second + s * dx.second);
    rot.second = ph * (-(ds * x.first + s * dx.first) + dc * x.second + c * dx.second);
    return finish(rot);
  }

  double mu() const { return mu_; }
  double r() const { return r_; }

 private:
  static Operator generator(const OperatorPair& x) {
    const Eigen::Index n = x.first.rows();
    return x.first * x.first + x.second * x.second - identity(n);
  }

  std::pair<Operator, Operator> trig(const OperatorPair& x) const {
    const Operator b = generator(x);
    const double mu = mu_;
    // cos and sin share one eigendecomposition
    const auto es = detail::hermitian_eigen(b);
    const Eigen::VectorXd& lam = es.eigenvalues();
    Eigen::VectorXcd cl(lam.size()), sl(lam.size());
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
      cl(i) = std::cos(mu * lam(i));
      sl(i) = std::sin(mu * lam(i));
    }
    const auto& v = es.eigenvectors();
    return {v * cl.asDiagonal() * v.adjoint(), v * sl.asDiagonal() * v.adjoint()};
  }

  OperatorPair rotate(const Operator& c, const Operator& s, const OperatorPair& x) const {
    const cplx ph = std::polar(1.0, -0.5 * mu_);
    return {ph * (c * x.first + s * x.second), ph * (-(s * x.first) + c * x.second)};
  }

  OperatorPair finish(const OperatorPair& rot) const {
    const cplx i(0.0, 1.0);
    const Operator ar = rot.first + i * rot.second;
    const Operator ard = ar.adjoint();
    return {std::exp(r_) * 0.5 * (ar + ard), std::exp(-r_) * (ar - ard) / (2.0 * i)};
  }

  double mu_;
  double r_;
};

inline DynamicalModel<OperatorPair> kicked_kerr_model(double chi, double kappa, double t0, double r, const FockConfig& cfg) {
  if (cfg.cutoff() < 8) throw Error(ErrorKind::InvalidParam, "kicked Kerr model needs cutoff >= 8");
  detail::require_positive(chi, "chi");
  detail::require_positive(t0, "t0");
  if (!(r >= 0.0) || !std::isfinite(r)) throw Error(ErrorKind::InvalidParam, "r must be >= 0");
  const double mu = chi * t0;
  const KickedKerrMap map(mu, r);
  const auto [a, ad] = fock_pair(cfg);
  const Operator a0 = a;
  const int d = cfg.cutoff();

  DynamicalModel<OperatorPair> m;
  m.name = "kicked_kerr";
  m.state_kind = StateKind::operator_pair;
  m.variation_mode = VariationMode::parameter;
  m.dt = 1.0;
  m.params = {{"chi", chi}, {"kappa", kappa}, {"t0", t0}, {"r", r}, {"mu", mu}, {"cutoff", static_cast<double>(d)}};
  m.step = [map](const OperatorPair& x) { return map(x); };
  m.analytic_tangent = [map](const OperatorPair& x, const OperatorPair& dx) { return map.tangent(x, dx); };
  m.leakage = [d](const OperatorPair& x) {
    return std::max(top_level_weight(x.first, d), top_level_weight(x.second, d));
  };
  m.tail_tolerance = cfg.tail_tolerance();
  m.prepare = [d](const OperatorPair& x, std::vector<Warning>&) {
    detail::require_square(x.first, d, "Phi");
    detail::require_square(x.second, d, "Pi");
    if (!is_hermitian(x.first) || !is_hermitian(x.second))
      throw Error(ErrorKind::InvalidState, "quadrature pair must be Hermitian");
    return x;
  };
  // Phase-rotated quadratures of the initial mode; the readout is the Pi component.
  m.family = [a0](double eps) {
    auto [p, q] = quadratures(a0, QuadratureAngle(eps));
    return OperatorPair{std::move(p), std::move(q)};
  };
  m.family_derivative = [a0](double eps) {
    auto [p, q] = quadratures(a0, QuadratureAngle(eps));
    return OperatorPair{-q, p};
  };
  m.readout = [](const OperatorPair& x, double) { return x.second; };
  m.readout_derivative = [](const OperatorPair& x, double) { return zero_like(x.second); };
  return m;
}

/// Default coupling phase k/|k| = -1.
inline cplx squeezing_coupling(double magnitude, double phase = std::numbers::pi) {
  if (phase == std::numbers::pi) return cplx(-magnitude, 0.0);
  return std::polar(magnitude, phase);
}

/// Degenerate parametric amplification along z: a(z) = cosh(|k|z) a + (k/|k|) sinh(|k|z) a*.
///
/// The state is a(z) itself; the readout is Q_alpha(z) and its exact
/// alpha-derivative P_alpha(z).
inline DynamicalModel<Operator> squeezed_light_model(cplx k, const FockConfig& cfg, double dz = 0.25) {
  const double mag = std::abs(k);
  if (!(mag > 0.0) || !std::isfinite(mag)) throw Error(ErrorKind::InvalidParam, "k must be nonzero");
  detail::require_positive(dz, "dz");
  const double ch = std::cosh(mag * dz);
  const cplx sh = (k / mag) * std::sinh(mag * dz);
  const auto [a, ad] = fock_pair(cfg);
  const Operator a0 = a;
  const int d = cfg.cutoff();

  DynamicalModel<Operator> m;
  m.name = "squeezed";
  m.variation_mode = VariationMode::parameter;
  m.dt = dz;
  m.params = {{"k", mag}, {"k_phase", std::arg(k)}, {"cutoff", static_cast<double>(d)}, {"dz", dz}};
  m.step = [ch, sh](const Operator& x) -> Operator { return ch * x + sh * x.adjoint(); };
  m.analytic_tangent = [ch, sh](const Operator&, const Operator& y) -> Operator { return ch * y + sh * y.adjoint(); };
  m.leakage = [d](const Operator& x) { return top_level_weight(x, d); };
  m.tail_tolerance = cfg.tail_tolerance();
  m.default_epsilon = 0.25 * std::numbers::pi;
  m.family = [a0](double) { return a0; };
  m.family_derivative = [a0](double) { return zero_like(a0); };
  m.readout = [](const Operator& x, double alpha) { return quadratures(x, QuadratureAngle(alpha)).second; };
  m.readout_derivative = [](const Operator& x, double alpha) { return quadratures(x, QuadratureAngle(alpha)).first; };
  return m;
}

/// Coherent-state expectation w(z) = <w|a(z)|w> as the real vector (Re w, Im w).
inline DynamicalModel<ClassicalVector> squeezed_coherent_model(cplx k, double dz = 0.25) {
  const double mag = std::abs(k);
  if (!(mag > 0.0) || !std::isfinite(mag)) throw Error(ErrorKind::InvalidParam, "k must be nonzero");
  detail::require_positive(dz, "dz");
  const double ch = std::cosh(mag * dz);
  const cplx sh = (k / mag) * std::sinh(mag * dz);
  Eigen::Matrix2d jac;
  // w -> ch w + sh conj(w)
  jac << ch + sh.real(), sh.imag(), sh.imag(), ch - sh.real();
  DynamicalModel<ClassicalVector> m;
  m.name = "squeezed_coherent";
  m.state_kind = StateKind::classical_vector;
  m.dt = dz;
  m.params = {{"k", mag}, {"k_phase", std::arg(k)}, {"dz", dz}};
  m.step = [jac](const ClassicalVector& x) -> ClassicalVector { return jac * x; };
  m.analytic_tangent = [jac](const ClassicalVector&, const ClassicalVector& v) -> ClassicalVector { return jac * v; };
  return m;
}

/// <w|Q_alpha|w> for the coherent amplitude w = x(0) + i x(1).
inline double coherent_quadrature(const ClassicalVector& w, double alpha) {
  const cplx amp(w(0), w(1));
  return (std::polar(1.0, alpha) * amp).imag();
}

/// x -> r x (1 - x) on [0, 1].
inline DynamicalModel<ClassicalVector> logistic_model(double r) {
  if (!(r > 0.0 && r <= 4.0)) throw Error(ErrorKind::InvalidParam, "logistic r must lie in (0, 4]");
  DynamicalModel<ClassicalVector> m;
  m.name = "logistic";
  m.state_kind = StateKind::classical_vector;
  m.params = {{"r", r}};
  m.step = [r](const ClassicalVector& x) -> ClassicalVector {
    ClassicalVector y(1);
    y(0) = r * x(0) * (1.0 - x(0));
    return y;
  };
  m.analytic_tangent = [r](const ClassicalVector& x, const ClassicalVector& v) -> ClassicalVector {
    ClassicalVector y(1);
    y(0) = r * (1.0 - 2.0 * x(0)) * v(0);
    return y;
  };
  m.in_domain = [](const ClassicalVector& x) { return x.size() == 1 && x(0) >= 0.0 && x(0) <= 1.0; };
  return m;
}

/// Exact flow of x'' = kappa^2 x on (x, x') sampled at dt.
inline DynamicalModel<ClassicalVector> hyperbolic_model(double kappa, double dt = 1.0) {
  if (!(kappa >= 0.0) || !std::isfinite(kappa)) throw Error(ErrorKind::InvalidParam, "kappa must be >= 0");
  detail::require_positive(dt, "dt");
  Eigen::Matrix2d flow;
  const double ch = std::cosh(kappa * dt);
  const double sh = std::sinh(kappa * dt);
  flow << ch, kappa > 0.0 ? sh / kappa : dt, kappa * sh, ch;
  DynamicalModel<ClassicalVector> m;
  m.name = "hyperbolic";
  m.state_kind = StateKind::classical_vector;
  m.dt = dt;
  m.params = {{"kappa", kappa}, {"dt", dt}};
  m.step = [flow](const ClassicalVector& x) -> ClassicalVector { return flow * x; };
  m.analytic_tangent = [flow](const ClassicalVector&, const ClassicalVector& v) -> ClassicalVector { return flow * v; };
  return m;
}

/// c-number kicked Kerr amplitude z = x + i y: one kick, then free Kerr rotation over t0.
///
/// kick: dz/ds = -i kappa conj(z) integrated over unit s;
/// free: z -> z exp(-i (chi/2) |z|^2 t0).
inline DynamicalModel<ClassicalVector> kerr_cnumber_model(double kappa, double chi, double t0) {
  detail::require_positive(kappa, "kappa");
  detail::require_positive(chi, "chi");
  detail::require_positive(t0, "t0");
  Eigen::Matrix2d kick;
  kick << std::cosh(kappa), -std::sinh(kappa), -std::sinh(kappa), std::cosh(kappa);
  const double g = 0.5 * chi * t0;
  auto rotation = [](double phi) {
    Eigen::Matrix2d r;
    r << std::cos(phi), std::sin(phi), -std::sin(phi), std::cos(phi);
    return r;
  };
  DynamicalModel<ClassicalVector> m;
  m.name = "kerr_cnumber";
  m.state_kind = StateKind::classical_vector;
  m.params = {{"kappa", kappa}, {"chi", chi}, {"t0", t0}};
  m.step = [kick, g, rotation](const ClassicalVector& x) -> ClassicalVector {
    const Eigen::Vector2d k = kick * x;
    return rotation(g * k.squaredNorm()) * k;
  };
  m.analytic_tangent = [kick, g, rotation](const ClassicalVector& x, const ClassicalVector& v) -> ClassicalVector {
    const Eigen::Vector2d k = kick * x;
    const Eigen::Vector2d dk = kick * v;
    const double phi = g * k.squaredNorm();
    const double dphi = 2.0 * g * k.dot(dk);
    Eigen::Matrix2d drot;
    drot << -std::sin(phi), std::cos(phi), -std::cos(phi), -std::sin(phi);
    return rotation(phi) * dk + dphi * (drot * k);
  };
  return m;
}

enum class ClassicalModelName { logistic, hyperbolic, kerr_kick_cnumber };

inline DynamicalModel<ClassicalVector> classical_model(ClassicalModelName name, const ModelParams& p) {
  switch (name) {
    case ClassicalModelName::logistic: return logistic_model(require_param(p, "r"));
    case ClassicalModelName::hyperbolic: {
      auto it = p.find("dt");
      return hyperbolic_model(require_param(p, "kappa"), it == p.end() ? 1.0 : it->second);
    }
    case ClassicalModelName::kerr_kick_cnumber:
      return kerr_cnumber_model(require_param(p, "kappa"), require_param(p, "chi"), require_param(p, "t0"));
  }
  throw Error(ErrorKind::InvalidParam, "unknown classical model");
}

}  // namespace qlyap

#endif  // QLYAP_MODELS_HPP
