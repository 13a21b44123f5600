#ifndef QLYAP_EXPONENT_HPP
#define QLYAP_EXPONENT_HPP

// Tangent propagation and exponent estimators for DynamicalModel.
//
// The tangent vector is renormalized after every step and the log of the
// scale accumulated, so orbits with huge or tiny derivatives never overflow.
// The extrapolated exponent is the least-squares slope of log-norm against
// elapsed time over the tail window of the sequence.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "qlyap/models.hpp"

namespace qlyap {

/// Exponent value with a distinguished negative-infinity sentinel.
class Exponent {
 public:
  static Exponent neg_inf() { return Exponent(true, 0.0); }
  static Exponent finite(double v) { return Exponent(false, v); }

  bool is_neg_inf() const noexcept { return neg_inf_; }
  /// -infinity for the sentinel.
  double value() const noexcept { return neg_inf_ ? -std::numeric_limits<double>::infinity() : value_; }

  friend bool operator==(const Exponent& a, const Exponent& b) {
    if (a.neg_inf_ || b.neg_inf_) return a.neg_inf_ == b.neg_inf_;
    return a.value_ == b.value_ || (std::isnan(a.value_) && std::isnan(b.value_));
  }

 private:
  Exponent(bool ni, double v) : neg_inf_(ni), value_(v) {}
  bool neg_inf_;
  double value_;
};

enum class Verdict { Regular, Irregular, NegInfinity, Inconclusive };

inline std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Regular: return "Regular";
    case Verdict::Irregular: return "Irregular";
    case Verdict::NegInfinity: return "NegInfinity";
    case Verdict::Inconclusive: return "Inconclusive";
  }
  return "Unknown";
}

struct SequencePoint {
  int n = 0;
  double log_norm = 0.0;
  double a_n = 0.0;

  friend bool operator==(const SequencePoint&, const SequencePoint&) = default;
};

struct ExponentEstimate {
  std::vector<SequencePoint> sequence;
  Exponent estimate = Exponent::finite(0.0);
  double std_error = 0.0;
  Verdict verdict = Verdict::Inconclusive;
  std::vector<Warning> diagnostics;
  double dt = 1.0;
};

struct EstimatorOptions {
  /// Fraction of the sequence used for the tail fit.
  double tail_fraction = 0.25;
  /// Fit log_norm = l t + b log t + c instead of l t + c.
  bool log_corrected = false;
  /// Relative finite-difference step.
  double fd_step = 1e-5;
  /// Relative disagreement between Richardson levels that raises SlowConvergence.
  double fd_disagreement = 1e-3;
};

inline constexpr double kNormFloor = 1e-300;
inline constexpr int kMinValidPoints = 10;
/// Per-step factors within a few ulps of zero are unresolved in double precision.
inline const double kUnresolvedRate = std::log(8.0 * std::numeric_limits<double>::epsilon());

// ---------------------------------------------------------------------------
// Finite differences

/// Central difference with one Richardson level; also reports level disagreement.
template <class X, class Step>
auto richardson_derivative(const Step& f, const X& x, const X& y, double h, double* disagreement = nullptr) {
  using R = std::decay_t<decltype(f(x))>;
  const R d1 = (f(X(x + h * y)) - f(X(x - h * y))) / (2.0 * h);
  const double h2 = 0.5 * h;
  const R d2 = (f(X(x + h2 * y)) - f(X(x - h2 * y))) / (2.0 * h2);
  const R rich = (4.0 * d2 - d1) / 3.0;
  if (disagreement) {
    const double scale = norm_of(rich);
    const R diff = d2 - d1;
    *disagreement = scale > 0.0 ? norm_of(diff) / scale : norm_of(diff);
  }
  return rich;
}

/// D_x tau(y) by Richardson-refined central differences, h = fd_step * max(1, |x|) / |y|.
template <class S>
S fd_directional_derivative(const DynamicalModel<S>& model, const S& x, const S& y, const EstimatorOptions& opts = {},
                            double* disagreement = nullptr) {
  const double ny = norm_of(y);
  if (ny == 0.0) return zero_like(y);
  const double h = opts.fd_step * std::max(1.0, norm_of(x)) / ny;
  return richardson_derivative(model.step, x, y, h, disagreement);
}

namespace detail {

template <class S>
S tangent_step(const DynamicalModel<S>& model, const S& x, const S& v, const EstimatorOptions& opts,
               std::vector<Warning>& warnings) {
  if (model.analytic_tangent) return model.analytic_tangent(x, v);
  double dis = 0.0;
  S out = fd_directional_derivative(model, x, v, opts, &dis);
  if (dis > opts.fd_disagreement) add_warning(warnings, Warning::SlowConvergence);
  return out;
}

template <class S>
void check_leakage(const DynamicalModel<S>& model, const S& x, std::vector<Warning>& warnings) {
  if (model.leakage && model.leakage(x) > model.tail_tolerance) add_warning(warnings, Warning::CutoffExceeded);
}

struct LineFit {
  double slope = 0.0;
  double std_error = 0.0;
};

/// Least squares of y on (t, 1) or (t, log t, 1); returns the t-coefficient and its standard error.
inline LineFit fit_slope(std::span<const double> t, std::span<const double> y, bool log_corrected) {
  const std::size_t m = t.size();
  const int p = log_corrected ? 3 : 2;
  if (m < static_cast<std::size_t>(p)) return {std::numeric_limits<double>::quiet_NaN(), 0.0};
  // Centre and scale t for conditioning.
  double tmean = 0.0;
  for (double v : t) tmean += v;
  tmean /= static_cast<double>(m);
  double tscale = 0.0;
  for (double v : t) tscale = std::max(tscale, std::abs(v - tmean));
  if (tscale == 0.0) tscale = 1.0;
  Eigen::MatrixXd a(m, p);
  Eigen::VectorXd b(m);
  double lmean = 0.0;
  if (log_corrected) {
    for (double v : t) lmean += std::log(v);
    lmean /= static_cast<double>(m);
  }
  for (std::size_t i = 0; i < m; ++i) {
    a(i, 0) = (t[i] - tmean) / tscale;
    a(i, 1) = 1.0;
    if (log_corrected) a(i, 2) = std::log(t[i]) - lmean;
    b(i) = y[i];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  const Eigen::VectorXd coef = qr.solve(b);
  const Eigen::VectorXd resid = b - a * coef;
  LineFit fit;
  fit.slope = coef(0) / tscale;
  if (m > static_cast<std::size_t>(p)) {
    const double sigma2 = resid.squaredNorm() / static_cast<double>(m - p);
    const Eigen::MatrixXd cov = (a.transpose() * a).inverse() * sigma2;
    fit.std_error = std::sqrt(std::max(0.0, cov(0, 0))) / tscale;
  }
  return fit;
}

}  // namespace detail

/// Resolution of a horizon of n_last steps: sub-exponential growth cannot be
/// separated from zero below ln(n)/(n dt).
inline double horizon_resolution(int n_last, double dt) {
  const double n = std::max(2, n_last);
  return std::log(n) / (n * dt);
}

/// Tail-window extrapolation and verdict for a finished sequence.
inline void summarize(ExponentEstimate& est, const EstimatorOptions& opts) {
  const auto& seq = est.sequence;
  const std::size_t m = seq.size();
  if (m == 0) {
    est.estimate = Exponent::finite(std::numeric_limits<double>::quiet_NaN());
    est.std_error = 0.0;
    est.verdict = Verdict::Inconclusive;
    return;
  }
  std::size_t w = static_cast<std::size_t>(std::ceil(opts.tail_fraction * static_cast<double>(m)));
  w = std::max(w, std::min<std::size_t>(m, kMinValidPoints));
  w = std::max<std::size_t>(w, std::min<std::size_t>(m, 3));
  w = std::min(w, m);
  std::vector<double> t, y;
  for (std::size_t i = m - w; i < m; ++i) {
    t.push_back(seq[i].n * est.dt);
    y.push_back(seq[i].log_norm);
  }
  detail::LineFit fit = detail::fit_slope(t, y, opts.log_corrected);
  if (std::isnan(fit.slope) && m >= 1) fit = {seq.back().a_n, 0.0};
  est.estimate = Exponent::finite(fit.slope);
  est.std_error = fit.std_error;
  if (m < static_cast<std::size_t>(kMinValidPoints)) {
    est.verdict = Verdict::Inconclusive;
    return;
  }
  // A tail that shrinks by less than machine epsilon per step carries no
  // information above rounding: report it as the -inf it approximates.
  if ((fit.slope + 2.0 * fit.std_error) * est.dt < kUnresolvedRate) {
    est.estimate = Exponent::neg_inf();
    est.std_error = 0.0;
    est.verdict = Verdict::NegInfinity;
    return;
  }
  const double band = horizon_resolution(seq.back().n, est.dt);
  if (fit.slope - 2.0 * fit.std_error > band) {
    est.verdict = Verdict::Irregular;
  } else if (fit.slope + 2.0 * fit.std_error <= band) {
    est.verdict = Verdict::Regular;
  } else {
    est.verdict = Verdict::Inconclusive;
  }
}

inline void mark_neg_inf(ExponentEstimate& est) {
  est.estimate = Exponent::neg_inf();
  est.std_error = 0.0;
  est.verdict = Verdict::NegInfinity;
}

// ---------------------------------------------------------------------------
// Direction-mode estimators

/// v_n = D_x tau^n (y) by the chain rule along the orbit (no renormalization).
template <class S>
S iterated_tangent(const DynamicalModel<S>& model, const S& x, const S& y, int n, const EstimatorOptions& opts = {}) {
  if (n < 1) throw Error(ErrorKind::InvalidParam, "iterate count must be >= 1");
  std::vector<Warning> ignored;
  S xk = x;
  S v = y;
  for (int k = 1; k <= n; ++k) {
    S vn = detail::tangent_step(model, xk, v, opts, ignored);
    S xn = model.step(xk);
    if (!all_finite(vn) || !all_finite(xn))
      throw Error(ErrorKind::NumericalOverflow, "non-finite tangent after last finite n = " + std::to_string(k - 1));
    v = std::move(vn);
    xk = std::move(xn);
  }
  return v;
}

namespace detail {

/// Renormalized propagation; calls sink(n, x_n, log_scale, v_hat) after every step.
/// Returns true when the tangent collapsed to zero.
template <class S, class Sink>
bool propagate(const DynamicalModel<S>& model, S x, S v, double log_scale, int steps, const EstimatorOptions& opts,
               std::vector<Warning>& warnings, Sink&& sink) {
  for (int n = 1; n <= steps; ++n) {
    S vn = tangent_step(model, x, v, opts, warnings);
    S xn = model.step(x);
    if (!all_finite(xn) || !all_finite(vn)) {
      add_warning(warnings, Warning::NumericalOverflow);
      return false;
    }
    if (model.in_domain && !model.in_domain(xn))
      throw Error(ErrorKind::DomainEscape, "orbit left the model domain at n = " + std::to_string(n));
    const double s = norm_of(vn);
    if (!(s > kNormFloor)) return true;
    log_scale += std::log(s);
    v = vn / s;
    x = std::move(xn);
    check_leakage(model, x, warnings);
    if (!sink(n, x, log_scale, v)) return false;
  }
  return false;
}

}  // namespace detail

/// lambda^q(x, y) = lim (1/(n dt)) log |D_x tau^n (y)|.
template <class S>
ExponentEstimate lyapunov_q(const DynamicalModel<S>& model, const S& x, const S& y, int steps,
                            const EstimatorOptions& opts = {}) {
  if (steps < 1) throw Error(ErrorKind::InvalidParam, "steps must be >= 1");
  ExponentEstimate est;
  est.dt = model.dt;
  const S x0 = model.prepared(x, est.diagnostics);
  if (!all_finite(y)) throw Error(ErrorKind::InvalidOperator, "direction has non-finite entries");
  const double ny = norm_of(y);
  if (ny == 0.0) {
    mark_neg_inf(est);
    return est;
  }
  const bool collapsed = detail::propagate(model, x0, S(y / ny), std::log(ny), steps, opts, est.diagnostics,
                                           [&](int n, const S&, double ls, const S&) {
                                             est.sequence.push_back({n, ls, ls / (n * est.dt)});
                                             return true;
                                           });
  if (collapsed) {
    mark_neg_inf(est);
    return est;
  }
  summarize(est, opts);
  return est;
}

/// Weak exponent along a state mu: log |Tr(mu D_x tau^n (y))|.
inline ExponentEstimate lyapunov_q_state(const DynamicalModel<Operator>& model, const Operator& x, const Operator& y,
                                         const Operator& mu, int steps, const EstimatorOptions& opts = {}) {
  if (steps < 1) throw Error(ErrorKind::InvalidParam, "steps must be >= 1");
  std::vector<Warning> ignored;
  const Operator mu_state = project_density_matrix(mu, ignored);
  ExponentEstimate est;
  est.dt = model.dt;
  const Operator x0 = model.prepared(x, est.diagnostics);
  const double ny = norm_of(y);
  if (ny == 0.0) {
    mark_neg_inf(est);
    return est;
  }
  if (mu_state.rows() != y.rows()) throw Error(ErrorKind::InvalidState, "state functional has wrong dimension");
  const bool collapsed =
      detail::propagate(model, x0, Operator(y / ny), std::log(ny), steps, opts, est.diagnostics,
                        [&](int n, const Operator&, double ls, const Operator& vhat) {
                          const double val = std::abs((mu_state * vhat).trace());
                          if (val > kNormFloor) {
                            const double ln = ls + std::log(val);
                            est.sequence.push_back({n, ln, ln / (n * est.dt)});
                          }
                          return true;
                        });
  if (collapsed) {
    mark_neg_inf(est);
    return est;
  }
  summarize(est, opts);
  return est;
}

/// Exponent through the inner derivation delta(A) = i[k, A]: log |i[k, tau^n(x)]|.
inline ExponentEstimate lyapunov_q_derivation(const DynamicalModel<Operator>& model, const Operator& x,
                                              const Operator& k, int steps, const EstimatorOptions& opts = {}) {
  if (steps < 1) throw Error(ErrorKind::InvalidParam, "steps must be >= 1");
  if (!is_hermitian(k)) throw Error(ErrorKind::NotHermitian, "derivation generator must be Hermitian");
  ExponentEstimate est;
  est.dt = model.dt;
  Operator xn = model.prepared(x, est.diagnostics);
  if (k.rows() != xn.rows()) throw Error(ErrorKind::InvalidState, "generator has wrong dimension");
  const cplx i(0.0, 1.0);
  for (int n = 1; n <= steps; ++n) {
    xn = model.step(xn);
    if (!all_finite(xn)) {
      add_warning(est.diagnostics, Warning::NumericalOverflow);
      break;
    }
    detail::check_leakage(model, xn, est.diagnostics);
    const double c = spectral_norm(Operator(i * commutator(k, xn)));
    if (c > kNormFloor) {
      const double ln = std::log(c);
      est.sequence.push_back({n, ln, ln / (n * est.dt)});
    }
  }
  if (est.sequence.empty()) {
    add_warning(est.diagnostics, Warning::ZeroDerivation);
    mark_neg_inf(est);
    return est;
  }
  summarize(est, opts);
  return est;
}

// ---------------------------------------------------------------------------
// Parameter mode

/// (1/(n dt)) log | d/d eps R(tau^n(x(eps)), eps) | at eps0.
///
/// The eps-derivative of the orbit is carried by the chain rule from
/// dx/d eps; the explicit eps-dependence of the readout is added on top.
template <class S>
ExponentEstimate lyapunov_param(const DynamicalModel<S>& model, double eps0, int steps, const EstimatorOptions& opts = {}) {
  if (steps < 1) throw Error(ErrorKind::InvalidParam, "steps must be >= 1");
  if (!model.family || !model.readout)
    throw Error(ErrorKind::InvalidParam, "model '" + model.name + "' has no parameter family");
  ExponentEstimate est;
  est.dt = model.dt;
  S x = model.prepared(model.family(eps0), est.diagnostics);
  S dx;
  if (model.family_derivative) {
    dx = model.family_derivative(eps0);
  } else {
    const double h = opts.fd_step * std::max(1.0, std::abs(eps0));
    double dis = 0.0;
    dx = richardson_derivative([&](double e) { return model.family(e); }, eps0, 1.0, h, &dis);
    if (dis > opts.fd_disagreement) add_warning(est.diagnostics, Warning::SlowConvergence);
  }
  auto explicit_part = [&](const S& state) -> Operator {
    if (model.readout_derivative) return model.readout_derivative(state, eps0);
    const double h = opts.fd_step * std::max(1.0, std::abs(eps0));
    return richardson_derivative([&](double e) { return model.readout(state, e); }, eps0, 1.0, h);
  };
  auto record = [&](int n, const S& state, double log_scale, const S* vhat) {
    const Operator ex = explicit_part(state);
    Operator total;
    double shift = 0.0;
    if (vhat) {
      shift = std::max(log_scale, 0.0);
      total = std::exp(-shift) * ex + std::exp(log_scale - shift) * model.readout(*vhat, eps0);
    } else {
      total = ex;
    }
    const double nrm = spectral_norm(total);
    if (nrm > kNormFloor) {
      const double ln = shift + std::log(nrm);
      est.sequence.push_back({n, ln, ln / (n * est.dt)});
    }
  };

  const double ndx = norm_of(dx);
  if (ndx == 0.0) {
    // Only the readout depends on eps; no tangent to carry.
    for (int n = 1; n <= steps; ++n) {
      S xn = model.step(x);
      if (!all_finite(xn)) {
        add_warning(est.diagnostics, Warning::NumericalOverflow);
        break;
      }
      x = std::move(xn);
      detail::check_leakage(model, x, est.diagnostics);
      record(n, x, 0.0, nullptr);
    }
  } else {
    const bool collapsed = detail::propagate(model, x, S(dx / ndx), std::log(ndx), steps, opts, est.diagnostics,
                                             [&](int n, const S& xn, double ls, const S& vhat) {
                                               record(n, xn, ls, &vhat);
                                               return true;
                                             });
    if (collapsed && est.sequence.empty()) {
      mark_neg_inf(est);
      return est;
    }
  }
  summarize(est, opts);
  return est;
}

// ---------------------------------------------------------------------------
// Growth-condition report

struct AssumptionReport {
  int horizon = 0;
  /// max_{l <= N} |tau^l(0)|; empty when 0 is outside the model domain.
  std::optional<double> c1_bound;
  double c2 = 0.0;
  bool theta_membership = false;
  double fitted_c = 0.0;
  bool variability_holds = false;
  double min_growth = 1.0;
  std::vector<Warning> warnings;
};

/// Observed (finite-horizon) growth constants: never a proof of the asymptotic conditions.
template <class S>
AssumptionReport check_assumptions(const DynamicalModel<S>& model, const S& x, const S& y, int steps,
                                   double min_growth = 1.0, const EstimatorOptions& opts = {}) {
  if (steps < 1) throw Error(ErrorKind::InvalidParam, "steps must be >= 1");
  AssumptionReport rep;
  rep.min_growth = min_growth;
  const S x0 = model.prepared(x, rep.warnings);
  const double nx = norm_of(x0);
  if (nx == 0.0) throw Error(ErrorKind::InvalidState, "the growth bound needs x != 0");

  std::vector<double> zero_norms(steps, 0.0);
  if (model.zero_state_in_domain) {
    S z = zero_like(x0);
    double c1 = 0.0;
    for (int l = 1; l <= steps; ++l) {
      z = model.step(z);
      if (!all_finite(z)) {
        add_warning(rep.warnings, Warning::NumericalOverflow);
        c1 = std::numeric_limits<double>::infinity();
        break;
      }
      zero_norms[l - 1] = norm_of(z);
      c1 = std::max(c1, zero_norms[l - 1]);
    }
    rep.c1_bound = c1;
  }

  int horizon = steps;
  double c2 = 0.0;
  S xl = x0;
  for (int l = 1; l <= steps; ++l) {
    xl = model.step(xl);
    if (!all_finite(xl)) {
      add_warning(rep.warnings, Warning::NumericalOverflow);
      horizon = l - 1;
      break;
    }
    c2 = std::max(c2, (norm_of(xl) - zero_norms[l - 1]) / nx);
  }
  rep.c2 = c2;
  rep.theta_membership = std::isfinite(c2) && horizon > 0;

  std::vector<double> ks, logs;
  const double ny = norm_of(y);
  bool collapsed = ny == 0.0;
  if (!collapsed) {
    collapsed = detail::propagate(model, x0, S(y / ny), std::log(ny), horizon, opts, rep.warnings,
                                  [&](int n, const S&, double ls, const S&) {
                                    ks.push_back(n);
                                    logs.push_back(ls);
                                    return true;
                                  });
  }
  rep.horizon = static_cast<int>(ks.size());
  if (collapsed || ks.size() < 2) {
    rep.fitted_c = 0.0;
  } else {
    rep.fitted_c = std::exp(detail::fit_slope(ks, logs, false).slope);
  }
  rep.variability_holds = rep.fitted_c > min_growth;
  return rep;
}

// ---------------------------------------------------------------------------
// Classical baselines

/// Largest classical exponent by renormalized tangent propagation.
inline ExponentEstimate classical_lyapunov(const DynamicalModel<ClassicalVector>& model, const ClassicalVector& x0,
                                           const ClassicalVector& v0, int steps, const EstimatorOptions& opts = {}) {
  if (model.in_domain && !model.in_domain(x0)) throw Error(ErrorKind::DomainEscape, "initial point outside the domain");
  if (norm_of(v0) == 0.0) throw Error(ErrorKind::InvalidParam, "initial tangent must be nonzero");
  return lyapunov_q(model, x0, v0, steps, opts);
}

/// Sum of the nonnegative exponents.
inline double ks_entropy_sum(std::span<const double> exponents) {
  double s = 0.0;
  for (double l : exponents) {
    if (!std::isfinite(l) && !(l > 0.0)) continue;
    if (l >= 0.0) s += l;
  }
  return s;
}

}  // namespace qlyap

#endif  // QLYAP_EXPONENT_HPP
