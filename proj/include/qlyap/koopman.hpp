#ifndef QLYAP_KOOPMAN_HPP
#define QLYAP_KOOPMAN_HPP

// Characters and nonlinear lifts over a finite point set Omega.
//
// On C(Omega) with finite Omega every character is evaluation at a point, so
// the Gelfand transform of a is a itself read as a function on point indices.

#include <algorithm>
#include <complex>
#include <cstdint>
#include <cstring>
#include <map>
#include <optional>
#include <random>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qlyap/error.hpp"

namespace qlyap {
namespace koopman {

using cplx = std::complex<double>;
using Point = Eigen::VectorXd;

class PointSet {
 public:
  explicit PointSet(std::vector<Point> points) : points_(std::move(points)) {
    if (points_.empty()) throw Error(ErrorKind::InvalidParam, "point set is empty");
    const auto dim = points_.front().size();
    for (std::size_t i = 0; i < points_.size(); ++i) {
      if (points_[i].size() != dim) throw Error(ErrorKind::InvalidParam, "points have mixed dimensions");
      if (!points_[i].allFinite()) throw Error(ErrorKind::InvalidParam, "point has non-finite coordinates");
      for (std::size_t j = 0; j < i; ++j)
        if (points_[i] == points_[j]) throw Error(ErrorKind::InvalidParam, "points must be distinct");
    }
  }

  /// Scalar points on the line.
  static PointSet from_scalars(const std::vector<double>& xs) {
    std::vector<Point> pts;
    pts.reserve(xs.size());
    for (double x : xs) {
      Point p(1);
      p(0) = x;
      pts.push_back(p);
    }
    return PointSet(std::move(pts));
  }

  /// n points spread uniformly over [0, 1] (both ends included when n > 1).
  static PointSet uniform(std::size_t n) {
    if (n == 0) throw Error(ErrorKind::InvalidParam, "point set is empty");
    std::vector<double> xs(n);
    for (std::size_t i = 0; i < n; ++i) xs[i] = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
    return from_scalars(xs);
  }

  std::size_t size() const noexcept { return points_.size(); }
  const Point& operator[](std::size_t i) const { return points_.at(i); }
  const std::vector<Point>& points() const noexcept { return points_; }

 private:
  std::vector<Point> points_;
};

/// A function on the point set, one value per point.
class AlgebraElement {
 public:
  explicit AlgebraElement(std::vector<cplx> values) : values_(std::move(values)) {
    if (values_.empty()) throw Error(ErrorKind::InvalidParam, "algebra element has no values");
  }

  template <class F>
  static AlgebraElement from_function(const PointSet& omega, F&& f) {
    std::vector<cplx> v;
    v.reserve(omega.size());
    for (const auto& p : omega.points()) v.push_back(cplx(f(p)));
    return AlgebraElement(std::move(v));
  }

  static AlgebraElement constant(const PointSet& omega, cplx c) {
    return AlgebraElement(std::vector<cplx>(omega.size(), c));
  }

  /// The coordinate function p -> p(k).
  static AlgebraElement coordinate(const PointSet& omega, Eigen::Index k = 0) {
    return from_function(omega, [k](const Point& p) { return p(k); });
  }

  std::size_t size() const noexcept { return values_.size(); }
  cplx operator[](std::size_t i) const { return values_.at(i); }
  const std::vector<cplx>& values() const noexcept { return values_; }

  friend AlgebraElement operator*(const AlgebraElement& a, const AlgebraElement& b) {
    check_same(a, b);
    std::vector<cplx> v(a.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.values_[i] * b.values_[i];
    return AlgebraElement(std::move(v));
  }

  friend AlgebraElement operator+(const AlgebraElement& a, const AlgebraElement& b) {
    check_same(a, b);
    std::vector<cplx> v(a.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.values_[i] + b.values_[i];
    return AlgebraElement(std::move(v));
  }

  friend AlgebraElement operator*(cplx s, const AlgebraElement& a) {
    std::vector<cplx> v(a.values_);
    for (auto& x : v) x *= s;
    return AlgebraElement(std::move(v));
  }

  friend bool operator==(const AlgebraElement&, const AlgebraElement&) = default;

  double max_norm() const {
    double m = 0.0;
    for (cplx x : values_) m = std::max(m, std::abs(x));
    return m;
  }

 private:
  static void check_same(const AlgebraElement& a, const AlgebraElement& b) {
    if (a.size() != b.size()) throw Error(ErrorKind::InvalidParam, "algebra elements live on different point sets");
  }
  std::vector<cplx> values_;
};

inline void require_matches(const PointSet& omega, const AlgebraElement& a) {
  if (a.size() != omega.size()) throw Error(ErrorKind::InvalidParam, "algebra element does not match the point set");
}

/// phi(a), with phi the character at point index `phi`.
inline cplx gelfand(const AlgebraElement& a, std::size_t phi) {
  if (phi >= a.size()) throw Error(ErrorKind::InvalidCharacter, "character index " + std::to_string(phi) + " out of range");
  return a[phi];
}

/// Single-variable polynomial, ascending coefficients.
class Polynomial1 {
 public:
  Polynomial1() = default;
  explicit Polynomial1(std::vector<cplx> coeffs) : c_(std::move(coeffs)) { trim(); }

  static Polynomial1 monomial(int degree, cplx coeff = 1.0) {
    std::vector<cplx> c(degree + 1, 0.0);
    c[degree] = coeff;
    return Polynomial1(std::move(c));
  }

  cplx operator()(cplx t) const {
    cplx acc = 0.0;
    for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * t + *it;
    return acc;
  }

  int degree() const { return c_.empty() ? -1 : static_cast<int>(c_.size()) - 1; }
  bool is_zero() const { return c_.empty(); }
  bool is_constant() const { return c_.size() <= 1; }
  const std::vector<cplx>& coefficients() const noexcept { return c_; }

  friend bool operator==(const Polynomial1&, const Polynomial1&) = default;

 private:
  void trim() {
    while (!c_.empty() && c_.back() == cplx(0.0)) c_.pop_back();
  }
  std::vector<cplx> c_;
};

/// W(a) in the algebra, computed pointwise.
inline AlgebraElement apply(const Polynomial1& w, const AlgebraElement& a) {
  std::vector<cplx> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = w(a[i]);
  return AlgebraElement(std::move(v));
}

/// Polynomial in `nvars` commuting variables, coefficients keyed by multi-degree.
class PolynomialN {
 public:
  using Degree = std::vector<int>;

  explicit PolynomialN(std::size_t nvars) : nvars_(nvars) {
    if (nvars == 0) throw Error(ErrorKind::InvalidParam, "polynomial needs at least one variable");
  }

  PolynomialN& add(Degree deg, cplx coeff) {
    if (deg.size() != nvars_) throw Error(ErrorKind::InvalidParam, "multi-degree has wrong length");
    for (int d : deg)
      if (d < 0) throw Error(ErrorKind::InvalidParam, "negative degree");
    terms_[std::move(deg)] += coeff;
    return *this;
  }

  std::size_t nvars() const noexcept { return nvars_; }
  const std::map<Degree, cplx>& terms() const noexcept { return terms_; }

  /// Horner in the first variable, recursing on the rest.
  cplx operator()(const std::vector<cplx>& t) const {
    if (t.size() != nvars_) throw Error(ErrorKind::InvalidParam, "wrong number of arguments");
    std::vector<std::pair<Degree, cplx>> flat(terms_.begin(), terms_.end());
    return horner(flat, 0, t);
  }

 private:
  static cplx horner(const std::vector<std::pair<Degree, cplx>>& terms, std::size_t var, const std::vector<cplx>& t) {
    if (terms.empty()) return 0.0;
    if (var == t.size()) {
      cplx s = 0.0;
      for (const auto& term : terms) s += term.second;
      return s;
    }
    int top = 0;
    for (const auto& term : terms) top = std::max(top, term.first[var]);
    std::vector<std::vector<std::pair<Degree, cplx>>> by_power(top + 1);
    for (const auto& term : terms) by_power[term.first[var]].push_back(term);
    cplx acc = 0.0;
    for (int d = top; d >= 0; --d) acc = acc * t[var] + horner(by_power[d], var + 1, t);
    return acc;
  }

  std::size_t nvars_;
  std::map<Degree, cplx> terms_;
};

/// theta = W(phi_1, ..., phi_n), an element of the character polynomial algebra.
struct CharacterExpr {
  PolynomialN w;
  std::vector<std::size_t> characters;

  CharacterExpr(PolynomialN poly, std::vector<std::size_t> chars) : w(std::move(poly)), characters(std::move(chars)) {
    if (characters.empty() || characters.size() != w.nvars())
      throw Error(ErrorKind::InvalidParam, "character list must match the polynomial's variables");
  }
};

/// a~(W(phi_1..phi_n)) = W(phi_1(a), ..., phi_n(a)).
inline cplx tilde_extend(const AlgebraElement& a, const CharacterExpr& expr) {
  std::vector<cplx> args;
  args.reserve(expr.characters.size());
  for (std::size_t phi : expr.characters) args.push_back(gelfand(a, phi));
  return expr.w(args);
}

/// theta = T o phi o tau: a self-map tau of the point indices and a polynomial T.
struct LiftSpec {
  std::vector<std::size_t> tau;
  Polynomial1 t;

  LiftSpec(std::vector<std::size_t> tau_map, Polynomial1 poly) : tau(std::move(tau_map)), t(std::move(poly)) {
    if (tau.empty()) throw Error(ErrorKind::InvalidParam, "tau must be defined on a nonempty set");
    for (std::size_t v : tau)
      if (v >= tau.size()) throw Error(ErrorKind::InvalidParam, "tau must map the point set into itself");
    if (t.is_zero()) throw Error(ErrorKind::InvalidParam, "T must be a nonzero polynomial");
  }

  static LiftSpec identity(std::size_t n) {
    std::vector<std::size_t> tau(n);
    for (std::size_t i = 0; i < n; ++i) tau[i] = i;
    return LiftSpec(std::move(tau), Polynomial1({0.0, 1.0}));
  }
};

/// phi -> T(a_hat(tau(phi))).
inline AlgebraElement lift(const LiftSpec& spec, const AlgebraElement& a_hat) {
  if (a_hat.size() != spec.tau.size()) throw Error(ErrorKind::InvalidParam, "lift and element sizes differ");
  std::vector<cplx> v(a_hat.size());
  for (std::size_t phi = 0; phi < v.size(); ++phi) v[phi] = spec.t(a_hat[spec.tau[phi]]);
  return AlgebraElement(std::move(v));
}

struct DualPair {
  cplx lhs;
  cplx rhs;
};

/// lhs = r a^(phi)(1 - a^(phi)),  rhs = r (phi(a) - phi(a^2)).
inline DualPair logistic_dual_check(double r, const AlgebraElement& a, std::size_t phi) {
  const cplx ah = gelfand(a, phi);
  const cplx lhs = r * ah * (1.0 - ah);
  const cplx rhs = r * (gelfand(a, phi) - gelfand(a * a, phi));
  return {lhs, rhs};
}

// ---------------------------------------------------------------------------
// Finite-scale uniqueness of theta given U_theta

struct LiftCollision {
  std::size_t points = 0;
  LiftSpec first;
  LiftSpec second;
};

namespace detail {

/// Specs that act identically on every element: all constant T with the same value.
inline bool lift_equivalent(const LiftSpec& a, const LiftSpec& b) {
  if (a.t.is_constant() && b.t.is_constant()) return a.t == b.t;
  return a.tau == b.tau && a.t == b.t;
}

inline bool same_lifts(const LiftSpec& a, const LiftSpec& b, const std::vector<AlgebraElement>& probes) {
  for (const auto& p : probes)
    if (lift(a, p) != lift(b, p)) return false;
  return true;
}

inline std::uint64_t hash_element(std::uint64_t h, const AlgebraElement& e) {
  for (cplx v : e.values()) {
    for (double part : {v.real(), v.imag()}) {
      std::uint64_t bits;
      std::memcpy(&bits, &part, sizeof bits);
      h ^= bits + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
  }
  return h;
}

}  // namespace detail

/// The polynomials used by the uniqueness search: degrees 0..3.
inline std::vector<Polynomial1> default_search_polynomials() {
  return {
      Polynomial1({0.7}),
      Polynomial1({-1.3}),
      Polynomial1({0.0, 1.0}),
      Polynomial1({0.5, -2.0}),
      Polynomial1({0.0, 0.0, 1.0}),
      Polynomial1({0.0, 1.0, -1.0}),
      Polynomial1({1.0, 0.0, 0.0, 1.0}),
      Polynomial1({0.2, -1.0, 0.5, 2.0}),
  };
}

/// Enumerates every self-map tau of point sets of size 1..max_points and every
/// listed T, and looks for two inequivalent specs whose lifts agree on the
/// coordinate function and on `extra_probes` seeded random elements.
inline std::optional<LiftCollision> find_lift_collision(std::size_t max_points = 6,
                                                        const std::vector<Polynomial1>& polys = default_search_polynomials(),
                                                        std::size_t extra_probes = 2, std::uint64_t seed = 7) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (std::size_t n = 1; n <= max_points; ++n) {
    const PointSet omega = PointSet::uniform(n);
    std::vector<AlgebraElement> probes{AlgebraElement::coordinate(omega)};
    for (std::size_t k = 0; k < extra_probes; ++k) {
      std::vector<cplx> v(n);
      for (auto& x : v) x = cplx(uni(rng), uni(rng));
      probes.emplace_back(std::move(v));
    }
    std::unordered_map<std::uint64_t, std::vector<LiftSpec>> seen;
    std::vector<std::size_t> tau(n, 0);
    while (true) {
      for (const auto& poly : polys) {
        LiftSpec spec(tau, poly);
        std::uint64_t h = 1469598103934665603ULL;
        for (const auto& p : probes) h = detail::hash_element(h, lift(spec, p));
        auto& bucket = seen[h];
        for (const auto& other : bucket) {
          if (!detail::lift_equivalent(spec, other) && detail::same_lifts(spec, other, probes))
            return LiftCollision{n, other, spec};
        }
        bool dup = false;
        for (const auto& other : bucket) dup = dup || detail::lift_equivalent(spec, other);
        if (!dup) bucket.push_back(std::move(spec));
      }
      // next tau in lexicographic order
      std::size_t i = 0;
      while (i < n && ++tau[i] == n) tau[i++] = 0;
      if (i == n) break;
    }
  }
  return std::nullopt;
}

}  // namespace koopman
}  // namespace qlyap

#endif  // QLYAP_KOOPMAN_HPP
