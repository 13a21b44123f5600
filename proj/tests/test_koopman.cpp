#include <catch2/catch.hpp>

#include <random>

#include "qlyap/koopman.hpp"

using namespace qlyap;
using namespace qlyap::koopman;

namespace {

AlgebraElement random_element(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(-2.0, 2.0);
  std::vector<cplx> v(n);
  for (auto& x : v) x = cplx(uni(rng), uni(rng));
  return AlgebraElement(std::move(v));
}

}  // namespace

TEST_CASE("point set validation", "[koopman]") {
  CHECK_THROWS_AS(PointSet::from_scalars({}), Error);
  CHECK_THROWS_AS(PointSet::from_scalars({0.1, 0.2, 0.1}), Error);
  const auto omega = PointSet::uniform(5);
  CHECK(omega.size() == 5);
  CHECK(omega[4](0) == 1.0);
  CHECK_THROWS_AS(AlgebraElement::coordinate(omega) * AlgebraElement::constant(PointSet::uniform(3), 1.0), Error);
}

TEST_CASE("gelfand transform examples", "[koopman]") {
  const auto omega = PointSet::from_scalars({0.2, 0.7});
  const auto one = AlgebraElement::constant(omega, 1.0);
  CHECK(gelfand(one, 0) == cplx(1.0));
  CHECK(gelfand(one, 1) == cplx(1.0));
  CHECK(gelfand(AlgebraElement::coordinate(omega), 1) == cplx(0.7));
  try {
    gelfand(one, 2);
    FAIL("expected InvalidCharacter");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidCharacter);
  }
}

TEST_CASE("characters are bounded by the max norm", "[koopman]") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + trial % 7;
    const auto a = random_element(n, rng);
    for (std::size_t phi = 0; phi < n; ++phi) CHECK(std::abs(gelfand(a, phi)) <= a.max_norm());
  }
}

TEST_CASE("characters are multiplicative", "[koopman]") {
  std::mt19937_64 rng(2);
  for (std::size_t n = 1; n <= 64; n *= 2) {
    const auto a = random_element(n, rng);
    const auto b = random_element(n, rng);
    for (std::size_t phi = 0; phi < n; ++phi) CHECK(gelfand(a * b, phi) == gelfand(a, phi) * gelfand(b, phi));
  }
}

TEST_CASE("tilde extension", "[koopman]") {
  const auto omega = PointSet::from_scalars({0.3});
  const auto a = AlgebraElement::coordinate(omega);
  PolynomialN sq(1);
  sq.add({2}, 1.0);
  CHECK(tilde_extend(a, CharacterExpr(sq, {0})) == gelfand(a * a, 0));
  CHECK(std::abs(tilde_extend(a, CharacterExpr(sq, {0})) - 0.09) <= 1e-17);

  PolynomialN c(1);
  c.add({0}, cplx(2.5, -1.0));
  std::mt19937_64 rng(3);
  CHECK(tilde_extend(random_element(1, rng), CharacterExpr(c, {0})) == cplx(2.5, -1.0));

  // W(s, t) = s t with both slots on the same character.
  const auto big = PointSet::uniform(9);
  const auto e = random_element(9, rng);
  PolynomialN st(2);
  st.add({1, 1}, 1.0);
  for (std::size_t phi = 0; phi < 9; ++phi) {
    const cplx v = tilde_extend(e, CharacterExpr(st, {phi, phi}));
    CHECK(std::abs(v - gelfand(e * e, phi)) <= 1e-15 * std::max(1.0, std::abs(v)));
  }
  (void)big;
  CHECK_THROWS_AS(CharacterExpr(st, {0}), Error);
}

TEST_CASE("tilde extension agrees with polynomial application", "[koopman]") {
  std::mt19937_64 rng(4);
  const Polynomial1 w({cplx(0.5, 0.1), -1.0, 0.0, cplx(2.0, -0.3)});
  PolynomialN wn(1);
  const auto& c = w.coefficients();
  for (std::size_t d = 0; d < c.size(); ++d) wn.add({static_cast<int>(d)}, c[d]);
  for (std::size_t n = 1; n <= 64; n *= 4) {
    const auto a = random_element(n, rng);
    const auto wa = apply(w, a);
    for (std::size_t phi = 0; phi < n; ++phi) {
      const cplx lhs = tilde_extend(a, CharacterExpr(wn, {phi}));
      CHECK(std::abs(lhs - gelfand(wa, phi)) <= 1e-12 * std::max(1.0, std::abs(lhs)));
    }
  }
}

TEST_CASE("multivariate Horner matches direct expansion", "[koopman]") {
  PolynomialN p(3);
  p.add({1, 0, 2}, 2.0).add({0, 3, 0}, cplx(0.0, 1.0)).add({2, 1, 1}, -0.5).add({0, 0, 0}, 4.0);
  const std::vector<cplx> t{cplx(0.3, 0.1), -1.2, cplx(0.0, 0.7)};
  cplx direct = 0.0;
  for (const auto& [deg, coeff] : p.terms())
    direct += coeff * std::pow(t[0], deg[0]) * std::pow(t[1], deg[1]) * std::pow(t[2], deg[2]);
  CHECK(std::abs(p(t) - direct) <= 1e-14);
}

TEST_CASE("lift examples", "[koopman]") {
  const auto omega = PointSet::from_scalars({0.2, 0.5});
  const auto x = AlgebraElement::coordinate(omega);
  CHECK(lift(LiftSpec::identity(2), x) == x);
  const auto sq = lift(LiftSpec({0, 1}, Polynomial1({0.0, 0.0, 1.0})), x);
  CHECK(std::abs(sq[0] - 0.04) <= 1e-17);
  CHECK(std::abs(sq[1] - 0.25) <= 1e-17);

  std::mt19937_64 rng(5);
  const auto a = random_element(3, rng);
  const LiftSpec cycle({1, 2, 0}, Polynomial1({0.0, 1.0}));
  const auto once = lift(cycle, a);
  CHECK(once != a);
  CHECK(lift(cycle, lift(cycle, once)) == a);

  CHECK_THROWS_AS(LiftSpec({0, 3, 1}, Polynomial1({0.0, 1.0})), Error);
  CHECK_THROWS_AS(LiftSpec({0}, Polynomial1({0.0})), Error);
}

TEST_CASE("linear Koopman lift is a homomorphism", "[koopman]") {
  std::mt19937_64 rng(6);
  for (std::size_t n = 1; n <= 6; ++n) {
    std::vector<std::size_t> tau(n);
    for (auto& t : tau) t = rng() % n;
    const LiftSpec spec(tau, Polynomial1({0.0, 1.0}));
    const auto f = random_element(n, rng);
    const auto g = random_element(n, rng);
    CHECK(lift(spec, f * g) == lift(spec, f) * lift(spec, g));
  }
}

TEST_CASE("logistic duality", "[koopman]") {
  const auto omega = PointSet::from_scalars({0.3});
  const auto d = logistic_dual_check(4.0, AlgebraElement::coordinate(omega), 0);
  CHECK(std::abs(d.lhs - 0.84) <= 1e-15);
  CHECK(std::abs(d.rhs - 0.84) <= 1e-15);

  const auto zero = logistic_dual_check(2.7, AlgebraElement::constant(omega, 0.0), 0);
  CHECK(zero.lhs == cplx(0.0));
  CHECK(zero.rhs == cplx(0.0));

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ur(0.0, 4.0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + trial % 64;
    const auto a = random_element(n, rng);
    const auto pair = logistic_dual_check(ur(rng), a, rng() % n);
    CHECK(std::abs(pair.lhs - pair.rhs) <= 1e-12 * std::max(1.0, std::abs(pair.lhs)));
  }
}

TEST_CASE("finite-scale lift uniqueness", "[koopman]") {
  const auto collision = find_lift_collision(6);
  CHECK_FALSE(collision.has_value());
}

TEST_CASE("uniqueness search detects planted collisions", "[koopman]") {
  // T(t) = t and T(t) = t^3 agree on any element with values in {-1, 0, 1}:
  // without the random probes the search must report them.
  const std::vector<Polynomial1> polys{Polynomial1({0.0, 1.0}), Polynomial1({0.0, 0.0, 0.0, 1.0})};
  const auto found = find_lift_collision(3, polys, 0);
  REQUIRE(found.has_value());
  CHECK(found->points == 1);
}
