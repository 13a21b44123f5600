#ifndef QLYAP_CP_STRUCTURE_HPP
#define QLYAP_CP_STRUCTURE_HPP

// Choi-matrix positivity for linear maps and (m, n)-homogeneous decomposition
// of polynomial operator maps a -> Phi(a).

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "qlyap/operator_core.hpp"

namespace qlyap {
namespace cp {

using LinearMap = std::function<Operator(const Operator&)>;

inline constexpr double kLinearityTolerance = 1e-10;
inline constexpr double kPsdTolerance = 1e-10;
inline constexpr double kFitTolerance = 1e-6;

/// Seeded random complex matrix with entries uniform in the unit square.
inline Operator random_operator(Eigen::Index dim, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  Operator m(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i)
    for (Eigen::Index j = 0; j < dim; ++j) m(i, j) = cplx(uni(rng), uni(rng));
  return m;
}

/// Block (i, j) of the result is map(E_ij).
inline Operator choi_of(const LinearMap& map, Eigen::Index dim, std::uint64_t seed = 11) {
  if (dim < 1) throw Error(ErrorKind::InvalidParam, "dim must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (int trial = 0; trial < 3; ++trial) {
    const Operator a = random_operator(dim, rng);
    const Operator b = random_operator(dim, rng);
    const cplx alpha(uni(rng), uni(rng));
    const cplx beta(uni(rng), uni(rng));
    const Operator lhs = map(alpha * a + beta * b);
    const Operator rhs = alpha * map(a) + beta * map(b);
    if (lhs.rows() != dim || lhs.cols() != dim) throw Error(ErrorKind::InvalidOperator, "map changes the dimension");
    const double scale = std::max({1.0, lhs.norm(), rhs.norm()});
    if ((lhs - rhs).norm() > kLinearityTolerance * scale) throw Error(ErrorKind::NotLinear, "map is not linear");
  }
  Operator c = Operator::Zero(dim * dim, dim * dim);
  for (Eigen::Index i = 0; i < dim; ++i)
    for (Eigen::Index j = 0; j < dim; ++j) c.block(i * dim, j * dim, dim, dim) = map(matrix_unit(dim, i, j));
  return c;
}

inline Eigen::VectorXd choi_eigenvalues(const Operator& choi) {
  Eigen::SelfAdjointEigenSolver<Operator> es(0.5 * (choi + choi.adjoint()), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

/// Choi matrix Hermitian and positive semidefinite within -1e-10.
inline bool is_completely_positive(const LinearMap& map, Eigen::Index dim) {
  const Operator c = choi_of(map, dim);
  if (!is_hermitian(c, 1e-10)) return false;
  return choi_eigenvalues(c).minCoeff() >= -kPsdTolerance;
}

/// A -> sum_k V_k A V_k*.
inline LinearMap kraus_map(std::vector<Operator> kraus) {
  return [ks = std::move(kraus)](const Operator& a) -> Operator {
    Operator out = Operator::Zero(a.rows(), a.cols());
    for (const auto& v : ks) out += v * a * v.adjoint();
    return out;
  };
}

inline LinearMap transpose_map() {
  return [](const Operator& a) -> Operator { return a.transpose(); };
}

// ---------------------------------------------------------------------------
// Polynomial operator maps

/// coeff * x_1 x_2 ... x_k with each x either a or a*.
struct Monomial {
  cplx coeff = 1.0;
  std::vector<bool> starred;

  int m() const {
    int c = 0;
    for (bool s : starred) c += s ? 0 : 1;
    return c;
  }
  int n() const { return static_cast<int>(starred.size()) - m(); }

  Operator evaluate(const Operator& a) const {
    Operator out = identity(a.rows());
    const Operator ad = a.adjoint();
    for (bool s : starred) out = out * (s ? ad : a);
    return coeff * out;
  }

  /// Words are space-separated tokens `a` and `a*`; the empty word is the identity.
  static Monomial parse(const std::string& word, cplx coeff = 1.0) {
    Monomial mono;
    mono.coeff = coeff;
    std::size_t i = 0;
    while (i < word.size()) {
      if (word[i] == ' ') {
        ++i;
        continue;
      }
      if (word[i] != 'a') throw Error(ErrorKind::InvalidParam, "bad monomial word '" + word + "'");
      ++i;
      const bool star = i < word.size() && word[i] == '*';
      if (star) ++i;
      mono.starred.push_back(star);
    }
    return mono;
  }

  std::string word() const {
    std::string w;
    for (bool s : starred) {
      if (!w.empty()) w += ' ';
      w += s ? "a*" : "a";
    }
    return w;
  }
};

class PolyOperatorMap {
 public:
  PolyOperatorMap(std::vector<Monomial> terms, Eigen::Index dim, std::uint64_t seed = 5)
      : terms_(std::move(terms)), dim_(dim) {
    if (dim < 1) throw Error(ErrorKind::InvalidParam, "dim must be >= 1");
    verify_homogeneity(seed);
  }

  Operator operator()(const Operator& a) const {
    if (a.rows() != dim_ || a.cols() != dim_) throw Error(ErrorKind::InvalidOperator, "argument has wrong dimension");
    Operator out = Operator::Zero(dim_, dim_);
    for (const auto& t : terms_) out += t.evaluate(a);
    return out;
  }

  Eigen::Index dim() const noexcept { return dim_; }
  const std::vector<Monomial>& terms() const noexcept { return terms_; }

  int total_degree() const {
    int d = 0;
    for (const auto& t : terms_) d = std::max(d, static_cast<int>(t.starred.size()));
    return d;
  }

  /// Sum of the terms of bidegree (m, n) evaluated at a.
  Operator component(int m, int n, const Operator& a) const {
    Operator out = Operator::Zero(dim_, dim_);
    for (const auto& t : terms_)
      if (t.m() == m && t.n() == n) out += t.evaluate(a);
    return out;
  }

  std::vector<std::pair<int, int>> bidegrees() const {
    std::vector<std::pair<int, int>> out;
    for (const auto& t : terms_) {
      std::pair<int, int> key{t.m(), t.n()};
      if (std::find(out.begin(), out.end(), key) == out.end()) out.push_back(key);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  void verify_homogeneity(std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (int trial = 0; trial < 5; ++trial) {
      const Operator a = random_operator(dim_, rng);
      const cplx z(uni(rng), uni(rng));
      for (const auto& t : terms_) {
        const Operator lhs = t.evaluate(z * a);
        const Operator rhs = std::pow(z, t.m()) * std::pow(std::conj(z), t.n()) * t.evaluate(a);
        if ((lhs - rhs).norm() > 1e-10 * std::max(1.0, rhs.norm()))
          throw Error(ErrorKind::InvalidParam, "term '" + t.word() + "' is not homogeneous");
      }
    }
  }

  std::vector<Monomial> terms_;
  Eigen::Index dim_;
};

// ---------------------------------------------------------------------------
// Homogeneous decomposition of a black-box map

struct HomogeneousComponent {
  int m = 0;
  int n = 0;
  /// Phi_{m,n}(probe) for every probe.
  std::vector<Operator> values;
};

struct ComponentTable {
  std::vector<Operator> probes;
  std::vector<HomogeneousComponent> components;
  /// Largest relative residual of the sampled fit over all probes.
  double residual = 0.0;

  Operator reconstruct(std::size_t probe) const {
    Operator out = Operator::Zero(probes.at(probe).rows(), probes.at(probe).cols());
    for (const auto& c : components) out += c.values.at(probe);
    return out;
  }

  const HomogeneousComponent* find(int m, int n) const {
    for (const auto& c : components)
      if (c.m == m && c.n == n) return &c;
    return nullptr;
  }
};

inline const std::vector<double>& component_radii() {
  static const std::vector<double> radii{0.5, 0.75, 1.0, 1.25, 1.5};
  return radii;
}

/// Samples map(r e^{i theta} a) on the radius grid and K = 2M+3 phases, takes the
/// DFT in theta and fits powers of r per frequency:
///   Phi(r e^{i theta} a) = sum r^{m+n} e^{i(m-n) theta} Phi_{m,n}(a).
inline ComponentTable homogeneous_components(const LinearMap& map, const std::vector<Operator>& probes, int max_degree) {
  if (max_degree < 0) throw Error(ErrorKind::InvalidParam, "max degree must be >= 0");
  if (probes.empty()) throw Error(ErrorKind::InvalidParam, "no probe operators");
  const int big_m = max_degree;
  const int k_phases = 2 * big_m + 3;
  const auto& radii = component_radii();
  const std::size_t nr = radii.size();
  if (static_cast<std::size_t>(big_m / 2 + 1) > nr)
    throw Error(ErrorKind::InvalidParam, "max degree too large for the radius grid");

  ComponentTable table;
  table.probes = probes;
  std::map<std::pair<int, int>, std::vector<Operator>> found;
  std::vector<double> scales(probes.size(), 0.0);

  for (std::size_t p = 0; p < probes.size(); ++p) {
    const Operator& a = probes[p];
    const Eigen::Index rows = a.rows();
    const Eigen::Index cols = a.cols();
    // samples[j][k]
    std::vector<std::vector<Operator>> samples(nr, std::vector<Operator>(k_phases));
    double scale = 0.0;
    for (std::size_t j = 0; j < nr; ++j) {
      for (int k = 0; k < k_phases; ++k) {
        const double theta = 2.0 * std::numbers::pi * k / k_phases;
        samples[j][k] = map(std::polar(radii[j], theta) * a);
        require_finite(samples[j][k], "map value");
        scale = std::max(scale, spectral_norm(samples[j][k]));
      }
    }
    if (scale == 0.0) scale = 1.0;
    scales[p] = scale;

    std::vector<std::vector<Operator>> recon(nr, std::vector<Operator>(k_phases, Operator::Zero(rows, cols)));
    for (int d = -big_m; d <= big_m; ++d) {
      // Fourier coefficient of frequency d at every radius.
      std::vector<Operator> g(nr, Operator::Zero(rows, cols));
      for (std::size_t j = 0; j < nr; ++j) {
        for (int k = 0; k < k_phases; ++k) {
          const double theta = 2.0 * std::numbers::pi * k / k_phases;
          g[j] += std::polar(1.0, -d * theta) * samples[j][k];
        }
        g[j] /= static_cast<double>(k_phases);
      }
      std::vector<int> powers;
      for (int s = std::abs(d); s <= big_m; s += 2) powers.push_back(s);
      if (powers.empty()) continue;
      Eigen::MatrixXd vand(nr, powers.size());
      for (std::size_t j = 0; j < nr; ++j)
        for (std::size_t q = 0; q < powers.size(); ++q) vand(j, q) = std::pow(radii[j], powers[q]);
      const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(vand);
      // Solve entrywise: stack each matrix entry as a right-hand side column.
      Eigen::MatrixXcd rhs(nr, rows * cols);
      for (std::size_t j = 0; j < nr; ++j) rhs.row(j) = Eigen::Map<const Eigen::RowVectorXcd>(g[j].data(), rows * cols);
      Eigen::MatrixXcd coef(powers.size(), rows * cols);
      for (Eigen::Index c = 0; c < rhs.cols(); ++c) {
        const Eigen::VectorXd re = qr.solve(Eigen::VectorXd(rhs.col(c).real()));
        const Eigen::VectorXd im = qr.solve(Eigen::VectorXd(rhs.col(c).imag()));
        for (std::size_t q = 0; q < powers.size(); ++q) coef(q, c) = cplx(re(q), im(q));
      }
      for (std::size_t q = 0; q < powers.size(); ++q) {
        const int s = powers[q];
        const int m = (s + d) / 2;
        const int n = (s - d) / 2;
        Operator value = Eigen::Map<const Operator>(coef.row(q).transpose().eval().data(), rows, cols);
        for (std::size_t j = 0; j < nr; ++j)
          for (int k = 0; k < k_phases; ++k) {
            const double theta = 2.0 * std::numbers::pi * k / k_phases;
            recon[j][k] += std::pow(radii[j], s) * std::polar(1.0, d * theta) * value;
          }
        auto& slot = found[{m, n}];
        slot.resize(probes.size(), Operator::Zero(rows, cols));
        slot[p] = std::move(value);
      }
    }
    for (std::size_t j = 0; j < nr; ++j)
      for (int k = 0; k < k_phases; ++k)
        table.residual = std::max(table.residual, spectral_norm(Operator(samples[j][k] - recon[j][k])) / scale);
  }

  if (table.residual > kFitTolerance)
    throw Error(ErrorKind::DegreeExceeded,
                "homogeneous fit residual " + std::to_string(table.residual) + " exceeds tolerance; degree above " +
                    std::to_string(max_degree));

  for (auto& [key, values] : found) {
    bool significant = false;
    for (std::size_t p = 0; p < values.size(); ++p)
      significant = significant || spectral_norm(values[p]) > 1e-9 * scales[p];
    if (significant) table.components.push_back({key.first, key.second, std::move(values)});
  }
  return table;
}

struct HomogeneityCheck {
  int m = 0;
  int n = 0;
  double relative_error = 0.0;
};

/// Extracts components at a and z a and compares Phi_{m,n}(z a) with z^m conj(z)^n Phi_{m,n}(a).
inline std::vector<HomogeneityCheck> check_homogeneity(const LinearMap& map, const Operator& a, cplx z, int max_degree) {
  const ComponentTable t = homogeneous_components(map, {a, z * a}, max_degree);
  std::vector<HomogeneityCheck> out;
  for (const auto& c : t.components) {
    const Operator expected = std::pow(z, c.m) * std::pow(std::conj(z), c.n) * c.values[0];
    const double denom = std::max(spectral_norm(expected), spectral_norm(c.values[1]));
    const double err = denom > 0.0 ? spectral_norm(Operator(c.values[1] - expected)) / denom : 0.0;
    out.push_back({c.m, c.n, err});
  }
  return out;
}

}  // namespace cp
}  // namespace qlyap

#endif  // QLYAP_CP_STRUCTURE_HPP
