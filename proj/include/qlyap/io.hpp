#ifndef QLYAP_IO_HPP
#define QLYAP_IO_HPP

// Run configuration, model registry, result records and their text formats.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "qlyap/exponent.hpp"
#include "qlyap/models.hpp"

namespace qlyap {

inline constexpr const char* kVersion = "0.1.0";

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Configuration

struct GridAxis {
  std::string name;
  double start = 0.0;
  double stop = 0.0;
  int count = 1;

  double value(int i) const {
    if (count == 1 || i == 0) return start;
    if (i == count - 1) return stop;
    return start + (stop - start) * i / (count - 1);
  }

  /// `name=start:stop:count` or `name=value`.
  static GridAxis parse(const std::string& text) {
    const auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0) throw Error(ErrorKind::InvalidConfig, "grid axis '" + text + "' needs name=start:stop:count");
    GridAxis g;
    g.name = text.substr(0, eq);
    std::vector<std::string> parts;
    std::stringstream ss(text.substr(eq + 1));
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    try {
      if (parts.size() == 1) {
        g.start = g.stop = std::stod(parts[0]);
        g.count = 1;
      } else if (parts.size() == 3) {
        g.start = std::stod(parts[0]);
        g.stop = std::stod(parts[1]);
        g.count = std::stoi(parts[2]);
      } else {
        throw Error(ErrorKind::InvalidConfig, "grid axis '" + text + "' needs name=start:stop:count");
      }
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::InvalidConfig, "grid axis '" + text + "' has a malformed number");
    }
    if (g.count < 1) throw Error(ErrorKind::InvalidConfig, "grid count must be >= 1");
    return g;
  }

  std::string str() const {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%.17g:%.17g:%d", start, stop, count);
    return name + "=" + buf;
  }

  friend bool operator==(const GridAxis&, const GridAxis&) = default;
};

struct RunConfig {
  std::string model = "contraction";
  ModelParams params;
  std::optional<int> cutoff;
  double tail_tolerance = kDefaultTailTolerance;
  std::optional<int> dim;
  int steps = 100;
  std::optional<double> dt;
  std::string state;
  std::string direction;
  std::optional<double> eps;
  std::string estimator;
  std::string mu;
  std::string generator;
  std::string q;
  std::uint64_t seed = 0;
  double tail_fraction = 0.25;
  bool log_corrected = false;
  double min_growth = 1.0;
  std::vector<GridAxis> grid;
  std::string out;
  std::string json_path;
  std::string svg;
  bool require_verdict = false;
  bool timing = false;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

inline json to_json(const RunConfig& c) {
  json j;
  j["model"] = c.model;
  j["params"] = json::object();
  for (const auto& [k, v] : c.params) j["params"][k] = v;
  j["cutoff"] = c.cutoff ? json(*c.cutoff) : json(nullptr);
  j["tail_tolerance"] = c.tail_tolerance;
  j["dim"] = c.dim ? json(*c.dim) : json(nullptr);
  j["steps"] = c.steps;
  j["dt"] = c.dt ? json(*c.dt) : json(nullptr);
  j["state"] = c.state;
  j["direction"] = c.direction;
  j["eps"] = c.eps ? json(*c.eps) : json(nullptr);
  j["estimator"] = c.estimator;
  j["mu"] = c.mu;
  j["generator"] = c.generator;
  j["q"] = c.q;
  j["seed"] = c.seed;
  j["tail_fraction"] = c.tail_fraction;
  j["log_corrected"] = c.log_corrected;
  j["min_growth"] = c.min_growth;
  j["grid"] = json::array();
  for (const auto& g : c.grid) j["grid"].push_back(g.str());
  j["out"] = c.out;
  j["json"] = c.json_path;
  j["svg"] = c.svg;
  j["require_verdict"] = c.require_verdict;
  j["timing"] = c.timing;
  return j;
}

namespace detail {

template <class T>
void read_field(const json& j, const char* key, T& out) {
  if (!j.contains(key) || j[key].is_null()) return;
  try {
    out = j[key].get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, std::string("config field '") + key + "': " + e.what());
  }
}

template <class T>
void read_optional(const json& j, const char* key, std::optional<T>& out) {
  if (!j.contains(key) || j[key].is_null()) return;
  T v{};
  read_field(j, key, v);
  out = v;
}

}  // namespace detail

inline RunConfig config_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorKind::InvalidConfig, "config must be a JSON object");
  static const std::vector<std::string> known{"model", "params", "cutoff", "tail_tolerance", "dim", "steps", "dt", "dz",
                                              "state", "direction", "eps", "estimator", "mu", "generator", "q", "seed",
                                              "tail_fraction", "log_corrected", "min_growth", "grid", "out", "json",
                                              "svg", "require_verdict", "timing"};
  for (const auto& item : j.items()) {
    if (std::find(known.begin(), known.end(), item.key()) == known.end())
      throw Error(ErrorKind::InvalidConfig, "unknown config field '" + item.key() + "'");
  }
  RunConfig c;
  detail::read_field(j, "model", c.model);
  if (j.contains("params") && !j["params"].is_null()) {
    if (!j["params"].is_object()) throw Error(ErrorKind::InvalidConfig, "params must be an object");
    for (const auto& item : j["params"].items()) {
      if (!item.value().is_number()) throw Error(ErrorKind::InvalidConfig, "param '" + item.key() + "' must be a number");
      c.params[item.key()] = item.value().get<double>();
    }
  }
  detail::read_optional(j, "cutoff", c.cutoff);
  detail::read_field(j, "tail_tolerance", c.tail_tolerance);
  detail::read_optional(j, "dim", c.dim);
  detail::read_field(j, "steps", c.steps);
  detail::read_optional(j, "dt", c.dt);
  detail::read_optional(j, "dz", c.dt);
  detail::read_field(j, "state", c.state);
  detail::read_field(j, "direction", c.direction);
  detail::read_optional(j, "eps", c.eps);
  detail::read_field(j, "estimator", c.estimator);
  detail::read_field(j, "mu", c.mu);
  detail::read_field(j, "generator", c.generator);
  detail::read_field(j, "q", c.q);
  detail::read_field(j, "seed", c.seed);
  detail::read_field(j, "tail_fraction", c.tail_fraction);
  detail::read_field(j, "log_corrected", c.log_corrected);
  detail::read_field(j, "min_growth", c.min_growth);
  if (j.contains("grid") && !j["grid"].is_null()) {
    for (const auto& g : j["grid"]) {
      if (!g.is_string()) throw Error(ErrorKind::InvalidConfig, "grid entries must be strings");
      c.grid.push_back(GridAxis::parse(g.get<std::string>()));
    }
  }
  detail::read_field(j, "out", c.out);
  detail::read_field(j, "json", c.json_path);
  detail::read_field(j, "svg", c.svg);
  detail::read_field(j, "require_verdict", c.require_verdict);
  detail::read_field(j, "timing", c.timing);
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::InvalidConfig, "cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::InvalidConfig, std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(j);
}

/// `key=value` with a numeric value.
inline std::pair<std::string, double> parse_param(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw Error(ErrorKind::InvalidConfig, "param '" + text + "' needs key=value");
  try {
    std::size_t used = 0;
    const double v = std::stod(text.substr(eq + 1), &used);
    if (used != text.size() - eq - 1) throw std::invalid_argument("trailing");
    return {text.substr(0, eq), v};
  } catch (const std::logic_error&) {
    throw Error(ErrorKind::InvalidConfig, "param '" + text + "' has a malformed value");
  }
}

// ---------------------------------------------------------------------------
// Operator and vector specs

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

inline std::vector<double> parse_number_list(const std::string& inner) {
  std::vector<double> out;
  std::stringstream ss(inner);
  for (std::string p; std::getline(ss, p, ',');) {
    try {
      out.push_back(std::stod(trim(p)));
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::InvalidConfig, "malformed number '" + p + "'");
    }
  }
  return out;
}

inline bool call_form(const std::string& s, const std::string& name, std::string& inner) {
  if (s.size() < name.size() + 2 || s.compare(0, name.size() + 1, name + "(") != 0 || s.back() != ')') return false;
  inner = s.substr(name.size() + 1, s.size() - name.size() - 2);
  return true;
}

inline cplx json_scalar(const json& v) {
  if (v.is_number()) return cplx(v.get<double>(), 0.0);
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
    return cplx(v[0].get<double>(), v[1].get<double>());
  throw Error(ErrorKind::InvalidConfig, "matrix entries must be numbers or [re, im] pairs");
}

}  // namespace detail

/// Context for resolving named operators.
struct SpecContext {
  Eigen::Index dim = 2;
  /// Fock cutoff for the field names a, adag, n.
  int fock = 0;
  /// 2 x 2 operators are lifted as op (x) I_fock.
  bool embed_qubits = false;
  std::uint64_t seed = 0;
};

/// Named operator, diag(...), bloch(x,y,z), random, or a JSON matrix, with an optional `c*` prefix.
inline Operator parse_operator(const std::string& spec_in, const SpecContext& ctx) {
  std::string spec = detail::trim(spec_in);
  if (spec.empty()) throw Error(ErrorKind::InvalidConfig, "empty operator spec");
  cplx scale = 1.0;
  if (spec.front() != '[') {
    const auto star = spec.find('*');
    if (star != std::string::npos && star + 1 < spec.size() && spec.find('(') > star) {
      try {
        std::size_t used = 0;
        const std::string num = detail::trim(spec.substr(0, star));
        scale = std::stod(num, &used);
        if (used != num.size()) throw std::invalid_argument("trailing");
      } catch (const std::logic_error&) {
        throw Error(ErrorKind::InvalidConfig, "bad scalar prefix in '" + spec + "'");
      }
      spec = detail::trim(spec.substr(star + 1));
    }
  }
  Operator op;
  std::string inner;
  if (spec == "sigma_x") {
    op = pauli::x();
  } else if (spec == "sigma_y") {
    op = pauli::y();
  } else if (spec == "sigma_z") {
    op = pauli::z();
  } else if (spec == "identity" || spec == "I") {
    op = identity(ctx.dim);
  } else if (spec == "zero") {
    op = Operator::Zero(ctx.dim, ctx.dim);
  } else if (spec == "a" || spec == "adag" || spec == "n") {
    if (ctx.fock < 2) throw Error(ErrorKind::InvalidConfig, "'" + spec + "' needs a bosonic model");
    const FockConfig cfg(ctx.fock);
    auto [a, ad] = fock_pair(cfg);
    op = spec == "a" ? a : spec == "adag" ? ad : Operator(ad * a);
    if (ctx.embed_qubits) op = embed_field(op);
  } else if (spec == "random") {
    std::mt19937_64 rng(ctx.seed);
    std::normal_distribution<double> nd;
    Operator m(ctx.dim, ctx.dim);
    for (Eigen::Index i = 0; i < ctx.dim; ++i)
      for (Eigen::Index j = 0; j < ctx.dim; ++j) m(i, j) = cplx(nd(rng), nd(rng));
    op = 0.5 * (m + m.adjoint());
  } else if (detail::call_form(spec, "diag", inner)) {
    const auto v = detail::parse_number_list(inner);
    op = Operator::Zero(v.size(), v.size());
    for (std::size_t i = 0; i < v.size(); ++i) op(i, i) = v[i];
  } else if (detail::call_form(spec, "bloch", inner)) {
    const auto v = detail::parse_number_list(inner);
    if (v.size() != 3) throw Error(ErrorKind::InvalidConfig, "bloch(x,y,z) needs three numbers");
    op = 0.5 * (identity(2) + v[0] * pauli::x() + v[1] * pauli::y() + v[2] * pauli::z());
  } else if (spec.front() == '[') {
    json j;
    try {
      j = json::parse(spec);
    } catch (const json::parse_error&) {
      throw Error(ErrorKind::InvalidConfig, "matrix spec is not valid JSON");
    }
    if (!j.is_array() || j.empty()) throw Error(ErrorKind::InvalidConfig, "matrix spec must be a nonempty array of rows");
    const std::size_t n = j.size();
    op.resize(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      if (!j[i].is_array() || j[i].size() != n) throw Error(ErrorKind::InvalidConfig, "matrix spec must be square");
      for (std::size_t k = 0; k < n; ++k) op(i, k) = detail::json_scalar(j[i][k]);
    }
  } else {
    throw Error(ErrorKind::InvalidConfig, "unknown operator spec '" + spec + "'");
  }
  if (ctx.embed_qubits && op.rows() == 2 && ctx.dim != 2) op = embed_qubit(op, FockConfig(ctx.fock));
  if (op.rows() != ctx.dim) throw Error(ErrorKind::InvalidConfig, "operator '" + spec_in + "' has the wrong dimension");
  return scale * op;
}

/// vec(x1, x2, ...) or a bare comma list.
inline ClassicalVector parse_vector(const std::string& spec_in) {
  std::string spec = detail::trim(spec_in);
  std::string inner;
  if (!detail::call_form(spec, "vec", inner)) inner = spec;
  const auto v = detail::parse_number_list(inner);
  if (v.empty()) throw Error(ErrorKind::InvalidConfig, "empty vector spec");
  ClassicalVector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out(i) = v[i];
  return out;
}

// ---------------------------------------------------------------------------
// Model registry

using AnyModel = std::variant<DynamicalModel<Operator>, DynamicalModel<OperatorPair>, DynamicalModel<ClassicalVector>>;

struct BuiltModel {
  AnyModel model;
  SpecContext ctx;
  std::string default_state;
  std::string default_direction;
};

namespace detail {

inline double param_or(const ModelParams& p, const std::string& key, double fallback) {
  auto it = p.find(key);
  return it == p.end() ? fallback : it->second;
}

inline void allow_params(const RunConfig& c, std::initializer_list<const char*> keys) {
  for (const auto& [k, v] : c.params) {
    bool ok = false;
    for (const char* key : keys) ok = ok || k == key;
    if (!ok) throw Error(ErrorKind::InvalidConfig, "model '" + c.model + "' has no parameter '" + k + "'");
  }
}

inline int as_int(double v, const char* what) {
  if (v != std::floor(v) || v < 1 || v > 1e6) throw Error(ErrorKind::InvalidConfig, std::string(what) + " must be a positive integer");
  return static_cast<int>(v);
}

}  // namespace detail

inline const std::vector<std::string>& model_names() {
  static const std::vector<std::string> names{"identity", "contraction", "hartree", "quadratic", "two_level",
                                              "kicked_kerr", "squeezed", "squeezed_coherent", "logistic",
                                              "hyperbolic", "kerr_cnumber"};
  return names;
}

inline BuiltModel build_model(const RunConfig& c) {
  using detail::param_or;
  const ModelParams& p = c.params;
  BuiltModel b;
  b.ctx.seed = c.seed;
  const int dim = c.dim.value_or(static_cast<int>(param_or(p, "dim", 2)));
  const std::string& name = c.model;
  if (name == "identity") {
    detail::allow_params(c, {"dim"});
    b.ctx.dim = dim;
    b.model = identity_model(dim);
    b.default_state = "identity";
    b.default_direction = dim == 2 ? "sigma_x" : "identity";
  } else if (name == "contraction") {
    detail::allow_params(c, {"lambda", "dim"});
    b.ctx.dim = dim;
    b.model = contraction_model(param_or(p, "lambda", 0.5), dim, c.dt.value_or(1.0));
    b.default_state = dim == 2 ? "sigma_x" : "identity";
    b.default_direction = "state";
  } else if (name == "hartree") {
    detail::allow_params(c, {});
    b.ctx.dim = 2;
    const Operator q = parse_operator(c.q.empty() ? "sigma_z" : c.q, SpecContext{2, 0, false, c.seed});
    b.ctx.dim = q.rows();
    b.model = hartree_model(q, c.dt.value_or(1.0));
    b.default_state = q.rows() == 2 ? "bloch(0.5,0,0)" : "";
    b.default_direction = q.rows() == 2 ? "0.5*sigma_z" : "";
  } else if (name == "quadratic") {
    detail::allow_params(c, {"dim"});
    b.ctx.dim = dim;
    b.model = quadratic_model(dim);
    b.default_state = dim == 2 ? "diag(1,0.3)" : "";
    b.default_direction = "state";
  } else if (name == "two_level") {
    detail::allow_params(c, {"omega0", "omega", "lambda0"});
    const FockConfig cfg(c.cutoff.value_or(16), c.tail_tolerance);
    b.ctx = {2 * cfg.cutoff(), cfg.cutoff(), true, c.seed};
    b.model = two_level_field_model(param_or(p, "omega0", 1.0), param_or(p, "omega", 1.0), param_or(p, "lambda0", 0.2), cfg,
                                    c.dt.value_or(0.1));
    b.default_state = "sigma_x";
    b.default_direction = "sigma_z";
  } else if (name == "kicked_kerr") {
    detail::allow_params(c, {"chi", "kappa", "t0", "mu", "r"});
    const FockConfig cfg(c.cutoff.value_or(32), c.tail_tolerance);
    const double chi = param_or(p, "chi", 1.0);
    double t0 = param_or(p, "t0", 1.0);
    if (p.count("mu")) {
      if (p.count("t0")) throw Error(ErrorKind::InvalidConfig, "give either mu or t0, not both");
      if (!(chi > 0.0)) throw Error(ErrorKind::InvalidParam, "chi must be > 0");
      t0 = p.at("mu") / chi;
    }
    b.ctx = {cfg.cutoff(), cfg.cutoff(), false, c.seed};
    b.model = kicked_kerr_model(chi, param_or(p, "kappa", 1.0), t0, param_or(p, "r", 1.2), cfg);
  } else if (name == "squeezed") {
    detail::allow_params(c, {"k", "k_phase"});
    const FockConfig cfg(c.cutoff.value_or(64), c.tail_tolerance);
    b.ctx = {cfg.cutoff(), cfg.cutoff(), false, c.seed};
    const cplx k = squeezing_coupling(param_or(p, "k", 0.4), param_or(p, "k_phase", std::numbers::pi));
    b.model = squeezed_light_model(k, cfg, c.dt.value_or(0.25));
  } else if (name == "squeezed_coherent") {
    detail::allow_params(c, {"k", "k_phase"});
    const cplx k = squeezing_coupling(param_or(p, "k", 0.4), param_or(p, "k_phase", std::numbers::pi));
    b.model = squeezed_coherent_model(k, c.dt.value_or(0.25));
    b.default_state = "vec(0.5,0)";
    b.default_direction = "state";
  } else if (name == "logistic") {
    detail::allow_params(c, {"r"});
    b.model = logistic_model(param_or(p, "r", 4.0));
    b.default_state = "vec(0.3)";
    b.default_direction = "vec(1)";
  } else if (name == "hyperbolic") {
    detail::allow_params(c, {"kappa"});
    b.model = hyperbolic_model(param_or(p, "kappa", 0.7), c.dt.value_or(1.0));
    b.default_state = "vec(1,0)";
    b.default_direction = "vec(1,0)";
  } else if (name == "kerr_cnumber") {
    detail::allow_params(c, {"kappa", "chi", "t0"});
    b.model = kerr_cnumber_model(param_or(p, "kappa", 0.1), param_or(p, "chi", 1.0), param_or(p, "t0", 1.0));
    b.default_state = "vec(0.5,0)";
    b.default_direction = "vec(1,0)";
  } else {
    throw Error(ErrorKind::InvalidConfig, "unknown model '" + name + "'");
  }
  return b;
}

// ---------------------------------------------------------------------------
// Results

struct ResultRecord {
  RunConfig config;
  std::string model;
  ModelParams params;
  std::string estimator;
  ExponentEstimate estimate;
  std::optional<AssumptionReport> assumptions;
  std::optional<double> elapsed_seconds;
  std::string version = kVersion;
  int n_max = 0;  // last iterate; kept when a record is read back without its sequence
};

inline json exponent_json(const Exponent& e) {
  if (e.is_neg_inf()) return "-inf";
  const double v = e.value();
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline Exponent exponent_from_json(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "-inf") return Exponent::neg_inf();
    if (s == "nan") return Exponent::finite(std::numeric_limits<double>::quiet_NaN());
    if (s == "inf") return Exponent::finite(std::numeric_limits<double>::infinity());
    throw Error(ErrorKind::InvalidConfig, "bad exponent value '" + s + "'");
  }
  return Exponent::finite(j.get<double>());
}

inline Verdict verdict_from_string(const std::string& s) {
  for (Verdict v : {Verdict::Regular, Verdict::Irregular, Verdict::NegInfinity, Verdict::Inconclusive})
    if (to_string(v) == s) return v;
  throw Error(ErrorKind::InvalidConfig, "bad verdict '" + s + "'");
}

inline Warning warning_from_string(const std::string& s) {
  for (Warning w : {Warning::CutoffExceeded, Warning::NumericalOverflow, Warning::SlowConvergence, Warning::ZeroDerivation,
                    Warning::StateProjected})
    if (to_string(w) == s) return w;
  throw Error(ErrorKind::InvalidConfig, "bad warning '" + s + "'");
}

inline json warnings_json(const std::vector<Warning>& ws) {
  json a = json::array();
  for (Warning w : ws) a.push_back(std::string(to_string(w)));
  return a;
}

inline json assumptions_json(const AssumptionReport& r) {
  json j;
  j["horizon"] = r.horizon;
  j["c1_bound"] = r.c1_bound ? json(*r.c1_bound) : json("NotApplicable");
  j["c2"] = r.c2;
  j["theta_membership"] = r.theta_membership;
  j["fitted_C"] = r.fitted_c;
  j["variability_holds"] = r.variability_holds;
  j["min_growth"] = r.min_growth;
  j["warnings"] = warnings_json(r.warnings);
  return j;
}

inline AssumptionReport assumptions_from_json(const json& j) {
  AssumptionReport r;
  r.horizon = j.at("horizon").get<int>();
  if (j.at("c1_bound").is_number()) r.c1_bound = j["c1_bound"].get<double>();
  r.c2 = j.at("c2").get<double>();
  r.theta_membership = j.at("theta_membership").get<bool>();
  r.fitted_c = j.at("fitted_C").get<double>();
  r.variability_holds = j.at("variability_holds").get<bool>();
  r.min_growth = j.at("min_growth").get<double>();
  for (const auto& w : j.at("warnings")) r.warnings.push_back(warning_from_string(w.get<std::string>()));
  return r;
}

/// Summary object; `with_sequence` adds the full convergence sequence.
inline json record_json(const ResultRecord& r, bool with_sequence = false) {
  json j;
  j["model"] = r.model;
  j["params"] = json::object();
  for (const auto& [k, v] : r.params) j["params"][k] = v;
  j["estimator"] = r.estimator;
  j["estimate"] = exponent_json(r.estimate.estimate);
  j["stderr"] = r.estimate.std_error;
  j["verdict"] = std::string(to_string(r.estimate.verdict));
  j["warnings"] = warnings_json(r.estimate.diagnostics);
  j["n_max"] = r.estimate.sequence.empty() ? r.n_max : r.estimate.sequence.back().n;
  j["elapsed_seconds"] = r.elapsed_seconds ? json(*r.elapsed_seconds) : json(nullptr);
  j["version"] = r.version;
  j["dt"] = r.estimate.dt;
  if (r.assumptions) j["assumptions"] = assumptions_json(*r.assumptions);
  j["config"] = to_json(r.config);
  if (with_sequence) {
    j["sequence"] = json::array();
    for (const auto& p : r.estimate.sequence) j["sequence"].push_back({p.n, p.log_norm, p.a_n});
  }
  return j;
}

inline ResultRecord record_from_json(const json& j) {
  ResultRecord r;
  r.model = j.at("model").get<std::string>();
  for (const auto& item : j.at("params").items()) r.params[item.key()] = item.value().get<double>();
  r.estimator = j.at("estimator").get<std::string>();
  r.estimate.estimate = exponent_from_json(j.at("estimate"));
  r.estimate.std_error = j.at("stderr").get<double>();
  r.estimate.verdict = verdict_from_string(j.at("verdict").get<std::string>());
  for (const auto& w : j.at("warnings")) r.estimate.diagnostics.push_back(warning_from_string(w.get<std::string>()));
  if (!j.at("elapsed_seconds").is_null()) r.elapsed_seconds = j["elapsed_seconds"].get<double>();
  r.version = j.at("version").get<std::string>();
  r.n_max = j.at("n_max").get<int>();
  r.estimate.dt = j.at("dt").get<double>();
  if (j.contains("assumptions")) r.assumptions = assumptions_from_json(j["assumptions"]);
  r.config = config_from_json(j.at("config"));
  if (j.contains("sequence")) {
    for (const auto& p : j["sequence"])
      r.estimate.sequence.push_back({p.at(0).get<int>(), p.at(1).get<double>(), p.at(2).get<double>()});
  }
  return r;
}

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string sequence_csv(const std::vector<SequencePoint>& seq) {
  std::string out = "n,log_norm,a_n\n";
  for (const auto& p : seq) out += std::to_string(p.n) + "," + format_double(p.log_norm) + "," + format_double(p.a_n) + "\n";
  return out;
}

/// Line chart of a_n against n.
inline std::string sequence_svg(const std::vector<SequencePoint>& seq, const std::string& title) {
  const double w = 640, h = 400, pad = 48;
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << pad << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" << title << "</text>\n";
  if (!seq.empty()) {
    double lo = seq.front().a_n, hi = lo;
    for (const auto& p : seq) {
      lo = std::min(lo, p.a_n);
      hi = std::max(hi, p.a_n);
    }
    if (hi == lo) {
      hi += 0.5;
      lo -= 0.5;
    }
    const double n0 = seq.front().n, n1 = std::max<double>(seq.back().n, n0 + 1);
    s << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
    for (const auto& p : seq) {
      const double x = pad + (p.n - n0) / (n1 - n0) * (w - 2 * pad);
      const double y = h - pad - (p.a_n - lo) / (hi - lo) * (h - 2 * pad);
      s << format_double(x) << "," << format_double(y) << " ";
    }
    s << "\"/>\n";
    s << "<text x=\"4\" y=\"" << pad << "\" font-family=\"sans-serif\" font-size=\"11\">" << format_double(hi) << "</text>\n";
    s << "<text x=\"4\" y=\"" << h - pad << "\" font-family=\"sans-serif\" font-size=\"11\">" << format_double(lo) << "</text>\n";
  }
  s << "<text x=\"" << w / 2 << "\" y=\"" << h - 12 << "\" font-family=\"sans-serif\" font-size=\"12\">n</text>\n";
  s << "</svg>\n";
  return s.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::InvalidConfig, "cannot write '" + path + "'");
  out << text;
}

// ---------------------------------------------------------------------------
// Running

namespace detail {

inline EstimatorOptions options_of(const RunConfig& c) {
  if (!(c.tail_fraction > 0.0 && c.tail_fraction <= 1.0))
    throw Error(ErrorKind::InvalidConfig, "tail_fraction must lie in (0, 1]");
  EstimatorOptions o;
  o.tail_fraction = c.tail_fraction;
  o.log_corrected = c.log_corrected;
  return o;
}

inline std::string default_estimator(const AnyModel& m) {
  return std::visit([](const auto& model) { return model.variation_mode == VariationMode::parameter ? "parameter" : "norm"; }, m);
}

template <class S>
std::pair<S, S> initial_pair(const DynamicalModel<S>& model, const BuiltModel& b, const RunConfig& c) {
  const double eps = c.eps.value_or(model.default_epsilon);
  if constexpr (std::is_same_v<S, OperatorPair>) {
    if (!c.state.empty() || !c.direction.empty())
      throw Error(ErrorKind::InvalidConfig, "operator-pair models take their state from the eps family");
    return {model.family(eps), model.family_derivative(eps)};
  } else {
    std::string state = c.state.empty() ? b.default_state : c.state;
    std::string dir = c.direction.empty() ? b.default_direction : c.direction;
    if (state.empty() && model.family) {
      S x = model.family(eps);
      S y = model.family_derivative ? model.family_derivative(eps) : zero_like(x);
      if (!dir.empty() && dir != "state") {
        if constexpr (std::is_same_v<S, Operator>) y = parse_operator(dir, b.ctx);
        else y = parse_vector(dir);
      } else if (dir == "state") {
        y = x;
      }
      return {x, y};
    }
    if (state.empty()) throw Error(ErrorKind::InvalidConfig, "model '" + c.model + "' needs --state");
    if (dir.empty()) throw Error(ErrorKind::InvalidConfig, "model '" + c.model + "' needs --direction");
    if constexpr (std::is_same_v<S, Operator>) {
      const Operator x = parse_operator(state, b.ctx);
      const Operator y = dir == "state" ? x : parse_operator(dir, b.ctx);
      return {x, y};
    } else {
      const ClassicalVector x = parse_vector(state);
      const ClassicalVector y = dir == "state" ? x : parse_vector(dir);
      return {x, y};
    }
  }
}

}  // namespace detail

/// Runs the configured estimator; `with_assumptions` runs check_assumptions instead of an estimator.
inline ResultRecord execute(const RunConfig& c, bool with_assumptions = false) {
  if (c.steps < 1) throw Error(ErrorKind::InvalidConfig, "steps must be >= 1");
  const auto t_start = std::chrono::steady_clock::now();
  const BuiltModel b = build_model(c);
  const EstimatorOptions opts = detail::options_of(c);
  ResultRecord rec;
  rec.config = c;
  rec.estimator = c.estimator.empty() ? detail::default_estimator(b.model) : c.estimator;
  std::visit(
      [&](const auto& model) {
        using S = typename std::decay_t<decltype(model)>::State;
        rec.model = model.name;
        rec.params = model.params;
        rec.estimate.dt = model.dt;
        const std::string& est = rec.estimator;
        if (with_assumptions) {
          if (model.variation_mode == VariationMode::parameter && !std::is_same_v<S, Operator>)
            throw Error(ErrorKind::InvalidConfig, "check needs a direction-mode model");
          auto [x, y] = detail::initial_pair(model, b, c);
          rec.assumptions = check_assumptions(model, x, y, c.steps, c.min_growth, opts);
          rec.estimator = "check";
          return;
        }
        if (est == "parameter") {
          if (model.variation_mode != VariationMode::parameter)
            throw Error(ErrorKind::InvalidConfig, "estimator 'parameter' needs a parameter-mode model");
          rec.estimate = lyapunov_param(model, c.eps.value_or(model.default_epsilon), c.steps, opts);
          return;
        }
        if (c.eps && model.variation_mode != VariationMode::parameter)
          throw Error(ErrorKind::InvalidConfig, "--eps applies to parameter-mode models only");
        auto [x, y] = detail::initial_pair(model, b, c);
        if (est == "norm") {
          if constexpr (std::is_same_v<S, ClassicalVector>) rec.estimate = classical_lyapunov(model, x, y, c.steps, opts);
          else rec.estimate = lyapunov_q(model, x, y, c.steps, opts);
        } else if (est == "state" || est == "derivation") {
          if constexpr (std::is_same_v<S, Operator>) {
            if (est == "state") {
              if (c.mu.empty()) throw Error(ErrorKind::InvalidConfig, "estimator 'state' needs --mu");
              rec.estimate = lyapunov_q_state(model, x, y, parse_operator(c.mu, b.ctx), c.steps, opts);
            } else {
              if (c.generator.empty()) throw Error(ErrorKind::InvalidConfig, "estimator 'derivation' needs --generator");
              rec.estimate = lyapunov_q_derivation(model, x, parse_operator(c.generator, b.ctx), c.steps, opts);
            }
          } else {
            throw Error(ErrorKind::InvalidConfig, "estimator '" + est + "' needs an operator model");
          }
        } else {
          throw Error(ErrorKind::InvalidConfig, "unknown estimator '" + est + "'");
        }
      },
      b.model);
  if (!rec.estimate.sequence.empty()) rec.n_max = rec.estimate.sequence.back().n;
  if (c.timing)
    rec.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return rec;
}

/// Numerical failure: nothing usable survived propagation.
inline bool numerical_failure(const ResultRecord& r) {
  if (r.assumptions) return false;
  const auto& e = r.estimate;
  const bool overflow = std::find(e.diagnostics.begin(), e.diagnostics.end(), Warning::NumericalOverflow) != e.diagnostics.end();
  return overflow && e.sequence.empty();
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepRow {
  std::size_t index = 0;
  std::vector<double> values;
  std::optional<ResultRecord> record;
  std::string error;
};

namespace detail {

inline void apply_axis(RunConfig& c, const std::string& name, double v) {
  if (name == "cutoff") c.cutoff = as_int(v, "cutoff");
  else if (name == "steps") c.steps = as_int(v, "steps");
  else if (name == "dim") c.dim = as_int(v, "dim");
  else if (name == "dt" || name == "dz") c.dt = v;
  else if (name == "eps") c.eps = v;
  else c.params[name] = v;
}

}  // namespace detail

/// Grid points in row-major order of the axes (last axis fastest).
inline std::vector<SweepRow> run_sweep(const RunConfig& base) {
  if (base.grid.empty()) throw Error(ErrorKind::InvalidConfig, "sweep needs at least one --grid axis");
  std::size_t total = 1;
  for (const auto& g : base.grid) total *= static_cast<std::size_t>(g.count);
  std::vector<SweepRow> rows(total);
  for (std::size_t idx = 0; idx < total; ++idx) {
    SweepRow& row = rows[idx];
    row.index = idx;
    RunConfig c = base;
    c.grid.clear();
    std::size_t rem = idx;
    row.values.resize(base.grid.size());
    for (std::size_t a = base.grid.size(); a-- > 0;) {
      const auto& g = base.grid[a];
      const int i = static_cast<int>(rem % g.count);
      rem /= g.count;
      row.values[a] = g.value(i);
    }
    try {
      for (std::size_t a = 0; a < base.grid.size(); ++a) detail::apply_axis(c, base.grid[a].name, row.values[a]);
      c.out.clear();
      c.json_path.clear();
      c.svg.clear();
      row.record = execute(c);
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  }
  return rows;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return q + "\"";
}

inline std::string sweep_csv(const RunConfig& base, const std::vector<SweepRow>& rows) {
  std::string out = "index";
  for (const auto& g : base.grid) out += "," + g.name;
  out += ",estimate,stderr,verdict,warnings,error\n";
  for (const auto& r : rows) {
    out += std::to_string(r.index);
    for (double v : r.values) out += "," + format_double(v);
    if (r.record) {
      const auto& e = r.record->estimate;
      const json ej = exponent_json(e.estimate);
      out += "," + (ej.is_string() ? ej.get<std::string>() : format_double(ej.get<double>()));
      out += "," + format_double(e.std_error);
      out += "," + std::string(to_string(e.verdict));
      std::string ws;
      for (Warning w : e.diagnostics) ws += (ws.empty() ? "" : ";") + std::string(to_string(w));
      out += "," + ws + ",";
    } else {
      out += ",,,,," + csv_field(r.error);
    }
    out += "\n";
  }
  return out;
}

}  // namespace qlyap

#endif  // QLYAP_IO_HPP
