// qlyap: command-line front end for the exponent estimators.
//
// Exit codes: 0 ok, 1 invalid configuration, 2 numerical failure,
// 3 inconclusive verdict under --require-verdict.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qlyap/cp_structure.hpp"
#include "qlyap/io.hpp"
#include "qlyap/koopman.hpp"

namespace {

using namespace qlyap;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitInconclusive = 3;

struct Flags {
  std::string config_path;
  std::string save_config;
  std::string model;
  std::vector<std::string> params;
  std::string state, direction, estimator, mu, generator, q;
  int steps = 0;
  double dt = 0.0;
  double eps = 0.0;
  int cutoff = 0;
  int dim = 0;
  double tail_tolerance = 0.0;
  double tail_fraction = 0.0;
  double min_growth = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::string> grid;
  std::string out, json_path, svg;
  bool require_verdict = false;
  bool log_corrected = false;
  bool timing = false;
};

void add_run_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config_path, "JSON config file; flags override its values");
  cmd->add_option("--save-config", f.save_config, "write the effective config as JSON");
  cmd->add_option("--model", f.model, "model name");
  cmd->add_option("--param", f.params, "model parameter key=value (repeatable)");
  cmd->add_option("--state", f.state, "initial state spec");
  cmd->add_option("--direction", f.direction, "direction spec, or 'state'");
  cmd->add_option("--estimator", f.estimator, "norm | state | derivation | parameter");
  cmd->add_option("--mu", f.mu, "state functional for the 'state' estimator");
  cmd->add_option("--generator", f.generator, "Hermitian k for the 'derivation' estimator");
  cmd->add_option("--q", f.q, "Hartree coupling operator");
  cmd->add_option("--steps", f.steps, "number of iterates N");
  cmd->add_option("--dt,--dz", f.dt, "time (or length) per step");
  cmd->add_option("--eps", f.eps, "parameter value eps0");
  cmd->add_option("--cutoff", f.cutoff, "Fock cutoff D");
  cmd->add_option("--dim", f.dim, "matrix dimension for finite-level models");
  cmd->add_option("--tail-tolerance", f.tail_tolerance, "leakage tolerance for CutoffExceeded");
  cmd->add_option("--tail-fraction", f.tail_fraction, "fraction of the sequence used for extrapolation");
  cmd->add_option("--min-growth", f.min_growth, "growth constant C for the variability check");
  cmd->add_option("--seed", f.seed, "seed for random specs");
  cmd->add_option("--out", f.out, "CSV output path");
  cmd->add_option("--json", f.json_path, "JSON summary path");
  cmd->add_option("--svg", f.svg, "SVG chart path");
  cmd->add_flag("--require-verdict", f.require_verdict, "exit 3 on an Inconclusive verdict");
  cmd->add_flag("--log-corrected", f.log_corrected, "fit l t + b log t + c in the tail");
  cmd->add_flag("--timing", f.timing, "record wall time in the JSON summary");
}

RunConfig effective_config(const CLI::App* cmd, const Flags& f) {
  RunConfig c = f.config_path.empty() ? RunConfig{} : load_config(f.config_path);
  auto given = [cmd](const char* name) { return cmd->count(name) > 0; };
  if (given("--model")) c.model = f.model;
  for (const auto& p : f.params) {
    auto [k, v] = parse_param(p);
    c.params[k] = v;
  }
  if (given("--state")) c.state = f.state;
  if (given("--direction")) c.direction = f.direction;
  if (given("--estimator")) c.estimator = f.estimator;
  if (given("--mu")) c.mu = f.mu;
  if (given("--generator")) c.generator = f.generator;
  if (given("--q")) c.q = f.q;
  if (given("--steps")) c.steps = f.steps;
  if (given("--dt")) c.dt = f.dt;
  if (given("--eps")) c.eps = f.eps;
  if (given("--cutoff")) c.cutoff = f.cutoff;
  if (given("--dim")) c.dim = f.dim;
  if (given("--tail-tolerance")) c.tail_tolerance = f.tail_tolerance;
  if (given("--tail-fraction")) c.tail_fraction = f.tail_fraction;
  if (given("--min-growth")) c.min_growth = f.min_growth;
  if (given("--seed")) c.seed = f.seed;
  for (const auto& g : f.grid) c.grid.push_back(GridAxis::parse(g));
  if (given("--out")) c.out = f.out;
  if (given("--json")) c.json_path = f.json_path;
  if (given("--svg")) c.svg = f.svg;
  if (f.require_verdict) c.require_verdict = true;
  if (f.log_corrected) c.log_corrected = true;
  if (f.timing) c.timing = true;
  if (!f.save_config.empty()) write_text(f.save_config, to_json(c).dump(2) + "\n");
  return c;
}

void print_summary(const ResultRecord& r) {
  const json e = exponent_json(r.estimate.estimate);
  std::printf("model %s  estimator %s\n", r.model.c_str(), r.estimator.c_str());
  std::printf("estimate %s  stderr %s  verdict %s\n",
              e.is_string() ? e.get<std::string>().c_str() : format_double(e.get<double>()).c_str(),
              format_double(r.estimate.std_error).c_str(), std::string(to_string(r.estimate.verdict)).c_str());
  for (Warning w : r.estimate.diagnostics) std::printf("warning %s\n", std::string(to_string(w)).c_str());
}

int cmd_run(const RunConfig& c) {
  const ResultRecord r = execute(c);
  if (!c.out.empty()) write_text(c.out, sequence_csv(r.estimate.sequence));
  if (!c.json_path.empty()) write_text(c.json_path, record_json(r).dump(2) + "\n");
  if (!c.svg.empty()) write_text(c.svg, sequence_svg(r.estimate.sequence, r.model + " a_n"));
  print_summary(r);
  if (numerical_failure(r)) {
    std::fprintf(stderr, "error: propagation overflowed before the first finite iterate\n");
    return kExitNumerical;
  }
  if (c.require_verdict && r.estimate.verdict == Verdict::Inconclusive) return kExitInconclusive;
  return kExitOk;
}

int cmd_sweep(const RunConfig& c) {
  const auto rows = run_sweep(c);
  const std::string csv = sweep_csv(c, rows);
  if (!c.out.empty()) write_text(c.out, csv);
  else std::fputs(csv.c_str(), stdout);
  if (!c.json_path.empty()) {
    json arr = json::array();
    for (const auto& r : rows) {
      json j;
      j["index"] = r.index;
      j["values"] = r.values;
      j["record"] = r.record ? record_json(*r.record) : json(nullptr);
      j["error"] = r.error;
      arr.push_back(j);
    }
    write_text(c.json_path, arr.dump(2) + "\n");
  }
  return kExitOk;
}

int cmd_check(const RunConfig& c) {
  const ResultRecord r = execute(c, true);
  const json rep = assumptions_json(*r.assumptions);
  if (!c.json_path.empty()) write_text(c.json_path, record_json(r).dump(2) + "\n");
  std::printf("%s\n", rep.dump(2).c_str());
  return kExitOk;
}

int cmd_koopman(const std::vector<double>& pts, int n_points, double r) {
  using namespace qlyap::koopman;
  const PointSet omega = pts.empty() ? PointSet::uniform(static_cast<std::size_t>(n_points)) : PointSet::from_scalars(pts);
  const AlgebraElement a = AlgebraElement::coordinate(omega);
  double worst = 0.0;
  for (std::size_t phi = 0; phi < omega.size(); ++phi) {
    const auto [lhs, rhs] = logistic_dual_check(r, a, phi);
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  // The logistic map as a lift: tau = identity, T(t) = r t (1 - t).
  if (r != 0.0) {
    std::vector<std::size_t> tau(omega.size());
    for (std::size_t i = 0; i < tau.size(); ++i) tau[i] = i;
    const AlgebraElement lifted = lift(LiftSpec(tau, Polynomial1({0.0, r, -r})), a);
    for (std::size_t phi = 0; phi < omega.size(); ++phi)
      worst = std::max(worst, std::abs(lifted[phi] - logistic_dual_check(r, a, phi).lhs));
  }
  std::printf("points %zu  r %s  max_discrepancy %s\n", omega.size(), format_double(r).c_str(), format_double(worst).c_str());
  return worst <= 1e-12 ? kExitOk : kExitNumerical;
}

struct CpFlags {
  int dim = 2;
  int max_degree = 3;
  std::uint64_t seed = 0;
  int probes = 3;
  std::vector<std::string> terms;
  std::vector<std::string> kraus;
  std::string linear_map;
  std::string config_path;
};

int cmd_cp(const CpFlags& f) {
  CpFlags cf = f;
  if (!f.config_path.empty()) {
    std::ifstream in(f.config_path);
    if (!in) throw Error(ErrorKind::InvalidConfig, "cannot open config '" + f.config_path + "'");
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::InvalidConfig, std::string("config is not valid JSON: ") + e.what());
    }
    if (j.contains("dim")) cf.dim = j["dim"].get<int>();
    if (j.contains("max_degree")) cf.max_degree = j["max_degree"].get<int>();
    if (j.contains("seed")) cf.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("terms"))
      for (const auto& t : j["terms"]) {
        const cplx coeff = t.contains("coeff") ? detail::json_scalar(t["coeff"]) : cplx(1.0);
        cf.terms.push_back(format_double(coeff.real()) + "," + format_double(coeff.imag()) + ":" + t.at("word").get<std::string>());
      }
    if (j.contains("kraus"))
      for (const auto& k : j["kraus"]) cf.kraus.push_back(k.is_string() ? k.get<std::string>() : k.dump());
    if (j.contains("linear_map")) cf.linear_map = j["linear_map"].get<std::string>();
  }
  if (cf.dim < 1) throw Error(ErrorKind::InvalidConfig, "dim must be >= 1");
  const SpecContext ctx{cf.dim, 0, false, cf.seed};
  int status = kExitOk;

  std::optional<cp::LinearMap> linear;
  if (!cf.kraus.empty()) {
    std::vector<Operator> ks;
    for (const auto& k : cf.kraus) ks.push_back(parse_operator(k, ctx));
    linear = cp::kraus_map(ks);
  } else if (cf.linear_map == "identity") {
    linear = [](const Operator& a) -> Operator { return a; };
  } else if (cf.linear_map == "transpose") {
    linear = cp::transpose_map();
  } else if (cf.linear_map == "trace") {
    linear = [](const Operator& a) -> Operator { return a.trace() * identity(a.rows()) / static_cast<double>(a.rows()); };
  } else if (!cf.linear_map.empty()) {
    throw Error(ErrorKind::InvalidConfig, "unknown linear map '" + cf.linear_map + "'");
  }
  if (linear) {
    const Operator choi = cp::choi_of(*linear, cf.dim);
    const auto ev = cp::choi_eigenvalues(choi);
    std::printf("choi_min_eigenvalue %s\ncompletely_positive %s\n", format_double(ev.minCoeff()).c_str(),
                cp::is_completely_positive(*linear, cf.dim) ? "true" : "false");
  }

  if (!cf.terms.empty()) {
    std::vector<cp::Monomial> monos;
    for (const auto& t : cf.terms) {
      // coeff:word, coeff either re or re,im
      const auto colon = t.find(':');
      if (colon == std::string::npos) throw Error(ErrorKind::InvalidConfig, "term '" + t + "' needs coeff:word");
      const auto parts = detail::parse_number_list(t.substr(0, colon));
      if (parts.empty() || parts.size() > 2) throw Error(ErrorKind::InvalidConfig, "term '" + t + "' has a bad coefficient");
      const cplx coeff(parts[0], parts.size() == 2 ? parts[1] : 0.0);
      try {
        monos.push_back(cp::Monomial::parse(t.substr(colon + 1), coeff));
      } catch (const Error& e) {
        throw Error(ErrorKind::InvalidConfig, e.what());
      }
    }
    const cp::PolyOperatorMap map(monos, cf.dim, cf.seed);
    std::mt19937_64 rng(cf.seed);
    std::vector<Operator> probes;
    for (int i = 0; i < cf.probes; ++i) probes.push_back(cp::random_operator(cf.dim, rng));
    const auto table = cp::homogeneous_components([&map](const Operator& a) { return map(a); }, probes, cf.max_degree);
    double recon = 0.0;
    for (std::size_t p = 0; p < probes.size(); ++p) {
      const Operator direct = map(probes[p]);
      recon = std::max(recon, spectral_norm(Operator(table.reconstruct(p) - direct)) / std::max(1e-300, spectral_norm(direct)));
    }
    std::printf("fit_residual %s\nreconstruction_error %s\n", format_double(table.residual).c_str(), format_double(recon).c_str());
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    const cplx z(uni(rng), uni(rng));
    const Operator fresh = cp::random_operator(cf.dim, rng);
    const auto hom = cp::check_homogeneity([&map](const Operator& a) { return map(a); }, fresh, z, cf.max_degree);
    for (const auto& c : table.components) {
      double herr = 0.0;
      for (const auto& h : hom)
        if (h.m == c.m && h.n == c.n) herr = h.relative_error;
      std::printf("component m=%d n=%d homogeneity_error %s\n", c.m, c.n, format_double(herr).c_str());
      if (herr > 1e-8) status = kExitNumerical;
    }
    if (recon > 1e-8) status = kExitNumerical;
  }
  if (!linear && cf.terms.empty()) throw Error(ErrorKind::InvalidConfig, "cp-analyze needs --term, --kraus or --linear-map");
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quantum Lyapunov exponent laboratory"};
  app.set_version_flag("--version", std::string(qlyap::kVersion));
  app.require_subcommand(1);

  Flags run_flags, sweep_flags, check_flags;
  auto* run = app.add_subcommand("run", "estimate an exponent");
  add_run_flags(run, run_flags);
  auto* sweep = app.add_subcommand("sweep", "estimate over a parameter grid");
  add_run_flags(sweep, sweep_flags);
  sweep->add_option("--grid", sweep_flags.grid, "axis name=start:stop:count (repeatable)");
  auto* check = app.add_subcommand("check", "report the observed growth constants");
  add_run_flags(check, check_flags);

  std::vector<double> points;
  int n_points = 64;
  double r_logistic = 4.0;
  auto* koop = app.add_subcommand("koopman-demo", "logistic duality and lift identities on a point set");
  koop->add_option("--points", points, "explicit points in [0, 1]")->delimiter(',');
  koop->add_option("--n-points", n_points, "number of uniform points when --points is absent")->check(CLI::PositiveNumber);
  koop->add_option("--r", r_logistic, "logistic parameter");

  CpFlags cp_flags;
  auto* cpa = app.add_subcommand("cp-analyze", "Choi test and homogeneous decomposition");
  cpa->add_option("--config", cp_flags.config_path, "JSON map description");
  cpa->add_option("--dim", cp_flags.dim, "matrix dimension");
  cpa->add_option("--max-degree", cp_flags.max_degree, "largest total degree M");
  cpa->add_option("--seed", cp_flags.seed, "seed for probe operators");
  cpa->add_option("--probes", cp_flags.probes, "number of probe operators")->check(CLI::PositiveNumber);
  cpa->add_option("--term", cp_flags.terms, "polynomial term coeff:word, words over 'a' and 'a*' (repeatable)");
  cpa->add_option("--kraus", cp_flags.kraus, "Kraus operator spec (repeatable)");
  cpa->add_option("--linear-map", cp_flags.linear_map, "identity | transpose | trace");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return cmd_run(effective_config(run, run_flags));
    if (*sweep) return cmd_sweep(effective_config(sweep, sweep_flags));
    if (*check) return cmd_check(effective_config(check, check_flags));
    if (*koop) {
      for (double p : points)
        if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorKind::InvalidConfig, "points must lie in [0, 1]");
      return cmd_koopman(points, n_points, r_logistic);
    }
    if (*cpa) return cmd_cp(cp_flags);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    switch (e.kind()) {
      case ErrorKind::NumericalOverflow:
      case ErrorKind::DomainEscape:
        return kExitNumerical;
      default:
        return kExitConfig;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }
  return kExitOk;
}
