#include "jobmatch/cli.hpp"

#include "jobmatch/analysis.hpp"
#include "jobmatch/error.hpp"
#include "jobmatch/estimator.hpp"
#include "jobmatch/io.hpp"
#include "jobmatch/market_sim.hpp"
#include "jobmatch/report.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/uniform_real_distribution.hpp>

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <limits>
#include <sstream>

namespace jobmatch {

namespace {

using json = nlohmann::ordered_json;

// Exit codes.
constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kUsage = 2;

enum class LogLevel { Quiet, Info, Debug };

LogLevel log_level() {
  const char* env = std::getenv("JOBMATCH_LOG");
  if (!env) return LogLevel::Info;
  const std::string v = env;
  if (v == "quiet" || v == "0") return LogLevel::Quiet;
  if (v == "debug" || v == "2") return LogLevel::Debug;
  return LogLevel::Info;
}

void log(LogLevel level, const std::string& msg) {
  if (level <= log_level()) std::cerr << "jobmatch: " << msg << "\n";
}

// ---------------------------------------------------------------------------
// Configuration

const json& require(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) {
    throw ConfigError("missing config key '" + where + (where.empty() ? "" : ".") + key + "'");
  }
  return j.at(key);
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return fallback;
  return j.at(key).get<T>();
}

json read_json(const std::string& path) {
  const std::string text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
}

DatasetSchema schema_from(const json& cfg) {
  const json& s = require(cfg, "schema", "");
  DatasetSchema schema;
  schema.worker_columns = require(s, "worker_columns", "schema").get<std::vector<std::string>>();
  schema.firm_columns = require(s, "firm_columns", "schema").get<std::vector<std::string>>();
  schema.transfer_column = get_or<std::string>(s, "transfer_column", "");
  schema.transform_label = get_or<std::string>(s, "transform", "identity");
  schema.transform = transfer_transform_from_string(schema.transform_label);
  schema.missing_marker = get_or<std::string>(s, "missing_marker", "");
  schema.weight_column = get_or<std::string>(s, "weight_column", "");
  schema.validate();
  return schema;
}

int column_index(const json& v, const std::vector<std::string>& names, const char* side) {
  if (v.is_number_integer()) return v.get<int>();
  const std::string name = v.get<std::string>();
  if (name == "1" || name == "const") return 0;
  for (std::size_t c = 0; c < names.size(); ++c) {
    if (names[c] == name) return static_cast<int>(c) + 1;
  }
  throw ConfigError(std::string("unknown ") + side + " column '" + name + "' in basis");
}

int firm_column(const json& v, const DatasetSchema& schema) {
  const int idx = column_index(v, schema.firm_columns, "firm");
  // Names map to 1-based basis indices; a bare integer here is already 0-based.
  return v.is_number_integer() ? idx : idx - 1;
}

BasisSpec basis_from(const json& cfg, const DatasetSchema& schema) {
  const json& list = require(cfg, "basis", "");
  std::vector<BasisFunction> fns;
  std::vector<bool> am, gm;
  for (const auto& b : list) {
    const int k = column_index(require(b, "worker", "basis[]"), schema.worker_columns, "worker");
    const int l = column_index(require(b, "firm", "basis[]"), schema.firm_columns, "firm");
    fns.push_back(BasisFunction::product(k, l));
    am.push_back(get_or<bool>(b, "alpha", false));
    gm.push_back(get_or<bool>(b, "gamma", false));
  }
  BasisSpec spec(std::move(fns), std::move(am), std::move(gm));
  spec.check_dimensions(static_cast<int>(schema.worker_columns.size()),
                        static_cast<int>(schema.firm_columns.size()));
  return spec;
}

Vector vector_from(const json& j, int K, const char* what) {
  if (!j.is_array() || static_cast<int>(j.size()) != K) {
    throw ConfigError(std::string("theta.") + what + " must have one entry per basis");
  }
  Vector v(K);
  for (int k = 0; k < K; ++k) v(k) = j[k].get<double>();
  return v;
}

Theta theta_from(const json& cfg, const BasisSpec& spec) {
  const json& t = require(cfg, "theta", "");
  Theta th;
  th.A = vector_from(require(t, "A", "theta"), spec.size(), "A");
  th.Gamma = vector_from(require(t, "Gamma", "theta"), spec.size(), "Gamma");
  th.sigma1 = require(t, "sigma1", "theta").get<double>();
  th.sigma2 = require(t, "sigma2", "theta").get<double>();
  th.t = require(t, "t", "theta").get<double>();
  th.s2 = require(t, "s2", "theta").get<double>();
  validate(th, spec);
  return th;
}

SolverOptions solver_from(const json& cfg, SolverOptions o) {
  if (!cfg.contains("solver")) return o;
  const json& s = cfg.at("solver");
  o.tol = get_or<double>(s, "tol", o.tol);
  o.max_iter = get_or<int>(s, "max_iter", o.max_iter);
  o.polish = get_or<bool>(s, "polish", o.polish);
  return o;
}

EstimatorOptions estimator_from(const json& cfg) {
  EstimatorOptions o;
  o.solver = solver_from(cfg, o.solver);
  if (cfg.contains("optimizer")) {
    const json& p = cfg.at("optimizer");
    o.optimizer.grad_tol = get_or<double>(p, "grad_tol", o.optimizer.grad_tol);
    o.optimizer.max_iter = get_or<int>(p, "max_iter", o.optimizer.max_iter);
    o.reparam = reparameterization_from_string(get_or<std::string>(p, "reparam", "exp"));
    o.compute_std_errors = get_or<bool>(p, "std_errors", true);
    o.hessian_step = get_or<double>(p, "hessian_step", o.hessian_step);
    o.boundary_tol = get_or<double>(p, "boundary_tol", o.boundary_tol);
  }
  return o;
}

RowMatrix grid_from(const json& g, const char* side) {
  if (g.is_object() && g.contains("linspace")) {
    const json& l = g.at("linspace");
    if (!l.is_array() || l.size() != 3) throw ConfigError("linspace is [lo, hi, m]");
    return linspace_grid(l[2].get<int>(), l[0].get<double>(), l[1].get<double>());
  }
  if (!g.is_array() || g.empty()) {
    throw ConfigError(std::string("market.") + side + "_grid must be a list of rows or linspace");
  }
  const auto m = static_cast<Eigen::Index>(g.size());
  const auto d = static_cast<Eigen::Index>(g[0].is_array() ? g[0].size() : 1);
  RowMatrix out(m, d);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (g[i].is_array()) {
      if (static_cast<Eigen::Index>(g[i].size()) != d) throw ConfigError("ragged market grid");
      for (Eigen::Index c = 0; c < d; ++c) out(i, c) = g[i][c].get<double>();
    } else {
      out(i, 0) = g[i].get<double>();
    }
  }
  return out;
}

// Masses: explicit list, omitted (uniform), or {"exp_tilt": c} for mass ~ exp(c * column 0).
Vector masses_from(const json& market, const char* key, const RowMatrix& grid) {
  const auto m = grid.rows();
  Vector w = Vector::Ones(m);
  if (market.contains(key)) {
    const json& v = market.at(key);
    if (v.is_array()) {
      if (static_cast<Eigen::Index>(v.size()) != m) throw ConfigError(std::string(key) + " size");
      for (Eigen::Index i = 0; i < m; ++i) w(i) = v[i].get<double>();
    } else if (v.is_object() && v.contains("exp_tilt")) {
      const double c = v.at("exp_tilt").get<double>();
      for (Eigen::Index i = 0; i < m; ++i) w(i) = std::exp(c * grid(i, 0));
    } else if (!(v.is_string() && v.get<std::string>() == "uniform")) {
      throw ConfigError(std::string("market.") + key + " must be a list, \"uniform\" or exp_tilt");
    }
  }
  return w / w.sum();
}

GroundTruthMarket market_from(const json& cfg, const BasisSpec& spec) {
  const json& m = require(cfg, "market", "");
  RowMatrix xw = grid_from(require(m, "worker_grid", "market"), "worker");
  RowMatrix yf = grid_from(require(m, "firm_grid", "market"), "firm");
  Vector fw = masses_from(m, "worker_masses", xw);
  Vector gf = masses_from(m, "firm_masses", yf);
  SolverOptions grid_opts{1e-13, 100000};
  return build_market(std::move(xw), std::move(fw), std::move(yf), std::move(gf),
                      theta_from(cfg, spec), spec, grid_opts);
}

json theta_json(const Theta& th) {
  json j;
  j["A"] = std::vector<double>(th.A.data(), th.A.data() + th.A.size());
  j["Gamma"] = std::vector<double>(th.Gamma.data(), th.Gamma.data() + th.Gamma.size());
  j["sigma1"] = th.sigma1;
  j["sigma2"] = th.sigma2;
  j["t"] = th.t;
  j["s2"] = th.s2;
  return j;
}

// Theta from an estimation report written by `estimate`.
Theta theta_from_report(const std::string& path, const BasisSpec& spec) {
  const json r = read_json(path);
  const json& flat = require(require(r, "theta", ""), "flat", "theta");
  if (static_cast<int>(flat.size()) != 2 * spec.size() + 4) {
    throw ConfigError("report '" + path + "' does not match the basis of this config");
  }
  Vector v(flat.size());
  for (std::size_t i = 0; i < flat.size(); ++i) {
    if (flat[i].is_null()) throw ConfigError("report '" + path + "' has no full theta estimate");
    v(static_cast<Eigen::Index>(i)) = flat[i].get<double>();
  }
  Theta th = Theta::from_vector(v);
  validate(th, spec);
  return th;
}

// ---------------------------------------------------------------------------
// Output

struct Outputs {
  std::string report;
  std::string table;
};

void emit(const Outputs& out, const std::string& json_text, const std::string& table_text) {
  if (out.report.empty()) {
    std::cout << json_text;
  } else {
    write_text_file(out.report, json_text);
    log(LogLevel::Info, "wrote " + out.report);
  }
  if (out.table.empty()) {
    std::cout << table_text;
  } else {
    write_text_file(out.table, table_text);
    log(LogLevel::Info, "wrote " + out.table);
  }
}

std::string fmt(double v, const char* f = "%.6g") {
  if (!std::isfinite(v)) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

json jnum(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

// ---------------------------------------------------------------------------
// Subcommands

struct Common {
  std::string config;
  std::string spec;
  std::uint64_t seed = 0;
  Outputs out;
};

json load_config(const Common& c) {
  json cfg = read_json(c.config);
  if (!c.spec.empty()) cfg.merge_patch(read_json(c.spec));
  return cfg;
}

json echo(const json& cfg, const Common& c, const json& extra = json::object()) {
  json e = cfg;
  e["seed"] = c.seed;
  for (auto it = extra.begin(); it != extra.end(); ++it) e[it.key()] = it.value();
  return e;
}

struct SimulateArgs {
  std::string out_csv;
  std::string truth;
  int n = -1;
  double missing_prob = -1.0;
};

int cmd_simulate(const Common& c, const SimulateArgs& a) {
  const json cfg = load_config(c);
  const DatasetSchema schema = schema_from(cfg);
  if (schema.transfer_column.empty()) throw ConfigError("simulate needs schema.transfer_column");
  const BasisSpec spec = basis_from(cfg, schema);
  const json sim = cfg.contains("simulation") ? cfg.at("simulation") : json::object();
  const int n = a.n > 0 ? a.n : get_or<int>(sim, "n", 0);
  if (n <= 0) throw ConfigError("missing config key 'simulation.n' (or --n)");
  const double miss = a.missing_prob >= 0.0 ? a.missing_prob : get_or<double>(sim, "missing_prob", 0.0);

  const GroundTruthMarket market = market_from(cfg, spec);
  const MatchSample sample = draw_sample(market, n, miss, c.seed);
  save_sample(a.out_csv, sample, schema);
  log(LogLevel::Info, "wrote " + std::to_string(n) + " matches to " + a.out_csv);

  json t;
  t["version"] = library_version();
  t["seed"] = c.seed;
  t["n"] = n;
  t["n_observed"] = sample.n_observed();
  t["missing_prob"] = miss;
  t["theta_star"] = theta_json(market.theta_star);
  const Vector phi = market.theta_star.phi();
  t["phi_star"] = std::vector<double>(phi.data(), phi.data() + phi.size());
  t["theta_sample_normalization"] = theta_json(truth_for_sample(market, sample));
  t["grid_residual"] = marginal_residual(
      MatchingDensity{market.pi_star.array().log().matrix()}, market.worker_masses,
      market.firm_masses);
  if (!a.truth.empty()) write_text_file(a.truth, t.dump(2) + "\n");

  // The CSV is the main output; the summary goes only where it is asked for.
  if (!c.out.report.empty() || !c.out.table.empty()) {
    json r = t;
    r["data"] = a.out_csv;
    r["config"] = cfg;
    std::ostringstream tab;
    tab << "simulated market: " << market.grid_workers.rows() << " worker types x "
        << market.grid_firms.rows() << " firm types\n"
        << "matches drawn                " << n << "\n"
        << "transfers observed           " << sample.n_observed() << "\n"
        << "seed                         " << c.seed << "\n"
        << "grid marginal residual       " << fmt(t["grid_residual"].get<double>(), "%.2e") << "\n";
    for (int k = 0; k < spec.size(); ++k) {
      std::string label = "Phi*[" + spec.function(k).name() + "]";
      label.resize(std::max<std::size_t>(label.size() + 1, 29), ' ');
      tab << label << fmt(phi(k)) << "\n";
    }
    const Outputs& o = c.out;
    if (!o.report.empty()) {
      write_text_file(o.report, r.dump(2) + "\n");
      log(LogLevel::Info, "wrote " + o.report);
    }
    if (!o.table.empty()) {
      write_text_file(o.table, tab.str());
      log(LogLevel::Info, "wrote " + o.table);
    }
  }
  return kOk;
}

struct EstimateArgs {
  std::string data;
  bool concentrated = false;
  std::string reparam;
};

EstimationReport run_estimate(const json& cfg, const MatchSample& sample, const BasisSpec& spec,
                              bool concentrated, const std::string& reparam) {
  EstimatorOptions opts = estimator_from(cfg);
  if (!reparam.empty()) opts.reparam = reparameterization_from_string(reparam);
  return concentrated ? estimate_concentrated(sample, spec, opts) : estimate(sample, spec, opts);
}

int cmd_estimate(const Common& c, const EstimateArgs& a) {
  const json cfg = load_config(c);
  const DatasetSchema schema = schema_from(cfg);
  const BasisSpec spec = basis_from(cfg, schema);
  const LoadedSample data = load_sample(a.data, schema);
  log(LogLevel::Info, "loaded " + std::to_string(data.rows) + " rows, " +
                          std::to_string(data.missing) + " without transfers");
  const EstimationReport rep = run_estimate(cfg, data.sample, spec, a.concentrated, a.reparam);
  json extra;
  extra["data"] = a.data;
  extra["concentrated"] = a.concentrated;
  emit(c.out, report_to_json(rep, spec, echo(cfg, c, extra).dump()), format_table(rep, spec));
  if (!rep.convergence.converged) {
    log(LogLevel::Info, "estimation did not converge: " + rep.convergence.status);
    return kFailed;
  }
  return kOk;
}

struct GradcheckArgs {
  std::string data;
  int n = 20;
  double tol = 1e-5;
  double step = 1e-6;
};

int cmd_gradcheck(const Common& c, const GradcheckArgs& a) {
  const json cfg = load_config(c);
  const DatasetSchema schema = schema_from(cfg);
  const BasisSpec spec = basis_from(cfg, schema);
  const int K = spec.size();
  MatchSample sample;
  if (!a.data.empty()) {
    sample = load_sample(a.data, schema).sample;
  } else {
    sample = draw_sample(market_from(cfg, spec), a.n, 0.0, c.seed);
  }

  boost::random::mt19937_64 rng(c.seed ^ 0x9e3779b97f4a7c15ULL);
  boost::random::uniform_real_distribution<double> coef(-0.8, 0.8), scale(0.1, 0.6),
      loc(-1.0, 1.0), var(0.2, 1.0);
  Theta th = Theta::zeros(K);
  for (int k = 0; k < K; ++k) {
    const double av = coef(rng), gv = coef(rng);
    if (spec.alpha_mask()[k]) th.A(k) = av;
    if (spec.gamma_mask()[k]) th.Gamma(k) = gv;
  }
  th.sigma1 = scale(rng);
  th.sigma2 = scale(rng);
  th.t = loc(rng);
  th.s2 = var(rng);

  SolverOptions so{1e-13, 100000};
  Likelihood lik(sample, spec, so);
  const Vector g = lik.gradient(th);
  const Vector x = th.to_vector();
  json coords = json::array();
  double worst = 0.0;
  std::ostringstream table;
  table << "coordinate        analytic              finite-difference     rel.error\n";
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const bool masked = (i < K && !spec.alpha_mask()[i]) ||
                        (i >= K && i < 2 * K && !spec.gamma_mask()[i - K]);
    if (masked) continue;
    const double h = a.step * std::max(1.0, std::abs(x(i)));
    Vector xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    Likelihood lp(sample, spec, so), lm(sample, spec, so);
    const double fd =
        (lp.evaluate(Theta::from_vector(xp)).total - lm.evaluate(Theta::from_vector(xm)).total) /
        (2.0 * h);
    // Relative error with an absolute floor of tol * 1e-3.
    const double rel = std::abs(g(i) - fd) / std::max(std::abs(fd), 1e-3);
    worst = std::max(worst, rel);
    coords.push_back({{"name", parameter_name(spec, static_cast<int>(i))},
                      {"analytic", g(i)},
                      {"finite_difference", fd},
                      {"relative_error", rel}});
    char line[160];
    std::snprintf(line, sizeof line, "%-16s  %-20.12g  %-20.12g  %.3e\n",
                  parameter_name(spec, static_cast<int>(i)).c_str(), g(i), fd, rel);
    table << line;
  }
  const bool ok = worst <= a.tol;
  table << "max relative error " << fmt(worst, "%.3e") << (ok ? " <= " : " > ")
        << fmt(a.tol, "%.0e") << (ok ? "  PASS\n" : "  FAIL\n");
  json j;
  j["version"] = library_version();
  j["n"] = sample.n();
  j["theta"] = theta_json(th);
  j["coordinates"] = coords;
  j["max_relative_error"] = worst;
  j["tolerance"] = a.tol;
  j["pass"] = ok;
  json extra;
  extra["data"] = a.data;
  extra["n"] = a.n;
  j["config"] = echo(cfg, c, extra);
  emit(c.out, j.dump(2) + "\n", table.str());
  return ok ? kOk : kFailed;
}

struct AnalysisArgs {
  std::string data;
  std::string from_report;
  double cap = std::numeric_limits<double>::quiet_NaN();
};

VslUnits units_from(const json& cfg, const DatasetSchema& schema) {
  const json& an = require(cfg, "analysis", "");
  VslUnits u;
  u.risk_column = firm_column(require(an, "risk_column", "analysis"), schema);
  u.mean_earnings = get_or<double>(an, "mean_earnings", 1.0);
  u.risk_unit_scale = get_or<double>(an, "risk_unit_scale", 1.0);
  if (u.risk_column < 0 || u.risk_column >= static_cast<int>(schema.firm_columns.size())) {
    throw ConfigError("analysis.risk_column out of range");
  }
  return u;
}

// Theta from --from-report, else from a fresh full estimation on the data.
Theta obtain_theta(const json& cfg, const MatchSample& sample, const BasisSpec& spec,
                   const std::string& report, bool& converged) {
  converged = true;
  if (!report.empty()) return theta_from_report(report, spec);
  const EstimationReport rep = run_estimate(cfg, sample, spec, false, "");
  converged = rep.convergence.converged;
  if (rep.method == EstimationMethod::MatchingOnly) {
    throw ConfigError("analysis needs observed transfers to estimate theta");
  }
  return rep.theta_hat;
}

int cmd_vsl(const Common& c, const AnalysisArgs& a) {
  const json cfg = load_config(c);
  const DatasetSchema schema = schema_from(cfg);
  const BasisSpec spec = basis_from(cfg, schema);
  const VslUnits units = units_from(cfg, schema);
  const MatchSample sample = load_sample(a.data, schema).sample;
  bool converged = true;
  const Theta th = obtain_theta(cfg, sample, spec, a.from_report, converged);
  // Interaction bases are evaluated at the weighted mean worker.
  const Vector xbar = sample.workers().transpose() * sample.weights();
  const double slope = alpha_risk_slope(th, spec, units.risk_column,
                                        std::span<const double>(xbar.data(), xbar.size()));
  const double value = vsl(th, spec, units, std::span<const double>(xbar.data(), xbar.size()));
  json j;
  j["version"] = library_version();
  j["vsl"] = value;
  j["alpha_risk_slope"] = slope;
  j["sigma"] = th.sigma();
  j["mean_earnings"] = units.mean_earnings;
  j["risk_unit_scale"] = units.risk_unit_scale;
  j["theta"] = theta_json(th);
  j["note"] = "excludes productivity effects of fatality risk";
  json extra;
  extra["data"] = a.data;
  extra["from_report"] = a.from_report;
  j["config"] = echo(cfg, c, extra);
  std::ostringstream t;
  t << "value of a statistical life  " << fmt(value, "%.6g") << "\n"
    << "d alpha / d risk             " << fmt(slope, "%.6g") << "  (sigma = " << fmt(th.sigma())
    << ")\n"
    << "excludes productivity effects of fatality risk\n";
  emit(c.out, j.dump(2) + "\n", t.str());
  return converged ? kOk : kFailed;
}

int cmd_hedonic(const Common& c, const AnalysisArgs& a) {
  const json cfg = load_config(c);
  const DatasetSchema schema = schema_from(cfg);
  const VslUnits units = units_from(cfg, schema);
  const MatchSample sample = load_sample(a.data, schema).sample;
  const json& an = cfg.at("analysis");
  HedonicSpec hs;
  if (an.contains("hedonic_worker_columns")) {
    for (const auto& v : an.at("hedonic_worker_columns")) {
      hs.worker_columns.push_back(column_index(v, schema.worker_columns, "worker") -
                                  (v.is_number_integer() ? 0 : 1));
    }
  } else {
    for (int k = 0; k < sample.worker_dim(); ++k) hs.worker_columns.push_back(k);
  }
  if (an.contains("hedonic_firm_columns")) {
    for (const auto& v : an.at("hedonic_firm_columns")) hs.firm_columns.push_back(firm_column(v, schema));
  } else {
    for (int k = 0; k < sample.firm_dim(); ++k) hs.firm_columns.push_back(k);
  }
  const HedonicResult h = hedonic_baseline(sample, hs, units);
  json coefs = json::array();
  std::ostringstream t;
  t << "hedonic wage regression, " << h.n_rows << " rows with transfers\n";
  for (std::size_t k = 0; k < h.names.size(); ++k) {
    std::string name = h.names[k];
    if (name != "const") {
      const int idx = std::stoi(name.substr(1)) - 1;
      name = name[0] == 'x' ? schema.worker_columns[idx] : schema.firm_columns[idx];
    }
    coefs.push_back({{"name", name},
                     {"coef", h.fit.coef(static_cast<Eigen::Index>(k))},
                     {"se", jnum(h.fit.std_errors(static_cast<Eigen::Index>(k)))}});
    char line[128];
    std::snprintf(line, sizeof line, "%-16s %12.6f (%.6f)\n", name.c_str(),
                  h.fit.coef(static_cast<Eigen::Index>(k)),
                  h.fit.std_errors(static_cast<Eigen::Index>(k)));
    t << line;
  }
  t << "R2               " << fmt(h.fit.r_squared, "%.4f") << "\n"
    << "VSL (hedonic)    " << fmt(h.vsl_h, "%.6g") << "\n";
  json j;
  j["version"] = library_version();
  j["coefficients"] = coefs;
  j["r_squared"] = jnum(h.fit.r_squared);
  j["risk_coef"] = h.risk_coef;
  j["risk_se"] = jnum(h.risk_se);
  j["vsl_h"] = h.vsl_h;
  j["n_rows"] = h.n_rows;
  json extra;
  extra["data"] = a.data;
  j["config"] = echo(cfg, c, extra);
  emit(c.out, j.dump(2) + "\n", t.str());
  return kOk;
}

int cmd_counterfactual(const Common& c, const AnalysisArgs& a) {
  const json cfg = load_config(c);
  const DatasetSchema schema = schema_from(cfg);
  const BasisSpec spec = basis_from(cfg, schema);
  const VslUnits units = units_from(cfg, schema);
  const MatchSample sample = load_sample(a.data, schema).sample;
  double cap = a.cap;
  if (std::isnan(cap)) {
    const json& an = cfg.at("analysis");
    if (!an.contains("cap")) throw ConfigError("missing config key 'analysis.cap' (or --cap)");
    cap = an.at("cap").get<double>();
  }
  bool converged = true;
  const Theta th = obtain_theta(cfg, sample, spec, a.from_report, converged);
  const bool logs = schema.transform == TransferTransform::Log;
  if (!logs) {
    for (const auto& w : sample.transfers()) {
      if (w && *w < 0.0) {
        throw ConfigError("negative transfers have no Gini coefficient; if the column holds log "
                          "wages, store wages and set schema.transform to \"log\"");
      }
    }
  }
  const CounterfactualResult r =
      counterfactual(th, spec, sample, risk_cap(units.risk_column, cap), logs,
                     solver_from(cfg, SolverOptions{1e-12, 100000}));
  json j;
  j["version"] = library_version();
  j["cap"] = cap;
  j["risk_column"] = schema.firm_columns[units.risk_column];
  j["share_changed"] = r.share_changed;
  j["share_changed_definition"] =
      "half the L1 distance between the matching distributions before and after";
  j["mean_wage_before"] = r.mean_wage_before;
  j["mean_wage_after"] = r.mean_wage_after;
  j["mean_wage_change"] = r.mean_wage_change;
  j["gini_before"] = r.gini_before;
  j["gini_after"] = r.gini_after;
  j["gini_change"] = r.gini_before > 0.0 ? (r.gini_after - r.gini_before) / r.gini_before : 0.0;
  j["marginal_residual_after"] = r.residual_after;
  j["wage_scale"] = logs ? "exp(W)" : "W";
  j["theta"] = theta_json(th);
  json extra;
  extra["data"] = a.data;
  extra["from_report"] = a.from_report;
  extra["cap"] = cap;
  j["config"] = echo(cfg, c, extra);
  std::ostringstream t;
  t << "counterfactual: " << schema.firm_columns[units.risk_column] << " capped at "
    << fmt(cap) << "\n"
    << "share of workers changing jobs   " << fmt(100.0 * r.share_changed, "%.3f") << " %\n"
    << "mean wage change                 " << fmt(100.0 * r.mean_wage_change, "%.3f") << " %\n"
    << "Gini before / after              " << fmt(r.gini_before, "%.5f") << " / "
    << fmt(r.gini_after, "%.5f") << "\n"
    << "marginal residual after          " << fmt(r.residual_after, "%.2e") << "\n";
  emit(c.out, j.dump(2) + "\n", t.str());
  return converged ? kOk : kFailed;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Maximum-likelihood estimation of matching markets with transfers"};
  app.set_version_flag("--version", library_version());
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "JSON configuration file")->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--spec", common.spec, "JSON file merged over the configuration")
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", common.seed, "Random seed");
    sub->add_option("--report", common.out.report, "Write the JSON report here");
    sub->add_option("--table", common.out.table, "Write the text table here");
  };

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Draw a sample from a simulated market");
  add_common(simulate);
  simulate->add_option("--out", sim.out_csv, "Output CSV")->required();
  simulate->add_option("--truth", sim.truth, "Write the ground truth as JSON");
  simulate->add_option("--n", sim.n, "Number of matches (overrides simulation.n)");
  simulate->add_option("--missing-prob", sim.missing_prob, "Probability a transfer is dropped")
      ->check(CLI::Range(0.0, 1.0));

  EstimateArgs est;
  auto* estimate_cmd = app.add_subcommand("estimate", "Maximum-likelihood estimation");
  add_common(estimate_cmd);
  estimate_cmd->add_option("--data", est.data, "Input CSV")->required()->check(CLI::ExistingFile);
  estimate_cmd->add_flag("--concentrated", est.concentrated, "Profile out sigma1, sigma2, t, s2");
  estimate_cmd->add_option("--reparam", est.reparam, "exp or softplus")
      ->check(CLI::IsMember({"exp", "softplus"}));

  GradcheckArgs gc;
  auto* gradcheck = app.add_subcommand("gradcheck", "Analytic gradient against finite differences");
  add_common(gradcheck);
  gradcheck->add_option("--data", gc.data, "Input CSV (default: simulate from the market)")
      ->check(CLI::ExistingFile);
  gradcheck->add_option("--n", gc.n, "Matches to simulate when no data is given");
  gradcheck->add_option("--tol", gc.tol, "Maximum relative error");
  gradcheck->add_option("--step", gc.step, "Finite-difference step");

  AnalysisArgs vsl_args;
  auto* vsl_cmd = app.add_subcommand("vsl", "Value of a statistical life from the estimates");
  add_common(vsl_cmd);
  vsl_cmd->add_option("--data", vsl_args.data, "Input CSV")->required()->check(CLI::ExistingFile);
  vsl_cmd->add_option("--from-report", vsl_args.from_report, "Estimation report to read theta from")
      ->check(CLI::ExistingFile);

  AnalysisArgs cf_args;
  auto* cf_cmd = app.add_subcommand("counterfactual", "Equilibrium after capping firm risk");
  add_common(cf_cmd);
  cf_cmd->add_option("--data", cf_args.data, "Input CSV")->required()->check(CLI::ExistingFile);
  cf_cmd->add_option("--from-report", cf_args.from_report, "Estimation report to read theta from")
      ->check(CLI::ExistingFile);
  cf_cmd->add_option("--cap", cf_args.cap, "Risk cap (overrides analysis.cap)");

  AnalysisArgs hd_args;
  auto* hd_cmd = app.add_subcommand("hedonic", "Hedonic wage regression baseline");
  add_common(hd_cmd);
  hd_cmd->add_option("--data", hd_args.data, "Input CSV")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*simulate) return cmd_simulate(common, sim);
    if (*estimate_cmd) return cmd_estimate(common, est);
    if (*gradcheck) return cmd_gradcheck(common, gc);
    if (*vsl_cmd) return cmd_vsl(common, vsl_args);
    if (*cf_cmd) return cmd_counterfactual(common, cf_args);
    if (*hd_cmd) return cmd_hedonic(common, hd_args);
  } catch (const ConfigError& e) {
    std::cerr << "jobmatch: configuration error: " << e.what() << "\n";
    return kUsage;
  } catch (const ParseError& e) {
    std::cerr << "jobmatch: input error: " << e.what() << "\n";
    return kUsage;
  } catch (const json::exception& e) {
    std::cerr << "jobmatch: configuration error: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    std::cerr << "jobmatch: " << e.what() << "\n";
    return kFailed;
  }
  return kUsage;
}

}  // namespace jobmatch
