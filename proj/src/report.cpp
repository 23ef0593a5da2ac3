#include "jobmatch/report.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace jobmatch {

namespace {

using json = nlohmann::ordered_json;

std::string num(double v, const char* fmt = "%.4f") {
  if (!std::isfinite(v)) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

std::string cell(double coef, double se, bool present) {
  if (!present) return ".";
  std::string s = num(coef);
  if (std::isfinite(se)) s += " (" + num(se) + ")";
  return s;
}

std::string pad(const std::string& s, std::size_t w) {
  return s.size() >= w ? s + " " : s + std::string(w - s.size(), ' ');
}

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json vec(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(number(v(i)));
  return a;
}

}  // namespace

std::string library_version() { return JOBMATCH_VERSION; }

std::string format_table(const EstimationReport& r, const BasisSpec& spec) {
  const int K = spec.size();
  const bool matching_only = r.method == EstimationMethod::MatchingOnly;
  auto se_at = [&](int idx) {
    return idx < r.std_errors.size() ? r.std_errors(idx)
                                     : std::numeric_limits<double>::quiet_NaN();
  };
  std::ostringstream out;
  const std::string rule(86, '-');
  out << "Estimation (" << to_string(r.method) << " likelihood)   n = " << r.n
      << ", observed transfers = " << r.n_observed << "\n"
      << rule << "\n"
      << pad("basis", 16) << pad("alpha (A)", 24) << pad("gamma (Gamma)", 24) << "phi = A + Gamma\n"
      << rule << "\n";
  for (int k = 0; k < K; ++k) {
    const std::string a = matching_only ? (spec.alpha_mask()[k] ? "unidentified" : ".")
                                        : cell(r.theta_hat.A(k), se_at(k), spec.alpha_mask()[k]);
    const std::string g = matching_only ? (spec.gamma_mask()[k] ? "unidentified" : ".")
                                        : cell(r.theta_hat.Gamma(k), se_at(K + k), spec.gamma_mask()[k]);
    const bool phi_ok = k < static_cast<int>(r.phi_identified.size()) && r.phi_identified[k];
    const std::string p = phi_ok ? cell(r.phi_hat(k), r.phi_std_errors(k), true) : "unidentified";
    out << pad(spec.function(k).name(), 16) << pad(a, 24) << pad(g, 24) << p << "\n";
  }
  out << rule << "\n";
  if (!matching_only) {
    const char* names[] = {"sigma1", "sigma2", "t", "s2"};
    const double vals[] = {r.theta_hat.sigma1, r.theta_hat.sigma2, r.theta_hat.t, r.theta_hat.s2};
    for (int j = 0; j < 4; ++j) {
      std::string line = cell(vals[j], se_at(2 * K + j), true);
      if (j < 2 && r.sigma_on_boundary[j]) line += "  [boundary]";
      out << pad(names[j], 16) << line << "\n";
    }
    out << rule << "\n";
  }
  out << pad("log-likelihood", 16) << num(r.loglik.total, "%.6f") << "   (matching "
      << num(r.loglik.logL1, "%.6f") << ", transfers " << num(r.loglik.logL2, "%.6f") << ")\n";
  out << pad("R2 (transfers)", 16) << num(r.r_squared) << "\n";
  out << pad("convergence", 16) << r.convergence.status << ", " << r.convergence.iterations
      << " iterations, |grad| = " << num(r.convergence.grad_norm, "%.2e") << "\n";
  out << rule << "\n"
      << "Standard errors in parentheses, from the Hessian of the log-likelihood ("
      << r.std_error_status << ").\n";
  for (const auto& w : r.warnings) out << "note: " << w << "\n";
  return out.str();
}

std::string report_to_json(const EstimationReport& r, const BasisSpec& spec,
                           const std::string& config_json) {
  const int K = spec.size();
  json j;
  j["version"] = library_version();
  j["method"] = to_string(r.method);
  json bases = json::array();
  for (int k = 0; k < K; ++k) {
    json b;
    b["name"] = spec.function(k).name();
    b["alpha"] = static_cast<bool>(spec.alpha_mask()[k]);
    b["gamma"] = static_cast<bool>(spec.gamma_mask()[k]);
    b["shared"] = spec.shared(k);
    b["A"] = spec.alpha_mask()[k] && r.split_identified ? number(r.theta_hat.A(k)) : json(nullptr);
    b["Gamma"] =
        spec.gamma_mask()[k] && r.split_identified ? number(r.theta_hat.Gamma(k)) : json(nullptr);
    b["A_se"] = r.split_identified && k < r.std_errors.size() ? number(r.std_errors(k)) : json(nullptr);
    b["Gamma_se"] = r.split_identified && K + k < r.std_errors.size() ? number(r.std_errors(K + k))
                                                                      : json(nullptr);
    b["phi"] = number(r.phi_hat(k));
    b["phi_se"] = number(r.phi_std_errors(k));
    b["phi_identified"] = k < static_cast<int>(r.phi_identified.size()) && r.phi_identified[k];
    bases.push_back(b);
  }
  j["bases"] = bases;
  j["split_identified"] = r.split_identified;
  json th;
  th["sigma1"] = number(r.theta_hat.sigma1);
  th["sigma2"] = number(r.theta_hat.sigma2);
  th["t"] = number(r.theta_hat.t);
  th["s2"] = number(r.theta_hat.s2);
  th["flat"] = vec(r.theta_hat.to_vector());
  th["std_errors"] = vec(r.std_errors);
  j["theta"] = th;
  j["sigma_on_boundary"] = r.sigma_on_boundary;
  j["std_error_status"] = r.std_error_status;
  j["loglik"] = {{"total", number(r.loglik.total)},
                 {"logL1", number(r.loglik.logL1)},
                 {"logL2", number(r.loglik.logL2)},
                 {"binomial", number(r.loglik.binomial)},
                 {"n_observed_transfers", r.loglik.n_observed_transfers}};
  j["r_squared"] = number(r.r_squared);
  j["convergence"] = {{"converged", r.convergence.converged},
                      {"status", r.convergence.status},
                      {"iterations", r.convergence.iterations},
                      {"evaluations", r.convergence.evaluations},
                      {"grad_norm", number(r.convergence.grad_norm)}};
  j["n"] = r.n;
  j["n_observed"] = r.n_observed;
  j["warnings"] = r.warnings;
  const auto& o = r.options;
  j["options"] = {{"solver_tol", o.solver.tol},
                  {"solver_max_iter", o.solver.max_iter},
                  {"solver_polish", o.solver.polish},
                  {"grad_tol", o.optimizer.grad_tol},
                  {"max_iter", o.optimizer.max_iter},
                  {"reparam", to_string(o.reparam)},
                  {"boundary_tol", o.boundary_tol},
                  {"hessian_step", o.hessian_step}};
  j["config"] = json::parse(config_json);
  return j.dump(2) + "\n";
}

}  // namespace jobmatch
