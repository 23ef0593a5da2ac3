#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "jobmatch/analysis.hpp"
#include "jobmatch/error.hpp"
#include "jobmatch/estimator.hpp"
#include "jobmatch/likelihood.hpp"
#include "jobmatch/market_sim.hpp"
#include "jobmatch/report.hpp"

namespace py = pybind11;
using namespace jobmatch;

namespace {

BasisSpec products(const std::vector<std::pair<int, int>>& pairs, std::vector<bool> alpha_mask,
                   std::vector<bool> gamma_mask) {
  std::vector<BasisFunction> f;
  f.reserve(pairs.size());
  for (const auto& [k, l] : pairs) f.push_back(BasisFunction::product(k, l));
  return BasisSpec(std::move(f), std::move(alpha_mask), std::move(gamma_mask));
}

SolverOptions solver(double tol, int max_iter) { return SolverOptions{tol, max_iter, true}; }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Maximum likelihood estimation of matching markets with transfers";
  m.attr("__version__") = library_version();

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());
  py::register_exception<ConvergenceError>(m, "ConvergenceError", base.ptr());
  py::register_exception<LinearAlgebraError>(m, "LinearAlgebraError", base.ptr());
  py::register_exception<RankDeficiencyError>(m, "RankDeficiencyError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());

  py::class_<Theta>(m, "Theta")
      .def(py::init([](Vector A, Vector Gamma, double sigma1, double sigma2, double t, double s2) {
             return Theta{std::move(A), std::move(Gamma), sigma1, sigma2, t, s2};
           }),
           py::arg("A"), py::arg("Gamma"), py::arg("sigma1"), py::arg("sigma2"),
           py::arg("t") = 0.0, py::arg("s2") = 1.0)
      .def_readwrite("A", &Theta::A)
      .def_readwrite("Gamma", &Theta::Gamma)
      .def_readwrite("sigma1", &Theta::sigma1)
      .def_readwrite("sigma2", &Theta::sigma2)
      .def_readwrite("t", &Theta::t)
      .def_readwrite("s2", &Theta::s2)
      .def_property_readonly("phi", &Theta::phi)
      .def("to_vector", &Theta::to_vector)
      .def_static("from_vector", &Theta::from_vector)
      .def("__repr__", [](const Theta& th) {
        return "Theta(K=" + std::to_string(th.K()) + ", sigma1=" + std::to_string(th.sigma1) +
               ", sigma2=" + std::to_string(th.sigma2) + ")";
      });

  py::class_<BasisSpec>(m, "BasisSpec")
      .def(py::init(&products), py::arg("products"), py::arg("alpha_mask"), py::arg("gamma_mask"),
           "Bilinear bases x^(k) y^(l); index 0 is the constant, k >= 1 is covariate column k-1.")
      .def_property_readonly("size", &BasisSpec::size)
      .def_property_readonly("names", [](const BasisSpec& s) {
        std::vector<std::string> out;
        for (const auto& f : s.functions()) out.push_back(f.name());
        return out;
      });

  py::class_<MatchSample>(m, "MatchSample")
      .def(py::init<RowMatrix, RowMatrix, Transfers, Vector>(), py::arg("workers"),
           py::arg("firms"), py::arg("transfers") = Transfers{}, py::arg("weights") = Vector())
      .def_property_readonly("n", &MatchSample::n)
      .def_property_readonly("n_observed", &MatchSample::n_observed)
      .def_property_readonly("workers", &MatchSample::workers)
      .def_property_readonly("firms", &MatchSample::firms)
      .def_property_readonly("transfers", &MatchSample::transfers)
      .def_property_readonly("weights", &MatchSample::weights);

  py::class_<GroundTruthMarket>(m, "Market")
      .def_readonly("grid_workers", &GroundTruthMarket::grid_workers)
      .def_readonly("worker_masses", &GroundTruthMarket::worker_masses)
      .def_readonly("grid_firms", &GroundTruthMarket::grid_firms)
      .def_readonly("firm_masses", &GroundTruthMarket::firm_masses)
      .def_readonly("theta_star", &GroundTruthMarket::theta_star)
      .def_readonly("pi_star", &GroundTruthMarket::pi_star)
      .def_readonly("w_star", &GroundTruthMarket::w_star);

  m.def("build_market",
        [](RowMatrix X, Vector wx, RowMatrix Y, Vector wy, const Theta& th, const BasisSpec& spec) {
          return build_market(std::move(X), std::move(wx), std::move(Y), std::move(wy), th, spec);
        },
        py::arg("grid_workers"), py::arg("worker_masses"), py::arg("grid_firms"),
        py::arg("firm_masses"), py::arg("theta"), py::arg("spec"));
  m.def("draw_sample", &draw_sample, py::arg("market"), py::arg("n"),
        py::arg("missing_prob") = 0.0, py::arg("seed") = 0);
  m.def("truth_for_sample", &truth_for_sample, py::arg("market"), py::arg("sample"));
  m.def("linspace_grid", &linspace_grid, py::arg("m"), py::arg("lo"), py::arg("hi"));

  m.def("solve_potentials",
        [](const Matrix& phi, const Vector& row_mass, const Vector& col_mass, double tol,
           int max_iter) {
          const auto p = solve_potentials(phi, row_mass, col_mass, SolverOptions{tol, max_iter});
          return py::make_tuple(p.a, p.b, p.iterations, p.residual);
        },
        py::arg("phi"), py::arg("row_mass"), py::arg("col_mass"), py::arg("tol") = 1e-10,
        py::arg("max_iter") = 10000, "Returns (a, b, iterations, residual) with a[0] == 0.");

  py::class_<LikelihoodBreakdown>(m, "LogLikelihood")
      .def_readonly("logL1", &LikelihoodBreakdown::logL1)
      .def_readonly("logL2", &LikelihoodBreakdown::logL2)
      .def_readonly("binomial", &LikelihoodBreakdown::binomial)
      .def_readonly("total", &LikelihoodBreakdown::total)
      .def_readonly("n_observed_transfers", &LikelihoodBreakdown::n_observed_transfers);

  m.def("log_likelihood",
        [](const Theta& th, const BasisSpec& spec, const MatchSample& s, double tol) {
          return log_likelihood(th, spec, s, solver(tol, 10000));
        },
        py::arg("theta"), py::arg("spec"), py::arg("sample"), py::arg("tol") = 1e-12);
  m.def("gradient",
        [](const Theta& th, const BasisSpec& spec, const MatchSample& s, double tol) {
          return gradient(th, spec, s, solver(tol, 10000));
        },
        py::arg("theta"), py::arg("spec"), py::arg("sample"), py::arg("tol") = 1e-12);

  py::class_<EstimationReport>(m, "EstimationReport")
      .def_property_readonly("method", [](const EstimationReport& r) { return to_string(r.method); })
      .def_readonly("theta_hat", &EstimationReport::theta_hat)
      .def_readonly("phi_hat", &EstimationReport::phi_hat)
      .def_readonly("std_errors", &EstimationReport::std_errors)
      .def_readonly("phi_std_errors", &EstimationReport::phi_std_errors)
      .def_readonly("std_error_status", &EstimationReport::std_error_status)
      .def_readonly("loglik", &EstimationReport::loglik)
      .def_readonly("r_squared", &EstimationReport::r_squared)
      .def_readonly("phi_identified", &EstimationReport::phi_identified)
      .def_readonly("warnings", &EstimationReport::warnings)
      .def_readonly("n", &EstimationReport::n)
      .def_readonly("n_observed", &EstimationReport::n_observed)
      .def_property_readonly("converged",
                             [](const EstimationReport& r) { return r.convergence.converged; })
      .def_property_readonly("iterations",
                             [](const EstimationReport& r) { return r.convergence.iterations; });

  m.def("estimate",
        [](const MatchSample& s, const BasisSpec& spec, bool concentrated, bool std_errors,
           double grad_tol) {
          EstimatorOptions o;
          o.compute_std_errors = std_errors;
          o.optimizer.grad_tol = grad_tol;
          return concentrated ? estimate_concentrated(s, spec, o) : estimate(s, spec, o);
        },
        py::arg("sample"), py::arg("spec"), py::arg("concentrated") = false,
        py::arg("std_errors") = true, py::arg("grad_tol") = 1e-6);
  m.def("format_table", &format_table, py::arg("report"), py::arg("spec"));
  m.def("report_json", &report_to_json, py::arg("report"), py::arg("spec"),
        py::arg("config_json") = "{}");

  m.def("vsl",
        [](const Theta& th, const BasisSpec& spec, int risk_column, double mean_earnings,
           double scale, std::vector<double> worker) {
          return vsl(th, spec, VslUnits{risk_column, mean_earnings, scale}, worker);
        },
        py::arg("theta"), py::arg("spec"), py::arg("risk_column"), py::arg("mean_earnings"),
        py::arg("risk_unit_scale") = 1.0, py::arg("worker") = std::vector<double>{});
  m.def("hedonic_vsl",
        [](const MatchSample& s, std::vector<int> wcols, std::vector<int> fcols, int risk_column,
           double mean_earnings, double scale) {
          const auto h = hedonic_baseline(s, HedonicSpec{std::move(wcols), std::move(fcols), true},
                                          VslUnits{risk_column, mean_earnings, scale});
          py::dict d;
          d["names"] = h.names;
          d["coef"] = h.fit.coef;
          d["std_errors"] = h.fit.std_errors;
          d["risk_coef"] = h.risk_coef;
          d["risk_se"] = h.risk_se;
          d["vsl_h"] = h.vsl_h;
          d["n_rows"] = h.n_rows;
          return d;
        },
        py::arg("sample"), py::arg("worker_columns"), py::arg("firm_columns"),
        py::arg("risk_column"), py::arg("mean_earnings"), py::arg("risk_unit_scale") = 1.0);
  m.def("gini", &gini, py::arg("values"), py::arg("weights") = Vector());
  m.def("risk_cap_counterfactual",
        [](const Theta& th, const BasisSpec& spec, const MatchSample& s, int column, double cap,
           bool log_transfers) {
          const auto r = counterfactual(th, spec, s, risk_cap(column, cap), log_transfers);
          py::dict d;
          d["pi_before"] = r.pi_before;
          d["pi_after"] = r.pi_after;
          d["mean_wage_before"] = r.mean_wage_before;
          d["mean_wage_after"] = r.mean_wage_after;
          d["mean_wage_change"] = r.mean_wage_change;
          d["share_changed"] = r.share_changed;
          d["gini_before"] = r.gini_before;
          d["gini_after"] = r.gini_after;
          d["residual_after"] = r.residual_after;
          return d;
        },
        py::arg("theta"), py::arg("spec"), py::arg("sample"), py::arg("risk_column"),
        py::arg("cap"), py::arg("log_transfers") = true);
}
