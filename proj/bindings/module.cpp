#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <filesystem>
#include <vector>

#include "quasistab/errors.hpp"
#include "quasistab/fmcf.hpp"
#include "quasistab/grid.hpp"
#include "quasistab/heleshaw.hpp"
#include "quasistab/lab.hpp"
#include "quasistab/rd.hpp"

namespace py = pybind11;
using namespace quasistab;

namespace {

py::dict fit_to_dict(const DecayFit& fit) {
  py::dict d;
  d["omega_fit"] = fit.omega_fit;
  d["k_fit"] = fit.k_fit;
  d["t_lo"] = fit.t_lo;
  d["t_hi"] = fit.t_hi;
  d["residual"] = fit.residual;
  d["floor"] = fit.floor;
  d["window_ok"] = fit.window_ok;
  return d;
}

py::dict exponents_to_dict(const RdExponents& e) {
  py::dict d;
  d["n"] = e.n;
  d["p"] = e.p;
  d["kappa"] = e.kappa;
  d["tau"] = e.tau;
  d["s_bar"] = e.s_bar;
  d["s_c"] = e.s_c;
  d["s"] = e.s;
  d["mu"] = e.mu;
  d["alpha_crit"] = e.alpha_crit;
  return d;
}

py::dict report_to_dict(const RunReport& rep) {
  py::dict d;
  d["scenario"] = rep.scenario;
  d["model"] = rep.model;
  d["status"] = rep.status;
  d["detail"] = rep.detail;
  py::dict cond;
  cond["rank"] = rep.rank_ok;
  cond["tangent"] = rep.tangent_ok;
  cond["semisimple"] = rep.semisimple_ok;
  cond["spectrum"] = rep.spectrum_ok;
  d["conditions"] = cond;
  d["gap"] = rep.gap;
  d["omega_fit"] = rep.omega_fit;
  d["x_hat"] = rep.x_hat;
  d["limit_residual"] = rep.limit_residual;
  d["weighted_k"] = rep.weighted_k;
  d["extras"] = rep.extras;
  d["csv_path"] = rep.csv_path;
  d["svg_path"] = rep.svg_path;
  d["json_path"] = rep.json_path;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "numerical laboratory for quasilinear parabolic stability";

  py::register_exception<Error>(m, "QuasistabError");
  py::register_exception<ConfigError>(m, "ConfigError");
  py::register_exception<ConstraintError>(m, "ConstraintError");
  py::register_exception<InsufficientDataError>(m, "InsufficientDataError");

  m.def("hs_symbol", &hs_symbol, py::arg("k"),
        "Fourier multiplier of the linearized Hele-Shaw flow");
  m.def("hs_gap", &hs_gap, py::arg("k_trunc") = 256,
        "spectral gap of the linearized Hele-Shaw flow");

  m.def("critical_weight_exponent", &critical_weight_exponent, py::arg("q"),
        py::arg("xi"), py::arg("gamma"),
        "smallest admissible weight exponent; -inf in the q = 1 limit");

  m.def(
      "rd_exponents",
      [](int n, double p, double kappa, double tau) {
        return exponents_to_dict(rd_exponents(n, p, kappa, tau));
      },
      py::arg("n"), py::arg("p"), py::arg("kappa"), py::arg("tau"),
      "exponent bookkeeping for the gradient reaction-diffusion model");

  m.def(
      "fit_decay",
      [](const std::vector<double>& times, const std::vector<double>& norms,
         double floor) { return fit_to_dict(fit_decay(times, norms, floor)); },
      py::arg("times"), py::arg("norms"), py::arg("floor") = -1.0,
      "log-linear decay fit over the largest admissible trailing window");

  m.def("weighted_norm_track", &weighted_norm_track, py::arg("times"),
        py::arg("norm_alpha"), py::arg("norm_xi"), py::arg("mu"),
        py::arg("omega"), py::arg("u0_norm"),
        "empirical constant of the time-weighted decay estimate");

  m.def(
      "fmcf_symbol_table",
      [](double sigma, int n_points, int k_max) {
        FmcfConfig cfg;
        cfg.sigma = sigma;
        cfg.grid = PeriodicGrid(n_points);
        const FmcfSymbolFit fit = fmcf_numeric_symbol(cfg, k_max);
        py::dict d;
        d["table"] = fit.table;
        d["omega0"] = fit.omega0;
        d["p_fit"] = fit.p_fit;
        d["max_leakage"] = fit.max_leakage;
        return d;
      },
      py::arg("sigma") = 0.5, py::arg("n_points") = 256,
      py::arg("k_max") = 32,
      "numeric multiplier of the fractional curvature flow at the flat state");

  m.def(
      "run_scenario",
      [](const std::filesystem::path& config,
         const std::filesystem::path& out_dir, std::uint64_t seed) {
        return report_to_dict(run_scenario(config, out_dir, seed));
      },
      py::arg("config"), py::arg("out_dir"), py::arg("seed") = 0,
      "run a scenario config end to end and write its artifacts");
}
