#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "quasistab/acceptance.hpp"
#include "quasistab/errors.hpp"
#include "quasistab/fmcf.hpp"
#include "quasistab/heleshaw.hpp"
#include "quasistab/io.hpp"
#include "quasistab/lab.hpp"
#include "quasistab/manifold.hpp"
#include "quasistab/rd.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;
using namespace quasistab;

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) throw ConfigError("cannot open config " + path);
  return json::parse(in);
}

int geti(const json& j, const char* key, int fallback) {
  return j.contains(key) ? j.at(key).get<int>() : fallback;
}

double getd(const json& j, const char* key, double fallback) {
  return j.contains(key) ? j.at(key).get<double>() : fallback;
}

/// Spectral summary of the configured model: multiplier or eigenvalue table,
/// kernel dimension and gap. Shared by the spectrum and linearize commands.
struct SpectrumInfo {
  json table = json::array();
  int kernel_dim = 0;
  double gap = 0.0;
  json extra = json::object();
};

SpectrumInfo spectrum_info(const std::string& config) {
  const json cfg = load_config(config);
  const std::string model = cfg.at("model").get<std::string>();
  const json params = cfg.value("params", json::object());
  SpectrumInfo info;

  if (model == "heleshaw") {
    for (int k = 0; k <= 16; ++k) {
      info.table.push_back({{"k", k}, {"value", hs_symbol(k)}});
      if (hs_symbol(k) == 0.0) info.kernel_dim += (k == 0) ? 1 : 2;
    }
    info.gap = hs_gap(geti(params, "k_trunc", 256));
  } else if (model == "fmcf") {
    FmcfConfig fc;
    fc.sigma = getd(params, "sigma", 0.5);
    const int n = geti(params, "n_points", 256);
    fc.grid = PeriodicGrid(n);
    const int k_max = geti(params, "k_max", std::min(32, n / 4));
    const FmcfSymbolFit fit = fmcf_numeric_symbol(fc, k_max);
    for (int k = 0; k <= k_max; ++k)
      info.table.push_back({{"k", k}, {"value", fit.table[k]}});
    info.kernel_dim = 1;
    info.gap = -fit.table[1];
    info.extra["omega0"] = fit.omega0;
    info.extra["p_fit"] = fit.p_fit;
  } else if (model == "manifold") {
    Eigen::VectorXd u_star;
    const QuasilinearSystem sys =
        manifold_system_from_config(config, &u_star);
    const Eigen::MatrixXd M = linearize_at(sys, u_star);
    const Eigen::EigenSolver<Eigen::MatrixXd> es(M);
    for (int i = 0; i < M.rows(); ++i)
      info.table.push_back({{"re", es.eigenvalues()(i).real()},
                            {"im", es.eigenvalues()(i).imag()}});
    const SpectralSplit split = spectral_split(M);
    info.kernel_dim = split.kernel_dim;
    info.gap = split.gap;
    json rows = json::array();
    for (int r = 0; r < M.rows(); ++r) {
      json row = json::array();
      for (int c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
      rows.push_back(row);
    }
    info.extra["matrix"] = rows;
  } else if (model == "rd") {
    RdConfig rc;
    rc.length = getd(params, "L", 1.0);
    rc.n_cells = geti(params, "n_cells", 256);
    rc.kappa = getd(params, "kappa", 4.0);
    rc.a_min = getd(params, "a_min", 0.5);
    double base = 0.0;
    if (cfg.contains("experiment") && cfg.at("experiment").contains("u0"))
      base = getd(cfg.at("experiment").at("u0"), "mean", 0.0);
    const double a = rd_diffusivity(rc, base);
    const double h = rc.length / rc.n_cells;
    for (int k = 0; k <= 8; ++k) {
      const double lam =
          -a * (2.0 - 2.0 * std::cos(std::numbers::pi * k / rc.n_cells)) /
          (h * h);
      info.table.push_back({{"k", k}, {"value", lam}});
    }
    info.kernel_dim = 1;
    info.gap = a * (2.0 - 2.0 * std::cos(std::numbers::pi / rc.n_cells)) /
               (h * h);
    info.extra["diffusivity_at_base"] = a;
  } else {
    throw ConfigError(
        "config: key 'model' must be one of manifold, fmcf, heleshaw, rd");
  }
  return info;
}

void write_info(const SpectrumInfo& info, const std::string& out_dir,
                const char* leaf) {
  json j;
  j["table"] = info.table;
  j["kernel_dim"] = info.kernel_dim;
  j["gap"] = std::isfinite(info.gap) ? json(info.gap)
                                     : json(format_double(info.gap));
  j["extra"] = info.extra;
  write_text_atomic(fs::path(out_dir) / leaf, j.dump(2) + "\n");
}

int run_report(const std::string& config, const std::string& out_dir,
               std::uint64_t seed, bool full) {
  const RunReport rep = run_scenario(config, out_dir, seed);
  std::printf("scenario %s (%s): %s\n", rep.scenario.c_str(),
              rep.model.c_str(), rep.status.c_str());
  if (!rep.detail.empty()) std::printf("  %s\n", rep.detail.c_str());
  if (rep.status == "ok" && full) {
    std::printf("  conditions: rank %s, tangent %s, semisimple %s, "
                "spectrum %s\n",
                rep.rank_ok ? "ok" : "FAIL", rep.tangent_ok ? "ok" : "FAIL",
                rep.semisimple_ok ? "ok" : "FAIL",
                rep.spectrum_ok ? "ok" : "FAIL");
    std::printf("  gap %s, fitted rate %s, weighted constant %s\n",
                format_double(rep.gap).c_str(),
                format_double(rep.omega_fit).c_str(),
                format_double(rep.weighted_k).c_str());
    std::printf("  limit residual %s\n",
                format_double(rep.limit_residual).c_str());
  }
  if (!rep.json_path.empty())
    std::printf("  report: %s\n", rep.json_path.c_str());
  return rep.status == "ok" ? 0 : 1;
}

std::vector<double> csv_column(const fs::path& path, const std::string& name) {
  std::ifstream in(path);
  if (!in.good()) throw ConfigError("cannot open csv " + path.string());
  std::string line;
  if (!std::getline(in, line))
    throw ConfigError("csv " + path.string() + " is empty");
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    return cells;
  };
  const std::vector<std::string> headers = split(line);
  std::size_t col = headers.size();
  for (std::size_t i = 0; i < headers.size(); ++i)
    if (headers[i] == name) col = i;
  if (col == headers.size())
    throw ConfigError("csv has no column named '" + name + "'");
  std::vector<double> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> cells = split(line);
    if (cells.size() != headers.size())
      throw ConfigError("ragged csv row in " + path.string());
    out.push_back(std::strtod(cells[col].c_str(), nullptr));
  }
  return out;
}

int run_fit(const std::string& config, const std::string& out_dir) {
  const json cfg = load_config(config);
  std::vector<double> times, norms;
  if (cfg.contains("csv")) {
    const fs::path csv = fs::path(config).parent_path() /
                         cfg.at("csv").get<std::string>();
    times = csv_column(csv, cfg.value("time_column", "t"));
    norms = csv_column(csv, cfg.value("norm_column", "norm"));
  } else {
    times = cfg.at("times").get<std::vector<double>>();
    norms = cfg.at("norms").get<std::vector<double>>();
  }
  const DecayFit fit = fit_decay(times, norms, cfg.value("floor", -1.0));
  std::printf("rate %s over [%s, %s], prefactor %s, rms %s%s\n",
              format_double(fit.omega_fit).c_str(),
              format_double(fit.t_lo).c_str(),
              format_double(fit.t_hi).c_str(),
              format_double(fit.k_fit).c_str(),
              format_double(fit.residual).c_str(),
              fit.window_ok ? "" : " (no window met the residual target)");
  json j;
  j["omega_fit"] = fit.omega_fit;
  j["k_fit"] = fit.k_fit;
  j["t_lo"] = fit.t_lo;
  j["t_hi"] = fit.t_hi;
  j["residual"] = fit.residual;
  j["floor"] = fit.floor;
  j["window_ok"] = fit.window_ok;
  write_text_atomic(fs::path(out_dir) / "fit.json", j.dump(2) + "\n");
  return 0;
}

int run_verify(std::uint64_t seed, const std::string& out_dir) {
  const AcceptanceOutcome outcome = run_acceptance(seed);
  for (const auto& r : outcome.results)
    std::printf("[%2d] %s %-28s (%7.2f s / %g s budget)  %s\n", r.number,
                r.ok() ? "PASS" : "FAIL", r.name.c_str(), r.seconds, r.budget,
                r.detail.c_str());
  std::printf("acceptance: %s, total %.2f s\n",
              outcome.all_passed ? "all criteria passed" : "FAILURES above",
              outcome.total_seconds);
  write_text_atomic(fs::path(out_dir) / "report.json",
                    acceptance_to_json(outcome));
  return outcome.all_passed ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"numerical laboratory for quasilinear parabolic stability"};
  app.require_subcommand(1);

  std::string config, out_dir = "out";
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("--config", config, "scenario config (json)");
    if (needs_config) opt->required();
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "seed for randomized checks");
  };

  CLI::App* sim = app.add_subcommand("simulate", "run the configured model");
  CLI::App* rep = app.add_subcommand(
      "report", "run the configured model and print the full summary");
  CLI::App* lin = app.add_subcommand(
      "linearize", "linearization summary at the configured base point");
  CLI::App* spec = app.add_subcommand(
      "spectrum", "multiplier or eigenvalue table of the configured model");
  CLI::App* fit = app.add_subcommand(
      "fit-decay", "log-linear decay fit of configured or csv samples");
  CLI::App* verify =
      app.add_subcommand("verify", "run the full acceptance suite");
  add_common(sim, true);
  add_common(rep, true);
  add_common(lin, true);
  add_common(spec, true);
  add_common(fit, true);
  add_common(verify, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (sim->parsed()) return run_report(config, out_dir, seed, false);
    if (rep->parsed()) return run_report(config, out_dir, seed, true);
    if (lin->parsed() || spec->parsed()) {
      const SpectrumInfo info = spectrum_info(config);
      if (spec->parsed())
        for (const auto& row : info.table)
          std::printf("  %s\n", row.dump().c_str());
      std::printf("kernel dim %d, gap %s\n", info.kernel_dim,
                  format_double(info.gap).c_str());
      write_info(info, out_dir,
                 lin->parsed() ? "linearization.json" : "spectrum.json");
      return 0;
    }
    if (fit->parsed()) return run_fit(config, out_dir);
    if (verify->parsed()) return run_verify(seed, out_dir);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
