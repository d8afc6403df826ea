#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "quasistab/errors.hpp"
#include "quasistab/io.hpp"
#include "quasistab/lab.hpp"
#include "quasistab/manifold.hpp"

using namespace quasistab;
using Eigen::MatrixXd;
using Eigen::VectorXd;
namespace fs = std::filesystem;

namespace {

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = a + (b - a) * i / (n - 1);
  return out;
}

std::vector<double> exp_profile(const std::vector<double>& t, double c,
                                double rate, double pedestal = 0.0) {
  std::vector<double> out(t.size());
  for (std::size_t i = 0; i < t.size(); ++i)
    out[i] = c * std::exp(-rate * t[i]) + pedestal;
  return out;
}

QuasilinearSystem coupled_system() {
  QuasilinearSystem sys;
  sys.dim = 2;
  sys.A = [](const VectorXd& u) {
    MatrixXd A(2, 2);
    A << 0.0, u(0), 0.0, -1.0;
    return A;
  };
  sys.f = [](const VectorXd&) { return VectorXd::Zero(2).eval(); };
  return sys;
}

/// Fresh scratch directory under the system temp root.
fs::path scratch_dir(const std::string& leaf) {
  const fs::path dir = fs::temp_directory_path() / "quasistab_lab" / leaf;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_config(const fs::path& dir, const std::string& name,
                      const std::string& body) {
  const fs::path p = dir / name;
  std::ofstream out(p);
  out << body;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

bool message_contains(const std::exception& e, const std::string& needle) {
  return std::string(e.what()).find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("fit_decay recovers an exact exponential to rounding") {
  const std::vector<double> t = linspace(0.0, 2.0, 41);
  const DecayFit fit = fit_decay(t, exp_profile(t, 3.7, 3.0));
  CHECK(fit.omega_fit == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(fit.k_fit == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fit.window_ok);
  CHECK(fit.t_lo == 0.0);
  CHECK(fit.t_hi == 2.0);
  CHECK(fit.residual <= 1e-12);
}

TEST_CASE("fit_decay on constant data reports rate zero, not negative zero") {
  const std::vector<double> t = linspace(0.0, 1.0, 20);
  // Norms of exactly 1 make every log term vanish, so the slope is a true
  // zero and the sign normalization is what keeps it from printing as -0.
  const DecayFit fit = fit_decay(t, std::vector<double>(20, 1.0));
  CHECK(fit.omega_fit == 0.0);
  CHECK_FALSE(std::signbit(fit.omega_fit));
  CHECK(fit.k_fit == doctest::Approx(1.0).epsilon(1e-12));
  // A generic constant only reaches zero up to regression roundoff.
  const DecayFit off = fit_decay(t, std::vector<double>(20, 2.5));
  CHECK(std::abs(off.omega_fit) <= 1e-12);
}

TEST_CASE("noise floor drops the pedestal-dominated tail") {
  // Clean rate 6 over five orders of magnitude, then a 1e-12 pedestal that
  // the default floor is expected to cut away.
  const std::vector<double> t = linspace(0.0, 6.0, 121);
  const DecayFit fit = fit_decay(t, exp_profile(t, 1.0, 6.0, 1e-12));
  CHECK(fit.floor == doctest::Approx(1e-12 * (1.0 + 1e-12)));
  CHECK(fit.t_hi < 4.5);
  CHECK(fit.omega_fit == doctest::Approx(6.0).epsilon(0.01));
  CHECK(fit.window_ok);
}

TEST_CASE("fit_decay is invariant under rescaling the norms") {
  const std::vector<double> t = linspace(0.0, 2.0, 41);
  std::vector<double> a = exp_profile(t, 1.0, 3.0);
  std::vector<double> b = a;
  for (double& v : b) v *= 137.0;
  const DecayFit fa = fit_decay(t, a);
  const DecayFit fb = fit_decay(t, b);
  CHECK(std::abs(fa.omega_fit - fb.omega_fit) <= 1e-12);
  CHECK(std::abs(fa.k_fit - fb.k_fit) <= 1e-12);
}

TEST_CASE("an initial transient is excluded by the trailing window") {
  // Slow start at rate 0.2, kink at t = 1, clean rate 5 afterwards.
  const std::vector<double> t = linspace(0.0, 3.0, 151);
  std::vector<double> y(t.size());
  for (std::size_t i = 0; i < t.size(); ++i)
    y[i] = std::exp(-0.2 * std::min(t[i], 1.0)) *
           std::exp(-5.0 * std::max(t[i] - 1.0, 0.0));
  const DecayFit fit = fit_decay(t, y);
  CHECK(fit.window_ok);
  CHECK(fit.t_lo >= 0.7);
  CHECK(fit.t_lo <= 1.4);
  CHECK(fit.omega_fit == doctest::Approx(5.0).epsilon(0.05));
}

TEST_CASE("pure noise yields a best-effort fit with window_ok false") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> amp(0.5, 1.5);
  const std::vector<double> t = linspace(0.0, 3.0, 30);
  std::vector<double> y(t.size());
  for (double& v : y) v = amp(rng);
  const DecayFit fit = fit_decay(t, y);
  CHECK_FALSE(fit.window_ok);
  CHECK(fit.residual > 0.05);
}

TEST_CASE("fit_decay input validation") {
  const std::vector<double> t = linspace(0.0, 1.0, 12);
  SUBCASE("too few samples") {
    const std::vector<double> t8 = linspace(0.0, 1.0, 8);
    CHECK_THROWS_AS(fit_decay(t8, exp_profile(t8, 1.0, 1.0)),
                    InsufficientDataError);
  }
  SUBCASE("everything under the floor") {
    try {
      fit_decay(t, exp_profile(t, 1e-15, 1.0), 1.0);
      FAIL("expected InsufficientDataError");
    } catch (const InsufficientDataError& e) {
      CHECK(message_contains(e, "above 10x"));
    }
  }
  SUBCASE("length mismatch") {
    CHECK_THROWS_AS(fit_decay(t, std::vector<double>(5, 1.0)), ConfigError);
  }
  SUBCASE("nonpositive norms") {
    std::vector<double> y(12, 1.0);
    y[4] = 0.0;
    CHECK_THROWS_AS(fit_decay(t, y), ConfigError);
  }
  SUBCASE("times must increase") {
    std::vector<double> bad = t;
    bad[3] = bad[2];
    CHECK_THROWS_AS(fit_decay(bad, std::vector<double>(12, 1.0)), ConfigError);
  }
}

TEST_CASE("weighted norm track") {
  const std::vector<double> t = linspace(0.0, 5.0, 51);
  const std::vector<double> e = exp_profile(t, 1.0, 1.0);
  const std::vector<double> zero(t.size(), 0.0);
  SUBCASE("matched weight saturates at the sample count-free constant") {
    // e^t (e^-t + e^-t) = 2 for every t.
    CHECK(weighted_norm_track(t, e, e, 0.0, 1.0, 1.0) ==
          doctest::Approx(2.0).epsilon(1e-12));
  }
  SUBCASE("polynomial factor moves the sup to the end") {
    // e^t e^-t (1 + sqrt t) peaks at the last sample.
    const double k = weighted_norm_track(t, e, e, 0.5, 1.0, 1.0);
    CHECK(k == doctest::Approx(1.0 + std::sqrt(5.0)).epsilon(1e-12));
  }
  SUBCASE("monotone in the attempted rate") {
    const double slow = weighted_norm_track(t, e, zero, 0.0, 0.5, 1.0);
    const double fast = weighted_norm_track(t, e, zero, 0.0, 0.9, 1.0);
    CHECK(slow <= fast);
  }
  SUBCASE("guards") {
    CHECK_THROWS_AS(weighted_norm_track(t, e, zero, -0.1, 1.0, 1.0),
                    ConfigError);
    CHECK_THROWS_AS(weighted_norm_track(t, e, zero, 0.0, 1.0, 0.0),
                    ConfigError);
    CHECK_THROWS_AS(weighted_norm_track(t, e, std::vector<double>(3, 0.0),
                                        0.0, 1.0, 1.0),
                    ConfigError);
    std::vector<double> neg = t;
    neg[0] = -1.0;
    CHECK_THROWS_AS(weighted_norm_track(neg, e, zero, 0.0, 1.0, 1.0),
                    ConfigError);
  }
}

TEST_CASE("identify_limit against the closed-form flow") {
  const QuasilinearSystem sys = coupled_system();
  const VectorXd u_star = VectorXd::Zero(2);
  const SpectralSplit split = spectral_split(linearize_at(sys, u_star));
  const EquilibriumChart chart = build_graph_chart(sys, u_star, split, 0.5);
  VectorXd u0(2);
  u0 << 1e-2, 1e-2;

  SUBCASE("settled trajectory lands on x0 exp(y0)") {
    const Trajectory traj = simulate(sys, u0, 18.0, 1e-3, 201, 1e-10);
    const ReducedTrajectory red = reduce_trajectory(traj, chart);
    const LimitIdentification lim = identify_limit(red, chart);
    CHECK(lim.u_hat(0) ==
          doctest::Approx(1e-2 * std::exp(1e-2)).epsilon(1e-4));
    CHECK(std::abs(lim.u_hat(1)) <= 1e-8);
    CHECK(lim.residual <= 1e-8);
  }
  SUBCASE("early cutoff is refused with the live y norm") {
    const Trajectory traj = simulate(sys, u0, 2.0, 1e-3, 51, 1e-10);
    const ReducedTrajectory red = reduce_trajectory(traj, chart);
    try {
      identify_limit(red, chart);
      FAIL("expected PrematureLimitError");
    } catch (const PrematureLimitError& e) {
      CHECK(e.y_norm == doctest::Approx(1e-2 * std::exp(-2.0)).epsilon(1e-3));
    }
  }
  SUBCASE("empty input") {
    CHECK_THROWS_AS(identify_limit(ReducedTrajectory{}, chart),
                    InsufficientDataError);
  }
}

TEST_CASE("double formatting is canonical") {
  CHECK(format_double(0.0) == "0");
  CHECK(format_double(-0.0) == "0");
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(format_double(-std::numeric_limits<double>::infinity()) == "-inf");
  const double v = 1.0 / 3.0;
  CHECK(std::strtod(format_double(v).c_str(), nullptr) == v);
  const double big = 6.02214076e23;
  CHECK(std::strtod(format_double(big).c_str(), nullptr) == big);
}

TEST_CASE("csv table layout") {
  const std::string csv =
      csv_table({"t", "v"}, {{0.0, 0.5}, {1.0, 0.25}});
  CHECK(csv == "t,v\n0,1\n0.5,0.25\n");
  CHECK_THROWS_AS(csv_table({"t"}, {{0.0}, {1.0}}), ConfigError);
  CHECK_THROWS_AS(csv_table({"t", "v"}, {{0.0, 1.0}, {1.0}}), ConfigError);
}

TEST_CASE("svg plot emits a polyline for positive data") {
  const std::vector<double> t = linspace(0.0, 1.0, 11);
  const std::string svg = svg_decay_plot(t, exp_profile(t, 1.0, 3.0), "dev");
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("polyline") != std::string::npos);
  CHECK(svg.find("dev") != std::string::npos);
  const std::string empty = svg_decay_plot(t, std::vector<double>(11, 0.0),
                                           "dev");
  CHECK(empty.find("no positive samples") != std::string::npos);
}

TEST_CASE("report serialization is stable and spells out infinities") {
  RunReport rep;
  rep.scenario = "x";
  rep.model = "heleshaw";
  rep.gap = std::numeric_limits<double>::infinity();
  rep.csv_path = "/somewhere/trajectory.csv";
  rep.extras["b"] = 2.0;
  rep.extras["a"] = 1.0;
  const std::string text = report_to_json(rep);
  const nlohmann::json j = nlohmann::json::parse(text);
  CHECK(j.at("gap") == "inf");
  CHECK(j.at("artifacts").at("csv") == "trajectory.csv");
  CHECK(j.at("artifacts").at("svg") == "");
  CHECK(text.find("\"a\"") < text.find("\"b\""));
  CHECK(report_to_json(rep) == text);
}

TEST_CASE("run_scenario end to end") {
  const fs::path dir = scratch_dir("scenarios");

  SUBCASE("hele-shaw scenario is ok and byte-reproducible") {
    const fs::path cfg = write_config(dir, "hs.json", R"({
      "scenario": "hs-decay",
      "model": "heleshaw",
      "params": {"n_points": 64},
      "experiment": {"modes": [{"k": 2, "cos": 1.0}], "t_end": 5.0,
                     "n_samples": 51}
    })");
    const RunReport a = run_scenario(cfg, dir / "a", 1);
    CHECK(a.status == "ok");
    CHECK(a.omega_fit == doctest::Approx(6.0).epsilon(1e-3));
    CHECK(a.gap == doctest::Approx(6.0));
    CHECK(a.rank_ok);
    CHECK(a.spectrum_ok);
    CHECK(fs::exists(dir / "a" / "trajectory.csv"));
    CHECK(fs::exists(dir / "a" / "decay.svg"));
    const RunReport b = run_scenario(cfg, dir / "b", 1);
    CHECK(b.status == "ok");
    CHECK(slurp(dir / "a" / "report.json") == slurp(dir / "b" / "report.json"));
    CHECK(slurp(dir / "a" / "trajectory.csv") ==
          slurp(dir / "b" / "trajectory.csv"));
  }

  SUBCASE("manifold scenario reduces onto the chart") {
    const fs::path cfg = write_config(dir, "mf.json", R"({
      "scenario": "mf-closed-form",
      "model": "manifold",
      "params": {
        "dim": 2,
        "A": [[[], [{"c": 1.0, "m": [1, 0]}]],
              [[], [{"c": -1.0, "m": [0, 0]}]]],
        "u_star": [0.0, 0.0],
        "r0": 0.5
      },
      "experiment": {"u0": [0.01, 0.01], "t_end": 18.0}
    })");
    const RunReport rep = run_scenario(cfg, dir / "mf", 1);
    CHECK(rep.status == "ok");
    CHECK(rep.rank_ok);
    CHECK(rep.tangent_ok);
    CHECK(rep.semisimple_ok);
    CHECK(rep.spectrum_ok);
    CHECK(rep.gap == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(rep.omega_fit == doctest::Approx(1.0).epsilon(0.02));
    REQUIRE(rep.x_hat.size() == 1);
    CHECK(std::abs(rep.x_hat[0]) ==
          doctest::Approx(1e-2 * std::exp(1e-2)).epsilon(1e-4));
    CHECK(rep.limit_residual <= 1e-8);
  }

  SUBCASE("fmcf scenario fits the nonlocal decay") {
    const fs::path cfg = write_config(dir, "fmcf.json", R"({
      "scenario": "fmcf-smoke",
      "model": "fmcf",
      "params": {"sigma": 0.5, "n_points": 128, "k_max": 16},
      "experiment": {"u0": {"mean": 0.1, "modes": [{"k": 1, "cos": 0.01}]},
                     "t_end": 0.6, "dt": 0.008, "n_samples": 21}
    })");
    const RunReport rep = run_scenario(cfg, dir / "fmcf", 1);
    CHECK(rep.status == "ok");
    CHECK(rep.gap > 0.0);
    CHECK(rep.omega_fit == doctest::Approx(rep.gap).epsilon(0.05));
    CHECK(rep.extras.count("p_fit") == 1);
    CHECK(rep.extras.at("p_fit") == doctest::Approx(1.5).epsilon(0.02));
  }

  SUBCASE("rd scenario settles and reports the weighted constant") {
    const fs::path cfg = write_config(dir, "rd.json", R"({
      "scenario": "rd-smoke",
      "model": "rd",
      "params": {"n_cells": 64, "n_dim": 2, "p": 5.0, "kappa": 4.0,
                 "tau": 0.275},
      "experiment": {"u0": {"mean": 0.2, "modes": [{"k": 1, "amp": 0.1}]},
                     "t_end": 1.5, "dt": 0.0005, "n_samples": 151}
    })");
    const RunReport rep = run_scenario(cfg, dir / "rd", 1);
    CHECK(rep.status == "ok");
    REQUIRE(rep.x_hat.size() == 1);
    CHECK(rep.x_hat[0] > 0.2);
    CHECK(rep.weighted_k >= 1.0);
    CHECK(std::isfinite(rep.weighted_k));
    CHECK(rep.extras.at("s_c") == doctest::Approx(16.0 / 15.0));
    CHECK(rep.limit_residual <= 1e-12);
  }

  SUBCASE("missing experiment block is a schema error naming the key") {
    const fs::path cfg =
        write_config(dir, "bad.json", R"({"model": "heleshaw"})");
    const RunReport rep = run_scenario(cfg, dir / "bad", 1);
    CHECK(rep.status == "schema-error");
    CHECK(rep.detail.find("experiment") != std::string::npos);
    CHECK(fs::exists(dir / "bad" / "report.json"));
  }

  SUBCASE("unparseable json is a schema error") {
    const fs::path cfg = write_config(dir, "broken.json", "{not json");
    const RunReport rep = run_scenario(cfg, dir / "broken", 1);
    CHECK(rep.status == "schema-error");
  }

  SUBCASE("unknown model is a schema error") {
    const fs::path cfg = write_config(dir, "um.json",
                                      R"({"model": "maxwell",
                                          "experiment": {}})");
    const RunReport rep = run_scenario(cfg, dir / "um", 1);
    CHECK(rep.status == "schema-error");
    CHECK(rep.detail.find("model") != std::string::npos);
  }

  SUBCASE("leaving the chart ball is reported as chart-exit") {
    const fs::path cfg = write_config(dir, "exit.json", R"({
      "model": "manifold",
      "params": {
        "dim": 2,
        "A": [[[], [{"c": 1.0, "m": [1, 0]}]],
              [[], [{"c": -1.0, "m": [0, 0]}]]],
        "u_star": [0.0, 0.0],
        "r0": 0.005
      },
      "experiment": {"u0": [0.01, 0.01], "t_end": 1.0}
    })");
    const RunReport rep = run_scenario(cfg, dir / "exit", 1);
    CHECK(rep.status == "chart-exit");
  }
}
