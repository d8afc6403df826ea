#include "quasistab/acceptance.hpp"

#include <json.hpp>

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <random>

#include "quasistab/fmcf.hpp"
#include "quasistab/grid.hpp"
#include "quasistab/heleshaw.hpp"
#include "quasistab/io.hpp"
#include "quasistab/lab.hpp"
#include "quasistab/manifold.hpp"
#include "quasistab/rd.hpp"

namespace quasistab {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using std::numbers::pi;

std::string fmt(double v) { return format_double(v); }

/// u' = A(u) u with A(u) = [[0, u1], [0, -1]]; solvable in closed form,
/// u1(t) = x0 exp(y0 (1 - e^-t)), u2(t) = y0 e^-t.
QuasilinearSystem closed_form_system() {
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

CriterionResult crit_hs_spectrum() {
  CriterionResult r{1, "hele-shaw spectrum", false, "", 0.0, 1.0};
  double worst = 0.0;
  int kernel = 0;
  for (int k = -16; k <= 16; ++k) {
    const double ak = std::abs(static_cast<double>(k));
    const double expect = ak * (1.0 - ak * ak);
    worst = std::max(worst, std::abs(hs_symbol(k) - expect));
    if (hs_symbol(k) == 0.0) ++kernel;
  }
  const double gap = hs_gap(256);
  r.passed = worst <= 1e-12 && kernel == 3 && std::abs(gap - 6.0) <= 1e-12;
  r.detail = "max symbol error " + fmt(worst) + ", kernel dim " +
             std::to_string(kernel) + ", gap " + fmt(gap);
  return r;
}

CriterionResult crit_hs_decay() {
  CriterionResult r{2, "hele-shaw decay sharpness", false, "", 0.0, 1.0};
  PeriodicGrid grid(64);
  const HsState v0{SpectralField::from_modes(grid, 0.0, {{2, 1.0, 0.0}})};
  const HsConserved c0 = hs_conserved(v0);
  const int n = 51;
  std::vector<double> times(n), norms(n);
  double drift = 0.0;
  for (int i = 0; i < n; ++i) {
    const double t = 5.0 * i / (n - 1);
    const HsState vt = hs_evolve(v0, t);
    times[i] = t;
    norms[i] = sobolev_norm(vt.field, 0.0);
    const HsConserved c = hs_conserved(vt);
    drift = std::max({drift, std::abs(c.mass - c0.mass),
                      std::abs(c.cosm - c0.cosm), std::abs(c.sinm - c0.sinm)});
  }
  const DecayFit fit = fit_decay(times, norms);
  r.passed = std::abs(fit.omega_fit - 6.0) <= 0.005 * 6.0 && drift <= 1e-12;
  r.detail = "fitted rate " + fmt(fit.omega_fit) + ", conserved drift " +
             fmt(drift);
  return r;
}

CriterionResult crit_fmcf_symbol() {
  CriterionResult r{3, "fmcf symbol law", false, "", 0.0, 30.0};
  FmcfConfig cfg;
  const FmcfSymbolFit coarse = fmcf_numeric_symbol(cfg, 32);
  FmcfConfig fine = cfg;
  fine.quad_order = cfg.quad_order * 2;
  fine.far_cells = cfg.far_cells * 2;
  const FmcfSymbolFit refined = fmcf_numeric_symbol(fine, 32);
  double shift = 0.0;
  for (int k = 2; k <= 32; ++k)
    shift = std::max(shift,
                     std::abs(refined.table[k] / coarse.table[k] - 1.0));
  r.passed = std::abs(coarse.p_fit - 1.5) <= 0.02 * 1.5 && shift <= 1e-4;
  r.detail = "fitted exponent " + fmt(coarse.p_fit) + ", refinement shift " +
             fmt(shift);
  return r;
}

CriterionResult crit_fmcf_stability() {
  CriterionResult r{4, "fmcf nonlinear stability", false, "", 0.0, 120.0};
  FmcfConfig cfg;
  const double eps = 1e-2;
  const SpectralField u0 = SpectralField::from_modes(
      cfg.grid, 0.1, {{1, eps, 0.0}, {3, eps, 0.0}});
  const FmcfTrajectory traj = evolve_fmcf(u0, cfg, 3.0);
  if (traj.breakdown) {
    r.detail = "evolution broke down at t = " + fmt(traj.t_break);
    return r;
  }
  const SpectralField& u_end = traj.states.back();
  const double residual = sobolev_norm(apply_fmcf_A(u_end, u_end, cfg), 0.0);
  const DecayFit fit = fit_decay(traj.times, traj.deviations);
  const double gap = -traj.fit.table[1];
  r.passed = residual <= 1e-8 && fit.omega_fit >= 0.9 * gap;
  r.detail = "equilibrium residual " + fmt(residual) + ", fitted rate " +
             fmt(fit.omega_fit) + " against gap " + fmt(gap);
  return r;
}

CriterionResult crit_oracle() {
  CriterionResult r{5, "closed-form oracle equivalence", false, "", 0.0, 5.0};
  const QuasilinearSystem sys = closed_form_system();
  const VectorXd u_star = VectorXd::Zero(2);
  const SpectralSplit split = spectral_split(linearize_at(sys, u_star));
  const EquilibriumChart chart = build_graph_chart(sys, u_star, split, 0.5);

  auto limit_of = [&](double x0, double y0) {
    VectorXd u0(2);
    u0 << x0, y0;
    const Trajectory traj = simulate(sys, u0, 18.0, 1e-3, 201, 1e-10);
    const ReducedTrajectory red = reduce_trajectory(traj, chart);
    return identify_limit(red, chart);
  };

  double worst_err = 0.0, worst_res = 0.0;
  for (const double sx : {-1.0, 1.0})
    for (const double sy : {-1.0, 1.0}) {
      const double x0 = 1e-2 * sx, y0 = 1e-2 * sy;
      const LimitIdentification lim = limit_of(x0, y0);
      worst_err =
          std::max(worst_err, std::abs(lim.u_hat(0) - x0 * std::exp(y0)));
      worst_res = std::max(worst_res, lim.residual);
    }

  // Stability of the displacement ratio under halving the initial offset.
  auto ratio_of = [&](double x0, double y0) {
    const LimitIdentification lim = limit_of(x0, y0);
    return lim.u_hat.norm() / std::hypot(x0, y0);
  };
  const double r1 = ratio_of(1e-2, 1e-2);
  const double r2 = ratio_of(5e-3, 5e-3);
  const double ratio_shift = std::abs(r2 / r1 - 1.0);

  r.passed = worst_err <= 1e-6 && worst_res <= 1e-8 && ratio_shift <= 0.1;
  r.detail = "worst limit error " + fmt(worst_err) + ", worst residual " +
             fmt(worst_res) + ", ratio shift " + fmt(ratio_shift);
  return r;
}

CriterionResult crit_checker(std::uint64_t seed) {
  CriterionResult r{6, "normal-stability checker", false, "", 0.0, 5.0};
  int accepted = 0;
  for (int i = 1; i <= 20; ++i) {
    const SynthesizedSystem s =
        synthesize_normally_stable(2, 6, {-1.0, -2.0, -3.0, -4.0}, 0.3,
                                   seed + static_cast<std::uint64_t>(i));
    const StabilityReport rep = check_normal_stability(
        s.system, s.u_star, s.manifold_param, 2,
        seed + static_cast<std::uint64_t>(i));
    if (rep.passed()) ++accepted;
  }

  QuasilinearSystem jordan;
  jordan.dim = 2;
  jordan.A = [](const VectorXd&) {
    MatrixXd A(2, 2);
    A << 0.0, 1.0, 0.0, 0.0;
    return A;
  };
  jordan.f = [](const VectorXd&) { return VectorXd::Zero(2).eval(); };
  auto axis = [](const VectorXd& xi) {
    VectorXd u(2);
    u << xi(0), 0.0;
    return u;
  };
  const StabilityReport rj =
      check_normal_stability(jordan, VectorXd::Zero(2), axis, 1, seed);
  const bool jordan_right =
      rj.rank_ok && rj.tangent_ok && !rj.semisimple_ok && !rj.passed();

  const QuasilinearSystem coupled = closed_form_system();
  auto diagonal = [](const VectorXd& xi) {
    VectorXd u(2);
    u << xi(0), xi(0);
    return u;
  };
  const StabilityReport rw = check_normal_stability(
      coupled, VectorXd::Zero(2), diagonal, 1, seed, 5e-7);
  const bool wrong_right = rw.rank_ok && !rw.tangent_ok && rw.semisimple_ok &&
                           rw.spectrum_ok;

  r.passed = accepted == 20 && jordan_right && wrong_right;
  r.detail = std::to_string(accepted) +
             "/20 synthesized systems accepted, jordan rejection " +
             (jordan_right ? "semisimple" : "wrong") +
             ", tangent rejection " + (wrong_right ? "tangent" : "wrong");
  return r;
}

CriterionResult crit_chart(std::uint64_t seed) {
  CriterionResult r{7, "chart properties", false, "", 0.0, 10.0};
  double worst_phi0 = 0.0, worst_dphi = 0.0, worst_res = 0.0;
  for (int i = 1; i <= 20; ++i) {
    const SynthesizedSystem s =
        synthesize_normally_stable(2, 6, {-1.0, -2.0, -3.0, -4.0}, 0.3,
                                   seed + static_cast<std::uint64_t>(i));
    const SpectralSplit split =
        spectral_split(linearize_at(s.system, s.u_star));
    const EquilibriumChart chart =
        build_graph_chart(s.system, s.u_star, split, 0.3);

    worst_phi0 = std::max(worst_phi0, chart.phi(VectorXd::Zero(6)).norm());

    const double h = 1e-4;
    for (int j = 0; j < split.kernel_dim; ++j) {
      const VectorXd b = split.kernel_basis.col(j);
      const VectorXd g = (chart.phi(h * b) - chart.phi(-h * b)) / (2.0 * h);
      worst_dphi = std::max(worst_dphi, g.norm());
    }

    std::mt19937_64 rng(seed * 1009 + static_cast<std::uint64_t>(i));
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (int q = 0; q < 5; ++q) {
      VectorXd xi(split.kernel_dim);
      for (int j = 0; j < split.kernel_dim; ++j) xi(j) = unit(rng);
      if (xi.norm() == 0.0) xi(0) = 1.0;
      xi *= 1e-3 / xi.norm();
      const VectorXd x = split.kernel_basis * xi;
      const VectorXd u = s.u_star + x + chart.phi(x);
      worst_res = std::max(worst_res, s.system.field(u).norm());
    }
  }
  r.passed = worst_phi0 <= 1e-12 && worst_dphi <= 1e-6 && worst_res <= 1e-10;
  r.detail = "phi(0) " + fmt(worst_phi0) + ", dphi(0) " + fmt(worst_dphi) +
             ", graph residual " + fmt(worst_res);
  return r;
}

CriterionResult crit_reduced_decay(std::uint64_t seed) {
  CriterionResult r{8, "reduced decay rate", false, "", 0.0, 60.0};
  double worst_ratio = std::numeric_limits<double>::infinity();
  for (int i = 1; i <= 20; ++i) {
    const SynthesizedSystem s =
        synthesize_normally_stable(2, 6, {-1.0, -2.0, -3.0, -4.0}, 0.3,
                                   seed + static_cast<std::uint64_t>(i));
    const SpectralSplit split =
        spectral_split(linearize_at(s.system, s.u_star));
    const EquilibriumChart chart =
        build_graph_chart(s.system, s.u_star, split, 0.3);

    std::mt19937_64 rng(seed * 77 + static_cast<std::uint64_t>(i));
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    VectorXd dir(6);
    for (int j = 0; j < 6; ++j) dir(j) = unit(rng);
    dir /= dir.norm();
    const VectorXd u0 = s.u_star + 1e-2 * dir;

    const Trajectory traj = simulate(s.system, u0, 9.0, 1e-3, 201, 1e-10);
    const ReducedTrajectory red = reduce_trajectory(traj, chart);
    const DecayFit fit = fit_decay(red.times, red.y_norm);
    worst_ratio = std::min(worst_ratio, fit.omega_fit / s.gap_true);
  }
  r.passed = worst_ratio >= 0.95;
  r.detail = "slowest fitted rate at " + fmt(worst_ratio) + " of the gap";
  return r;
}

CriterionResult crit_rd_exponents() {
  CriterionResult r{9, "rd exponent bookkeeping", false, "", 0.0, 1.0};
  const RdExponents e = rd_exponents(2, 5.0, 4.0, 0.275);
  const double err_sc = std::abs(e.s_c - 16.0 / 15.0);
  const double err_mu = std::abs(e.mu - 7.0 / 60.0);
  const double alpha = 0.275 + e.s_c / 2.0;
  const double err_alpha =
      std::abs(critical_weight_exponent(4.0, 0.275 + e.s / 2.0, 0.275) -
               alpha);
  const double err_stored = std::abs(e.alpha_crit - alpha);

  int rejected = 0;
  auto expect_reject = [&rejected](int n, double p, double kappa, double tau) {
    try {
      rd_exponents(n, p, kappa, tau);
    } catch (const ConstraintError&) {
      ++rejected;
    }
  };
  expect_reject(2, 5.0, 3.0, 0.275);   // kappa at the boundary
  expect_reject(2, 3.9, 4.0, 0.275);   // p below the window
  expect_reject(4, 9.0, 4.0, 0.26);    // p on the excluded line
  expect_reject(2, 5.0, 4.0, 0.2);     // weight too small
  expect_reject(2, 5.0, 4.0, 0.31);    // weight too large

  r.passed = err_sc <= 1e-12 && err_mu <= 1e-12 && err_alpha <= 1e-12 &&
             err_stored <= 1e-12 && rejected == 5;
  r.detail = "s_c error " + fmt(err_sc) + ", mu error " + fmt(err_mu) +
             ", alpha_crit error " + fmt(err_alpha) + ", " +
             std::to_string(rejected) + "/5 violations rejected";
  return r;
}

CriterionResult crit_rd_dynamics() {
  CriterionResult r{10, "rd dynamics", false, "", 0.0, 60.0};
  const RdExponents exps = rd_exponents(2, 5.0, 4.0, 0.275);

  RdConfig cfg;
  cfg.n_cells = 128;
  cfg.proxy_order = exps.s_c;
  const std::vector<double> x = rd_cell_centers(cfg);
  std::vector<double> u0(cfg.n_cells);
  for (int i = 0; i < cfg.n_cells; ++i) u0[i] = 0.2 * std::cos(pi * x[i]);

  const RdTrajectory traj = evolve_rd(u0, cfg, 2.0, 5e-4, 201);
  if (traj.breakdown) {
    r.detail = "evolution broke down at t = " + fmt(traj.t_break);
    return r;
  }

  bool strict = true, nondecreasing = true;
  for (std::size_t i = 0; i + 1 < traj.means.size(); ++i) {
    if (traj.dev_h1[i] > 1e-2 && !(traj.means[i + 1] > traj.means[i]))
      strict = false;
    if (traj.means[i + 1] < traj.means[i] - 1e-13) nondecreasing = false;
  }
  const double tail_move =
      std::abs(traj.means.back() - traj.means[traj.means.size() - 21]);
  const bool limit_flat = traj.dev_l2.back() <= 1e-8 && tail_move <= 1e-8;

  const DecayFit fit = fit_decay(traj.times, traj.dev_l2);
  const double omega = 0.5 * fit.omega_fit;
  const RdWeightedReport d2 = rd_weighted_diagnostic(traj, exps, omega);
  const RdTrajectory traj3 = evolve_rd(u0, cfg, 3.0, 5e-4, 301);
  const RdWeightedReport d3 = rd_weighted_diagnostic(traj3, exps, omega);
  const double k_shift = std::abs(d3.k_stat / d2.k_stat - 1.0);
  const bool k_ok = std::isfinite(d2.k_stat) && d2.k_stat > 0.0 &&
                    !d2.sup_at_end && k_shift <= 0.05;

  // Linear oracle: gradient off, unit diffusivity, first Neumann mode.
  RdConfig lin;
  lin.n_cells = 128;
  lin.gradient_on = false;
  lin.a = [](double) { return 1.0; };
  std::vector<double> v0(lin.n_cells);
  const std::vector<double> xl = rd_cell_centers(lin);
  for (int i = 0; i < lin.n_cells; ++i)
    v0[i] = 0.5 + 0.1 * std::cos(pi * xl[i]);
  const RdTrajectory heat = evolve_rd(v0, lin, 1.0, 5e-4, 201);
  const DecayFit heat_fit = fit_decay(heat.times, heat.dev_l2);
  const double rate_err = std::abs(heat_fit.omega_fit - pi * pi) / (pi * pi);

  r.passed = strict && nondecreasing && limit_flat && rate_err <= 0.02 && k_ok;
  r.detail = std::string("mean increase ") + (strict ? "strict" : "broken") +
             ", tail movement " + fmt(tail_move) + ", heat rate error " +
             fmt(rate_err) + ", K " + fmt(d2.k_stat) + " with shift " +
             fmt(k_shift);
  return r;
}

std::vector<CriterionResult> run_pass(std::uint64_t seed, bool timed) {
  using Clock = std::chrono::steady_clock;
  std::vector<CriterionResult> out;
  const std::vector<std::function<CriterionResult()>> criteria = {
      [] { return crit_hs_spectrum(); },
      [] { return crit_hs_decay(); },
      [] { return crit_fmcf_symbol(); },
      [] { return crit_fmcf_stability(); },
      [] { return crit_oracle(); },
      [seed] { return crit_checker(seed); },
      [seed] { return crit_chart(seed); },
      [seed] { return crit_reduced_decay(seed); },
      [] { return crit_rd_exponents(); },
      [] { return crit_rd_dynamics(); }};
  for (const auto& fn : criteria) {
    const auto t0 = Clock::now();
    CriterionResult res;
    try {
      res = fn();
    } catch (const std::exception& e) {
      res.number = static_cast<int>(out.size()) + 1;
      res.name = "criterion " + std::to_string(res.number);
      res.passed = false;
      res.detail = std::string("unexpected: ") + e.what();
      res.budget = 600.0;
    }
    if (timed)
      res.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    out.push_back(std::move(res));
  }
  return out;
}

}  // namespace

std::string acceptance_to_json(const AcceptanceOutcome& outcome) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : outcome.results)
    arr.push_back({{"number", r.number},
                   {"name", r.name},
                   {"passed", r.passed},
                   {"detail", r.detail}});
  // The serialized verdict ignores budgets: wall time must never reach the
  // bytes, or identical runs could produce different reports.
  bool content_pass = true;
  for (const auto& r : outcome.results)
    if (!r.passed) content_pass = false;
  nlohmann::json j;
  j["criteria"] = arr;
  j["all_passed"] = content_pass;
  return j.dump(2) + "\n";
}

AcceptanceOutcome run_acceptance(std::uint64_t seed) {
  using Clock = std::chrono::steady_clock;
  const auto t0 = Clock::now();

  AcceptanceOutcome outcome;
  outcome.results = run_pass(seed, true);

  double budget_sum = 0.0;
  for (const auto& r : outcome.results) budget_sum += r.budget;

  AcceptanceOutcome probe;
  const auto t1 = Clock::now();
  probe.results = run_pass(seed, false);
  const double repeat_seconds =
      std::chrono::duration<double>(Clock::now() - t1).count();

  AcceptanceOutcome first;
  first.results = outcome.results;
  const std::string bytes_a = acceptance_to_json(first);
  const std::string bytes_b = acceptance_to_json(probe);

  CriterionResult det{11, "determinism", bytes_a == bytes_b, "", repeat_seconds,
                      budget_sum};
  det.detail = det.passed
                   ? "repeat run reproduced " +
                         std::to_string(bytes_a.size()) + " report bytes"
                   : "repeat run diverged";
  outcome.results.push_back(det);

  outcome.all_passed = true;
  for (const auto& r : outcome.results)
    if (!r.ok()) outcome.all_passed = false;
  outcome.total_seconds =
      std::chrono::duration<double>(Clock::now() - t0).count();
  return outcome;
}

}  // namespace quasistab
