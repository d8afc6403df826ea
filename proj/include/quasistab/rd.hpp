#pragma once

#include <functional>
#include <vector>

#include "quasistab/errors.hpp"

namespace quasistab {

/// Cell-centered finite-volume setup for the quasilinear heat equation with
/// gradient forcing, u' = div(a(u) grad u) + |grad u|^kappa, on [0, length]
/// with zero-flux boundaries.
struct RdConfig {
  double length = 1.0;
  int n_cells = 256;
  /// Diffusivity a(u); empty means the default 1 + u^2/2.
  std::function<double(double)> a;
  double kappa = 4.0;
  /// Ellipticity certificate: the run aborts if a(u) drops below this.
  double a_min = 0.5;
  bool gradient_on = true;
  /// Order of the cosine-series norm recorded along trajectories.
  double proxy_order = 16.0 / 15.0;
};

void validate(const RdConfig& cfg);

/// a(u), falling back to the default diffusivity when cfg.a is empty.
double rd_diffusivity(const RdConfig& cfg, double u);

/// Cell-center coordinates (i + 1/2) * length / n_cells.
std::vector<double> rd_cell_centers(const RdConfig& cfg);

/// Exponent bookkeeping for the scaling-critical well-posedness window.
struct RdExponents {
  int n = 0;
  double p = 0.0;
  double kappa = 0.0;
  double tau = 0.0;
  double s_bar = 0.0;
  double s_c = 0.0;
  double s = 0.0;
  double mu = 0.0;
  double alpha_crit = 0.0;
};

/// (q*xi - 1 - gamma)/(q - 1), the smallest admissible weight exponent;
/// minus infinity in the q = 1 limit. Requires q >= 1.
double critical_weight_exponent(double q, double xi, double gamma);

/// Computes all exponents and enforces the admissibility window:
/// p in (2n, (kappa-1)n) with p != (n-1)(kappa-1), 1/2 < 2 tau < 1 - n/p,
/// and the ordering 0 < s_bar < s_c < s < 2 - 2 tau. Violations throw
/// ConstraintError naming the failed inequality.
RdExponents rd_exponents(int n, double p, double kappa, double tau);

/// Conservative right-hand side: telescoping zero-flux fluxes for the
/// diffusion part (its discrete mean vanishes identically) plus the
/// centered-gradient forcing when enabled.
std::vector<double> rd_rhs(const std::vector<double>& u, const RdConfig& cfg);

struct RdTrajectory {
  std::vector<double> times;
  std::vector<std::vector<double>> states;
  std::vector<double> means;
  std::vector<double> dev_l2;     // ||u - mean||, trapezoid-free cell sum
  std::vector<double> dev_h1;     // adds the forward-difference seminorm
  std::vector<double> dev_proxy;  // cosine-series norm at cfg.proxy_order
  bool breakdown = false;
  double t_break = 0.0;
};

///// IMEX march: diffusion implicit with lagged face coefficients (tridiagonal
/// solves), gradient forcing explicit with step halving when it outruns the
/// state; halving past the floor reports breakdown.
RdTrajectory evolve_rd(const std::vector<double>& u0, const RdConfig& cfg,
                       double t_end, double dt = 5e-4, int n_samples = 201);

/// Neumann-adapted norm from cosine-series amplitudes A_k:
/// sqrt(A_0^2 + sum_k (1+k^2)^order A_k^2 / 2). A stand-in for the
/// fractional norms of the continuous theory.
double rd_proxy_norm(const std::vector<double>& v, double order);

struct RdWeightedReport {
  double u_hat = 0.0;      // limiting constant, read off the tail mean
  double k_stat = 0.0;     // empirical constant of the weighted decay bound
  double tail_rate = 0.0;  // residual mean movement per unit time
  bool sup_at_end = false; // statistic still growing at the final sample
};

///// Empirical constant of the time-weighted decay estimate:
/// sup_t e^(omega t) (|u - u_hat|_alpha + t^mu |u - u_hat|_xi) / |u0 - u_hat|_alpha
/// with alpha = tau + s_c/2 and xi = tau + s/2 in the proxy norms. Refuses
/// trajectories whose mean is still moving faster than 1e-10 per unit time.
RdWeightedReport rd_weighted_diagnostic(const RdTrajectory& traj,
                                        const RdExponents& exps, double omega);

}  // namespace quasistab
