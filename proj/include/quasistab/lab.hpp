#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "quasistab/errors.hpp"
#include "quasistab/manifold.hpp"

namespace quasistab {

/// Exponential fit K e^(-omega t) to a norm history.
struct DecayFit {
  double omega_fit = 0.0;
  double k_fit = 1.0;   // prefactor relative to the initial norm
  double t_lo = 0.0;    // fitted window
  double t_hi = 0.0;
  double residual = 0.0;  // RMS of the log-linear fit over the window
  double floor = 0.0;     // noise floor actually applied
  /// The largest trailing window met the residual target; when false the
  /// best-residual window was reported instead.
  bool window_ok = true;
};

/// Least-squares line through (t, log norm) on the largest trailing window
/// with RMS residual <= 0.05, using only samples above 10x the noise floor.
/// A negative floor asks for the default 1e-12 * norms.front().
/// Fewer than 10 usable samples raise InsufficientDataError.
DecayFit fit_decay(const std::vector<double>& times,
                   const std::vector<double>& norms, double floor = -1.0);

struct LimitIdentification {
  Eigen::VectorXd u_hat;  // limiting equilibrium in ambient coordinates
  Eigen::VectorXd x_hat;  // its kernel-space offset, ambient representation
  double residual = 0.0;  // vector-field norm at u_hat
};

///// Read the limit off a reduced trajectory: x_hat is the final kernel
/// coordinate and u_hat = base + x_hat + phi(x_hat). Demands that the stable
/// coordinate has decayed (|y| <= 1e-8, else PrematureLimitError) and that
/// the result is a genuine equilibrium (residual <= 1e-8, else
/// NotAnEquilibriumError); a silent non-equilibrium is never returned.
LimitIdentification identify_limit(const ReducedTrajectory& reduced,
                                   const EquilibriumChart& chart);

/// sup_t e^(omega t) (norm_alpha(t) + t^mu norm_xi(t)) / u0_norm,
/// the empirical constant of the time-weighted decay estimate.
/// Requires mu >= 0, u0_norm > 0 and nonnegative sample times.
double weighted_norm_track(const std::vector<double>& times,
                           const std::vector<double>& norm_alpha,
                           const std::vector<double>& norm_xi, double mu,
                           double omega, double u0_norm);

/// Everything a scenario run reports. status is one of "ok", "schema-error",
/// "breakdown", "chart-exit" or "error"; detail carries the reason when the
/// status is not "ok".
struct RunReport {
  std::string scenario;
  std::string model;
  std::string status = "ok";
  std::string detail;
  bool rank_ok = false;
  bool tangent_ok = false;
  bool semisimple_ok = false;
  bool spectrum_ok = false;
  double gap = 0.0;
  double omega_fit = 0.0;
  std::vector<double> x_hat;      // kernel coordinates of the limit
  double limit_residual = 0.0;
  double weighted_k = 0.0;
  std::map<std::string, double> extras;  // model-specific observables
  std::string csv_path;
  std::string svg_path;
  std::string json_path;
};

/// Deterministic serialization: sorted keys, shortest round-trip numbers,
/// an infinite gap rendered as the string "inf", artifact names relative to
/// the report file. Identical reports serialize to identical bytes.
std::string report_to_json(const RunReport& report);

/// Load a scenario config ({model, params, experiment}), run the matching
/// model pipeline end to end, and write trajectory.csv, decay.svg and
/// report.json under out_dir. Config and model failures are folded into the
/// returned status instead of escaping as exceptions.
RunReport run_scenario(const std::filesystem::path& config_path,
                       const std::filesystem::path& out_dir,
                       std::uint64_t seed = 0);

/// Rebuild the polynomial system of a manifold scenario config; when u_star
/// is non-null it receives the configured base point. Schema violations
/// throw ConfigError naming the offending key.
QuasilinearSystem manifold_system_from_config(
    const std::filesystem::path& config_path, Eigen::VectorXd* u_star);

}  // namespace quasistab
