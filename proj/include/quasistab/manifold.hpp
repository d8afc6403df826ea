#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "quasistab/errors.hpp"

namespace quasistab {

/// Finite-dimensional quasilinear vector field u' = A(u) u + f(u) with
/// derivative access. dA and df are optional; central finite differences
/// with step h = eps^(1/3) (1 + |u|) fill in when they are absent.
struct QuasilinearSystem {
  int dim = 0;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> A;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> f;
  /// Directional derivative (u, w) -> dA(u)[w].
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&, const Eigen::VectorXd&)> dA;
  /// Jacobian of f.
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> df;
  double domain_radius = 1.0;

  /// A(u) u + f(u).
  Eigen::VectorXd field(const Eigen::VectorXd& u) const;
  /// Jacobian of the full field: A(u) + sum_j (dA(u)[e_j] u) e_j^T + df(u).
  Eigen::MatrixXd field_jacobian(const Eigen::VectorXd& u) const;
  /// dA(u)[w], analytic when supplied, else finite differences.
  Eigen::MatrixXd dA_dir(const Eigen::VectorXd& u, const Eigen::VectorXd& w) const;
  /// df(u), analytic when supplied, else finite differences.
  Eigen::MatrixXd f_jacobian(const Eigen::VectorXd& u) const;
};

/// Decomposition of state space into the zero-eigenvalue subspace (range P)
/// and the decaying complement (range Q).
struct SpectralSplit {
  Eigen::MatrixXd P;
  Eigen::MatrixXd Q;
  int kernel_dim = 0;
  Eigen::MatrixXd kernel_basis;  // d x kernel_dim, orthonormal columns
  double gap = 0.0;              // +infinity when nothing decays
  std::vector<std::complex<double>> stable_eigs;
};

/// Linearization of the field at an equilibrium:
/// w -> A(u*) w + (dA(u*)[w]) u* + df(u*) w.
/// Throws NotAnEquilibriumError when |A(u*) u* + f(u*)| > 1e-8.
Eigen::MatrixXd linearize_at(const QuasilinearSystem& system,
                             const Eigen::VectorXd& u_star);

/// Split the spectrum of M into the cluster |lambda| <= gap_tol (1 + |M|)
/// around zero and the rest. The projection is built contour-free through a
/// matrix sign iteration. Throws SemiSimplicityError when the cluster block
/// is not diagonalizable at tolerance, SpectralConditionError when spectrum
/// outside the cluster touches Re >= 0.
SpectralSplit spectral_split(const Eigen::MatrixXd& M, double gap_tol = 1e-8);

/// Outcome of the four normal-stability conditions at an equilibrium.
struct StabilityReport {
  bool rank_ok = false;        // parametrization has full rank m
  bool tangent_ok = false;     // tangent space equals ker of the linearization
  bool semisimple_ok = false;  // zero eigenvalue carries no nilpotent part
  bool spectrum_ok = false;    // remaining spectrum decays with positive gap
  double gap = 0.0;
  double worst_residual = 0.0;      // largest sampled equilibrium residual
  double max_tangent_angle = 0.0;   // largest principal angle, radians
  std::string detail;

  bool passed() const {
    return rank_ok && tangent_ok && semisimple_ok && spectrum_ok;
  }
};

/// Verify the normal-stability conditions for the equilibrium manifold
/// parametrized by manifold_param: R^manifold_dim -> R^d near u_star.
/// Preconditions: manifold_param(0) = u_star to 1e-8 and sampled parameters
/// inside sample_radius give equilibria with residual <= 1e-6, otherwise
/// NotAnEquilibriumError carries the worst residual.
StabilityReport check_normal_stability(
    const QuasilinearSystem& system, const Eigen::VectorXd& u_star,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& manifold_param,
    int manifold_dim, std::uint64_t seed = 0, double sample_radius = 1e-3);

/// Graph description of the equilibrium set near a base point: for x in
/// range(P) with |x| <= r0, base + x + phi(x) is an equilibrium.
class EquilibriumChart {
 public:
  EquilibriumChart(QuasilinearSystem system, Eigen::VectorXd base,
                   SpectralSplit split, double r0, double newton_tol);

  /// Graph map: x in range(P), |x| <= r0, to the matching offset in range(Q).
  /// Newton iteration seeded at zero; ChartRadiusError on failure.
  Eigen::VectorXd phi(const Eigen::VectorXd& x) const;

  const Eigen::VectorXd& base() const { return base_; }
  const SpectralSplit& split() const { return split_; }
  const QuasilinearSystem& system() const { return system_; }
  const Eigen::MatrixXd& stable_basis() const { return stable_basis_; }
  double r0() const { return r0_; }
  double newton_tol() const { return newton_tol_; }

 private:
  QuasilinearSystem system_;
  Eigen::VectorXd base_;
  SpectralSplit split_;
  Eigen::MatrixXd stable_basis_;  // d x (d - m), orthonormal basis of range(Q)
  double r0_;
  double newton_tol_;
};

/// Construct the chart at u_star. The split must come from linearize_at of
/// the same system at the same point.
EquilibriumChart build_graph_chart(const QuasilinearSystem& system,
                                   const Eigen::VectorXd& u_star,
                                   const SpectralSplit& split, double r0,
                                   double newton_tol = 1e-12);

/// Time samples of a full state trajectory. `breakdown` marks step-size
/// underflow; the last stored state is the final valid one.
struct Trajectory {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
  bool breakdown = false;
  double t_break = 0.0;
};

/// Integrate u' = A(u) u + f(u) with an adaptive semi-implicit scheme:
/// A(u_n) implicit, f explicit, step-doubling error control at `tol`,
/// Richardson-extrapolated updates. Samples are returned at n_samples
/// uniformly spaced times including 0 and t_end. States beyond the trust
/// radius 1e6 (1 + |u0|) are rejected, so divergence surfaces as breakdown.
Trajectory simulate(const QuasilinearSystem& system, const Eigen::VectorXd& u0,
                    double t_end, double dt0, int n_samples = 201,
                    double tol = 1e-10);

/// Trajectory in chart coordinates: x = P(u - base), y = Q(u - base) - phi(x).
struct ReducedTrajectory {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> x;
  std::vector<Eigen::VectorXd> y;
  std::vector<double> y_norm;
};

/// Reduce every sample; ChartExitError (with the exit time) when a sample
/// leaves the chart ball.
ReducedTrajectory reduce_trajectory(const Trajectory& traj,
                                    const EquilibriumChart& chart);

/// A generated test system together with its ground truth.
struct SynthesizedSystem {
  QuasilinearSystem system;
  Eigen::VectorXd u_star;
  Eigen::MatrixXd kernel_basis_true;  // d x m
  double gap_true = 0.0;
  /// xi in R^m -> equilibrium point of the system.
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> manifold_param;
  /// x in range(P) -> offset in range(Q); ground truth for the chart.
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> chart_true;
};

/// Build a quasilinear system whose equilibrium set near 0 is the graph
/// {(xi, curvature * q(xi))} over an m-dimensional kernel, expressed in a
/// seeded random orthogonal frame, with the requested decaying eigenvalues.
SynthesizedSystem synthesize_normally_stable(int m, int d,
                                             const std::vector<double>& stable_eigs,
                                             double curvature,
                                             std::uint64_t seed = 0);

}  // namespace quasistab
