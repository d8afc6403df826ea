#include "quasistab/manifold.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace quasistab {

namespace {

double fd_step(const Eigen::VectorXd& u) {
  return std::cbrt(std::numeric_limits<double>::epsilon()) * (1.0 + u.norm());
}

double spectral_norm(const Eigen::MatrixXd& M) {
  if (M.size() == 0) return 0.0;
  return Eigen::JacobiSVD<Eigen::MatrixXd>(M).singularValues()(0);
}

/// Orthonormal basis of the range of a (near) projector: left singular
/// vectors with singular value above 1/2. Projectors have no singular
/// values between 0 and 1, so the threshold is unambiguous.
Eigen::MatrixXd projector_range_basis(const Eigen::MatrixXd& P, int expected_dim) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(P, Eigen::ComputeFullU);
  int count = 0;
  for (int i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > 0.5) ++count;
  if (count != expected_dim)
    throw Error("projector rank disagrees with eigenvalue cluster size");
  return svd.matrixU().leftCols(expected_dim);
}

void require_square(const Eigen::MatrixXd& M) {
  if (M.rows() != M.cols() || M.rows() < 1)
    throw ConfigError("expected a nonempty square matrix");
  if (!M.allFinite()) throw ConfigError("matrix has non-finite entries");
}

}  // namespace

Eigen::VectorXd QuasilinearSystem::field(const Eigen::VectorXd& u) const {
  if (!A || !f) throw ConfigError("QuasilinearSystem needs both A and f");
  if (u.size() != dim) throw ConfigError("state dimension mismatch");
  return A(u) * u + f(u);
}

Eigen::MatrixXd QuasilinearSystem::dA_dir(const Eigen::VectorXd& u,
                                          const Eigen::VectorXd& w) const {
  if (dA) return dA(u, w);
  double wn = w.norm();
  if (wn == 0.0) return Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd dir = w / wn;
  double h = fd_step(u);
  return (wn / (2.0 * h)) * (A(u + h * dir) - A(u - h * dir));
}

Eigen::MatrixXd QuasilinearSystem::f_jacobian(const Eigen::VectorXd& u) const {
  if (df) return df(u);
  double h = fd_step(u);
  Eigen::MatrixXd J(dim, dim);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(dim);
  for (int j = 0; j < dim; ++j) {
    e(j) = h;
    J.col(j) = (f(u + e) - f(u - e)) / (2.0 * h);
    e(j) = 0.0;
  }
  return J;
}

Eigen::MatrixXd QuasilinearSystem::field_jacobian(const Eigen::VectorXd& u) const {
  Eigen::MatrixXd J = A(u) + f_jacobian(u);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(dim);
  for (int j = 0; j < dim; ++j) {
    e(j) = 1.0;
    J.col(j) += dA_dir(u, e) * u;
    e(j) = 0.0;
  }
  return J;
}

Eigen::MatrixXd linearize_at(const QuasilinearSystem& system,
                             const Eigen::VectorXd& u_star) {
  double residual = system.field(u_star).norm();
  if (residual > 1e-8) {
    std::ostringstream msg;
    msg << "linearize_at: base point is not an equilibrium, residual "
        << residual;
    throw NotAnEquilibriumError(msg.str(), residual);
  }
  return system.field_jacobian(u_star);
}

SpectralSplit spectral_split(const Eigen::MatrixXd& M, double gap_tol) {
  require_square(M);
  const int d = static_cast<int>(M.rows());
  const double ctol = gap_tol * (1.0 + spectral_norm(M));

  Eigen::EigenSolver<Eigen::MatrixXd> es(M);
  if (es.info() != Eigen::Success)
    throw Error("spectral_split: eigensolver did not converge");

  std::vector<std::complex<double>> stable;
  int m = 0;
  double max_re_outside = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < d; ++i) {
    std::complex<double> lam = es.eigenvalues()(i);
    if (std::abs(lam) <= ctol) {
      ++m;
    } else {
      stable.push_back(lam);
      max_re_outside = std::max(max_re_outside, lam.real());
    }
  }
  std::sort(stable.begin(), stable.end(), [](auto a, auto b) {
    if (a.real() != b.real()) return a.real() > b.real();
    return a.imag() < b.imag();
  });

  SpectralSplit out;
  out.kernel_dim = m;
  out.stable_eigs = stable;

  if (m == d) {
    out.P = Eigen::MatrixXd::Identity(d, d);
    out.Q = Eigen::MatrixXd::Zero(d, d);
    out.gap = std::numeric_limits<double>::infinity();
    double nil = spectral_norm(M);
    if (nil > ctol)
      throw SemiSimplicityError(
          "spectral_split: zero cluster carries a nilpotent part", nil);
    out.kernel_basis = Eigen::MatrixXd::Identity(d, d);
    return out;
  }

  out.gap = -max_re_outside;
  if (out.gap <= 0.0)
    throw SpectralConditionError(
        "spectral_split: spectrum outside the zero cluster reaches Re >= 0",
        max_re_outside);
  if (out.gap <= 2.0 * ctol)
    throw SpectralConditionError(
        "spectral_split: gap too small to separate from the zero cluster",
        max_re_outside);

  if (m == 0) {
    out.P = Eigen::MatrixXd::Zero(d, d);
    out.Q = Eigen::MatrixXd::Identity(d, d);
    out.kernel_basis = Eigen::MatrixXd(d, 0);
    return out;
  }

  // Contour-free spectral projector: Newton iteration for the matrix sign
  // of M shifted so the cluster sits at Re = gap/2 and the stable part at
  // Re <= -gap/2. Determinant scaling keeps the iteration well conditioned.
  Eigen::MatrixXd S = M + (out.gap / 2.0) * Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
  bool converged = false;
  for (int it = 0; it < 128; ++it) {
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(S);
    double log_abs_det = 0.0;
    for (int i = 0; i < d; ++i) {
      double uii = std::abs(lu.matrixLU()(i, i));
      if (uii == 0.0) throw Error("spectral_split: sign iteration hit a singular iterate");
      log_abs_det += std::log(uii);
    }
    double mu = std::exp(-log_abs_det / d);
    Eigen::MatrixXd Snew = 0.5 * (mu * S + lu.solve(I) / mu);
    double change = (Snew - S).norm();
    S = Snew;
    if (change <= 1e-13 * (1.0 + S.norm())) {
      converged = true;
      break;
    }
  }
  if (!converged) throw Error("spectral_split: sign iteration stalled");

  Eigen::MatrixXd P = 0.5 * (I + S);
  // Two Newton-Schulz sweeps squeeze the idempotency defect to rounding.
  for (int sweep = 0; sweep < 2; ++sweep) {
    Eigen::MatrixXd P2 = P * P;
    P = 3.0 * P2 - 2.0 * (P2 * P);
  }
  if (std::abs(P.trace() - m) > 0.1)
    throw Error("spectral_split: projector rank disagrees with cluster size");

  double nil = spectral_norm(M * P);
  if (nil > ctol)
    throw SemiSimplicityError(
        "spectral_split: zero cluster carries a nilpotent part", nil);

  out.P = P;
  out.Q = I - P;
  out.kernel_basis = projector_range_basis(P, m);
  return out;
}

namespace {

/// Largest principal angle between the ranges of two orthonormal d x m
/// blocks. Both must have the same column count.
double max_principal_angle(const Eigen::MatrixXd& U, const Eigen::MatrixXd& V) {
  if (U.cols() == 0) return 0.0;
  Eigen::VectorXd s = Eigen::JacobiSVD<Eigen::MatrixXd>(U.transpose() * V).singularValues();
  double smin = std::clamp(s(s.size() - 1), -1.0, 1.0);
  return std::acos(smin);
}

Eigen::MatrixXd orthonormal_range(const Eigen::MatrixXd& B, double rank_tol,
                                  int* rank_out) {
  if (B.cols() == 0) {
    *rank_out = 0;
    return Eigen::MatrixXd(B.rows(), 0);
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(B, Eigen::ComputeThinU);
  double smax = svd.singularValues()(0);
  int r = 0;
  for (int i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > rank_tol * std::max(1.0, smax)) ++r;
  *rank_out = r;
  return svd.matrixU().leftCols(r);
}

}  // namespace

StabilityReport check_normal_stability(
    const QuasilinearSystem& system, const Eigen::VectorXd& u_star,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& manifold_param,
    int manifold_dim, std::uint64_t seed, double sample_radius) {
  if (manifold_dim < 0 || manifold_dim > system.dim)
    throw ConfigError("check_normal_stability: manifold_dim out of range");
  if (sample_radius <= 0.0)
    throw ConfigError("check_normal_stability: sample_radius must be positive");

  double base_mismatch =
      (manifold_param(Eigen::VectorXd::Zero(manifold_dim)) - u_star).norm();
  if (base_mismatch > 1e-8)
    throw ConfigError(
        "check_normal_stability: manifold_param(0) does not match u_star");

  StabilityReport rep;

  // The parametrization must actually produce equilibria near the base point.
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double worst = system.field(u_star).norm();
  for (int trial = 0; trial < 20 && manifold_dim > 0; ++trial) {
    Eigen::VectorXd g(manifold_dim);
    for (int i = 0; i < manifold_dim; ++i) g(i) = gauss(rng);
    double gn = g.norm();
    if (gn == 0.0) continue;
    double r = sample_radius * std::pow(unif(rng), 1.0 / manifold_dim);
    Eigen::VectorXd xi = (r / gn) * g;
    worst = std::max(worst, system.field(manifold_param(xi)).norm());
  }
  rep.worst_residual = worst;
  if (worst > 1e-6) {
    std::ostringstream msg;
    msg << "check_normal_stability: sampled parameters are not equilibria, "
           "worst residual "
        << worst;
    throw NotAnEquilibriumError(msg.str(), worst);
  }

  Eigen::MatrixXd Astar = linearize_at(system, u_star);
  const double ctol = 1e-8 * (1.0 + spectral_norm(Astar));

  // Tangent space of the manifold from the finite-difference Jacobian of
  // the parametrization at 0.
  Eigen::MatrixXd Jpsi(system.dim, manifold_dim);
  {
    double h = std::cbrt(std::numeric_limits<double>::epsilon());
    Eigen::VectorXd e = Eigen::VectorXd::Zero(manifold_dim);
    for (int j = 0; j < manifold_dim; ++j) {
      e(j) = h;
      Jpsi.col(j) = (manifold_param(e) - manifold_param(-e)) / (2.0 * h);
      e(j) = 0.0;
    }
  }
  int rank = 0;
  Eigen::MatrixXd tangent = orthonormal_range(Jpsi, 1e-6, &rank);
  rep.rank_ok = (rank == manifold_dim);

  Eigen::MatrixXd kernel;
  std::vector<std::string> failures;
  try {
    SpectralSplit split = spectral_split(Astar);
    rep.semisimple_ok = true;
    rep.spectrum_ok = true;
    rep.gap = split.gap;
    kernel = split.kernel_basis;
  } catch (const SemiSimplicityError&) {
    rep.semisimple_ok = false;
    failures.push_back("zero eigenvalue is not semi-simple");
    Eigen::EigenSolver<Eigen::MatrixXd> es(Astar);
    double max_re = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < system.dim; ++i) {
      std::complex<double> lam = es.eigenvalues()(i);
      if (std::abs(lam) > ctol) max_re = std::max(max_re, lam.real());
    }
    rep.gap = std::isinf(max_re) ? std::numeric_limits<double>::infinity() : -max_re;
    rep.spectrum_ok = rep.gap > 0.0;
    // Fall back to the geometric kernel for the tangent comparison.
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Astar, Eigen::ComputeFullV);
    int null_dim = 0;
    for (int i = 0; i < svd.singularValues().size(); ++i)
      if (svd.singularValues()(i) <= ctol) ++null_dim;
    kernel = svd.matrixV().rightCols(null_dim);
  } catch (const SpectralConditionError& e) {
    rep.spectrum_ok = false;
    failures.push_back("spectrum outside the kernel is not strictly stable");
    rep.gap = -e.max_real_part;
    Eigen::EigenSolver<Eigen::MatrixXd> es(Astar);
    int alg_mult = 0;
    for (int i = 0; i < system.dim; ++i)
      if (std::abs(es.eigenvalues()(i)) <= ctol) ++alg_mult;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Astar, Eigen::ComputeFullV);
    int null_dim = 0;
    for (int i = 0; i < svd.singularValues().size(); ++i)
      if (svd.singularValues()(i) <= ctol) ++null_dim;
    rep.semisimple_ok = (null_dim == alg_mult);
    if (!rep.semisimple_ok)
      failures.push_back("zero eigenvalue is not semi-simple");
    kernel = svd.matrixV().rightCols(null_dim);
  }

  if (!rep.rank_ok) failures.push_back("parametrization rank deficient");

  if (tangent.cols() != kernel.cols()) {
    rep.tangent_ok = false;
    rep.max_tangent_angle = std::acos(-1.0) / 2.0;
  } else {
    rep.max_tangent_angle = max_principal_angle(tangent, kernel);
    rep.tangent_ok = rep.max_tangent_angle <= 1e-6;
  }
  if (!rep.tangent_ok)
    failures.push_back("manifold tangent does not match the kernel");

  if (failures.empty()) {
    rep.detail = "all normal stability conditions hold";
  } else {
    std::ostringstream msg;
    for (std::size_t i = 0; i < failures.size(); ++i)
      msg << (i ? "; " : "") << failures[i];
    rep.detail = msg.str();
  }
  return rep;
}

EquilibriumChart::EquilibriumChart(QuasilinearSystem system, Eigen::VectorXd base,
                                   SpectralSplit split, double r0,
                                   double newton_tol)
    : system_(std::move(system)),
      base_(std::move(base)),
      split_(std::move(split)),
      r0_(r0),
      newton_tol_(newton_tol) {
  if (r0_ <= 0.0) throw ConfigError("chart radius must be positive");
  if (newton_tol_ <= 0.0) throw ConfigError("newton_tol must be positive");
  int stable_dim = system_.dim - split_.kernel_dim;
  stable_basis_ = projector_range_basis(split_.Q, stable_dim);
}

Eigen::VectorXd EquilibriumChart::phi(const Eigen::VectorXd& x) const {
  if (x.size() != system_.dim) throw ConfigError("phi: dimension mismatch");
  if (x.norm() > r0_)
    throw ChartRadiusError("phi: requested point lies outside the chart radius");
  const int p = static_cast<int>(stable_basis_.cols());
  if (p == 0) return Eigen::VectorXd::Zero(system_.dim);

  // Solve B'Q F(base + x + B w) = 0 for w; B spans range(Q), so the
  // residual vanishes exactly when Q F does.
  auto residual = [&](const Eigen::VectorXd& w) {
    return (stable_basis_.transpose() *
            (split_.Q * system_.field(base_ + x + stable_basis_ * w)))
        .eval();
  };

  Eigen::VectorXd w = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd r = residual(w);
  for (int it = 0; it < 50; ++it) {
    if (r.norm() <= newton_tol_) return stable_basis_ * w;
    Eigen::MatrixXd J = stable_basis_.transpose() * split_.Q *
                        system_.field_jacobian(base_ + x + stable_basis_ * w) *
                        stable_basis_;
    Eigen::VectorXd step = J.partialPivLu().solve(-r);
    if (!step.allFinite())
      throw ChartRadiusError("phi: Newton step not finite, reduce r0");
    double lambda = 1.0;
    bool accepted = false;
    for (int back = 0; back < 30; ++back) {
      Eigen::VectorXd w_try = w + lambda * step;
      Eigen::VectorXd r_try = residual(w_try);
      if (r_try.norm() <= (1.0 - 0.5 * lambda) * r.norm() ||
          r_try.norm() <= newton_tol_) {
        w = w_try;
        r = r_try;
        accepted = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!accepted)
      throw ChartRadiusError("phi: damped Newton made no progress, reduce r0");
  }
  if (r.norm() <= newton_tol_) return stable_basis_ * w;
  throw ChartRadiusError("phi: Newton did not converge in 50 iterations, reduce r0");
}

EquilibriumChart build_graph_chart(const QuasilinearSystem& system,
                                   const Eigen::VectorXd& u_star,
                                   const SpectralSplit& split, double r0,
                                   double newton_tol) {
  if (u_star.size() != system.dim)
    throw ConfigError("build_graph_chart: dimension mismatch");
  return EquilibriumChart(system, u_star, split, r0, newton_tol);
}

namespace {

/// One semi-implicit Euler step: A frozen at the left endpoint and applied
/// implicitly, f explicit. Returns false when the linear solve degenerates.
bool semi_implicit_step(const QuasilinearSystem& sys, const Eigen::VectorXd& u,
                        double dt, Eigen::VectorXd* out) {
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(sys.dim, sys.dim);
  Eigen::MatrixXd lhs = I - dt * sys.A(u);
  Eigen::VectorXd rhs = u + dt * sys.f(u);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(lhs);
  Eigen::VectorXd v = lu.solve(rhs);
  if (!v.allFinite()) return false;
  *out = v;
  return true;
}

}  // namespace

Trajectory simulate(const QuasilinearSystem& system, const Eigen::VectorXd& u0,
                    double t_end, double dt0, int n_samples, double tol) {
  if (u0.size() != system.dim) throw ConfigError("simulate: dimension mismatch");
  if (t_end < 0.0) throw ConfigError("simulate: t_end must be nonnegative");
  if (dt0 <= 0.0) throw ConfigError("simulate: dt must be positive");
  if (n_samples < 2) throw ConfigError("simulate: need at least two samples");
  if (tol <= 0.0) throw ConfigError("simulate: tolerance must be positive");

  Trajectory traj;
  traj.times.push_back(0.0);
  traj.states.push_back(u0);
  if (t_end == 0.0) return traj;

  const double dt_min = 1e-13 * std::max(t_end, 1.0);
  // Trust region: a step that leaves it is rejected like any inaccurate one,
  // so genuine blow-up drives the step size into the underflow report instead
  // of letting the implicit solve vault across the singularity.
  const double cap = 1e6 * (1.0 + u0.norm());
  double t = 0.0;
  Eigen::VectorXd u = u0;
  double dt_ctrl = std::min(dt0, t_end);

  for (int sample = 1; sample < n_samples; ++sample) {
    double target = t_end * sample / (n_samples - 1);
    while (t < target - 1e-14 * t_end) {
      double dt = std::min(dt_ctrl, target - t);
      Eigen::VectorXd big, half, two;
      bool ok = semi_implicit_step(system, u, dt, &big) &&
                semi_implicit_step(system, u, dt / 2.0, &half) &&
                semi_implicit_step(system, half, dt / 2.0, &two);
      if (ok)
        ok = big.allFinite() && two.allFinite() && big.norm() <= cap &&
             two.norm() <= cap;
      double err = ok ? (two - big).norm() : std::numeric_limits<double>::infinity();
      double sc = tol * (1.0 + u.norm());
      if (err <= sc) {
        // Richardson extrapolation of the step-doubled pair.
        u = 2.0 * two - big;
        t += dt;
        double grow = (err > 0.0) ? 0.9 * std::sqrt(sc / err) : 5.0;
        dt_ctrl = dt * std::clamp(grow, 0.2, 5.0);
      } else {
        dt_ctrl = dt * std::max(0.2, 0.9 * std::sqrt(sc / err));
        if (dt_ctrl < dt_min) {
          traj.breakdown = true;
          traj.t_break = t;
          traj.times.push_back(t);
          traj.states.push_back(u);
          return traj;
        }
      }
    }
    traj.times.push_back(target);
    traj.states.push_back(u);
  }
  return traj;
}

ReducedTrajectory reduce_trajectory(const Trajectory& traj,
                                    const EquilibriumChart& chart) {
  ReducedTrajectory red;
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    Eigen::VectorXd v = traj.states[i] - chart.base();
    Eigen::VectorXd x = chart.split().P * v;
    if (x.norm() > chart.r0()) {
      std::ostringstream msg;
      msg << "reduce_trajectory: sample at t = " << traj.times[i]
          << " leaves the chart ball";
      throw ChartExitError(msg.str(), traj.times[i]);
    }
    Eigen::VectorXd y = chart.split().Q * v - chart.phi(x);
    red.times.push_back(traj.times[i]);
    red.x.push_back(x);
    red.y.push_back(y);
    red.y_norm.push_back(y.norm());
  }
  return red;
}

SynthesizedSystem synthesize_normally_stable(int m, int d,
                                             const std::vector<double>& stable_eigs,
                                             double curvature,
                                             std::uint64_t seed) {
  if (m < 1) throw ConfigError("synthesize_normally_stable: m must be >= 1");
  if (d <= m) throw ConfigError("synthesize_normally_stable: need d > m");
  const int p = d - m;
  if (static_cast<int>(stable_eigs.size()) != p)
    throw ConfigError("synthesize_normally_stable: need exactly d - m stable eigenvalues");
  for (double lam : stable_eigs)
    if (!(lam < 0.0))
      throw ConfigError("synthesize_normally_stable: stable eigenvalues must be negative");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  // Haar-ish orthogonal frame: QR of a Gaussian matrix with the sign of the
  // R diagonal fixed.
  Eigen::MatrixXd G(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) G(i, j) = gauss(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
  Eigen::MatrixXd T = qr.householderQ();
  Eigen::MatrixXd R = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < d; ++j)
    if (R(j, j) < 0.0) T.col(j) *= -1.0;

  Eigen::VectorXd lambda(p);
  for (int i = 0; i < p; ++i) lambda(i) = stable_eigs[i];

  // Quadratic graph q_i(z1) = z1' S_i z1 with unit-norm S_i; the single
  // mode case is pinned to q(z1) = z1^2 so the flat-frame system is the
  // textbook parabola.
  std::vector<Eigen::MatrixXd> S(p);
  for (int i = 0; i < p; ++i) {
    if (m == 1) {
      S[i] = Eigen::MatrixXd::Ones(1, 1);
    } else {
      Eigen::MatrixXd W(m, m);
      for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) W(a, b) = gauss(rng);
      S[i] = 0.5 * (W + W.transpose());
      double nrm = spectral_norm(S[i]);
      if (nrm > 0.0) S[i] /= nrm;
    }
  }

  const double coupling = 0.3;
  Eigen::MatrixXd Jmat(m, p);
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < p; ++b) Jmat(a, b) = gauss(rng);
  double jn = spectral_norm(Jmat);
  if (jn > 0.0) Jmat /= jn;

  const double c = curvature;

  auto q_of = [S, p](const Eigen::VectorXd& z1) {
    Eigen::VectorXd q(p);
    for (int i = 0; i < p; ++i) q(i) = z1.dot(S[i] * z1);
    return q;
  };
  auto dq_of = [S, p, m](const Eigen::VectorXd& z1) {
    Eigen::MatrixXd Dq(p, m);
    for (int i = 0; i < p; ++i) Dq.row(i) = 2.0 * (S[i] * z1).transpose();
    return Dq;
  };
  // M1(z) couples the stable components back into the kernel directions
  // with a state-dependent weight, making A genuinely u-dependent.
  auto m1_of = [Jmat, coupling, m](const Eigen::VectorXd& z1) {
    return (coupling * z1.sum()) * Jmat;
  };

  auto a_hat = [m, p, d, lambda, m1_of](const Eigen::VectorXd& z) {
    Eigen::MatrixXd Ah = Eigen::MatrixXd::Zero(d, d);
    Ah.block(0, m, m, p) = m1_of(z.head(m));
    Ah.block(m, m, p, p) = lambda.asDiagonal();
    return Ah;
  };
  auto f_hat = [m, p, d, c, lambda, q_of, m1_of](const Eigen::VectorXd& z) {
    Eigen::VectorXd q = q_of(z.head(m));
    Eigen::VectorXd fh(d);
    fh.head(m) = -c * (m1_of(z.head(m)) * q);
    fh.tail(p) = -c * (lambda.asDiagonal() * q);
    return fh;
  };

  SynthesizedSystem out;
  out.system.dim = d;
  out.system.domain_radius = 1.0;
  out.system.A = [T, a_hat](const Eigen::VectorXd& u) {
    return (T * a_hat(T.transpose() * u) * T.transpose()).eval();
  };
  out.system.f = [T, f_hat](const Eigen::VectorXd& u) {
    return (T * f_hat(T.transpose() * u)).eval();
  };
  out.system.dA = [T, Jmat, coupling, m, p, d](const Eigen::VectorXd&,
                                               const Eigen::VectorXd& w) {
    Eigen::VectorXd wh = T.transpose() * w;
    Eigen::MatrixXd dAh = Eigen::MatrixXd::Zero(d, d);
    dAh.block(0, m, m, p) = (coupling * wh.head(m).sum()) * Jmat;
    return (T * dAh * T.transpose()).eval();
  };
  out.system.df = [T, Jmat, coupling, c, lambda, q_of, dq_of, m1_of, m, p,
                   d](const Eigen::VectorXd& u) {
    Eigen::VectorXd z1 = (T.transpose() * u).head(m);
    Eigen::VectorXd q = q_of(z1);
    Eigen::MatrixXd Dq = dq_of(z1);
    Eigen::MatrixXd Jh = Eigen::MatrixXd::Zero(d, d);
    Jh.block(0, 0, m, m) =
        -c * (coupling * (Jmat * q) * Eigen::RowVectorXd::Ones(m) +
              m1_of(z1) * Dq);
    Jh.block(m, 0, p, m) = -c * (lambda.asDiagonal() * Dq);
    return (T * Jh * T.transpose()).eval();
  };

  out.u_star = Eigen::VectorXd::Zero(d);
  out.kernel_basis_true = T.leftCols(m);
  out.gap_true = -*std::max_element(stable_eigs.begin(), stable_eigs.end());
  out.manifold_param = [T, q_of, c, m, p, d](const Eigen::VectorXd& xi) {
    if (xi.size() != m)
      throw ConfigError("manifold_param: parameter dimension mismatch");
    Eigen::VectorXd z(d);
    z.head(m) = xi;
    z.tail(p) = c * q_of(xi);
    return (T * z).eval();
  };
  out.chart_true = [T, q_of, c, m, p, d](const Eigen::VectorXd& x) {
    Eigen::VectorXd z1 = (T.transpose() * x).head(m);
    Eigen::VectorXd z = Eigen::VectorXd::Zero(d);
    z.tail(p) = c * q_of(z1);
    return (T * z).eval();
  };
  return out;
}

}  // namespace quasistab
