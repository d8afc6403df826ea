#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "quasistab/rd.hpp"

using namespace quasistab;
using std::numbers::pi;

namespace {

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double linf(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

/// Least-squares slope of log(norms) against time.
double log_slope(const std::vector<double>& t, const std::vector<double>& y) {
  double st = 0, sl = 0, stt = 0, stl = 0;
  int cnt = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (y[i] <= 0) continue;
    const double l = std::log(y[i]);
    st += t[i];
    sl += l;
    stt += t[i] * t[i];
    stl += t[i] * l;
    ++cnt;
  }
  REQUIRE(cnt >= 5);
  return (cnt * stl - st * sl) / (cnt * stt - st * st);
}

std::vector<double> cosine_state(const RdConfig& cfg, double mean, double amp,
                                 int mode) {
  std::vector<double> x = rd_cell_centers(cfg);
  std::vector<double> u(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    u[i] = mean + amp * std::cos(mode * pi * x[i] / cfg.length);
  return u;
}

bool message_contains(const std::exception& e, const std::string& needle) {
  return std::string(e.what()).find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("critical weight exponent formula and its degenerate limit") {
  // Reference point: q = 4, xi = 0.925, gamma = 0.275 gives 2.425 / 3.
  CHECK(critical_weight_exponent(4.0, 0.925, 0.275) ==
        doctest::Approx(2.425 / 3.0).epsilon(1e-14));
  const double lim = critical_weight_exponent(1.0, 0.925, 0.275);
  CHECK(std::isinf(lim));
  CHECK(lim < 0.0);
  CHECK_THROWS_AS(critical_weight_exponent(0.5, 1.0, 0.0), ConfigError);
}

TEST_CASE("exponent bookkeeping at the reference parameters") {
  const RdExponents e = rd_exponents(2, 5.0, 4.0, 0.275);
  CHECK(e.s_c == doctest::Approx(16.0 / 15.0).epsilon(1e-12));
  CHECK(e.mu == doctest::Approx(7.0 / 60.0).epsilon(1e-12));
  CHECK(e.s == doctest::Approx(1.3).epsilon(1e-12));
  CHECK(e.s_bar == doctest::Approx(0.95).epsilon(1e-12));
  // The admissible-weight threshold lands exactly on tau + s_c / 2.
  CHECK(e.alpha_crit ==
        doctest::Approx(e.tau + e.s_c / 2.0).epsilon(1e-12));
  CHECK(e.s_bar > 0.0);
  CHECK(e.s_bar < e.s_c);
  CHECK(e.s_c < e.s);
  CHECK(e.s < 2.0 - 2.0 * e.tau);
}

TEST_CASE("admissibility window rejections name the failed inequality") {
  try {
    rd_exponents(2, 4.0, 4.0, 0.275);
    FAIL("p on the window edge must be rejected");
  } catch (const ConstraintError& e) {
    CHECK(message_contains(e, "p in (2n"));
  }
  try {
    rd_exponents(4, 9.0, 4.0, 0.26);
    FAIL("the excluded p value must be rejected");
  } catch (const ConstraintError& e) {
    CHECK(message_contains(e, "p != (n - 1)(kappa - 1)"));
  }
  try {
    rd_exponents(2, 5.0, 4.0, 0.2);
    FAIL("tau below the window must be rejected");
  } catch (const ConstraintError& e) {
    CHECK(message_contains(e, "1/2 < 2 tau"));
  }
  try {
    rd_exponents(2, 5.0, 4.0, 0.31);
    FAIL("tau above the window must be rejected");
  } catch (const ConstraintError& e) {
    CHECK(message_contains(e, "2 tau < 1 - n/p"));
  }
  try {
    rd_exponents(2, 5.0, 3.0, 0.275);
    FAIL("kappa at the threshold must be rejected");
  } catch (const ConstraintError& e) {
    CHECK(message_contains(e, "kappa > 3"));
  }
  CHECK_THROWS_AS(rd_exponents(0, 5.0, 4.0, 0.275), ConfigError);
}

TEST_CASE("rhs vanishes on constants and conserves the diffusive mass") {
  RdConfig cfg;
  cfg.n_cells = 128;

  const std::vector<double> c(cfg.n_cells, 0.37);
  for (double v : rd_rhs(c, cfg)) CHECK(v == 0.0);

  // A lumpy but smooth state; the diffusive part must average to zero by
  // flux telescoping, and the gradient part is what the mean picks up.
  std::vector<double> x = rd_cell_centers(cfg);
  std::vector<double> u(cfg.n_cells);
  for (int i = 0; i < cfg.n_cells; ++i)
    u[i] = 0.4 * std::sin(7.0 * x[i]) + 0.2 * std::cos(3.0 * x[i] + 0.5);

  RdConfig off = cfg;
  off.gradient_on = false;
  const std::vector<double> rhs_off = rd_rhs(u, off);
  CHECK(std::abs(mean_of(rhs_off)) <= 1e-12 * (1.0 + linf(rhs_off)));

  const std::vector<double> rhs_on = rd_rhs(u, cfg);
  const double gmean = mean_of(rhs_on) - mean_of(rhs_off);
  CHECK(gmean > 0.0);
  CHECK(mean_of(rhs_on) > 0.0);
}

TEST_CASE("diffusive rhs reproduces the first Neumann eigenvalue") {
  RdConfig cfg;
  cfg.n_cells = 256;
  cfg.gradient_on = false;
  cfg.a = [](double) { return 1.0; };

  const std::vector<double> u = cosine_state(cfg, 0.0, 1.0, 1);
  const std::vector<double> rhs = rd_rhs(u, cfg);

  // cos(pi x) sampled at cell centers is an exact eigenvector of the
  // zero-flux scheme; its eigenvalue approaches -(pi/L)^2 at second order.
  const double h = cfg.length / cfg.n_cells;
  const double lam_h = -(2.0 - 2.0 * std::cos(pi * h)) / (h * h);
  double worst = 0.0;
  for (int i = 0; i < cfg.n_cells; ++i)
    worst = std::max(worst, std::abs(rhs[i] - lam_h * u[i]));
  CHECK(worst <= 1e-10 * std::abs(lam_h));
  CHECK(std::abs(lam_h + pi * pi) <= 2e-5 * pi * pi);
}

TEST_CASE("proxy norm matches hand-computed cosine amplitudes") {
  const int n = 64;
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i)
    v[i] = 3.0 + 2.0 * std::cos(pi * (i + 0.5) / n);
  // Amplitudes A_0 = 3, A_1 = 2: norm^2 = 9 + (1 + 1)^order * 4 / 2.
  CHECK(rd_proxy_norm(v, 1.0) == doctest::Approx(std::sqrt(13.0)).epsilon(1e-13));
  CHECK(rd_proxy_norm(v, 0.0) == doctest::Approx(std::sqrt(11.0)).epsilon(1e-13));
  CHECK(rd_proxy_norm(std::vector<double>(n, -0.8), 2.0) ==
        doctest::Approx(0.8).epsilon(1e-13));
  CHECK_THROWS_AS(rd_proxy_norm(v, -1.0), ConfigError);
}

TEST_CASE("constant data stays put") {
  RdConfig cfg;
  cfg.n_cells = 64;
  const std::vector<double> u0(cfg.n_cells, 0.7);
  const RdTrajectory traj = evolve_rd(u0, cfg, 0.1, 5e-4, 21);
  CHECK_FALSE(traj.breakdown);
  for (const auto& st : traj.states)
    for (double v : st) CHECK(v == doctest::Approx(0.7).epsilon(1e-13));
  for (double m : traj.means) CHECK(m == doctest::Approx(0.7).epsilon(1e-13));
  for (double d : traj.dev_l2) CHECK(d <= 1e-12);
}

TEST_CASE("gradient-off runs conserve mass and decay at the heat rate") {
  RdConfig cfg;
  cfg.n_cells = 256;
  cfg.gradient_on = false;
  cfg.a = [](double) { return 1.0; };

  const std::vector<double> u0 = cosine_state(cfg, 0.3, 0.1, 1);
  const RdTrajectory traj = evolve_rd(u0, cfg, 1.0, 5e-4, 101);
  CHECK_FALSE(traj.breakdown);

  for (double m : traj.means) CHECK(std::abs(m - traj.means.front()) <= 1e-10);

  const double rate = -log_slope(traj.times, traj.dev_l2);
  CHECK(rate == doctest::Approx(pi * pi).epsilon(0.02));
}

TEST_CASE("gradient forcing pushes the mean up to a constant limit") {
  RdConfig cfg;
  cfg.n_cells = 128;
  const std::vector<double> u0 = cosine_state(cfg, 0.0, 0.2, 1);
  const RdTrajectory traj = evolve_rd(u0, cfg, 2.0, 5e-4, 201);
  CHECK_FALSE(traj.breakdown);

  for (std::size_t i = 0; i + 1 < traj.means.size(); ++i) {
    CHECK(traj.means[i + 1] >= traj.means[i] - 1e-13);
    if (traj.dev_h1[i] > 1e-2) CHECK(traj.means[i + 1] > traj.means[i]);
  }
  CHECK(traj.means.back() > 0.0);
  CHECK(traj.dev_l2.back() <= 1e-8);

  // The limit is the tail mean; movement over the final stretch is gone.
  const std::size_t k = traj.means.size() - 21;
  CHECK(std::abs(traj.means.back() - traj.means[k]) <= 1e-10);
}

TEST_CASE("limit constant converges at second order in the mesh") {
  auto limit_for = [](int n_cells) {
    RdConfig cfg;
    cfg.n_cells = n_cells;
    const std::vector<double> u0 = cosine_state(cfg, 0.1, 0.2, 1);
    const RdTrajectory traj = evolve_rd(u0, cfg, 2.0, 5e-4, 11);
    REQUIRE_FALSE(traj.breakdown);
    return traj.means.back();
  };
  const double u64 = limit_for(64);
  const double u128 = limit_for(128);
  const double u256 = limit_for(256);
  const double d1 = u64 - u128;
  const double d2 = u128 - u256;
  REQUIRE(d2 != 0.0);
  CHECK(d1 / d2 == doctest::Approx(4.0).epsilon(0.4));
}

TEST_CASE("weighted diagnostic on the linear heat oracle") {
  RdConfig cfg;
  cfg.n_cells = 128;
  cfg.gradient_on = false;
  cfg.a = [](double) { return 1.0; };
  const RdExponents exps = rd_exponents(2, 5.0, 4.0, 0.275);
  const std::vector<double> u0 = cosine_state(cfg, 0.5, 0.1, 1);

  const RdTrajectory t1 = evolve_rd(u0, cfg, 1.5, 5e-4, 151);
  const RdTrajectory t2 = evolve_rd(u0, cfg, 3.0, 5e-4, 301);

  // Below the decay rate the sup sits in the interior and is insensitive to
  // how long the run continues.
  const double om = 0.9 * pi * pi;
  const RdWeightedReport r1 = rd_weighted_diagnostic(t1, exps, om);
  const RdWeightedReport r2 = rd_weighted_diagnostic(t2, exps, om);
  CHECK(r1.k_stat > 0.0);
  CHECK(std::isfinite(r1.k_stat));
  CHECK_FALSE(r1.sup_at_end);
  CHECK(std::abs(r2.k_stat - r1.k_stat) <= 0.05 * r1.k_stat);
  CHECK(r1.u_hat == doctest::Approx(0.5).epsilon(1e-10));

  // Above the rate the statistic keeps growing with the horizon. The second
  // run stops at 2.2 so the deviation (about 3e-11 there) still clears the
  // integrator's roundoff floor; much later samples are pure noise and the
  // sup could land on any of them.
  const double om_hi = 1.3 * pi * pi;
  const RdTrajectory t3 = evolve_rd(u0, cfg, 2.2, 5e-4, 221);
  const RdWeightedReport g1 = rd_weighted_diagnostic(t1, exps, om_hi);
  const RdWeightedReport g3 = rd_weighted_diagnostic(t3, exps, om_hi);
  CHECK(g1.sup_at_end);
  CHECK(g3.sup_at_end);
  // Expected growth exp((1.3 - 1) pi^2 (2.2 - 1.5)) is about 7.9.
  CHECK(g3.k_stat > 5.0 * g1.k_stat);
}

TEST_CASE("weighted diagnostic guards") {
  const RdExponents exps = rd_exponents(2, 5.0, 4.0, 0.275);

  RdConfig cfg;
  cfg.n_cells = 64;
  const RdTrajectory flat = evolve_rd(std::vector<double>(64, 0.4), cfg, 0.5, 5e-4, 26);
  const RdWeightedReport rep = rd_weighted_diagnostic(flat, exps, 2.0);
  CHECK(rep.k_stat == 0.0);
  CHECK(rep.u_hat == doctest::Approx(0.4).epsilon(1e-12));
  CHECK_FALSE(rep.sup_at_end);

  // A run cut off while the mean is still climbing is refused.
  cfg.n_cells = 128;
  const std::vector<double> u0 = cosine_state(cfg, 0.3, 0.2, 1);
  const RdTrajectory early = evolve_rd(u0, cfg, 0.2, 5e-4, 21);
  try {
    rd_weighted_diagnostic(early, exps, 1.0);
    FAIL("moving mean must be refused");
  } catch (const PrematureLimitError& e) {
    CHECK(e.y_norm > 1e-10);
  }

  RdTrajectory stub;
  stub.times = {0.0};
  stub.states = {std::vector<double>(8, 0.0)};
  stub.means = {0.0};
  CHECK_THROWS_AS(rd_weighted_diagnostic(stub, exps, 1.0), InsufficientDataError);
}

TEST_CASE("violent gradients drive the step size to breakdown") {
  RdConfig cfg;
  cfg.n_cells = 128;
  cfg.a = [](double) { return 1e-3; };
  cfg.a_min = 1e-3;
  const std::vector<double> u0 = cosine_state(cfg, 0.0, 20.0, 3);
  const RdTrajectory traj = evolve_rd(u0, cfg, 1.0, 5e-4, 11);
  CHECK(traj.breakdown);
  CHECK(traj.t_break < 1.0);
  for (const auto& st : traj.states)
    for (double v : st) CHECK(std::isfinite(v));
}

TEST_CASE("evolution input validation") {
  RdConfig cfg;
  cfg.n_cells = 64;
  const std::vector<double> u0(64, 0.1);
  CHECK_THROWS_AS(evolve_rd(std::vector<double>(63, 0.1), cfg, 1.0), ConfigError);
  CHECK_THROWS_AS(evolve_rd(u0, cfg, 0.0), ConfigError);
  CHECK_THROWS_AS(evolve_rd(u0, cfg, 1.0, 0.0), ConfigError);
  CHECK_THROWS_AS(evolve_rd(u0, cfg, 1.0, 5e-4, 1), ConfigError);

  RdConfig bad = cfg;
  bad.n_cells = 4;
  CHECK_THROWS_AS(validate(bad), ConfigError);
  bad = cfg;
  bad.kappa = 2.0;
  CHECK_THROWS_AS(validate(bad), ConfigError);

  // A diffusivity dipping below the certificate is caught at the faces.
  RdConfig dip = cfg;
  dip.a = [](double u) { return 1.0 - 10.0 * u; };
  CHECK_THROWS_AS(rd_rhs(std::vector<double>(64, 0.2), dip), ConstraintError);
}
