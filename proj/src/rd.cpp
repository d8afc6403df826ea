#include "quasistab/rd.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <sstream>
#include <unordered_map>

namespace quasistab {

namespace {

double default_diffusivity(double u) { return 1.0 + 0.5 * u * u; }

std::mutex& dct_mutex() {
  static std::mutex m;
  return m;
}

struct DctWorkspace {
  double* in;
  double* out;
  fftw_plan plan;
};

// Only call while holding dct_mutex(). Entries live for the process lifetime,
// same policy as the periodic-grid transforms.
DctWorkspace& dct_workspace(int n) {
  static std::unordered_map<int, DctWorkspace> cache;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  DctWorkspace ws;
  ws.in = fftw_alloc_real(n);
  ws.out = fftw_alloc_real(n);
  ws.plan = fftw_plan_r2r_1d(n, ws.in, ws.out, FFTW_REDFT10, FFTW_ESTIMATE);
  if (ws.plan == nullptr) throw Error("fftw could not plan a cosine transform");
  return cache.emplace(n, ws).first->second;
}

double linf(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

/// |grad u|^kappa at cell centers from centered differences, with mirrored
/// ghost cells so the boundary stencils see a flat extension.
std::vector<double> gradient_term(const std::vector<double>& u,
                                  const RdConfig& cfg) {
  const int n = cfg.n_cells;
  std::vector<double> g(n, 0.0);
  if (!cfg.gradient_on) return g;
  const double h = cfg.length / n;
  for (int i = 0; i < n; ++i) {
    const double ul = (i == 0) ? u[0] : u[i - 1];
    const double ur = (i == n - 1) ? u[n - 1] : u[i + 1];
    const double slope = (ur - ul) / (2.0 * h);
    g[i] = std::pow(std::abs(slope), cfg.kappa);
  }
  return g;
}

/// Face diffusivities a((u_i + u_{i+1})/2); index i is the face between
/// cells i-1 and i, with the two boundary faces carrying no flux.
std::vector<double> face_diffusivities(const std::vector<double>& u,
                                       const RdConfig& cfg) {
  const int n = cfg.n_cells;
  std::vector<double> af(n + 1, 0.0);
  for (int i = 1; i < n; ++i) {
    const double av = rd_diffusivity(cfg, 0.5 * (u[i - 1] + u[i]));
    if (!(av >= cfg.a_min)) {
      std::ostringstream os;
      os << "ellipticity certificate violated: a = " << av
         << " below a_min = " << cfg.a_min << " at a face";
      throw ConstraintError(os.str());
    }
    af[i] = av;
  }
  return af;
}

/// One backward-Euler diffusion step with lagged coefficients:
/// (I - dt D_a) u' = u + dt g, solved by the Thomas algorithm. The matrix is
/// strictly diagonally dominant, so no pivoting is needed.
std::vector<double> implicit_diffusion_step(const std::vector<double>& u,
                                            const std::vector<double>& g,
                                            double dtl, const RdConfig& cfg) {
  const int n = cfg.n_cells;
  const double h = cfg.length / n;
  const double r = dtl / (h * h);
  const std::vector<double> af = face_diffusivities(u, cfg);
  std::vector<double> diag(n), rhs(n), cp(n);
  for (int i = 0; i < n; ++i) {
    diag[i] = 1.0 + r * (af[i] + af[i + 1]);
    rhs[i] = u[i] + dtl * g[i];
  }
  cp[0] = -r * af[1] / diag[0];
  rhs[0] /= diag[0];
  for (int i = 1; i < n; ++i) {
    const double lower = -r * af[i];
    const double m = diag[i] - lower * cp[i - 1];
    cp[i] = (i + 1 < n) ? -r * af[i + 1] / m : 0.0;
    rhs[i] = (rhs[i] - lower * rhs[i - 1]) / m;
  }
  for (int i = n - 2; i >= 0; --i) rhs[i] -= cp[i] * rhs[i + 1];
  return rhs;
}

}  // namespace

void validate(const RdConfig& cfg) {
  if (!(cfg.length > 0.0) || !std::isfinite(cfg.length))
    throw ConfigError("domain length must be a positive finite real");
  if (cfg.n_cells < 8) throw ConfigError("need at least 8 cells");
  if (!(cfg.kappa > 3.0))
    throw ConfigError("gradient exponent kappa must exceed 3");
  if (!(cfg.a_min > 0.0))
    throw ConfigError("ellipticity floor a_min must be positive");
  if (!(cfg.proxy_order >= 0.0 && cfg.proxy_order <= 8.0))
    throw ConfigError("proxy norm order must lie in [0, 8]");
}

double rd_diffusivity(const RdConfig& cfg, double u) {
  return cfg.a ? cfg.a(u) : default_diffusivity(u);
}

std::vector<double> rd_cell_centers(const RdConfig& cfg) {
  validate(cfg);
  const double h = cfg.length / cfg.n_cells;
  std::vector<double> x(cfg.n_cells);
  for (int i = 0; i < cfg.n_cells; ++i) x[i] = (i + 0.5) * h;
  return x;
}

double critical_weight_exponent(double q, double xi, double gamma) {
  if (!(q >= 1.0)) throw ConfigError("the exponent q must be at least 1");
  if (q == 1.0) return -std::numeric_limits<double>::infinity();
  return (q * xi - 1.0 - gamma) / (q - 1.0);
}

RdExponents rd_exponents(int n, double p, double kappa, double tau) {
  if (n < 1) throw ConfigError("spatial dimension n must be positive");
  std::ostringstream os;
  if (!(kappa > 3.0)) {
    os << "kappa > 3 violated: kappa = " << kappa;
    throw ConstraintError(os.str());
  }
  const double p_lo = 2.0 * n;
  const double p_hi = (kappa - 1.0) * n;
  if (!(p > p_lo && p < p_hi)) {
    os << "p in (2n, (kappa - 1) n) violated: p = " << p << ", window = ("
       << p_lo << ", " << p_hi << ")";
    throw ConstraintError(os.str());
  }
  const double p_excl = (n - 1.0) * (kappa - 1.0);
  if (std::abs(p - p_excl) < 1e-12) {
    os << "p != (n - 1)(kappa - 1) violated: both equal " << p_excl;
    throw ConstraintError(os.str());
  }
  if (!(2.0 * tau > 0.5)) {
    os << "1/2 < 2 tau violated: 2 tau = " << 2.0 * tau;
    throw ConstraintError(os.str());
  }
  if (!(2.0 * tau < 1.0 - n / p)) {
    os << "2 tau < 1 - n/p violated: 2 tau = " << 2.0 * tau
       << ", 1 - n/p = " << 1.0 - n / p;
    throw ConstraintError(os.str());
  }

  RdExponents e;
  e.n = n;
  e.p = p;
  e.kappa = kappa;
  e.tau = tau;
  e.s_c = n / p + (kappa - 2.0) / (kappa - 1.0);
  e.mu = 1.0 / (2.0 * (kappa - 1.0)) - n / (2.0 * p * kappa);
  e.s = 1.0 + n * (kappa - 1.0) / (p * kappa);
  e.s_bar = 2.0 * tau + n / p;

  // The window above already forces this chain; keep the checks as cheap
  // guards so a bookkeeping slip cannot pass silently.
  if (!(e.s_bar > 0.0)) {
    os << "0 < s_bar violated: s_bar = " << e.s_bar;
    throw ConstraintError(os.str());
  }
  if (!(e.s_bar < e.s_c)) {
    os << "s_bar < s_c violated: s_bar = " << e.s_bar << ", s_c = " << e.s_c;
    throw ConstraintError(os.str());
  }
  if (!(e.s_c < e.s)) {
    os << "s_c < s violated: s_c = " << e.s_c << ", s = " << e.s;
    throw ConstraintError(os.str());
  }
  if (!(e.s < 2.0 - 2.0 * tau)) {
    os << "s < 2 - 2 tau violated: s = " << e.s
       << ", 2 - 2 tau = " << 2.0 - 2.0 * tau;
    throw ConstraintError(os.str());
  }

  e.alpha_crit = critical_weight_exponent(kappa, tau + e.s / 2.0, tau);
  const double alpha = tau + e.s_c / 2.0;
  if (std::abs(e.alpha_crit - alpha) > 1e-12)
    throw ConsistencyError("critical weight exponent disagrees with tau + s_c/2",
                           std::abs(e.alpha_crit - alpha));
  return e;
}

std::vector<double> rd_rhs(const std::vector<double>& u, const RdConfig& cfg) {
  validate(cfg);
  const int n = cfg.n_cells;
  if (static_cast<int>(u.size()) != n)
    throw ConfigError("state size does not match n_cells");
  const double h = cfg.length / n;
  const std::vector<double> af = face_diffusivities(u, cfg);
  std::vector<double> flux(n + 1, 0.0);
  for (int i = 1; i < n; ++i) flux[i] = af[i] * (u[i] - u[i - 1]) / h;
  std::vector<double> out = gradient_term(u, cfg);
  for (int i = 0; i < n; ++i) out[i] += (flux[i + 1] - flux[i]) / h;
  return out;
}

double rd_proxy_norm(const std::vector<double>& v, double order) {
  const int n = static_cast<int>(v.size());
  if (n < 2) throw ConfigError("proxy norm needs at least two cells");
  if (!(order >= 0.0 && order <= 8.0))
    throw ConfigError("proxy norm order must lie in [0, 8]");
  std::lock_guard<std::mutex> lock(dct_mutex());
  DctWorkspace& ws = dct_workspace(n);
  std::copy(v.begin(), v.end(), ws.in);
  fftw_execute(ws.plan);
  // REDFT10 output: X_k = 2 sum_j v_j cos(pi (j + 1/2) k / n), so the
  // cosine amplitudes are A_0 = X_0 / (2n) and A_k = X_k / n.
  const double a0 = ws.out[0] / (2.0 * n);
  double acc = a0 * a0;
  for (int k = 1; k < n; ++k) {
    const double ak = ws.out[k] / n;
    acc += 0.5 * std::pow(1.0 + static_cast<double>(k) * k, order) * ak * ak;
  }
  return std::sqrt(acc);
}

RdTrajectory evolve_rd(const std::vector<double>& u0, const RdConfig& cfg,
                       double t_end, double dt, int n_samples) {
  validate(cfg);
  const int n = cfg.n_cells;
  if (static_cast<int>(u0.size()) != n)
    throw ConfigError("initial state size does not match n_cells");
  for (double x : u0)
    if (!std::isfinite(x)) throw ConfigError("initial state must be finite");
  if (!(t_end > 0.0)) throw ConfigError("t_end must be positive");
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  if (n_samples < 2) throw ConfigError("need at least two samples");

  const double h = cfg.length / n;
  const double cap = 1e6 * (1.0 + linf(u0));
  const double dt_floor = dt * 1e-10;

  RdTrajectory traj;
  auto record = [&](double t, const std::vector<double>& u) {
    const double m = mean_of(u);
    double sq = 0.0, dsq = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d = u[i] - m;
      sq += h * d * d;
      if (i + 1 < n) {
        const double sl = (u[i + 1] - u[i]) / h;
        dsq += h * sl * sl;
      }
    }
    std::vector<double> dev(n);
    for (int i = 0; i < n; ++i) dev[i] = u[i] - m;
    traj.times.push_back(t);
    traj.states.push_back(u);
    traj.means.push_back(m);
    traj.dev_l2.push_back(std::sqrt(sq));
    traj.dev_h1.push_back(std::sqrt(sq + dsq));
    traj.dev_proxy.push_back(rd_proxy_norm(dev, cfg.proxy_order));
  };

  std::vector<double> u = u0;
  record(0.0, u);
  double t = 0.0;
  double dt_cur = dt;
  for (int s = 1; s < n_samples; ++s) {
    const double target = t_end * s / (n_samples - 1);
    while (t < target - 1e-12 * t_end) {
      const double dtl = std::min(dt_cur, target - t);
      const std::vector<double> g = gradient_term(u, cfg);
      // Keep the explicit increment a fraction of the state scale; halve the
      // step otherwise and report breakdown once halving stops helping.
      if (dtl * linf(g) > 0.25 * (1.0 + linf(u))) {
        dt_cur *= 0.5;
        if (dt_cur < dt_floor) {
          traj.breakdown = true;
          traj.t_break = t;
          record(t, u);
          return traj;
        }
        continue;
      }
      std::vector<double> next = implicit_diffusion_step(u, g, dtl, cfg);
      bool sane = true;
      for (double x : next)
        if (!std::isfinite(x) || std::abs(x) > cap) sane = false;
      if (!sane) {
        traj.breakdown = true;
        traj.t_break = t + dtl;
        record(t, u);
        return traj;
      }
      u = std::move(next);
      t += dtl;
      if (dtl == dt_cur && dt_cur < dt) dt_cur = std::min(dt, 2.0 * dt_cur);
    }
    record(target, u);
  }
  return traj;
}

RdWeightedReport rd_weighted_diagnostic(const RdTrajectory& traj,
                                        const RdExponents& exps,
                                        double omega) {
  const std::size_t len = traj.times.size();
  if (len < 2 || traj.states.size() != len || traj.means.size() != len)
    throw InsufficientDataError("trajectory too short for the weighted diagnostic");
  if (traj.breakdown)
    throw PrematureLimitError("trajectory broke down before reaching a limit",
                              std::numeric_limits<double>::infinity());

  const double t_end = traj.times.back();
  std::size_t j0 = 0;
  while (j0 + 1 < len && traj.times[j0] < 0.9 * t_end) ++j0;
  if (j0 + 1 == len) j0 = len - 2;
  const double span = t_end - traj.times[j0];
  const double movement =
      span > 0.0 ? std::abs(traj.means.back() - traj.means[j0]) / span : 0.0;
  if (movement > 1e-10) {
    std::ostringstream os;
    os << "mean still moving at " << movement
       << " per unit time; extend the run before reading off the limit";
    throw PrematureLimitError(os.str(), movement);
  }

  RdWeightedReport rep;
  rep.u_hat = traj.means.back();
  rep.tail_rate = movement;

  const double alpha = exps.tau + exps.s_c / 2.0;
  const double xi = exps.tau + exps.s / 2.0;
  auto shifted_norm = [&](const std::vector<double>& st, double order) {
    std::vector<double> d(st.size());
    for (std::size_t i = 0; i < st.size(); ++i) d[i] = st[i] - rep.u_hat;
    return rd_proxy_norm(d, order);
  };

  const double denom = shifted_norm(traj.states.front(), alpha);
  // A run that starts at its limit only carries rounding noise; report the
  // constant as exactly zero instead of a ratio of that noise.
  if (denom <= 1e-12 * (1.0 + std::abs(rep.u_hat))) return rep;

  double best = 0.0;
  std::size_t arg = 0;
  for (std::size_t i = 0; i < len; ++i) {
    const double t = traj.times[i];
    const double val = std::exp(omega * t) *
                       (shifted_norm(traj.states[i], alpha) +
                        std::pow(t, exps.mu) * shifted_norm(traj.states[i], xi)) /
                       denom;
    if (val > best) {
      best = val;
      arg = i;
    }
  }
  rep.k_stat = best;
  rep.sup_at_end = (arg + 1 == len);
  return rep;
}

}  // namespace quasistab
