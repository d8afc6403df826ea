#include "quasistab/lab.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <limits>
#include <memory>
#include <numbers>
#include <sstream>

#include "quasistab/fmcf.hpp"
#include "quasistab/grid.hpp"
#include "quasistab/heleshaw.hpp"
#include "quasistab/io.hpp"
#include "quasistab/rd.hpp"

namespace quasistab {

using nlohmann::json;
namespace fs = std::filesystem;

DecayFit fit_decay(const std::vector<double>& times,
                   const std::vector<double>& norms, double floor) {
  if (times.size() != norms.size())
    throw ConfigError("fit_decay: times and norms must have the same length");
  for (std::size_t i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1]))
      throw ConfigError("fit_decay: times must be strictly increasing");
  for (double v : norms)
    if (!(v > 0.0) || !std::isfinite(v))
      throw ConfigError("fit_decay: norms must be positive and finite");
  if (floor < 0.0) floor = norms.empty() ? 0.0 : 1e-12 * norms.front();

  std::vector<double> t, l;
  for (std::size_t i = 0; i < norms.size(); ++i)
    if (norms[i] > 10.0 * floor) {
      t.push_back(times[i]);
      l.push_back(std::log(norms[i]));
    }
  const std::size_t m = t.size();
  if (m < 10) {
    std::ostringstream os;
    os << "fit_decay: only " << m << " samples above 10x the noise floor "
       << floor << "; need at least 10";
    throw InsufficientDataError(os.str());
  }

  // Suffix sums make every trailing window an O(1) evaluation.
  std::vector<double> st(m + 1, 0.0), sl(m + 1, 0.0), stt(m + 1, 0.0),
      stl(m + 1, 0.0), sll(m + 1, 0.0);
  for (std::size_t i = m; i-- > 0;) {
    st[i] = st[i + 1] + t[i];
    sl[i] = sl[i + 1] + l[i];
    stt[i] = stt[i + 1] + t[i] * t[i];
    stl[i] = stl[i + 1] + t[i] * l[i];
    sll[i] = sll[i + 1] + l[i] * l[i];
  }
  struct Line {
    double slope, icept, rms;
  };
  auto eval = [&](std::size_t i) -> Line {
    const double cnt = static_cast<double>(m - i);
    const double mt = st[i] / cnt, ml = sl[i] / cnt;
    const double ctt = stt[i] - cnt * mt * mt;
    const double ctl = stl[i] - cnt * mt * ml;
    const double cll = sll[i] - cnt * ml * ml;
    const double slope = ctt > 0.0 ? ctl / ctt : 0.0;
    const double r2 = std::max(0.0, (cll - slope * ctl) / cnt);
    return {slope, ml - slope * mt, std::sqrt(r2)};
  };

  // Largest trailing window under the residual target; the floor cut above
  // already discards the noise-dominated tail, so the window search only has
  // to skip the initial transient.
  std::size_t best = 0;
  bool found = false;
  for (std::size_t i = 0; i + 10 <= m; ++i)
    if (eval(i).rms <= 0.05) {
      best = i;
      found = true;
      break;
    }
  if (!found) {
    double best_rms = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 10 <= m; ++i) {
      const double r = eval(i).rms;
      if (r < best_rms) {
        best_rms = r;
        best = i;
      }
    }
  }

  const Line line = eval(best);
  DecayFit fit;
  fit.omega_fit = -line.slope;
  if (fit.omega_fit == 0.0) fit.omega_fit = 0.0;  // strip a negative zero
  fit.k_fit = std::exp(line.icept) / norms.front();
  fit.t_lo = t[best];
  fit.t_hi = t.back();
  fit.residual = line.rms;
  fit.floor = floor;
  fit.window_ok = found;
  return fit;
}

LimitIdentification identify_limit(const ReducedTrajectory& reduced,
                                   const EquilibriumChart& chart) {
  if (reduced.times.empty() || reduced.x.empty() || reduced.y_norm.empty())
    throw InsufficientDataError("identify_limit: reduced trajectory is empty");
  const double yn = reduced.y_norm.back();
  if (!(yn <= 1e-8)) {
    std::ostringstream os;
    os << "stable coordinate still at " << yn << " when the run ended";
    throw PrematureLimitError(os.str(), yn);
  }
  LimitIdentification out;
  out.x_hat = reduced.x.back();
  out.u_hat = chart.base() + out.x_hat + chart.phi(out.x_hat);
  out.residual = chart.system().field(out.u_hat).norm();
  if (!(out.residual <= 1e-8)) {
    std::ostringstream os;
    os << "claimed limit misses the equilibrium set, residual "
       << out.residual;
    throw NotAnEquilibriumError(os.str(), out.residual);
  }
  return out;
}

double weighted_norm_track(const std::vector<double>& times,
                           const std::vector<double>& norm_alpha,
                           const std::vector<double>& norm_xi, double mu,
                           double omega, double u0_norm) {
  if (times.size() != norm_alpha.size() || times.size() != norm_xi.size())
    throw ConfigError("weighted_norm_track: length mismatch");
  if (!(mu >= 0.0)) throw ConfigError("weighted_norm_track: mu must be >= 0");
  if (!(u0_norm > 0.0))
    throw ConfigError("weighted_norm_track: u0_norm must be positive");
  double sup = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < 0.0)
      throw ConfigError("weighted_norm_track: times must be nonnegative");
    const double w =
        std::exp(omega * times[i]) *
        (norm_alpha[i] + std::pow(times[i], mu) * norm_xi[i]) / u0_norm;
    sup = std::max(sup, w);
  }
  return sup;
}

std::string report_to_json(const RunReport& report) {
  json j;
  j["scenario"] = report.scenario;
  j["model"] = report.model;
  j["status"] = report.status;
  j["detail"] = report.detail;
  j["conditions"] = {{"rank", report.rank_ok},
                     {"tangent", report.tangent_ok},
                     {"semisimple", report.semisimple_ok},
                     {"spectrum", report.spectrum_ok}};
  j["gap"] = std::isfinite(report.gap) ? json(report.gap)
                                       : json(format_double(report.gap));
  j["omega_fit"] = report.omega_fit;
  j["x_hat"] = report.x_hat;
  j["limit_residual"] = report.limit_residual;
  j["weighted_k"] = report.weighted_k;
  json ex = json::object();
  for (const auto& [key, value] : report.extras)
    ex[key] = std::isfinite(value) ? json(value) : json(format_double(value));
  j["extras"] = ex;
  j["artifacts"] = {{"csv", report.csv_path.empty() ? "" : "trajectory.csv"},
                    {"svg", report.svg_path.empty() ? "" : "decay.svg"}};
  return j.dump(2) + "\n";
}

namespace {

using std::numbers::pi;

const json& need(const json& j, const std::string& key,
                 const std::string& where) {
  if (!j.is_object() || !j.contains(key))
    throw ConfigError(where + ": missing key '" + key + "'");
  return j.at(key);
}

double need_num(const json& j, const std::string& key,
                const std::string& where) {
  const json& v = need(j, key, where);
  if (!v.is_number())
    throw ConfigError(where + ": key '" + key + "' must be a number");
  return v.get<double>();
}

int need_int(const json& j, const std::string& key, const std::string& where) {
  const json& v = need(j, key, where);
  if (!v.is_number_integer())
    throw ConfigError(where + ": key '" + key + "' must be an integer");
  return v.get<int>();
}

std::string need_str(const json& j, const std::string& key,
                     const std::string& where) {
  const json& v = need(j, key, where);
  if (!v.is_string())
    throw ConfigError(where + ": key '" + key + "' must be a string");
  return v.get<std::string>();
}

double opt_num(const json& j, const std::string& key, const std::string& where,
               double fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number())
    throw ConfigError(where + ": key '" + key + "' must be a number");
  return v.get<double>();
}

int opt_int(const json& j, const std::string& key, const std::string& where,
            int fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number_integer())
    throw ConfigError(where + ": key '" + key + "' must be an integer");
  return v.get<int>();
}

bool opt_bool(const json& j, const std::string& key, const std::string& where,
              bool fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_boolean())
    throw ConfigError(where + ": key '" + key + "' must be a boolean");
  return v.get<bool>();
}

std::vector<Mode> parse_modes(const json& arr, const std::string& where) {
  if (!arr.is_array())
    throw ConfigError(where + ": 'modes' must be an array");
  std::vector<Mode> out;
  for (const auto& it : arr) {
    Mode mode;
    mode.k = need_int(it, "k", where);
    mode.cos_amp = opt_num(it, "cos", where, 0.0);
    mode.sin_amp = opt_num(it, "sin", where, 0.0);
    out.push_back(mode);
  }
  return out;
}

/// One monomial c * prod_i u_i^{m_i} of a polynomial matrix entry.
struct PolyTerm {
  double c = 0.0;
  std::vector<int> m;
};

double term_value(const PolyTerm& t, const Eigen::VectorXd& u) {
  double v = t.c;
  for (int i = 0; i < static_cast<int>(t.m.size()); ++i)
    for (int p = 0; p < t.m[i]; ++p) v *= u(i);
  return v;
}

double term_partial(const PolyTerm& t, const Eigen::VectorXd& u, int comp) {
  if (t.m[comp] == 0) return 0.0;
  double v = t.c * t.m[comp];
  for (int i = 0; i < static_cast<int>(t.m.size()); ++i) {
    const int e = t.m[i] - (i == comp ? 1 : 0);
    for (int p = 0; p < e; ++p) v *= u(i);
  }
  return v;
}

std::vector<PolyTerm> parse_terms(const json& arr, int dim,
                                  const std::string& where) {
  if (!arr.is_array())
    throw ConfigError(where + " must be an array of {c, m} terms");
  std::vector<PolyTerm> out;
  for (const auto& it : arr) {
    PolyTerm term;
    term.c = need_num(it, "c", where);
    const json& mm = need(it, "m", where);
    if (!mm.is_array() || static_cast<int>(mm.size()) != dim)
      throw ConfigError(where + ": exponent list 'm' must have length dim");
    for (const auto& e : mm) {
      if (!e.is_number_integer() || e.get<int>() < 0)
        throw ConfigError(where + ": exponents must be nonnegative integers");
      term.m.push_back(e.get<int>());
    }
    out.push_back(term);
  }
  return out;
}

Eigen::VectorXd need_vec(const json& j, const std::string& key, int dim,
                         const std::string& where) {
  const json& v = need(j, key, where);
  if (!v.is_array() || static_cast<int>(v.size()) != dim)
    throw ConfigError(where + ": key '" + key + "' must be an array of length " +
                      std::to_string(dim));
  Eigen::VectorXd out(dim);
  for (int i = 0; i < dim; ++i) {
    if (!v.at(i).is_number())
      throw ConfigError(where + ": key '" + key + "' must hold numbers");
    out(i) = v.at(i).get<double>();
  }
  return out;
}

/// Polynomial quasilinear system from the config representation; derivatives
/// are assembled analytically from the same terms.
QuasilinearSystem build_poly_system(const json& params) {
  const int dim = need_int(params, "dim", "params");
  if (dim < 1 || dim > 64) throw ConfigError("params: dim must be in [1, 64]");

  using TermTable = std::vector<std::vector<std::vector<PolyTerm>>>;
  auto a_terms = std::make_shared<TermTable>();
  const json& A = need(params, "A", "params");
  if (!A.is_array() || static_cast<int>(A.size()) != dim)
    throw ConfigError("params: 'A' must be a dim x dim array of term lists");
  for (int r = 0; r < dim; ++r) {
    const json& row = A.at(r);
    if (!row.is_array() || static_cast<int>(row.size()) != dim)
      throw ConfigError("params: 'A' must be a dim x dim array of term lists");
    std::vector<std::vector<PolyTerm>> rr;
    for (int c = 0; c < dim; ++c)
      rr.push_back(parse_terms(row.at(c), dim, "params: A entry"));
    a_terms->push_back(std::move(rr));
  }

  auto f_terms = std::make_shared<std::vector<std::vector<PolyTerm>>>();
  if (params.contains("f")) {
    const json& F = params.at("f");
    if (!F.is_array() || static_cast<int>(F.size()) != dim)
      throw ConfigError("params: 'f' must be an array of dim term lists");
    for (int r = 0; r < dim; ++r)
      f_terms->push_back(parse_terms(F.at(r), dim, "params: f entry"));
  }

  QuasilinearSystem sys;
  sys.dim = dim;
  sys.domain_radius = opt_num(params, "domain_radius", "params", 1.0);
  sys.A = [a_terms, dim](const Eigen::VectorXd& u) {
    Eigen::MatrixXd M(dim, dim);
    for (int r = 0; r < dim; ++r)
      for (int c = 0; c < dim; ++c) {
        double v = 0.0;
        for (const auto& term : (*a_terms)[r][c]) v += term_value(term, u);
        M(r, c) = v;
      }
    return M;
  };
  sys.dA = [a_terms, dim](const Eigen::VectorXd& u, const Eigen::VectorXd& w) {
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(dim, dim);
    for (int r = 0; r < dim; ++r)
      for (int c = 0; c < dim; ++c)
        for (const auto& term : (*a_terms)[r][c])
          for (int comp = 0; comp < dim; ++comp)
            M(r, c) += w(comp) * term_partial(term, u, comp);
    return M;
  };
  if (f_terms->empty()) {
    sys.f = [dim](const Eigen::VectorXd&) {
      return Eigen::VectorXd::Zero(dim).eval();
    };
    sys.df = [dim](const Eigen::VectorXd&) {
      return Eigen::MatrixXd::Zero(dim, dim).eval();
    };
  } else {
    sys.f = [f_terms, dim](const Eigen::VectorXd& u) {
      Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
      for (int r = 0; r < dim; ++r)
        for (const auto& term : (*f_terms)[r]) v(r) += term_value(term, u);
      return v;
    };
    sys.df = [f_terms, dim](const Eigen::VectorXd& u) {
      Eigen::MatrixXd M = Eigen::MatrixXd::Zero(dim, dim);
      for (int r = 0; r < dim; ++r)
        for (const auto& term : (*f_terms)[r])
          for (int comp = 0; comp < dim; ++comp)
            M(r, comp) += term_partial(term, u, comp);
      return M;
    };
  }
  return sys;
}

void write_artifacts(RunReport& rep, const fs::path& out_dir,
                     const std::vector<std::string>& headers,
                     const std::vector<std::vector<double>>& columns,
                     const std::vector<double>& times,
                     const std::vector<double>& decay,
                     const std::string& y_label) {
  write_text_atomic(out_dir / "trajectory.csv", csv_table(headers, columns));
  write_text_atomic(out_dir / "decay.svg",
                    svg_decay_plot(times, decay, y_label));
  rep.csv_path = (out_dir / "trajectory.csv").string();
  rep.svg_path = (out_dir / "decay.svg").string();
  rep.json_path = (out_dir / "report.json").string();
  write_text_atomic(out_dir / "report.json", report_to_json(rep));
}

void run_heleshaw(const json& params, const json& experiment, RunReport& rep,
                  const fs::path& out_dir) {
  const int n_points = opt_int(params, "n_points", "params", 64);
  const int k_trunc = opt_int(params, "k_trunc", "params", 256);
  PeriodicGrid grid(n_points);
  const std::vector<Mode> modes =
      parse_modes(need(experiment, "modes", "experiment"), "experiment");
  const double t_end = opt_num(experiment, "t_end", "experiment", 5.0);
  const int n_samples = opt_int(experiment, "n_samples", "experiment", 101);
  if (!(t_end > 0.0) || n_samples < 2)
    throw ConfigError("experiment: need t_end > 0 and at least two samples");

  HsState v0{SpectralField::from_modes(grid, 0.0, modes)};

  rep.gap = hs_gap(k_trunc);
  int kernel_count = 0;
  for (int k = -16; k <= 16; ++k)
    if (hs_symbol(k) == 0.0) ++kernel_count;
  rep.rank_ok = kernel_count == 3;
  rep.tangent_ok = rep.rank_ok;
  rep.semisimple_ok = true;  // multiplier operators act diagonally
  rep.spectrum_ok = rep.gap > 0.0;

  std::vector<double> times(n_samples), norms(n_samples), devs(n_samples);
  std::vector<double> mass(n_samples), cosm(n_samples), sinm(n_samples);
  const HsState limit{project_low_modes(v0.field, 1)};
  for (int i = 0; i < n_samples; ++i) {
    const double t = t_end * i / (n_samples - 1);
    const HsState vt = hs_evolve(v0, t);
    times[i] = t;
    norms[i] = sobolev_norm(vt.field, 0.0);
    const HsConserved c = hs_conserved(vt);
    mass[i] = c.mass;
    cosm[i] = c.cosm;
    sinm[i] = c.sinm;
    // Deviation from the surviving kernel part, mode by mode.
    const auto& ck = vt.field.coeffs();
    double acc = 0.0;
    for (int k = 2; k <= n_points / 2; ++k) {
      const double mult = (k == n_points / 2) ? 1.0 : 2.0;
      acc += mult * std::norm(ck[k]);
    }
    devs[i] = std::sqrt(acc);
  }

  double drift = 0.0;
  for (int i = 0; i < n_samples; ++i) {
    drift = std::max(drift, std::abs(mass[i] - mass[0]));
    drift = std::max(drift, std::abs(cosm[i] - cosm[0]));
    drift = std::max(drift, std::abs(sinm[i] - sinm[0]));
  }

  const DecayFit fit = fit_decay(times, devs);
  rep.omega_fit = fit.omega_fit;
  rep.x_hat = {mass[0], cosm[0], sinm[0]};

  const auto& lk = limit.field.coeffs();
  double res = 0.0;
  for (int k = 0; k <= n_points / 2; ++k)
    res += std::norm(hs_symbol(k) * lk[k]);
  rep.limit_residual = std::sqrt(res);

  const double omega =
      opt_num(experiment, "omega", "experiment", 0.5 * fit.omega_fit);
  const std::vector<double> zeros(n_samples, 0.0);
  rep.weighted_k = devs.front() > 0.0
                       ? weighted_norm_track(times, devs, zeros, 0.0, omega,
                                             devs.front())
                       : 0.0;
  rep.extras["conserved_drift"] = drift;
  rep.extras["k_fit"] = fit.k_fit;
  rep.extras["fit_residual"] = fit.residual;
  rep.extras["omega_used"] = omega;

  write_artifacts(rep, out_dir, {"t", "norm", "dev", "mass", "cosm", "sinm"},
                  {times, norms, devs, mass, cosm, sinm}, times, devs, "dev");
}

void run_manifold(const json& params, const json& experiment, RunReport& rep,
                  const fs::path& out_dir, std::uint64_t seed) {
  QuasilinearSystem sys = build_poly_system(params);
  const int d = sys.dim;
  const Eigen::VectorXd u_star = need_vec(params, "u_star", d, "params");
  const double r0 = opt_num(params, "r0", "params", 0.5);
  const double newton_tol = opt_num(params, "newton_tol", "params", 1e-12);

  const Eigen::MatrixXd M = linearize_at(sys, u_star);
  const SpectralSplit split = spectral_split(M);
  rep.gap = split.gap;
  EquilibriumChart chart = build_graph_chart(sys, u_star, split, r0, newton_tol);
  const int m = split.kernel_dim;

  // Normal-stability conditions, checked through the chart graph itself.
  auto param_fn = [&](const Eigen::VectorXd& xi) {
    const Eigen::VectorXd x = split.kernel_basis * xi;
    return (u_star + x + chart.phi(x)).eval();
  };
  const StabilityReport stab = check_normal_stability(
      sys, u_star, param_fn, m, seed, std::min(1e-3, 0.1 * r0));
  rep.rank_ok = stab.rank_ok;
  rep.tangent_ok = stab.tangent_ok;
  rep.semisimple_ok = stab.semisimple_ok;
  rep.spectrum_ok = stab.spectrum_ok;

  const Eigen::VectorXd u0 = need_vec(experiment, "u0", d, "experiment");
  const double t_end = need_num(experiment, "t_end", "experiment");
  const double dt0 = opt_num(experiment, "dt0", "experiment", 1e-3);
  const int n_samples = opt_int(experiment, "n_samples", "experiment", 201);
  const double tol = opt_num(experiment, "tol", "experiment", 1e-10);

  const Trajectory traj = simulate(sys, u0, t_end, dt0, n_samples, tol);

  std::vector<std::string> headers = {"t"};
  std::vector<std::vector<double>> columns;
  columns.push_back(traj.times);
  for (int c = 0; c < d; ++c) {
    headers.push_back("u_" + std::to_string(c + 1));
    std::vector<double> col(traj.states.size());
    for (std::size_t i = 0; i < traj.states.size(); ++i)
      col[i] = traj.states[i](c);
    columns.push_back(std::move(col));
  }

  if (traj.breakdown) {
    rep.status = "breakdown";
    std::ostringstream os;
    os << "step size underflow at t = " << traj.t_break;
    rep.detail = os.str();
    std::vector<double> flat(traj.times.size(), 0.0);
    write_artifacts(rep, out_dir, headers, columns, traj.times, flat, "state");
    return;
  }

  const ReducedTrajectory red = reduce_trajectory(traj, chart);
  for (int c = 0; c < m; ++c) {
    headers.push_back("x_" + std::to_string(c + 1));
    std::vector<double> col(red.x.size());
    for (std::size_t i = 0; i < red.x.size(); ++i)
      col[i] = split.kernel_basis.col(c).dot(red.x[i]);
    columns.push_back(std::move(col));
  }
  headers.push_back("y_norm");
  columns.push_back(red.y_norm);

  bool fit_possible = true;
  for (double v : red.y_norm)
    if (!(v > 0.0)) fit_possible = false;
  DecayFit fit;
  if (fit_possible) {
    fit = fit_decay(red.times, red.y_norm);
    rep.omega_fit = fit.omega_fit;
    rep.extras["k_fit"] = fit.k_fit;
    rep.extras["fit_residual"] = fit.residual;
  } else {
    rep.extras["fit_skipped"] = 1.0;
  }

  const LimitIdentification lim = identify_limit(red, chart);
  rep.limit_residual = lim.residual;
  const Eigen::VectorXd coords = split.kernel_basis.transpose() * lim.x_hat;
  rep.x_hat.assign(coords.data(), coords.data() + coords.size());

  std::vector<double> dist(traj.states.size());
  for (std::size_t i = 0; i < traj.states.size(); ++i)
    dist[i] = (traj.states[i] - lim.u_hat).norm();
  const double mu = opt_num(experiment, "mu", "experiment", 0.0);
  const double omega =
      opt_num(experiment, "omega", "experiment", 0.5 * rep.omega_fit);
  if (dist.front() > 0.0) {
    const std::vector<double> xi_norms =
        mu > 0.0 ? dist : std::vector<double>(dist.size(), 0.0);
    rep.weighted_k =
        weighted_norm_track(traj.times, dist, xi_norms, mu, omega, dist.front());
  }
  rep.extras["omega_used"] = omega;

  write_artifacts(rep, out_dir, headers, columns, red.times, red.y_norm,
                  "y_norm");
}

void run_fmcf(const json& params, const json& experiment, RunReport& rep,
              const fs::path& out_dir) {
  FmcfConfig cfg;
  cfg.sigma = opt_num(params, "sigma", "params", 0.5);
  const int n_points = opt_int(params, "n_points", "params", 256);
  cfg.grid = PeriodicGrid(n_points);
  cfg.delta = opt_num(params, "delta", "params", cfg.delta);
  cfg.far_cells = opt_int(params, "far_cells", "params", cfg.far_cells);
  cfg.quad_order = opt_int(params, "quad_order", "params", cfg.quad_order);
  const int k_max =
      opt_int(params, "k_max", "params", std::min(32, n_points / 4));

  const json& u0j = need(experiment, "u0", "experiment");
  const double mean = opt_num(u0j, "mean", "experiment: u0", 0.0);
  const std::vector<Mode> modes =
      parse_modes(need(u0j, "modes", "experiment: u0"), "experiment: u0");
  const double t_end = need_num(experiment, "t_end", "experiment");
  const double dt = opt_num(experiment, "dt", "experiment", 8e-3);
  const int n_samples = opt_int(experiment, "n_samples", "experiment", 81);

  const FmcfSymbolFit sym = fmcf_numeric_symbol(cfg, k_max);
  rep.gap = -sym.table[1];
  rep.rank_ok = std::abs(sym.table[0]) <= 1e-10;
  rep.tangent_ok = rep.rank_ok;
  rep.semisimple_ok = true;  // multiplier operators act diagonally
  rep.spectrum_ok = true;
  for (std::size_t k = 1; k < sym.table.size(); ++k)
    if (!(sym.table[k] < 0.0)) rep.spectrum_ok = false;

  const SpectralField u0 = SpectralField::from_modes(cfg.grid, mean, modes);
  const FmcfTrajectory traj = evolve_fmcf(u0, cfg, t_end, dt, n_samples);

  rep.extras["p_fit"] = sym.p_fit;
  rep.extras["omega0"] = sym.omega0;
  rep.extras["max_leakage"] = sym.max_leakage;

  if (traj.breakdown) {
    rep.status = "breakdown";
    std::ostringstream os;
    os << "state blew past the amplitude cap at t = " << traj.t_break;
    rep.detail = os.str();
    write_artifacts(rep, out_dir, {"t", "mean", "deviation"},
                    {traj.times, traj.means, traj.deviations}, traj.times,
                    traj.deviations, "deviation");
    return;
  }

  const DecayFit fit = fit_decay(traj.times, traj.deviations);
  rep.omega_fit = fit.omega_fit;
  rep.extras["k_fit"] = fit.k_fit;
  rep.extras["fit_residual"] = fit.residual;
  rep.extras["mean_drift"] =
      std::abs(traj.means.back() - traj.means.front());

  const SpectralField& u_end = traj.states.back();
  rep.limit_residual = sobolev_norm(apply_fmcf_A(u_end, u_end, cfg), 0.0);
  rep.x_hat = {traj.means.back()};

  const double omega =
      opt_num(experiment, "omega", "experiment", 0.5 * fit.omega_fit);
  const std::vector<double> zeros(traj.times.size(), 0.0);
  rep.weighted_k =
      traj.deviations.front() > 0.0
          ? weighted_norm_track(traj.times, traj.deviations, zeros, 0.0, omega,
                                traj.deviations.front())
          : 0.0;
  rep.extras["omega_used"] = omega;

  write_artifacts(rep, out_dir, {"t", "mean", "deviation"},
                  {traj.times, traj.means, traj.deviations}, traj.times,
                  traj.deviations, "deviation");
}

void run_rd(const json& params, const json& experiment, RunReport& rep,
            const fs::path& out_dir) {
  RdConfig cfg;
  cfg.length = opt_num(params, "L", "params", 1.0);
  cfg.n_cells = opt_int(params, "n_cells", "params", 256);
  cfg.kappa = opt_num(params, "kappa", "params", 4.0);
  cfg.a_min = opt_num(params, "a_min", "params", 0.5);
  cfg.gradient_on = opt_bool(params, "gradient_on", "params", true);
  if (params.contains("a")) {
    const json& aj = need(params, "a", "params");
    const json& poly = need(aj, "poly", "params: a");
    if (!poly.is_array() || poly.empty())
      throw ConfigError("params: a: 'poly' must be a nonempty array");
    std::vector<double> coeffs;
    for (const auto& c : poly) {
      if (!c.is_number())
        throw ConfigError("params: a: 'poly' must hold numbers");
      coeffs.push_back(c.get<double>());
    }
    cfg.a = [coeffs](double u) {
      double v = 0.0;
      for (std::size_t i = coeffs.size(); i-- > 0;) v = v * u + coeffs[i];
      return v;
    };
  }

  const int n_dim = opt_int(params, "n_dim", "params", 2);
  const double p = opt_num(params, "p", "params", 5.0);
  const double tau = opt_num(params, "tau", "params", 0.275);
  const RdExponents exps = rd_exponents(n_dim, p, cfg.kappa, tau);
  cfg.proxy_order = exps.s_c;

  const json& u0j = need(experiment, "u0", "experiment");
  const double mean = opt_num(u0j, "mean", "experiment: u0", 0.0);
  const json& modes = need(u0j, "modes", "experiment: u0");
  if (!modes.is_array())
    throw ConfigError("experiment: u0: 'modes' must be an array");
  const std::vector<double> x = rd_cell_centers(cfg);
  std::vector<double> u0(cfg.n_cells, mean);
  for (const auto& mj : modes) {
    const int k = need_int(mj, "k", "experiment: u0 mode");
    const double amp = need_num(mj, "amp", "experiment: u0 mode");
    for (int i = 0; i < cfg.n_cells; ++i)
      u0[i] += amp * std::cos(k * pi * x[i] / cfg.length);
  }
  const double t_end = need_num(experiment, "t_end", "experiment");
  const double dt = opt_num(experiment, "dt", "experiment", 5e-4);
  const int n_samples = opt_int(experiment, "n_samples", "experiment", 201);

  const RdTrajectory traj = evolve_rd(u0, cfg, t_end, dt, n_samples);

  rep.extras["s_c"] = exps.s_c;
  rep.extras["s"] = exps.s;
  rep.extras["s_bar"] = exps.s_bar;
  rep.extras["mu"] = exps.mu;
  rep.extras["alpha_crit"] = exps.alpha_crit;

  if (traj.breakdown) {
    rep.status = "breakdown";
    std::ostringstream os;
    os << "step size underflow at t = " << traj.t_break;
    rep.detail = os.str();
    std::vector<double> weighted(traj.times.size(), 0.0);
    write_artifacts(rep, out_dir,
                    {"t", "mean", "L2dev", "H1dev", "weighted_stat"},
                    {traj.times, traj.means, traj.dev_l2, traj.dev_h1, weighted},
                    traj.times, traj.dev_l2, "L2dev");
    return;
  }

  const DecayFit fit = fit_decay(traj.times, traj.dev_l2);
  rep.omega_fit = fit.omega_fit;
  rep.extras["k_fit"] = fit.k_fit;
  rep.extras["fit_residual"] = fit.residual;

  const double omega =
      opt_num(experiment, "omega", "experiment", 0.5 * fit.omega_fit);
  const RdWeightedReport diag = rd_weighted_diagnostic(traj, exps, omega);
  rep.weighted_k = diag.k_stat;
  rep.x_hat = {diag.u_hat};
  rep.extras["tail_rate"] = diag.tail_rate;
  rep.extras["omega_used"] = omega;
  rep.extras["sup_at_end"] = diag.sup_at_end ? 1.0 : 0.0;

  const std::vector<double> flat(cfg.n_cells, diag.u_hat);
  std::vector<double> rhs_at_limit = rd_rhs(flat, cfg);
  double res = 0.0;
  for (double v : rhs_at_limit) res = std::max(res, std::abs(v));
  rep.limit_residual = res;
  rep.gap = rd_diffusivity(cfg, diag.u_hat) * (pi / cfg.length) *
            (pi / cfg.length);
  rep.rank_ok = res <= 1e-12;
  rep.tangent_ok = rep.rank_ok;
  rep.semisimple_ok = true;  // self-adjoint diffusion at the flat state
  rep.spectrum_ok = rep.gap > 0.0;

  // Per-sample value of the weighted statistic, for the record.
  const double alpha = exps.tau + exps.s_c / 2.0;
  const double xi = exps.tau + exps.s / 2.0;
  std::vector<double> weighted(traj.times.size(), 0.0);
  std::vector<double> d0(traj.states.front().size());
  for (std::size_t i = 0; i < d0.size(); ++i)
    d0[i] = traj.states.front()[i] - diag.u_hat;
  const double denom = rd_proxy_norm(d0, alpha);
  if (denom > 1e-12 * (1.0 + std::abs(diag.u_hat))) {
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
      std::vector<double> di(traj.states[i].size());
      for (std::size_t j = 0; j < di.size(); ++j)
        di[j] = traj.states[i][j] - diag.u_hat;
      weighted[i] = std::exp(omega * traj.times[i]) *
                    (rd_proxy_norm(di, alpha) +
                     std::pow(traj.times[i], exps.mu) * rd_proxy_norm(di, xi)) /
                    denom;
    }
  }

  write_artifacts(rep, out_dir,
                  {"t", "mean", "L2dev", "H1dev", "weighted_stat"},
                  {traj.times, traj.means, traj.dev_l2, traj.dev_h1, weighted},
                  traj.times, traj.dev_l2, "L2dev");
}

}  // namespace

QuasilinearSystem manifold_system_from_config(const fs::path& config_path,
                                              Eigen::VectorXd* u_star) {
  std::ifstream in(config_path);
  if (!in.good())
    throw ConfigError("cannot open config " + config_path.string());
  const json cfg = json::parse(in);
  const json params =
      cfg.contains("params") ? cfg.at("params") : json::object();
  QuasilinearSystem sys = build_poly_system(params);
  if (u_star) *u_star = need_vec(params, "u_star", sys.dim, "params");
  return sys;
}

RunReport run_scenario(const fs::path& config_path, const fs::path& out_dir,
                       std::uint64_t seed) {
  RunReport rep;
  rep.scenario = config_path.stem().string();
  try {
    std::ifstream in(config_path);
    if (!in.good())
      throw ConfigError("cannot open config " + config_path.string());
    json cfg = json::parse(in);
    if (cfg.contains("scenario") && cfg.at("scenario").is_string())
      rep.scenario = cfg.at("scenario").get<std::string>();
    rep.model = need_str(cfg, "model", "config");
    const json params =
        cfg.contains("params") ? cfg.at("params") : json::object();
    const json& experiment = need(cfg, "experiment", "config");
    if (rep.model == "heleshaw")
      run_heleshaw(params, experiment, rep, out_dir);
    else if (rep.model == "manifold")
      run_manifold(params, experiment, rep, out_dir, seed);
    else if (rep.model == "fmcf")
      run_fmcf(params, experiment, rep, out_dir);
    else if (rep.model == "rd")
      run_rd(params, experiment, rep, out_dir);
    else
      throw ConfigError(
          "config: key 'model' must be one of manifold, fmcf, heleshaw, rd");
  } catch (const json::parse_error& e) {
    rep.status = "schema-error";
    rep.detail = e.what();
  } catch (const ConfigError& e) {
    rep.status = "schema-error";
    rep.detail = e.what();
  } catch (const ChartExitError& e) {
    rep.status = "chart-exit";
    rep.detail = e.what();
  } catch (const Error& e) {
    rep.status = "error";
    rep.detail = e.what();
  }
  if (rep.status != "ok" && rep.json_path.empty()) {
    // Leave a report behind even for failed runs, best effort only.
    try {
      write_text_atomic(out_dir / "report.json", report_to_json(rep));
      rep.json_path = (out_dir / "report.json").string();
    } catch (...) {
    }
  }
  return rep;
}

}  // namespace quasistab
