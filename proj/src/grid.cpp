#include "quasistab/grid.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <unordered_map>
#include <utility>

namespace quasistab {

namespace {

// FFTW plan creation is not thread safe, and the quadrature code performs
// thousands of small transforms, so plans and their aligned buffers are
// cached per grid size and reused under a single lock.
std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}

struct FftwWorkspace {
  double* real_buf = nullptr;
  fftw_complex* cplx_buf = nullptr;
  fftw_plan r2c = nullptr;
  fftw_plan c2r = nullptr;
};

// Only call while holding plan_mutex(). Entries live for the process
// lifetime; the number of distinct grid sizes stays small.
FftwWorkspace& workspace(int n) {
  static std::unordered_map<int, FftwWorkspace> cache;
  auto it = cache.find(n);
  if (it == cache.end()) {
    FftwWorkspace ws;
    ws.real_buf = fftw_alloc_real(n);
    ws.cplx_buf = fftw_alloc_complex(n / 2 + 1);
    ws.r2c = fftw_plan_dft_r2c_1d(n, ws.real_buf, ws.cplx_buf, FFTW_ESTIMATE);
    ws.c2r = fftw_plan_dft_c2r_1d(n, ws.cplx_buf, ws.real_buf, FFTW_ESTIMATE);
    if (ws.r2c == nullptr || ws.c2r == nullptr) {
      throw Error("fftw plan creation failed for size " + std::to_string(n));
    }
    it = cache.emplace(n, ws).first;
  }
  return it->second;
}

std::vector<std::complex<double>> forward_dft(const std::vector<double>& values) {
  const int n = static_cast<int>(values.size());
  std::vector<std::complex<double>> coeffs(n / 2 + 1);
  std::lock_guard<std::mutex> lock(plan_mutex());
  FftwWorkspace& ws = workspace(n);
  std::copy(values.begin(), values.end(), ws.real_buf);
  fftw_execute(ws.r2c);
  for (int k = 0; k <= n / 2; ++k) {
    coeffs[k] = std::complex<double>(ws.cplx_buf[k][0], ws.cplx_buf[k][1]) / double(n);
  }
  return coeffs;
}

std::vector<double> inverse_dft(int n, const std::vector<std::complex<double>>& coeffs) {
  std::lock_guard<std::mutex> lock(plan_mutex());
  FftwWorkspace& ws = workspace(n);
  for (int k = 0; k <= n / 2; ++k) {
    ws.cplx_buf[k][0] = coeffs[k].real();
    ws.cplx_buf[k][1] = coeffs[k].imag();
  }
  fftw_execute(ws.c2r);
  return std::vector<double>(ws.real_buf, ws.real_buf + n);
}

}  // namespace

PeriodicGrid::PeriodicGrid(int n_points, double period)
    : n_(n_points), period_(period) {
  if (n_points < 8 || n_points % 2 != 0) {
    throw ConfigError("grid needs an even point count of at least 8, got " +
                      std::to_string(n_points));
  }
  if (!(period > 0.0) || !std::isfinite(period)) {
    throw ConfigError("grid period must be positive and finite");
  }
}

SpectralField::SpectralField(PeriodicGrid grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
  if (static_cast<int>(values_.size()) != grid_.n()) {
    throw ConfigError("value vector length " + std::to_string(values_.size()) +
                      " does not match grid size " + std::to_string(grid_.n()));
  }
  for (double v : values_) {
    if (!std::isfinite(v)) throw ConfigError("field values must be finite");
  }
}

SpectralField SpectralField::from_coeffs(PeriodicGrid grid,
                                         const std::vector<std::complex<double>>& coeffs) {
  const int n = grid.n();
  if (static_cast<int>(coeffs.size()) != n / 2 + 1) {
    throw ConfigError("coefficient vector must have n/2+1 entries, got " +
                      std::to_string(coeffs.size()));
  }
  double scale = 0.0;
  for (const auto& c : coeffs) scale = std::max(scale, std::abs(c));
  if (std::abs(coeffs[n / 2].imag()) > 1e-9 * (1.0 + scale)) {
    throw ConfigError("Nyquist coefficient must be real (cosine-only mode)");
  }
  std::vector<std::complex<double>> c = coeffs;
  c[n / 2] = std::complex<double>(c[n / 2].real(), 0.0);
  SpectralField f(grid, inverse_dft(n, c));
  f.coeffs_ = std::move(c);
  f.have_coeffs_ = true;
  return f;
}

SpectralField SpectralField::from_modes(PeriodicGrid grid, double mean,
                                        const std::vector<Mode>& modes) {
  const int n = grid.n();
  std::vector<std::complex<double>> c(n / 2 + 1, 0.0);
  c[0] = mean;
  for (const Mode& m : modes) {
    if (m.k < 0 || m.k > n / 2) {
      throw ConfigError("mode wavenumber " + std::to_string(m.k) +
                        " outside representable range");
    }
    if (m.k == 0) {
      c[0] += m.cos_amp;
    } else if (m.k == n / 2) {
      if (m.sin_amp != 0.0) {
        throw ConfigError("sine amplitude at the Nyquist wavenumber is not representable");
      }
      c[m.k] += m.cos_amp;  // appears once in the expansion
    } else {
      c[m.k] += std::complex<double>(m.cos_amp / 2.0, -m.sin_amp / 2.0);
    }
  }
  return from_coeffs(grid, c);
}

const std::vector<std::complex<double>>& SpectralField::coeffs() const {
  if (!have_coeffs_) {
    coeffs_ = forward_dft(values_);
    have_coeffs_ = true;
  }
  return coeffs_;
}

std::complex<double> SpectralField::coeff(int k) const {
  const int n = grid_.n();
  if (k < -n / 2 || k > n / 2) {
    throw ConfigError("wavenumber " + std::to_string(k) + " not represented on grid");
  }
  const auto& c = coeffs();
  if (k >= 0) return c[k];
  return std::conj(c[-k]);
}

MultiplierSymbol::MultiplierSymbol(std::function<double(int)> eval, std::string name)
    : eval_(std::move(eval)), name_(std::move(name)) {
  if (!eval_) throw ConfigError("multiplier symbol needs an evaluation function");
}

double MultiplierSymbol::operator()(int k) const {
  if (!eval_) throw Error("evaluation of an empty multiplier symbol");
  double v = eval_(k);
  if (!std::isfinite(v)) {
    throw ConfigError("symbol " + (name_.empty() ? std::string("<unnamed>") : name_) +
                      " undefined at wavenumber " + std::to_string(k));
  }
  return v;
}

SpectralField apply_multiplier(const SpectralField& field, const MultiplierSymbol& symbol) {
  const int n = field.grid().n();
  std::vector<std::complex<double>> c = field.coeffs();
  for (int k = 0; k <= n / 2; ++k) c[k] *= symbol(k);
  return SpectralField::from_coeffs(field.grid(), c);
}

double sobolev_norm(const SpectralField& field, double s) {
  if (s < -2.0 || s > 4.0) {
    throw ConfigError("sobolev order s must lie in [-2, 4]");
  }
  const int n = field.grid().n();
  const auto& c = field.coeffs();
  double sum = std::norm(c[0]);
  for (int k = 1; k < n / 2; ++k) {
    sum += 2.0 * std::pow(1.0 + double(k) * k, s) * std::norm(c[k]);
  }
  sum += std::pow(1.0 + double(n / 2) * (n / 2), s) * std::norm(c[n / 2]);
  return std::sqrt(sum);
}

double integral_mean(const SpectralField& field) {
  double sum = 0.0;
  for (double v : field.values()) sum += v;
  return sum / field.grid().n();
}

SpectralField project_low_modes(const SpectralField& field, int kmax) {
  const int n = field.grid().n();
  if (kmax < 0 || kmax >= n / 2) {
    throw ConfigError("projection cutoff must satisfy 0 <= kmax < n/2");
  }
  std::vector<std::complex<double>> c = field.coeffs();
  for (int k = kmax + 1; k <= n / 2; ++k) c[k] = 0.0;
  return SpectralField::from_coeffs(field.grid(), c);
}

SpectralField spectral_derivative(const SpectralField& field, int order) {
  if (order < 0) throw ConfigError("derivative order must be nonnegative");
  const int n = field.grid().n();
  const double kappa0 = 2.0 * std::numbers::pi / field.grid().period();
  std::vector<std::complex<double>> c = field.coeffs();
  const std::complex<double> i(0.0, 1.0);
  for (int k = 0; k < n / 2; ++k) {
    c[k] *= std::pow(i * (kappa0 * k), order);
  }
  // Nyquist: sine samples vanish on the grid, so odd derivatives are zero there.
  if (order % 2 == 1) {
    c[n / 2] = 0.0;
  } else {
    double kap = kappa0 * (n / 2);
    c[n / 2] *= std::pow(-kap * kap, order / 2);
  }
  return SpectralField::from_coeffs(field.grid(), c);
}

SpectralField translate(const SpectralField& field, double shift) {
  const int n = field.grid().n();
  const double kappa0 = 2.0 * std::numbers::pi / field.grid().period();
  std::vector<std::complex<double>> c = field.coeffs();
  const std::complex<double> i(0.0, 1.0);
  for (int k = 1; k < n / 2; ++k) {
    c[k] *= std::exp(-i * (kappa0 * k * shift));
  }
  // cosine-only Nyquist mode: A cos(kap x) shifts to A cos(kap s) cos(kap x) on the grid
  c[n / 2] = c[n / 2].real() * std::cos(kappa0 * (n / 2) * shift);
  return SpectralField::from_coeffs(field.grid(), c);
}

}  // namespace quasistab
