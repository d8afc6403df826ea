#pragma once

#include <complex>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "quasistab/errors.hpp"

namespace quasistab {

/// Uniform grid with n_points samples on a circle of circumference `period`.
class PeriodicGrid {
 public:
  explicit PeriodicGrid(int n_points, double period = 2.0 * std::numbers::pi);

  int n() const { return n_; }
  double period() const { return period_; }
  double spacing() const { return period_ / n_; }
  /// Sample location x_i = i * period / n.
  double x(int i) const { return period_ * i / n_; }

  bool operator==(const PeriodicGrid& other) const = default;

 private:
  int n_;
  double period_;
};

/// One Fourier mode given as amplitudes of cos(k theta) and sin(k theta),
/// theta = 2 pi x / period.
struct Mode {
  int k = 0;
  double cos_amp = 0.0;
  double sin_amp = 0.0;
};

/// Real function sampled on a PeriodicGrid, with Fourier coefficients
/// computed on first use and cached. Values are fixed after construction,
/// so instances can be handed between threads; share a single instance
/// across threads only after coeffs() has been called once.
class SpectralField {
 public:
  SpectralField(PeriodicGrid grid, std::vector<double> values);

  /// Build from complex amplitudes c_k for k = 0..n/2; negative wavenumbers
  /// follow from conjugate symmetry, the Nyquist entry is treated as a pure
  /// cosine and its imaginary part must be zero.
  static SpectralField from_coeffs(PeriodicGrid grid,
                                   const std::vector<std::complex<double>>& coeffs);

  /// mean + sum of cos/sin amplitudes per mode.
  static SpectralField from_modes(PeriodicGrid grid, double mean,
                                  const std::vector<Mode>& modes);

  const PeriodicGrid& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }

  /// Coefficients c_k for k = 0..n/2 with the convention
  /// c_k = (1/n) sum_j v_j exp(-2 pi i j k / n), so c_0 is the mean and a
  /// field A*cos(k theta) has c_k = A/2 for 0 < k < n/2.
  const std::vector<std::complex<double>>& coeffs() const;

  /// c_k for any |k| <= n/2; negative k via conjugate symmetry.
  std::complex<double> coeff(int k) const;

 private:
  PeriodicGrid grid_;
  std::vector<double> values_;
  mutable std::vector<std::complex<double>> coeffs_;
  mutable bool have_coeffs_ = false;
};

/// Wavenumber-indexed real symbol m(k) acting diagonally on Fourier modes.
/// All symbols used here are even in k; realness of apply_multiplier output
/// relies on that.
class MultiplierSymbol {
 public:
  /// Empty symbol; any evaluation throws until a real one is assigned.
  MultiplierSymbol() = default;

  explicit MultiplierSymbol(std::function<double(int)> eval, std::string name = "");

  /// Evaluate m(k). Throws ConfigError if the value is not finite.
  double operator()(int k) const;

  const std::string& name() const { return name_; }

 private:
  std::function<double(int)> eval_;
  std::string name_;
};

/// Multiply each coefficient by m(k); the result stays real for even symbols.
SpectralField apply_multiplier(const SpectralField& field, const MultiplierSymbol& symbol);

/// ( sum_k (1+k^2)^s |c_k|^2 )^(1/2) over represented wavenumbers, s in [-2, 4].
double sobolev_norm(const SpectralField& field, double s);

/// Arithmetic mean of the grid values (= c_0).
double integral_mean(const SpectralField& field);

/// Keep coefficients with |k| <= kmax, zero the rest. Requires kmax < n/2.
SpectralField project_low_modes(const SpectralField& field, int kmax);

/// Spectral derivative of the given order, using physical wavenumbers
/// 2 pi k / period. The Nyquist mode is treated as a pure cosine.
SpectralField spectral_derivative(const SpectralField& field, int order);

/// f(x) -> f(x - shift), computed exactly in coefficient space.
SpectralField translate(const SpectralField& field, double shift);

}  // namespace quasistab
