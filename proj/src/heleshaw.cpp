#include "quasistab/heleshaw.hpp"

#include <cmath>

namespace quasistab {

double hs_symbol(int k) {
  double a = std::abs(double(k));
  return a * (1.0 - a * a);
}

HsState hs_evolve(const HsState& v0, double t) {
  if (t < 0.0) throw ConfigError("evolution time must be nonnegative");
  const int n = v0.field.grid().n();
  std::vector<std::complex<double>> c = v0.field.coeffs();
  for (int k = 0; k <= n / 2; ++k) {
    c[k] *= std::exp(hs_symbol(k) * t);
  }
  return HsState{SpectralField::from_coeffs(v0.field.grid(), c)};
}

HsConserved hs_conserved(const HsState& v) {
  // Periodic rectangle rule; exact for band-limited integrands against
  // the k = 0, 1 test functions.
  const auto& grid = v.field.grid();
  const auto& vals = v.field.values();
  HsConserved out;
  for (int i = 0; i < grid.n(); ++i) {
    double theta = 2.0 * std::numbers::pi * i / grid.n();
    out.mass += vals[i];
    out.cosm += vals[i] * std::cos(theta);
    out.sinm += vals[i] * std::sin(theta);
  }
  out.mass *= grid.spacing();
  out.cosm *= grid.spacing();
  out.sinm *= grid.spacing();
  return out;
}

double hs_gap(int k_trunc) {
  if (k_trunc < 2) throw ConfigError("gap certificate needs k_trunc >= 2");
  double worst = hs_symbol(2);
  for (int k = 3; k <= k_trunc; ++k) worst = std::max(worst, hs_symbol(k));
  if (worst != -6.0) {
    throw Error("decaying spectrum certificate failed: max m(k) = " +
                std::to_string(worst));
  }
  return -worst;
}

}  // namespace quasistab
