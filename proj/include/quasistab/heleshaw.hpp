#pragma once

#include "quasistab/grid.hpp"

namespace quasistab {

/// Perturbation of the unit-circle steady state, stored as a real grid field.
struct HsState {
  SpectralField field;
};

/// Linearized interface symbol m(k) = |k| (1 - k^2).
double hs_symbol(int k);

/// Exact flow of the linearized problem: c_k(t) = exp(m(k) t) c_k(0).
HsState hs_evolve(const HsState& v0, double t);

/// Linear-order conserved functionals of the flow.
struct HsConserved {
  double mass = 0.0;  // integral of v
  double cosm = 0.0;  // integral of v cos
  double sinm = 0.0;  // integral of v sin
};
HsConserved hs_conserved(const HsState& v);

/// Distance from the imaginary axis to the decaying part of the spectrum.
/// Recomputes max over represented 2 <= |k| <= k_trunc of m(k) as a
/// certificate that the value 6 is attained (at |k| = 2).
double hs_gap(int k_trunc = 256);

}  // namespace quasistab
