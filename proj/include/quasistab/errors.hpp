#pragma once

#include <stdexcept>
#include <string>

namespace quasistab {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid configuration value, schema violation, or a symbol that is
/// undefined (NaN/inf) at a wavenumber the grid represents.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A point claimed to be an equilibrium fails the residual tolerance.
class NotAnEquilibriumError : public Error {
 public:
  NotAnEquilibriumError(const std::string& what, double residual)
      : Error(what), residual(residual) {}
  double residual;
};

/// The zero eigenvalue cluster carries a nilpotent part above tolerance.
class SemiSimplicityError : public Error {
 public:
  SemiSimplicityError(const std::string& what, double nilpotent_norm)
      : Error(what), nilpotent_norm(nilpotent_norm) {}
  double nilpotent_norm;
};

/// Spectrum outside the zero cluster reaches into the closed right half plane.
class SpectralConditionError : public Error {
 public:
  SpectralConditionError(const std::string& what, double max_real_part)
      : Error(what), max_real_part(max_real_part) {}
  double max_real_part;
};

/// Newton iteration for the graph map failed inside the requested radius.
class ChartRadiusError : public Error {
 public:
  using Error::Error;
};

/// A trajectory sample left the chart ball before reduction finished.
class ChartExitError : public Error {
 public:
  ChartExitError(const std::string& what, double exit_time)
      : Error(what), exit_time(exit_time) {}
  double exit_time;
};

/// Limit identification requested before the stable component has decayed.
class PrematureLimitError : public Error {
 public:
  PrematureLimitError(const std::string& what, double y_norm)
      : Error(what), y_norm(y_norm) {}
  double y_norm;
};

/// Too few samples above the noise floor to fit a decay rate.
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

/// Quadrature tail estimate too large for the requested accuracy.
class ResolutionError : public Error {
 public:
  ResolutionError(const std::string& what, double tail_bound)
      : Error(what), tail_bound(tail_bound) {}
  double tail_bound;
};

/// Cross-mode leakage of the discretized operator above tolerance.
class ConsistencyError : public Error {
 public:
  ConsistencyError(const std::string& what, double leakage)
      : Error(what), leakage(leakage) {}
  double leakage;
};

/// Exponent bookkeeping constraint violated; the message names the inequality.
class ConstraintError : public Error {
 public:
  using Error::Error;
};

}  // namespace quasistab
