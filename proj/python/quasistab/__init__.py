"""Python face of the quasilinear stability laboratory."""

from ._core import (
    ConfigError,
    ConstraintError,
    InsufficientDataError,
    QuasistabError,
    critical_weight_exponent,
    fit_decay,
    fmcf_symbol_table,
    hs_gap,
    hs_symbol,
    rd_exponents,
    run_scenario,
    weighted_norm_track,
)

__all__ = [
    "ConfigError",
    "ConstraintError",
    "InsufficientDataError",
    "QuasistabError",
    "critical_weight_exponent",
    "fit_decay",
    "fmcf_symbol_table",
    "hs_gap",
    "hs_symbol",
    "rd_exponents",
    "run_scenario",
    "weighted_norm_track",
]
