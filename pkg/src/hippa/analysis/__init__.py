"""Convergence-rate estimation and sampled property checks."""

from .checks import (
    check_differential,
    check_growth,
    check_line_segment,
    check_local_strong_convexity,
    check_stationarity,
    check_supercoercivity,
    check_uniform_quasiconvexity,
    default_sampler,
    estimate_modulus,
    region_sampler,
)
from .rates import (
    RateEstimate,
    classify_case,
    estimate_rate,
    estimate_rate_from_errors,
    sigma_p_for_run,
    theoretical_rate,
    verify_iterate_inequality,
)
from .report import CheckReport

__all__ = [
    "CheckReport",
    "RateEstimate",
    "check_differential",
    "check_growth",
    "check_line_segment",
    "check_local_strong_convexity",
    "check_stationarity",
    "check_supercoercivity",
    "check_uniform_quasiconvexity",
    "classify_case",
    "default_sampler",
    "estimate_modulus",
    "estimate_rate",
    "estimate_rate_from_errors",
    "region_sampler",
    "sigma_p_for_run",
    "theoretical_rate",
    "verify_iterate_inequality",
]
