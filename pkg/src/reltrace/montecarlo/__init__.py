"""Path simulation of the killed process and the estimators built on it."""

from .estimators import (EstimateWithError, ExitSample, PathConfig, compute_C2, compute_C2_extrapolated,
                         estimate_f_H, estimate_f_H_profile, estimate_r_D, estimate_trace_remainder,
                         ikeda_watanabe_check, simulate_exits)
from .samplers import sample_increment, sample_positive_stable, sample_tempered_subordinator

__all__ = [
    "EstimateWithError", "ExitSample", "PathConfig", "compute_C2", "compute_C2_extrapolated", "estimate_f_H",
    "estimate_f_H_profile", "estimate_r_D", "estimate_trace_remainder", "ikeda_watanabe_check",
    "simulate_exits", "sample_increment", "sample_positive_stable", "sample_tempered_subordinator",
]
