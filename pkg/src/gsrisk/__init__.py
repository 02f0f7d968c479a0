"""Gerber-Shiu functions for risk processes with phase-type gains and
mixed phase-type/heavy-tailed claims: corrected phase-type approximation,
scale matrices, and a Monte Carlo oracle."""

__version__ = "0.1.0"

from .distributions import (HeavyTail, MixtureClaim, PhaseType,
                            erlang_ph, exponential_ph)
from .errors import (GsriskError, InputError, InsufficientPaths,
                     MonteCarloError, NumericalError, SafetyLoadingViolated)
from .fluid_map import RiskModel, build_model, constant_C, det_polynomial
from .gerber_shiu import (GSResult, PenaltyFunction, asymptotic_bound,
                          cl_ruin_corrected, gs_base, gs_corrected)
from .montecarlo import (McEstimate, PathOutcome, estimate_gs,
                         estimate_gs_differences, estimate_gs_ladder,
                         estimate_ruin, estimate_ruin_differences,
                         simulate_path)
from .scale import ScaleMatrix, base_scale_matrix
from .spectral import SpectralData, build_spectral

__all__ = [
    "__version__",
    "PhaseType", "HeavyTail", "MixtureClaim", "exponential_ph", "erlang_ph",
    "RiskModel", "build_model", "det_polynomial", "constant_C",
    "SpectralData", "build_spectral", "ScaleMatrix", "base_scale_matrix",
    "PenaltyFunction", "GSResult", "gs_base", "gs_corrected",
    "cl_ruin_corrected", "asymptotic_bound",
    "PathOutcome", "McEstimate", "simulate_path", "estimate_gs",
    "estimate_gs_differences", "estimate_gs_ladder", "estimate_ruin",
    "estimate_ruin_differences",
    "GsriskError", "InputError", "NumericalError", "MonteCarloError",
    "InsufficientPaths", "SafetyLoadingViolated",
]
