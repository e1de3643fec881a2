from .mc_oracle import McConfig, McEstimate, McPaths, simulate_paths, estimate_quadratic_integrals
from .ot_grid_oracle import GridSpec, discretize_gaussian, verify_closed_form
from .invariant_suite import CheckSettings, SUITES, run_suites

__all__ = [
    "McConfig",
    "McEstimate",
    "McPaths",
    "simulate_paths",
    "estimate_quadratic_integrals",
    "GridSpec",
    "discretize_gaussian",
    "verify_closed_form",
    "CheckSettings",
    "SUITES",
    "run_suites",
]
