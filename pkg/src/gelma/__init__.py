"""Sparse recovery via the generalized Lagrangian multiplier scheme.

Solvers for the equality-constrained l1 problem and its penalized
relaxation, an independent brute-force oracle, the regularized
continuous-time flow with energy diagnostics, and a synthetic
array-imaging pipeline.
"""

from .flow import OdeConfig, OdeState, integrate, lyapunov_energy, minmax_F, ode_rhs, stability_cap
from .linalg import ProblemInstance, load_problem, realify, save_problem, spectral_norm, tau_scale
from .oracle import OracleResult, brute_force_l1, compare_solutions
from .prox import g_eps, huber, in_subdifferential, l1_eps, soft_threshold
from .solvers import (
    CertificateReport,
    HistoryRow,
    SolverRun,
    StopRule,
    certificate_check,
    fista_solve,
    gelma_solve,
    implicit_gelma_solve,
    ista_solve,
    scalar_implicit_step,
    stable_step,
)

__version__ = "0.1.0"

__all__ = [
    "ProblemInstance",
    "spectral_norm",
    "realify",
    "tau_scale",
    "load_problem",
    "save_problem",
    "soft_threshold",
    "g_eps",
    "huber",
    "l1_eps",
    "in_subdifferential",
    "StopRule",
    "HistoryRow",
    "SolverRun",
    "CertificateReport",
    "gelma_solve",
    "implicit_gelma_solve",
    "scalar_implicit_step",
    "ista_solve",
    "fista_solve",
    "stable_step",
    "certificate_check",
    "OdeState",
    "OdeConfig",
    "ode_rhs",
    "stability_cap",
    "integrate",
    "lyapunov_energy",
    "minmax_F",
    "OracleResult",
    "brute_force_l1",
    "compare_solutions",
]
