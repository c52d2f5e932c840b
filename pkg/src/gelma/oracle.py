"""Brute-force l1 oracle for small instances.

An l1 minimizer over an affine set is attained at a vector with at most
m nonzeros, so enumerating all column subsets of size <= m and solving
each restricted system is exact (within floating point) at desk scale.
The result is the independent ground truth the solver tests compare to.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "OracleResult",
    "ComparisonReport",
    "BudgetError",
    "NoFeasibleCandidateError",
    "brute_force_l1",
    "compare_solutions",
    "oracle_to_json",
]

MAX_N = 24
MAX_M = 6

_FEAS_TOL = 1e-9  # residual acceptance: <= _FEAS_TOL * (1 + ||y||)
_DISTINCT_TOL = 1e-7  # witnesses closer than this count as the same vector


class BudgetError(ValueError):
    """Instance exceeds the enumeration budget (n <= 24, m <= 6)."""


class NoFeasibleCandidateError(RuntimeError):
    """No column subset reproduces the data; inputs inconsistent."""


@dataclass
class OracleResult:
    x_star: np.ndarray
    value: float
    unique: bool
    witnesses: list[tuple[tuple[int, ...], np.ndarray]] = field(default_factory=list)


@dataclass
class ComparisonReport:
    l2_err: float
    linf_err: float
    support_precision: float
    support_recall: float
    passed: bool


def brute_force_l1(A: np.ndarray, y: np.ndarray, tie_tol: float = 1e-7) -> OracleResult:
    """Exact l1-minimal solution of ``A x = y`` by support enumeration.

    Every subset S of columns with |S| <= m is solved by least squares;
    candidates whose residual is within ``1e-9 * (1 + ||y||)`` are kept,
    and the one of minimal l1 norm wins (ties resolved by the fixed
    subset order: size ascending, then lexicographic).  All accepted
    candidates within ``tie_tol`` of the optimum are returned as
    witnesses; ``unique`` is True when they collapse to a single vector.
    """
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    if A.ndim != 2 or A.shape[0] != y.shape[0]:
        raise ValueError(f"dimension mismatch: A is {A.shape}, y has length {y.shape}")
    m, n = A.shape
    if n > MAX_N or m > MAX_M:
        raise BudgetError(f"enumeration budget exceeded: need n <= {MAX_N}, m <= {MAX_M}, got {m}x{n}")
    if tie_tol <= 0:
        raise ValueError("tie_tol must be positive")

    feas_tol = _FEAS_TOL * (1.0 + float(np.linalg.norm(y)))
    accepted: list[tuple[tuple[int, ...], np.ndarray, float]] = []
    best = np.inf
    for size in range(0, m + 1):
        for S in itertools.combinations(range(n), size):
            if size == 0:
                resid = float(np.linalg.norm(y))
                u = np.empty(0)
            else:
                sub = A[:, S]
                u, _, _, _ = np.linalg.lstsq(sub, y, rcond=None)
                resid = float(np.linalg.norm(sub @ u - y))
            if resid > feas_tol:
                continue
            x = np.zeros(n)
            x[list(S)] = u
            val = float(np.sum(np.abs(x)))
            accepted.append((S, x, val))
            if val < best:
                best = val

    if not accepted:
        raise NoFeasibleCandidateError("no feasible support found; inconsistent inputs or rank failure")

    near = [(S, x, val) for S, x, val in accepted if val <= best + tie_tol]
    x_star = next(x for _, x, val in near if val == best)

    distinct: list[np.ndarray] = []
    witnesses: list[tuple[tuple[int, ...], np.ndarray]] = []
    for S, x, _ in near:
        witnesses.append((S, x))
        if not any(np.max(np.abs(x - d)) <= _DISTINCT_TOL for d in distinct):
            distinct.append(x)

    return OracleResult(x_star=x_star, value=best, unique=len(distinct) == 1, witnesses=witnesses)


def compare_solutions(x: np.ndarray, oracle: OracleResult, tol: float) -> ComparisonReport:
    """Errors of ``x`` against the oracle minimizer; passes only if unique."""
    x = np.asarray(x, dtype=float)
    if x.shape != oracle.x_star.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {oracle.x_star.shape}")
    diff = x - oracle.x_star
    l2 = float(np.linalg.norm(diff))
    linf = float(np.max(np.abs(diff))) if diff.size else 0.0
    sup_x = np.abs(x) > tol
    sup_star = np.abs(oracle.x_star) > tol
    hits = int(np.sum(sup_x & sup_star))
    precision = hits / int(np.sum(sup_x)) if np.any(sup_x) else 1.0
    recall = hits / int(np.sum(sup_star)) if np.any(sup_star) else 1.0
    return ComparisonReport(
        l2_err=l2,
        linf_err=linf,
        support_precision=precision,
        support_recall=recall,
        passed=bool(oracle.unique and l2 <= tol),
    )


def oracle_to_json(result: OracleResult) -> str:
    """Serialize an OracleResult for the CLI."""
    return json.dumps(
        {
            "x_star": [float(v) for v in result.x_star],
            "value": float(result.value),
            "unique": bool(result.unique),
            "num_witnesses": len(result.witnesses),
        }
    )
