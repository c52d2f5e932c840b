"""Discrete sparse-recovery solvers.

Four iterations over a shared :class:`~gelma.linalg.ProblemInstance`:

* :func:`gelma_solve` -- quasi-explicit generalized Lagrangian multiplier
  scheme (GeLMA): a soft-thresholded primal step plus multiplier ascent.
  Its fixed point solves the equality-constrained l1 problem for every
  value of tau, provided ``dt * ||A|| < 1``.
* :func:`implicit_gelma_solve` -- fully implicit variant; unconditionally
  stable in ``dt``, each step solves a strongly convex subproblem.
* :func:`ista_solve` / :func:`fista_solve` -- proximal gradient descent
  and its accelerated version for the relaxed (penalized) problem, whose
  minimizer is biased for fixed tau.

All solvers start from zero (warm starts optional), record a convergence
history, and stop on max_iter or when both the iterate change and the
data residual fall below their thresholds.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import ProblemInstance, spectral_norm
from .prox import in_subdifferential, soft_threshold

__all__ = [
    "StopRule",
    "HistoryRow",
    "SolverRun",
    "CertificateReport",
    "SolverError",
    "StepSizeError",
    "DivergenceError",
    "InnerSolveError",
    "stable_step",
    "gelma_solve",
    "implicit_gelma_solve",
    "scalar_implicit_step",
    "ista_solve",
    "fista_solve",
    "certificate_check",
    "history_to_csv",
    "certificate_to_json",
]


class SolverError(RuntimeError):
    """Base class for solver failures (CLI maps these to exit code 2)."""


class StepSizeError(SolverError):
    """Step size violates the scheme's stability condition."""


class DivergenceError(SolverError):
    """Non-finite iterate; carries the last finite iteration index."""

    def __init__(self, message: str, last_finite_k: int):
        super().__init__(message)
        self.last_finite_k = last_finite_k


class InnerSolveError(SolverError):
    """Per-step subproblem of the implicit scheme did not converge."""


@dataclass(frozen=True)
class StopRule:
    """Stop on max_iter, or when BOTH tolerances are met.

    ``tol_change`` bounds ``||x_{k+1} - x_k||``; ``tol_residual`` bounds
    ``||y - A x_k||``.  Set ``tol_residual=inf`` for change-only stopping
    (the penalized solvers never drive the residual to zero).
    """

    max_iter: int = 1000
    tol_change: float = 0.0
    tol_residual: float = 0.0
    record_every: int = 1

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if self.tol_change < 0 or self.tol_residual < 0:
            raise ValueError("tolerances must be nonnegative")


@dataclass
class HistoryRow:
    k: int
    objective: float  # tau*||x||_1 + 0.5*||y - A x||^2
    residual: float  # ||y - A x||
    err_vs_ref: float | None  # ||x - reference_x||, None without a reference
    l1_norm: float


@dataclass
class SolverRun:
    x: np.ndarray
    z: np.ndarray | None  # multiplier; None for ISTA/FISTA
    history: list[HistoryRow] = field(default_factory=list)
    stop_reason: str = "max_iter"  # "max_iter" | "tolerance"
    iterations: int = 0


@dataclass
class CertificateReport:
    passed: bool
    off_support_max: float
    on_support_violations: list[tuple[int, float]] = field(default_factory=list)


def _history_row(k: int, x: np.ndarray, r: np.ndarray, p: ProblemInstance) -> HistoryRow:
    l1 = float(np.sum(np.abs(x)))
    resid = float(np.linalg.norm(r))
    err = None
    if p.reference_x is not None:
        err = float(np.linalg.norm(x - p.reference_x))
    return HistoryRow(
        k=k,
        objective=p.tau * l1 + 0.5 * resid * resid,
        residual=resid,
        err_vs_ref=err,
        l1_norm=l1,
    )


def _check_finite(x: np.ndarray, k: int, what: str):
    if not np.all(np.isfinite(x)):
        raise DivergenceError(f"non-finite {what} at iteration {k}", last_finite_k=k - 1)


class _Recorder:
    """Collects history rows at the record cadence plus the final iterate."""

    def __init__(self, p: ProblemInstance, stop: StopRule):
        self.p = p
        self.every = stop.record_every
        self.rows: list[HistoryRow] = []
        self._last_k = -1

    def maybe(self, k: int, x: np.ndarray, r: np.ndarray):
        if k % self.every == 0:
            self.rows.append(_history_row(k, x, r, self.p))
            self._last_k = k

    def final(self, k: int, x: np.ndarray, r: np.ndarray):
        if k != self._last_k:
            self.rows.append(_history_row(k, x, r, self.p))
            self._last_k = k


def stable_step(sigma: float) -> float:
    """Step size under which the quasi-explicit scheme provably damps.

    The stated condition ``dt * ||A|| < 1`` suffices only when
    ``||A|| <~ 1``: linearizing the (x, z) iteration on a fixed support
    decouples it into 2x2 blocks per singular value s, whose spectral
    radius stays below one iff ``dt < 1`` and ``dt * s^2 <~ 2``.  This
    returns 0.9 times the simultaneous bound, which also satisfies
    ``dt * sigma < 1``.
    """
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    return 0.9 * min(1.0, 1.0 / sigma, 2.0 / (sigma * sigma))


def gelma_solve(
    p: ProblemInstance,
    stop: StopRule,
    x0: np.ndarray | None = None,
    z0: np.ndarray | None = None,
) -> SolverRun:
    """Quasi-explicit multiplier scheme.

    Iterates, with ``eta`` the shrinkage operator,

        x_{k+1} = eta_{tau*dt}( x_k + dt * A^T (z_k + y - A x_k) )
        z_{k+1} = z_k + dt * (y - A x_k)

    Requires ``dt * ||A|| < 1``; the default instance step 0.9/||A||
    honors that with margin.
    """
    A, y, tau, dt = p.A, p.y, p.tau, p.dt
    sigma = spectral_norm(A)
    if not dt * sigma < 1.0:
        raise StepSizeError(f"dt * ||A|| = {dt * sigma:.6g} must be < 1 (||A|| ~= {sigma:.6g})")

    x = np.zeros(p.n) if x0 is None else np.asarray(x0, dtype=float).copy()
    z = np.zeros(p.m) if z0 is None else np.asarray(z0, dtype=float).copy()
    At = A.T
    rec = _Recorder(p, stop)

    r = y - A @ x
    rec.maybe(0, x, r)
    stop_reason = "max_iter"
    k = 0
    for k in range(1, stop.max_iter + 1):
        x_new = soft_threshold(x + dt * (At @ (z + r)), tau * dt)
        z += dt * r
        _check_finite(x_new, k, "iterate")
        _check_finite(z, k, "multiplier")
        change = float(np.linalg.norm(x_new - x))
        x = x_new
        r = y - A @ x
        rec.maybe(k, x, r)
        if change <= stop.tol_change and np.linalg.norm(r) <= stop.tol_residual:
            stop_reason = "tolerance"
            break
    rec.final(k, x, r)
    return SolverRun(x=x, z=z, history=rec.rows, stop_reason=stop_reason, iterations=k)


def scalar_implicit_step(r: float, dt: float) -> float:
    """One implicit Euler step of the scalar toy flow ``r' = -sgn(r)``.

    Closed form: inside the band |r| <= dt the step lands exactly at 0,
    outside it moves dt toward 0 -- i.e. soft thresholding with width dt.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if r > dt:
        return r - dt
    if r < -dt:
        return r + dt
    return 0.0


def implicit_gelma_solve(
    p: ProblemInstance,
    stop: StopRule,
    tol_inner: float = 1e-10,
    max_inner: int = 10000,
    x0: np.ndarray | None = None,
    z0: np.ndarray | None = None,
) -> SolverRun:
    """Fully implicit multiplier scheme; stable for every ``dt > 0``.

    Each step solves the coupled system

        (x_{k+1} - x_k)/dt = -tau*xi_{k+1} + A^T (z_{k+1} + y - A x_{k+1})
        (z_{k+1} - z_k)/dt = y - A x_{k+1}

    with ``xi_{k+1}`` in the subdifferential of ``||x_{k+1}||_1``.
    Eliminating z_{k+1} turns the x-step into the strongly convex program

        min_u  tau*dt*||u||_1 + 0.5*||u - x_k - dt*A^T z_k||^2
               + 0.5*dt*(1+dt)*||y - A u||^2

    solved by proximal gradient iteration, warm-started at x_k, until the
    successive change is <= tol_inner and the recovered subgradient
    passes :func:`~gelma.prox.in_subdifferential` at tol_inner.
    """
    A, y, tau, dt = p.A, p.y, p.tau, p.dt
    if tol_inner <= 0:
        raise ValueError("tol_inner must be positive")
    sigma = spectral_norm(A)
    gamma = dt * (1.0 + dt)
    h = 1.0 / (1.0 + gamma * sigma * sigma)
    At = A.T

    x = np.zeros(p.n) if x0 is None else np.asarray(x0, dtype=float).copy()
    z = np.zeros(p.m) if z0 is None else np.asarray(z0, dtype=float).copy()
    rec = _Recorder(p, stop)
    rec.maybe(0, x, y - A @ x)
    stop_reason = "max_iter"
    k = 0
    for k in range(1, stop.max_iter + 1):
        c = x + dt * (At @ z)
        u = x.copy()
        for _ in range(max_inner):
            grad = (u - c) - gamma * (At @ (y - A @ u))
            u_new = soft_threshold(u - h * grad, tau * dt * h)
            delta = float(np.linalg.norm(u_new - u))
            u = u_new
            if delta <= tol_inner:
                grad = (u - c) - gamma * (At @ (y - A @ u))
                xi = -grad / (tau * dt)
                if in_subdifferential(xi, u, tol_inner):
                    break
        else:
            raise InnerSolveError(
                f"inner proximal-gradient solve did not reach {tol_inner} in {max_inner} iterations "
                f"at outer step {k}"
            )
        _check_finite(u, k, "iterate")
        change = float(np.linalg.norm(u - x))
        x = u
        r = y - A @ x
        z = z + dt * r
        _check_finite(z, k, "multiplier")
        rec.maybe(k, x, r)
        if change <= stop.tol_change and np.linalg.norm(r) <= stop.tol_residual:
            stop_reason = "tolerance"
            break
    rec.final(k, x, r)
    return SolverRun(x=x, z=z, history=rec.rows, stop_reason=stop_reason, iterations=k)


def _default_h(p: ProblemInstance, h: float | None) -> tuple[float, float]:
    sigma = spectral_norm(p.A)
    if h is None:
        h = 1.0 / (sigma * sigma)
    elif h <= 0:
        raise StepSizeError("h must be positive")
    return h, sigma


def ista_solve(
    p: ProblemInstance,
    stop: StopRule,
    h: float | None = None,
    x0: np.ndarray | None = None,
) -> SolverRun:
    """Proximal gradient descent on the penalized objective.

        x_{k+1} = eta_{tau*h}( x_k - h * A^T (A x_k - y) )

    Requires ``h * ||A||^2 < 2``; default ``h = 1/||A||^2``.  The
    objective is non-increasing along the iterates.
    """
    A, y, tau = p.A, p.y, p.tau
    h, sigma = _default_h(p, h)
    if not h * sigma * sigma < 2.0 * (1.0 + 1e-12):
        raise StepSizeError(f"h * ||A||^2 = {h * sigma * sigma:.6g} must be < 2")
    At = A.T
    x = np.zeros(p.n) if x0 is None else np.asarray(x0, dtype=float).copy()
    rec = _Recorder(p, stop)
    r = y - A @ x
    rec.maybe(0, x, r)
    stop_reason = "max_iter"
    k = 0
    for k in range(1, stop.max_iter + 1):
        x_new = soft_threshold(x + h * (At @ r), tau * h)
        _check_finite(x_new, k, "iterate")
        change = float(np.linalg.norm(x_new - x))
        x = x_new
        r = y - A @ x
        rec.maybe(k, x, r)
        if change <= stop.tol_change and np.linalg.norm(r) <= stop.tol_residual:
            stop_reason = "tolerance"
            break
    rec.final(k, x, r)
    return SolverRun(x=x, z=None, history=rec.rows, stop_reason=stop_reason, iterations=k)


def fista_solve(
    p: ProblemInstance,
    stop: StopRule,
    h: float | None = None,
    x0: np.ndarray | None = None,
) -> SolverRun:
    """Accelerated proximal gradient on the penalized objective.

    Gradient step at the extrapolated point, then momentum update

        t_{k+1} = (1 + sqrt(1 + 4 t_k^2)) / 2,    t_1 = 1
        w_{k+1} = x_k + ((t_k - 1)/t_{k+1}) * (x_k - x_{k-1})

    Requires ``h * ||A||^2 <= 1``; default ``h = 1/||A||^2``.  The first
    step coincides with ISTA because the momentum is inactive at t_1 = 1.
    """
    A, y, tau = p.A, p.y, p.tau
    h, sigma = _default_h(p, h)
    if not h * sigma * sigma <= 1.0 + 1e-12:
        raise StepSizeError(f"h * ||A||^2 = {h * sigma * sigma:.6g} must be <= 1")
    At = A.T
    x = np.zeros(p.n) if x0 is None else np.asarray(x0, dtype=float).copy()
    w = x.copy()
    t = 1.0
    rec = _Recorder(p, stop)
    r = y - A @ x
    rec.maybe(0, x, r)
    stop_reason = "max_iter"
    k = 0
    for k in range(1, stop.max_iter + 1):
        x_new = soft_threshold(w - h * (At @ (A @ w - y)), tau * h)
        _check_finite(x_new, k, "iterate")
        t_new = (1.0 + math.sqrt(1.0 + 4.0 * t * t)) / 2.0
        w = x_new + ((t - 1.0) / t_new) * (x_new - x)
        change = float(np.linalg.norm(x_new - x))
        x = x_new
        t = t_new
        r = y - A @ x
        rec.maybe(k, x, r)
        if change <= stop.tol_change and np.linalg.norm(r) <= stop.tol_residual:
            stop_reason = "tolerance"
            break
    rec.final(k, x, r)
    return SolverRun(x=x, z=None, history=rec.rows, stop_reason=stop_reason, iterations=k)


def certificate_check(
    A: np.ndarray, x: np.ndarray, z: np.ndarray, tau: float, tol: float
) -> CertificateReport:
    """Optimality certificate for the constrained l1 problem.

    ``(x, z)`` passes when ``[A^T z]_i = tau * sign(x_i)`` within tol on
    the support of x (|x_i| > tol) and ``|[A^T z]_i| <= tau + tol``
    elsewhere.  ``off_support_max`` is the largest |[A^T z]_i| off the
    support (0 when the support is everything).
    """
    A = np.asarray(A, dtype=float)
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    if A.shape != (z.shape[0], x.shape[0]):
        raise ValueError(f"dimension mismatch: A is {A.shape}, x has {x.shape}, z has {z.shape}")
    if not tau > 0:
        raise ValueError("tau must be positive")
    g = A.T @ z
    on = np.abs(x) > tol
    violations = []
    dev = np.abs(g[on] - tau * np.sign(x[on]))
    for idx, d in zip(np.nonzero(on)[0], dev):
        if d > tol:
            violations.append((int(idx), float(d)))
    off_max = float(np.max(np.abs(g[~on]))) if np.any(~on) else 0.0
    passed = not violations and off_max <= tau + tol
    return CertificateReport(passed=passed, off_support_max=off_max, on_support_violations=violations)


def history_to_csv(history: list[HistoryRow]) -> str:
    """Render a history as CSV; err_vs_ref is empty without a reference."""
    lines = ["k,objective,residual,err_vs_ref,l1_norm"]
    for row in history:
        err = "" if row.err_vs_ref is None else repr(row.err_vs_ref)
        lines.append(f"{row.k},{row.objective!r},{row.residual!r},{err},{row.l1_norm!r}")
    return "\n".join(lines) + "\n"


def certificate_to_json(report: CertificateReport) -> str:
    return json.dumps(
        {
            "pass": bool(report.passed),
            "off_support_max": float(report.off_support_max),
            "on_support_violations": [
                {"index": i, "value": v} for i, v in report.on_support_violations
            ],
        }
    )
