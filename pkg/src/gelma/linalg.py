"""Dense linear-algebra utilities and the shared problem container.

Everything downstream (solvers, ODE flow, oracle, imaging) works on a
real sensing matrix ``A`` and real data ``y``.  Complex systems enter
only through :func:`realify`, which stacks real and imaginary parts so
that all l2 norms are preserved.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ProblemInstance",
    "SpectralNormError",
    "FormatError",
    "spectral_norm",
    "realify",
    "tau_scale",
    "load_matrix_csv",
    "load_problem",
    "save_problem",
]


class SpectralNormError(RuntimeError):
    """Power iteration did not converge; carries the last estimate."""

    def __init__(self, message: str, estimate: float, residual: float):
        super().__init__(message)
        self.estimate = estimate
        self.residual = residual


class FormatError(ValueError):
    """Malformed problem or scene file."""


def spectral_norm(A: np.ndarray, tol: float = 1e-12, max_iter: int = 50000) -> float:
    """Largest singular value of ``A`` by power iteration on ``A^T A``.

    The start vector is the normalized all-ones vector so repeated calls
    are bit-reproducible.  Convergence is declared when two successive
    Rayleigh estimates agree to a relative ``tol``.

    Raises
    ------
    SpectralNormError
        If ``max_iter`` sweeps do not reach ``tol``; the exception keeps
        the last estimate and the last relative change.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ValueError("A must be a matrix")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not np.any(A):
        raise ValueError("A must be nonzero")

    n = A.shape[1]
    v = np.ones(n) / np.sqrt(n)
    if float(np.linalg.norm(A @ v)) == 0.0:
        # seed lies in the null space; deterministic reseed
        v = np.random.default_rng(0).standard_normal(n)
        v /= np.linalg.norm(v)
    sigma = float(np.linalg.norm(A @ v))  # Rayleigh estimate sqrt(v^T A^T A v)
    change = np.inf
    streak = 0
    for _ in range(max_iter):
        u = A.T @ (A @ v)
        v = u / np.linalg.norm(u)
        sigma_new = float(np.linalg.norm(A @ v))
        prev_change, change = change, abs(sigma_new - sigma)
        sigma = sigma_new
        if change <= 1e-15 * sigma:
            return sigma
        # estimates converge geometrically; accept once the projected tail
        # is small on several consecutive sweeps (a single ratio can fool)
        if np.isfinite(prev_change) and prev_change > 0.0:
            ratio = change / prev_change
            if ratio < 1.0 and change * ratio / (1.0 - ratio) <= tol * sigma:
                streak += 1
                if streak >= 3:
                    return sigma
                continue
        streak = 0
    raise SpectralNormError(
        f"power iteration did not converge in {max_iter} iterations "
        f"(estimate {sigma}, last change {change})",
        estimate=sigma,
        residual=change,
    )


def realify(Ac: np.ndarray, bc: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Embed a complex system ``Ac x ~ bc`` (x real) into a real one.

    Stacks Re over Im:  ``A_r = [Re Ac; Im Ac]``, ``y_r = [Re bc; Im bc]``.
    For every real ``x``, ``||A_r x - y_r||^2 == ||Ac x - bc||^2`` and
    ``A_r^T y_r == Re(Ac^* bc)``.
    """
    Ac = np.asarray(Ac, dtype=complex)
    bc = np.asarray(bc, dtype=complex)
    if Ac.ndim != 2 or bc.ndim != 1 or Ac.shape[0] != bc.shape[0]:
        raise ValueError(f"dimension mismatch: A is {Ac.shape}, b has length {bc.shape}")
    A_r = np.vstack([Ac.real, Ac.imag])
    y_r = np.concatenate([bc.real, bc.imag])
    return A_r, y_r


def tau_scale(A: np.ndarray, y: np.ndarray) -> float:
    """Natural scale ``||A^T y||_inf`` for the regularization parameter."""
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    if A.ndim != 2 or A.shape[0] != y.shape[0]:
        raise ValueError(f"dimension mismatch: A is {A.shape}, y has length {y.shape}")
    v = A.T @ y
    return float(np.max(np.abs(v))) if v.size else 0.0


@dataclass
class ProblemInstance:
    """A sensing matrix, data vector and solver parameters.

    Parameters
    ----------
    A : (m, n) ndarray
        Real sensing matrix, m <= n, numerically full row rank.
    y : (m,) ndarray
        Data vector.
    tau : float
        Positive regularization weight of the l1 term.
    dt : float
        Positive step size for the multiplier schemes.
    reference_x : (n,) ndarray, optional
        Known solution used for error tracking.
    rank_tol : float
        Relative threshold on the smallest singular value of A A^T.
    """

    A: np.ndarray
    y: np.ndarray
    tau: float
    dt: float
    reference_x: np.ndarray | None = None
    rank_tol: float = 1e-10

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.A.ndim != 2:
            raise ValueError("A must be a matrix")
        m, n = self.A.shape
        if m < 1 or n < 1:
            raise ValueError("A must have at least one row and one column")
        if m > n:
            raise ValueError(f"A must have m <= n, got {m}x{n}")
        if self.y.shape != (m,):
            raise ValueError(f"y must have length {m}, got {self.y.shape}")
        if not np.all(np.isfinite(self.A)) or not np.all(np.isfinite(self.y)):
            raise ValueError("A and y must be finite")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        # full row rank: smallest singular value of A A^T above a relative floor
        s = np.linalg.svd(self.A, compute_uv=False)
        if s[-1] ** 2 <= self.rank_tol * s[0] ** 2:
            raise ValueError(
                f"A is not numerically full row rank "
                f"(sigma_min^2/sigma_max^2 = {(s[-1] / s[0]) ** 2:.3e})"
            )
        if self.reference_x is not None:
            self.reference_x = np.asarray(self.reference_x, dtype=float)
            if self.reference_x.shape != (n,):
                raise ValueError(f"reference_x must have length {n}")

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]


def _problem_to_dict(p: ProblemInstance) -> dict:
    d = {
        "m": p.m,
        "n": p.n,
        "A": [float(v) for v in p.A.ravel()],  # row-major
        "y": [float(v) for v in p.y],
        "tau": float(p.tau),
        "dt": float(p.dt),
    }
    if p.reference_x is not None:
        d["reference_x"] = [float(v) for v in p.reference_x]
    return d


def save_problem(p: ProblemInstance, path) -> None:
    """Write a ProblemInstance as JSON (matrix stored row-major)."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_problem_to_dict(p), fh)
        fh.write("\n")


def load_problem(path) -> ProblemInstance:
    """Read a ProblemInstance written by :func:`save_problem`."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: not valid JSON ({exc})") from exc
    try:
        m, n = int(d["m"]), int(d["n"])
        A = np.asarray(d["A"], dtype=float).reshape(m, n)
        y = np.asarray(d["y"], dtype=float)
        ref = d.get("reference_x")
        return ProblemInstance(
            A=A,
            y=y,
            tau=float(d["tau"]),
            dt=float(d["dt"]),
            reference_x=None if ref is None else np.asarray(ref, dtype=float),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: bad problem file ({exc})") from exc


def load_matrix_csv(path) -> np.ndarray:
    """Load a dense matrix from CSV: one row per line, comma-separated."""
    try:
        return np.loadtxt(path, delimiter=",", ndmin=2, dtype=float)
    except ValueError as exc:
        raise FormatError(f"{path}: bad CSV matrix ({exc})") from exc
