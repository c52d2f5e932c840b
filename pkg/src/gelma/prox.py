"""Scalar and vector nonsmooth primitives.

The shrinkage-thresholding operator is the proximal map of ``a*||.||_1``;
the clipped-linear sign approximation and the Huber function are its
smoothed counterparts used by the regularized flow.
"""

from __future__ import annotations

import numpy as np

__all__ = ["soft_threshold", "g_eps", "huber", "l1_eps", "in_subdifferential"]


def soft_threshold(v, a: float):
    """Componentwise shrinkage: v-a above a, v+a below -a, 0 inside [-a, a]."""
    if a < 0:
        raise ValueError("threshold must be nonnegative")
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - a, 0.0)


def _check_eps(eps: float) -> float:
    if not eps > 0:
        raise ValueError("eps must be positive")
    return float(eps)


def g_eps(s, eps: float):
    """Clipped-linear approximation of sign: s/eps on [-eps, eps], +-1 outside."""
    eps = _check_eps(eps)
    return np.clip(np.asarray(s, dtype=float) / eps, -1.0, 1.0)


def huber(s, eps: float):
    """Huber smoothing of |s|: quadratic s^2/(2 eps) + eps/2 inside [-eps, eps].

    C^1, with derivative equal to :func:`g_eps`.
    """
    eps = _check_eps(eps)
    s = np.asarray(s, dtype=float)
    a = np.abs(s)
    return np.where(a >= eps, a, s * s / (2.0 * eps) + eps / 2.0)


def l1_eps(x, eps: float) -> float:
    """Sum of Huber values; bounds ||x||_1 from above by at most n*eps/2."""
    return float(np.sum(huber(x, eps)))


def in_subdifferential(xi: np.ndarray, x: np.ndarray, tol: float) -> bool:
    """Whether ``xi`` lies in the subdifferential of ``||.||_1`` at ``x``.

    Componentwise: where |x_i| > tol, xi_i must equal sign(x_i) within tol;
    elsewhere |xi_i| <= 1 + tol.  The tolerance is explicit because
    floating-point iterates never sit exactly at zero.
    """
    xi = np.asarray(xi, dtype=float)
    x = np.asarray(x, dtype=float)
    if xi.shape != x.shape:
        raise ValueError(f"length mismatch: {xi.shape} vs {x.shape}")
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    on = np.abs(x) > tol
    if np.any(np.abs(xi[on] - np.sign(x[on])) > tol):
        return False
    return bool(np.all(np.abs(xi[~on]) <= 1.0 + tol))
