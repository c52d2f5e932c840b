"""Seeded random problem instances.

The sensing matrix has i.i.d. standard normal entries; the planted
solution has k nonzero entries at random positions with magnitudes
uniform in [0.5, 1.5] and random signs.  The data is exact (y = A xbar)
and the planted vector is stored as the reference.
"""

from __future__ import annotations

import numpy as np

from .linalg import ProblemInstance, spectral_norm, tau_scale

__all__ = ["random_instance"]


def random_instance(m: int, n: int, k: int, seed: int) -> ProblemInstance:
    """Random m-by-n problem with a planted k-sparse solution.

    The stored tau is ``||A^T y||_inf`` (1.0 when y = 0) and the stored
    step is 0.9/||A||; both are routinely overridden downstream.
    Deterministic for a fixed seed.
    """
    if not 0 <= k <= m <= n:
        raise ValueError(f"need 0 <= k <= m <= n, got k={k}, m={m}, n={n}")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n))
    xbar = np.zeros(n)
    if k > 0:
        support = np.sort(rng.choice(n, size=k, replace=False))
        magnitudes = rng.uniform(0.5, 1.5, size=k)
        signs = rng.choice([-1.0, 1.0], size=k)
        xbar[support] = signs * magnitudes
    y = A @ xbar
    scale = tau_scale(A, y)
    return ProblemInstance(
        A=A,
        y=y,
        tau=scale if scale > 0 else 1.0,
        dt=0.9 / spectral_norm(A),
        reference_x=xbar,
    )
