"""Regularized gradient flow for the multiplier dynamics.

The nonsmooth sign in the continuous-time system is replaced by the
clipped-linear approximation :func:`~gelma.prox.g_eps`, giving a
Lipschitz right side

    dx/dt = -tau * G_eps(x) + A^T (z + y - A x)
    dz/dt = y - A x

integrated by fixed-step explicit Euler.  Along a trajectory the energy
``||dx/dt||^2 + ||A (x - xbar)||^2`` (xbar a feasible reference point)
is non-increasing up to discretization error, which gives a runtime
check on the integrator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .linalg import ProblemInstance, spectral_norm
from .prox import g_eps

__all__ = [
    "OdeState",
    "OdeConfig",
    "IntegrationResult",
    "ode_rhs",
    "stability_cap",
    "integrate",
    "lyapunov_energy",
    "minmax_F",
    "trajectory_to_csv",
]


@dataclass
class OdeState:
    x: np.ndarray
    z: np.ndarray
    t: float


@dataclass(frozen=True)
class OdeConfig:
    """Integration settings; ``dt_ode`` must respect :func:`stability_cap`."""

    eps: float
    dt_ode: float
    t_final: float
    observe_every: int = 1

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if not self.dt_ode > 0:
            raise ValueError("dt_ode must be positive")
        if self.t_final < 0:
            raise ValueError("t_final must be nonnegative")
        if self.observe_every < 1:
            raise ValueError("observe_every must be >= 1")


@dataclass
class IntegrationResult:
    final_state: OdeState
    observations: list[OdeState] = field(default_factory=list)


def _rhs(x: np.ndarray, z: np.ndarray, p: ProblemInstance, eps: float):
    r = p.y - p.A @ x
    dx = -p.tau * g_eps(x, eps) + p.A.T @ (z + r)
    return dx, r


def ode_rhs(state: OdeState, p: ProblemInstance, eps: float) -> tuple[np.ndarray, np.ndarray]:
    """Right side of the regularized flow at ``state``."""
    x, z = state.x, state.z
    if x.shape != (p.n,) or z.shape != (p.m,):
        raise ValueError(f"state shapes {x.shape}, {z.shape} do not match problem {p.m}x{p.n}")
    return _rhs(x, z, p, eps)


def stability_cap(p: ProblemInstance, eps: float) -> float:
    """Largest admissible Euler step: 0.5 * min(eps/tau, 1/(1 + ||A||^2)).

    The right side has Lipschitz constant about tau/eps + ||A||^2 in x,
    so this is the usual explicit-scheme requirement with a safety 1/2.
    """
    sigma = spectral_norm(p.A)
    return 0.5 * min(eps / p.tau, 1.0 / (1.0 + sigma * sigma))


def integrate(
    p: ProblemInstance,
    cfg: OdeConfig,
    observer: Callable[[OdeState], None] | None = None,
    x0: np.ndarray | None = None,
) -> IntegrationResult:
    """Fixed-step explicit Euler from ``x(0) = x0`` (default 0), ``z(0) = 0``.

    States are observed at t = 0, every ``observe_every`` steps, and at
    the final step; ``observer`` (if given) is called on each observed
    state.  Aborts with the timestamp if the state leaves finite range.
    """
    cap = stability_cap(p, cfg.eps)
    if cfg.dt_ode > cap * (1.0 + 1e-12):
        raise ValueError(f"dt_ode = {cfg.dt_ode:.6g} exceeds the stability cap {cap:.6g}")
    x = np.zeros(p.n) if x0 is None else np.asarray(x0, dtype=float).copy()
    z = np.zeros(p.m)
    steps = int(round(cfg.t_final / cfg.dt_ode))
    observations: list[OdeState] = []

    def observe(k: int, xk: np.ndarray, zk: np.ndarray):
        st = OdeState(x=xk.copy(), z=zk.copy(), t=k * cfg.dt_ode)
        observations.append(st)
        if observer is not None:
            observer(st)

    observe(0, x, z)
    last_observed = 0
    for k in range(1, steps + 1):
        dx, r = _rhs(x, z, p, cfg.eps)
        x = x + cfg.dt_ode * dx
        z = z + cfg.dt_ode * r
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(z))):
            raise FloatingPointError(f"non-finite state at t = {k * cfg.dt_ode:.6g}")
        if k % cfg.observe_every == 0:
            observe(k, x, z)
            last_observed = k
    if steps > 0 and last_observed != steps:
        observe(steps, x, z)
    return IntegrationResult(final_state=observations[-1], observations=observations)


def lyapunov_energy(state: OdeState, p: ProblemInstance, xbar: np.ndarray, eps: float) -> float:
    """Dissipated energy ``||dx/dt||^2 + ||A (x - xbar)||^2`` at a state.

    ``xbar`` must solve ``A xbar = y`` (to 1e-8); the velocity comes from
    :func:`ode_rhs` rather than finite differences of stored states, so
    the value does not depend on the observation cadence.
    """
    xbar = np.asarray(xbar, dtype=float)
    if float(np.linalg.norm(p.A @ xbar - p.y)) > 1e-8:
        raise ValueError("xbar is not feasible: ||A xbar - y|| > 1e-8")
    dx, _ = ode_rhs(state, p, eps)
    q = state.x - xbar
    return float(dx @ dx + np.sum((p.A @ q) ** 2))


def minmax_F(x: np.ndarray, z: np.ndarray, p: ProblemInstance) -> float:
    """Saddle functional tau*||x||_1 + 0.5*||A x - y||^2 + <z, y - A x>."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    if x.shape != (p.n,) or z.shape != (p.m,):
        raise ValueError(f"shapes {x.shape}, {z.shape} do not match problem {p.m}x{p.n}")
    r = p.y - p.A @ x
    return float(p.tau * np.sum(np.abs(x)) + 0.5 * (r @ r) + z @ r)


def trajectory_to_csv(
    result: IntegrationResult, p: ProblemInstance, eps: float, xbar: np.ndarray | None
) -> str:
    """CSV rows ``t,energy,residual,err_vs_ref,z_norm`` for observed states.

    Energy and the reference error need a feasible ``xbar``; both columns
    stay empty when it is absent.
    """
    lines = ["t,energy,residual,err_vs_ref,z_norm"]
    for st in result.observations:
        resid = float(np.linalg.norm(p.y - p.A @ st.x))
        znorm = float(np.linalg.norm(st.z))
        if xbar is None:
            energy = err = ""
        else:
            energy = repr(lyapunov_energy(st, p, xbar, eps))
            err = repr(float(np.linalg.norm(st.x - xbar)))
        lines.append(f"{st.t!r},{energy},{resid!r},{err},{znorm!r}")
    return "\n".join(lines) + "\n"
