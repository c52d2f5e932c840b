"""Synthetic array-imaging scenes and image recovery.

A linear array of transducers insonifies a gridded image window at range
L with a single narrow-band pulse from its central element; point
scatterers in the window reflect it back under the Born (single
scattering) approximation.  Lengths are in units of the wavelength, so
the wavenumber is 2*pi.  The resulting complex linear system is stacked
into a real one and handed to the multiplier solver.
"""

from __future__ import annotations

import cmath
import json
from dataclasses import dataclass, field

import numpy as np

from .linalg import FormatError, ProblemInstance, realify, spectral_norm, tau_scale
from .solvers import SolverRun, StopRule, gelma_solve

__all__ = [
    "WAVENUMBER",
    "ArrayGeometry",
    "ImageWindow",
    "ScattererSet",
    "SceneData",
    "ImageMetrics",
    "green0",
    "transducer_positions",
    "grid_positions",
    "build_matrix",
    "synthesize",
    "add_noise",
    "recover",
    "image_metrics",
    "truth_grid",
    "scene_from_dict",
    "grid_to_csv",
    "grid_to_pgm",
]

WAVENUMBER = 2.0 * np.pi  # wavelength normalized to 1 code unit


@dataclass(frozen=True)
class ArrayGeometry:
    """Collinear transducers with uniform pitch, centered at the origin.

    Transducer p sits at ((p - (N-1)/2) * pitch, 0).  ``source_index``
    is 0-based; the default is the central element.
    """

    num_transducers: int
    pitch: float = 1.0
    source_index: int | None = None

    def __post_init__(self):
        if self.num_transducers < 1:
            raise ValueError("need at least one transducer")
        if not self.pitch > 0:
            raise ValueError("pitch must be positive")
        if self.source_index is None:
            object.__setattr__(self, "source_index", (self.num_transducers - 1) // 2)
        if not 0 <= self.source_index < self.num_transducers:
            raise ValueError(f"source_index {self.source_index} out of range")


@dataclass(frozen=True)
class ImageWindow:
    """Uniform nx-by-ny pixel grid centered at transverse offset
    ``center[0]`` and range ``L + center[1]`` from the array.

    Grid points are enumerated row-major: j = iy * nx + ix.
    """

    L: float
    nx: int
    ny: int
    pixel_pitch: float = 1.0
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError("range L must be positive")
        if self.nx < 1 or self.ny < 1:
            raise ValueError("grid counts must be >= 1")
        if not self.pixel_pitch > 0:
            raise ValueError("pixel_pitch must be positive")

    @property
    def num_pixels(self) -> int:
        return self.nx * self.ny


@dataclass(frozen=True)
class ScattererSet:
    """Point scatterers on the window grid: flat 0-based indices and
    positive reflectivities."""

    grid_indices: tuple[int, ...]
    reflectivities: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "grid_indices", tuple(int(i) for i in self.grid_indices))
        object.__setattr__(self, "reflectivities", tuple(float(r) for r in self.reflectivities))
        if len(self.grid_indices) != len(self.reflectivities):
            raise ValueError("need one reflectivity per scatterer")
        if len(set(self.grid_indices)) != len(self.grid_indices):
            raise ValueError("scatterer grid indices must be distinct")
        if any(r <= 0 for r in self.reflectivities):
            raise ValueError("reflectivities must be positive")


@dataclass
class SceneData:
    """Measured field at the array for one scene."""

    b: np.ndarray  # complex length N
    wavenumber: float = WAVENUMBER


@dataclass
class ImageMetrics:
    support_precision: float
    support_recall: float
    max_reflectivity_error: float
    l2_error: float


def green0(xa, ya, kappa: float = WAVENUMBER) -> complex:
    """Free-space kernel exp(-i*kappa*d) / (4*pi*d) between two points."""
    xa = np.asarray(xa, dtype=float)
    ya = np.asarray(ya, dtype=float)
    d = float(np.linalg.norm(xa - ya))
    if d == 0.0:
        raise ValueError("coincident points")
    return cmath.exp(-1j * kappa * d) / (4.0 * np.pi * d)


def transducer_positions(geom: ArrayGeometry) -> np.ndarray:
    offs = (np.arange(geom.num_transducers) - (geom.num_transducers - 1) / 2.0) * geom.pitch
    return np.column_stack([offs, np.zeros(geom.num_transducers)])


def grid_positions(iw: ImageWindow) -> np.ndarray:
    """Pixel centers as a (K, 2) array in row-major pixel order."""
    gx = (np.arange(iw.nx) - (iw.nx - 1) / 2.0) * iw.pixel_pitch + iw.center[0]
    gy = iw.L + (np.arange(iw.ny) - (iw.ny - 1) / 2.0) * iw.pixel_pitch + iw.center[1]
    xx, yy = np.meshgrid(gx, gy)  # row iy, column ix
    return np.column_stack([xx.ravel(), yy.ravel()])


def _pairwise_dist(pts_a: np.ndarray, pts_b: np.ndarray) -> np.ndarray:
    diff = pts_a[:, None, :] - pts_b[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=2))


def build_matrix(geom: ArrayGeometry, iw: ImageWindow, kappa: float = WAVENUMBER) -> np.ndarray:
    """N-by-K sensing matrix of the scene.

    Column j holds the product of the source-to-pixel kernel and the
    pixel-to-receiver kernels: entry (r, j) = G(x_r, y_j) * G(y_j, x_s).
    """
    tp = transducer_positions(geom)
    gp = grid_positions(iw)
    D = _pairwise_dist(tp, gp)
    if np.any(D == 0.0):
        raise ValueError("a grid point coincides with a transducer")
    G_rec = np.exp(-1j * kappa * D) / (4.0 * np.pi * D)  # G(x_p, y_j)
    return G_rec * G_rec[geom.source_index, :][None, :]


def synthesize(
    geom: ArrayGeometry, iw: ImageWindow, scat: ScattererSet, kappa: float = WAVENUMBER
) -> SceneData:
    """Born data: the field scattered by each point, summed at the array.

    Computed term by term from :func:`green0` (not through the assembled
    matrix) so the two paths can be cross-checked against each other.
    """
    tp = transducer_positions(geom)
    gp = grid_positions(iw)
    src = tp[geom.source_index]
    b = np.zeros(geom.num_transducers, dtype=complex)
    for j, rho in zip(scat.grid_indices, scat.reflectivities):
        if not 0 <= j < iw.num_pixels:
            raise ValueError(f"scatterer index {j} outside the {iw.num_pixels}-pixel window")
        point = gp[j]
        g_src = green0(point, src, kappa)
        for r in range(geom.num_transducers):
            b[r] += rho * green0(tp[r], point, kappa) * g_src
    return SceneData(b=b, wavenumber=kappa)


def add_noise(b: np.ndarray, beta: float, seed: int) -> np.ndarray:
    """Additive circular Gaussian noise with expected energy beta^2*||b||^2.

    Real and imaginary parts are i.i.d. with standard deviation
    beta*||b||/sqrt(2N), so E||e||^2 = beta^2 ||b||^2.  Deterministic for
    a fixed seed.
    """
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    b = np.asarray(b, dtype=complex)
    if beta == 0.0:
        return b.copy()
    n = b.shape[0]
    scale = beta * float(np.linalg.norm(b)) / np.sqrt(2.0 * n)
    rng = np.random.default_rng(seed)
    e = scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return b + e


# Operating point for the stacked, rescaled imaging system.  The raw
# Green's matrix has a tiny norm; rescaling is free (same minimizer) and
# ||A|| ~ 2 with dt = 0.9/||A|| keeps the multiplier iteration inside its
# damping region while running its slow modes near their fastest.
OPERATOR_NORM_TARGET = 2.2


def recover(
    geom: ArrayGeometry,
    iw: ImageWindow,
    data: SceneData,
    alpha: float,
    stop: StopRule | None = None,
    dt: float | None = None,
    norm_target: float = OPERATOR_NORM_TARGET,
) -> tuple[np.ndarray, SolverRun]:
    """Reflectivity image from array data by the multiplier solver.

    Builds the sensing matrix, stacks it to a real system rescaled to
    ``||A|| = norm_target`` (same minimizer), sets ``tau = alpha *
    ||A^T y||_inf`` for the rescaled system, and runs
    :func:`~gelma.solvers.gelma_solve` with the default step
    ``0.9/||A||``.  Returns the solution reshaped to (ny, nx) plus the
    full run.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if stop is None:
        stop = StopRule(max_iter=300)
    Ac = build_matrix(geom, iw, data.wavenumber)
    A_r, y_r = realify(Ac, data.b)
    c = norm_target / spectral_norm(A_r)
    A_r, y_r = c * A_r, c * y_r
    scale = tau_scale(A_r, y_r)
    tau = alpha * scale if scale > 0 else 1.0  # zero data: any tau, solver stays at 0
    if dt is None:
        dt = 0.9 / norm_target
    # band-limited array operators are numerically rank-deficient at long
    # range, so only exact rank collapse is rejected here
    p = ProblemInstance(A=A_r, y=y_r, tau=tau, dt=dt, rank_tol=1e-30)
    run = gelma_solve(p, stop)
    return run.x.reshape(iw.ny, iw.nx), run


def truth_grid(iw: ImageWindow, scat: ScattererSet) -> np.ndarray:
    """The exact reflectivity image of a scatterer set, shape (ny, nx)."""
    g = np.zeros(iw.num_pixels)
    for j, rho in zip(scat.grid_indices, scat.reflectivities):
        g[j] = rho
    return g.reshape(iw.ny, iw.nx)


def image_metrics(recovered: np.ndarray, truth: ScattererSet, threshold: float) -> ImageMetrics:
    """Support and amplitude quality of a recovered image.

    The recovered support is the set of pixels whose value exceeds
    ``threshold``; precision is 1 by convention when that set is empty.
    Reflectivity error is measured on the true support only.
    """
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    flat = np.asarray(recovered, dtype=float).ravel()
    true_idx = set(truth.grid_indices)
    if max(true_idx) >= flat.size:
        raise ValueError("truth indices outside the recovered grid")
    found = set(np.nonzero(flat > threshold)[0].tolist())
    hits = len(found & true_idx)
    precision = hits / len(found) if found else 1.0
    recall = hits / len(true_idx)
    max_err = max(
        abs(flat[j] - rho) for j, rho in zip(truth.grid_indices, truth.reflectivities)
    )
    tg = np.zeros(flat.size)
    for j, rho in zip(truth.grid_indices, truth.reflectivities):
        tg[j] = rho
    return ImageMetrics(
        support_precision=precision,
        support_recall=recall,
        max_reflectivity_error=float(max_err),
        l2_error=float(np.linalg.norm(flat - tg)),
    )


def scene_from_dict(d: dict) -> tuple[ArrayGeometry, ImageWindow, ScattererSet, float, int]:
    """Parse a scene config dict.

    Keys: N, pitch, source_index (optional, 0-based), L, nx, ny,
    pixel_pitch, scatterers = [{ix, iy, rho}], beta, seed.
    Returns (geometry, window, scatterers, beta, seed).
    """
    try:
        geom = ArrayGeometry(
            num_transducers=int(d["N"]),
            pitch=float(d.get("pitch", 1.0)),
            source_index=None if d.get("source_index") is None else int(d["source_index"]),
        )
        iw = ImageWindow(
            L=float(d["L"]),
            nx=int(d["nx"]),
            ny=int(d["ny"]),
            pixel_pitch=float(d.get("pixel_pitch", 1.0)),
        )
        entries = d["scatterers"]
        idx = []
        rho = []
        for s in entries:
            ix, iy = int(s["ix"]), int(s["iy"])
            if not (0 <= ix < iw.nx and 0 <= iy < iw.ny):
                raise ValueError(f"scatterer ({ix}, {iy}) outside the {iw.nx}x{iw.ny} grid")
            idx.append(iy * iw.nx + ix)
            rho.append(float(s["rho"]))
        scat = ScattererSet(grid_indices=tuple(idx), reflectivities=tuple(rho))
        beta = float(d.get("beta", 0.0))
        seed = int(d.get("seed", 0))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad scene config ({exc})") from exc
    return geom, iw, scat, beta, seed


def grid_to_csv(grid: np.ndarray) -> str:
    """ny lines of nx comma-separated values."""
    grid = np.asarray(grid, dtype=float)
    return "\n".join(",".join(repr(float(v)) for v in row) for row in grid) + "\n"


def grid_to_pgm(grid: np.ndarray) -> tuple[str, dict]:
    """ASCII PGM (P2) of a grid plus the sidecar scaling record.

    Pixels are ``round(value * 255 / max)`` clipped to [0, 255]; the
    sidecar stores the max so values can be read back.
    """
    grid = np.asarray(grid, dtype=float)
    vmax = float(grid.max()) if grid.size else 0.0
    scale = 255.0 / vmax if vmax > 0 else 0.0
    pix = np.clip(np.rint(grid * scale), 0, 255).astype(int)
    ny, nx = grid.shape
    lines = ["P2", f"{nx} {ny}", "255"]
    lines.extend(" ".join(str(v) for v in row) for row in pix)
    sidecar = {"max_value": vmax, "scale": scale}
    return "\n".join(lines) + "\n", sidecar
