"""Global 1-D search for ``argmax_theta Re{a(theta)^H y}``.

Both the quasi-ML estimator and the pseudo-true AoA reduce to this problem
because ``||a(theta)||**2 = M`` is constant.  The search is a uniform grid scan
over the open angular interval (minus a guard band) followed by golden-section
refinement of the bracketing grid triple.  Rows are processed in fixed-size,
zero-padded blocks so that a row's result never depends on which other rows
share its call; this is what makes Monte Carlo output independent of how
trials are split across workers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .signal_model import UlaGeometry

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
BLOCK_ROWS = 256


@dataclass(frozen=True)
class SearchSettings:
    """Grid + golden-section settings.

    ``grid_points=None`` selects an adaptive grid of ``64 * M * (2 d/lambda)``
    points (a power of two, clamped to [512, 8192]), i.e. roughly 80 samples
    per main lobe.
    """

    grid_points: int | None = None
    guard_deg: float = 0.1
    tol: float = 1e-10
    max_iter: int = 200

    def __post_init__(self):
        if self.grid_points is not None and self.grid_points < 3:
            raise ValueError("grid_points must be >= 3")
        if not 0 < self.guard_deg < 90:
            raise ValueError("guard_deg must be in (0, 90)")

    def resolve_grid(self, geom: UlaGeometry) -> int:
        if self.grid_points is not None:
            return int(self.grid_points)
        want = 64 * geom.num_elements * max(1.0, 2.0 * geom.spacing_ratio)
        n = 1 << math.ceil(math.log2(want))
        return int(min(8192, max(512, n)))

    def limits(self) -> tuple[float, float]:
        edge = math.pi / 2 - math.radians(self.guard_deg)
        return -edge, edge


ESTIMATOR_SEARCH = SearchSettings()
PSEUDO_TRUE_SEARCH = SearchSettings(grid_points=4096)


@dataclass
class SearchResult:
    theta: np.ndarray
    value: np.ndarray
    converged: np.ndarray
    grid_index: np.ndarray


def angle_grid(geom: UlaGeometry, settings: SearchSettings) -> np.ndarray:
    lo, hi = settings.limits()
    return np.linspace(lo, hi, settings.resolve_grid(geom))


def _phasor_powers(geom: UlaGeometry, theta: np.ndarray) -> np.ndarray:
    """Rows ``exp(1j*kappa*m*sin(theta_t))`` for m = 0..M-1, by cumulative product."""
    z = np.exp(1j * geom.wavenumber * np.sin(theta))
    powers = np.empty((theta.size, geom.num_elements), dtype=complex)
    powers[:, 0] = 1.0
    powers[:, 1:] = z[:, None]
    return np.cumprod(powers, axis=1, out=powers)


def correlation(geom: UlaGeometry, y: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Row-wise ``Re{a(theta_t)^H y_t}`` for ``y`` of shape (T, M)."""
    return np.sum(y * _phasor_powers(geom, theta), axis=1).real


def correlation_derivatives(
    geom: UlaGeometry, y: np.ndarray, theta: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """First and second theta-derivatives of :func:`correlation`."""
    k = geom.wavenumber
    m = geom.indices
    sin_t = np.sin(theta)[:, None]
    cos_t = np.cos(theta)[:, None]
    z = y * _phasor_powers(geom, theta)
    d1 = np.sum((1j * k * m * cos_t) * z, axis=1).real
    d2 = np.sum((-1j * k * m * sin_t - (k * m * cos_t) ** 2) * z, axis=1).real
    return d1, d2


def newton_polish(
    geom: UlaGeometry, y: np.ndarray, theta: np.ndarray, lo: np.ndarray, hi: np.ndarray, steps: int = 2
) -> np.ndarray:
    """Newton steps on the derivative, kept only inside [lo, hi] and when |f'| shrinks.

    Golden section stops improving once the objective is flat to rounding
    (around 1e-9 rad); the derivative still has full relative precision there.
    """
    theta = theta.copy()
    d1, d2 = correlation_derivatives(geom, y, theta)
    for _ in range(steps):
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(d2 < 0, d1 / d2, 0.0)
        cand = theta - step
        n1, n2 = correlation_derivatives(geom, y, cand)
        ok = (cand >= lo) & (cand <= hi) & (np.abs(n1) < np.abs(d1))
        theta = np.where(ok, cand, theta)
        d1 = np.where(ok, n1, d1)
        d2 = np.where(ok, n2, d2)
    return theta


def _grid_basis(geom: UlaGeometry, grid: np.ndarray) -> np.ndarray:
    phase = geom.wavenumber * geom.indices[:, None] * np.sin(grid)[None, :]
    return np.vstack([np.cos(phase), -np.sin(phase)])


def grid_scan(geom: UlaGeometry, y: np.ndarray, grid: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-row grid argmax index and the objective value there.

    The objective on the grid is one real GEMM per block of BLOCK_ROWS rows.
    Ties resolve to the smallest angle (first index).
    """
    y = np.atleast_2d(np.asarray(y, dtype=complex))
    basis = _grid_basis(geom, grid)
    n = y.shape[0]
    idx = np.empty(n, dtype=np.int64)
    best = np.empty(n)
    block = np.zeros((BLOCK_ROWS, 2 * geom.num_elements))
    for start in range(0, n, BLOCK_ROWS):
        stop = min(start + BLOCK_ROWS, n)
        block[:] = 0.0
        block[: stop - start, : geom.num_elements] = y[start:stop].real
        block[: stop - start, geom.num_elements :] = y[start:stop].imag
        values = block @ basis
        i = np.argmax(values[: stop - start], axis=1)
        idx[start:stop] = i
        best[start:stop] = values[np.arange(stop - start), i]
    return idx, best


def golden_refine(
    geom: UlaGeometry, y: np.ndarray, lo: np.ndarray, hi: np.ndarray, settings: SearchSettings
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized golden-section maximization on per-row brackets [lo, hi]."""
    a = lo.astype(float).copy()
    b = hi.astype(float).copy()
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc = correlation(geom, y, c)
    fd = correlation(geom, y, d)
    for _ in range(settings.max_iter):
        if np.all(b - a <= settings.tol):
            break
        keep_left = fc >= fd
        # maximum in [a, d] when f(c) >= f(d), else in [c, b]
        b = np.where(keep_left, d, b)
        a = np.where(keep_left, a, c)
        new_c = np.where(keep_left, b - INV_PHI * (b - a), d)
        new_d = np.where(keep_left, c, a + INV_PHI * (b - a))
        probe = np.where(keep_left, new_c, new_d)
        fp = correlation(geom, y, probe)
        fc, fd = np.where(keep_left, fp, fd), np.where(keep_left, fc, fp)
        c, d = new_c, new_d
    converged = (b - a) <= settings.tol
    theta = newton_polish(geom, y, 0.5 * (a + b), lo, hi)
    value = correlation(geom, y, theta)
    return theta, value, converged


def maximize_correlation(
    geom: UlaGeometry, y: np.ndarray, settings: SearchSettings = ESTIMATOR_SEARCH
) -> SearchResult:
    """Global maximizer of ``Re{a(theta)^H y_t}`` for every row ``y_t``.

    A grid maximum on the first or last grid point means the peak sits in (or
    beyond) the guard band; such rows return the grid angle with
    ``converged=False``.
    """
    y = np.atleast_2d(np.asarray(y, dtype=complex))
    grid = angle_grid(geom, settings)
    idx, grid_value = grid_scan(geom, y, grid)
    interior = (idx > 0) & (idx < grid.size - 1)
    lo = grid[np.clip(idx - 1, 0, grid.size - 1)]
    hi = grid[np.clip(idx + 1, 0, grid.size - 1)]
    theta, value, converged = golden_refine(geom, y, lo, hi, settings)
    theta = np.where(interior, theta, grid[idx])
    value = np.where(interior, value, grid_value)
    return SearchResult(theta, value, converged & interior, idx)
