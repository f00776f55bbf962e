"""CRB, misspecified CRB and the pseudo-true AoA for a ULA verifier.

Notation: Gamma = ||a'||**2, eta = Re{a'^H (s - a)}, D = Gamma - Re{a''^H (s - a)}.
``eta`` and ``D`` are evaluated in closed form through the weighted geometric
sums S1 and S2 with ``r_l = exp(1j*kappa*(sin(theta) - sin(theta_l)))``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DegenerateCurvatureError, DomainError
from .search import (
    PSEUDO_TRUE_SEARCH,
    SearchSettings,
    angle_grid,
    correlation,
    golden_refine,
    maximize_correlation,
)
from .signal_model import (
    SpooferConfig,
    UlaGeometry,
    check_angle,
    gamma,
    spoofed_mean,
    steering,
    steering_matrix,
    weighted_geom_sum_1,
    weighted_geom_sum_2,
)

DEGENERATE_RATIO = 1e-12
MIN_GRID = 512


@dataclass(frozen=True)
class MismatchCurvature:
    eta: float
    d_curv: float
    gamma: float
    theta: float


@dataclass(frozen=True)
class PseudoTrueResult:
    theta0: float
    objective: float
    eta_at_theta0: float
    converged: bool
    multimodal: bool = False


@dataclass(frozen=True)
class BoundReport:
    theta0: float
    crb_k: float
    mcrb_k: float
    a_scalar: float
    b_scalar: float
    gamma: float
    d_curv: float
    eta: float
    multimodal: bool = False

    @property
    def ratio(self) -> float:
        """MCRB / CRB at the pseudo-true angle, i.e. (Gamma / D)**2."""
        return self.mcrb_k / self.crb_k


def _check_noise(sigma2: float, K: int) -> None:
    if not sigma2 > 0 or not math.isfinite(sigma2):
        raise DomainError(f"sigma2 must be > 0, got {sigma2!r}")
    if int(K) != K or K < 1:
        raise DomainError(f"snapshot count K must be an integer >= 1, got {K!r}")


def fisher_information(geom: UlaGeometry, theta: float, sigma2: float, K: int) -> float:
    _check_noise(sigma2, K)
    return 2.0 * K / sigma2 * gamma(geom, theta)


def crb(geom: UlaGeometry, theta: float, sigma2: float, K: int) -> float:
    """CRB_K = 3 sigma2 / (K kappa**2 cos**2 theta (M-1) M (2M-1))."""
    theta = check_angle(theta)
    _check_noise(sigma2, K)
    M = geom.num_elements
    kc = geom.wavenumber * math.cos(theta)
    return 3.0 * sigma2 / (K * kc * kc * (M - 1) * M * (2 * M - 1))


def _sums(geom: UlaGeometry, spoofer: SpooferConfig, theta: float) -> tuple[complex, complex]:
    """(sum_l q_l S1(r_l), sum_l q_l S2(r_l))."""
    nu = geom.wavenumber * (math.sin(theta) - np.sin(spoofer.angle_array))
    r = np.exp(1j * nu)
    q = spoofer.weight_array
    M = geom.num_elements
    s1 = np.atleast_1d(weighted_geom_sum_1(r, M))
    s2 = np.atleast_1d(weighted_geom_sum_2(r, M))
    return complex(np.sum(q * s1)), complex(np.sum(q * s2))


def mismatch_curvature(geom: UlaGeometry, spoofer: SpooferConfig, theta: float) -> MismatchCurvature:
    theta = check_angle(theta)
    qs1, qs2 = _sums(geom, spoofer, theta)
    k = geom.wavenumber
    eta_value = -k * math.cos(theta) * qs1.imag
    d_value = -k * math.sin(theta) * qs1.imag + (k * math.cos(theta)) ** 2 * qs2.real
    return MismatchCurvature(eta_value, d_value, gamma(geom, theta), theta)


def eta(geom: UlaGeometry, spoofer: SpooferConfig, theta: float) -> float:
    """eta(theta) = -kappa cos(theta) Im{sum_l q_l S1(r_l)}."""
    return mismatch_curvature(geom, spoofer, theta).eta


def d_curvature(geom: UlaGeometry, spoofer: SpooferConfig, theta: float) -> float:
    """D(theta) = -kappa sin(theta) Im{sum q S1} + kappa**2 cos**2(theta) Re{sum q S2}."""
    return mismatch_curvature(geom, spoofer, theta).d_curv


def sandwich_terms(
    geom: UlaGeometry, spoofer: SpooferConfig, theta: float, sigma2: float, K: int
) -> tuple[float, float]:
    """(A, B): expected observed information and score second moment under the true model."""
    _check_noise(sigma2, K)
    mc = mismatch_curvature(geom, spoofer, theta)
    scale = 2.0 * K / sigma2
    return scale * mc.d_curv, scale * mc.gamma + (scale * mc.eta) ** 2


def _check_curvature(mc: MismatchCurvature) -> None:
    if not abs(mc.d_curv) > DEGENERATE_RATIO * mc.gamma:
        raise DegenerateCurvatureError(
            f"D(theta)={mc.d_curv:.3e} is degenerate relative to Gamma={mc.gamma:.3e} "
            f"at theta={mc.theta!r}; the MCRB is undefined"
        )


def mcrb_general(
    geom: UlaGeometry, spoofer: SpooferConfig, theta: float, sigma2: float, K: int
) -> float:
    """MCRB_K(theta) = sigma2/(2K) * Gamma/D**2 + (eta/D)**2 at an arbitrary theta."""
    _check_noise(sigma2, K)
    mc = mismatch_curvature(geom, spoofer, theta)
    _check_curvature(mc)
    return sigma2 / (2.0 * K) * mc.gamma / mc.d_curv**2 + (mc.eta / mc.d_curv) ** 2


def pseudo_true(
    geom: UlaGeometry, spoofer: SpooferConfig, search: SearchSettings = PSEUDO_TRUE_SEARCH
) -> PseudoTrueResult:
    """theta0 = argmin ||s - a(theta)||**2 = argmax Re{a(theta)^H s}.

    Exact ties (array ambiguities of a multi-source ``s``) resolve to the
    smallest angle and set ``multimodal``.
    """
    if search.resolve_grid(geom) < MIN_GRID:
        raise DomainError(f"pseudo-true search needs >= {MIN_GRID} grid points")
    s = spoofed_mean(geom, spoofer)
    res = maximize_correlation(geom, s[None, :], search)
    theta0 = float(res.theta[0])
    value = float(res.value[0])
    converged = bool(res.converged[0])

    multimodal = False
    grid = angle_grid(geom, search)
    values = correlation(geom, np.broadcast_to(s, (grid.size, s.size)), grid)
    peaks = np.flatnonzero(
        (values[1:-1] >= values[:-2]) & (values[1:-1] >= values[2:])
    ) + 1
    span = abs(values.max()) + 1.0
    peaks = peaks[values[peaks] >= values.max() - 0.01 * span]
    if peaks.size > 1:
        ys = np.repeat(s[None, :], peaks.size, axis=0)
        lo = grid[peaks - 1]
        hi = grid[peaks + 1]
        cand_theta, cand_value, cand_conv = golden_refine(geom, ys, lo, hi, search)
        tie_tol = 1e-9 * span
        best = cand_value.max()
        tied = np.flatnonzero(cand_value >= best - tie_tol)
        distinct = np.unique(np.round(cand_theta[tied], 6))
        multimodal = distinct.size > 1
        pick = tied[np.argmin(cand_theta[tied])]
        if cand_value[pick] >= value - tie_tol:
            theta0, value, converged = float(cand_theta[pick]), float(cand_value[pick]), bool(cand_conv[pick])

    M = geom.num_elements
    objective = M - 2.0 * value + float(np.vdot(s, s).real)
    eta0 = eta(geom, spoofer, theta0) if abs(theta0) < math.pi / 2 else float("nan")
    return PseudoTrueResult(theta0, max(objective, 0.0), eta0, converged, multimodal)


def mcrb_at_pseudo_true(
    geom: UlaGeometry,
    spoofer: SpooferConfig,
    sigma2: float,
    K: int,
    search: SearchSettings = PSEUDO_TRUE_SEARCH,
) -> BoundReport:
    """MCRB_K(theta0) = (Gamma/D)**2 CRB_K(theta0); eta(theta0) = 0 drops the bias term."""
    _check_noise(sigma2, K)
    pt = pseudo_true(geom, spoofer, search)
    if not pt.converged:
        raise ConvergenceError(f"pseudo-true search did not converge (theta0={pt.theta0!r})")
    mc = mismatch_curvature(geom, spoofer, pt.theta0)
    _check_curvature(mc)
    crb_k = crb(geom, pt.theta0, sigma2, K)
    scale = 2.0 * K / sigma2
    return BoundReport(
        theta0=pt.theta0,
        crb_k=crb_k,
        mcrb_k=(mc.gamma / mc.d_curv) ** 2 * crb_k,
        a_scalar=scale * mc.d_curv,
        b_scalar=scale * mc.gamma + (scale * mc.eta) ** 2,
        gamma=mc.gamma,
        d_curv=mc.d_curv,
        eta=mc.eta,
        multimodal=pt.multimodal,
    )


def pseudo_true_many(
    geom: UlaGeometry, means: np.ndarray, search: SearchSettings = PSEUDO_TRUE_SEARCH
) -> tuple[np.ndarray, np.ndarray]:
    """Batched pseudo-true angles for many spoofed means (rows of ``means``).

    Returns ``(theta0, D(theta0))`` with D from the inner-product form
    ``-Re{a''(theta0)^H s}``; used for phase-randomized spoofers where each
    realization has its own mean.
    """
    means = np.atleast_2d(np.asarray(means, dtype=complex))
    res = maximize_correlation(geom, means, search)
    theta0 = res.theta
    k = geom.wavenumber
    m = geom.indices
    a = steering_matrix(geom, theta0)
    a_dd = (1j * k * np.sin(theta0)[:, None] * m - (k * np.cos(theta0))[:, None] ** 2 * m**2) * a
    d_curv = -np.sum(np.conj(a_dd) * means, axis=1).real
    if not np.all(res.converged):
        bad = int(np.count_nonzero(~res.converged))
        raise ConvergenceError(f"{bad} pseudo-true searches did not converge")
    return theta0, d_curv


def kl_objective(geom: UlaGeometry, spoofer: SpooferConfig, theta: float) -> float:
    """||s - a(theta)||**2, the per-snapshot KL objective (up to 1/sigma2)."""
    diff = spoofed_mean(geom, spoofer) - steering(geom, theta)
    return float(np.vdot(diff, diff).real)
