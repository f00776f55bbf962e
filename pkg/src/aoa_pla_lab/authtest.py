"""Wald-approximate AoA authentication test: threshold, error probabilities, limits."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from enum import Enum

import numpy as np
from scipy.special import ndtr, ndtri

from .bounds import crb, mcrb_at_pseudo_true
from .errors import DomainError
from .search import PSEUDO_TRUE_SEARCH, SearchSettings
from .signal_model import SpooferConfig, UlaGeometry, check_angle


class ThresholdSource(str, Enum):
    ANALYTIC_WALD = "analytic-wald"
    MONTE_CARLO = "monte-carlo-calibrated"


@dataclass(frozen=True)
class TestDesign:
    alpha: float
    tau: float
    crb_k: float
    source: ThresholdSource = ThresholdSource.ANALYTIC_WALD

    __test__ = False

    @classmethod
    def wald(cls, alpha: float, crb_k: float) -> "TestDesign":
        return cls(alpha, threshold(alpha, crb_k), crb_k)


@dataclass(frozen=True)
class ErrorProbabilities:
    p_fa: float
    p_md: float
    p_sd: float
    p_d: float
    delta: float

    @classmethod
    def from_tails(cls, p_fa: float, p_md: float, delta: float) -> "ErrorProbabilities":
        return cls(p_fa, p_md, 1.0 - p_md, 1.0 - p_fa, delta)


def q_function(x):
    """Upper standard-normal tail Q(x) = 1 - Phi(x), accurate deep in the tail."""
    return ndtr(-np.asarray(x, dtype=float))


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha!r}")


def _check_positive(value: float, name: str) -> None:
    if not value > 0:
        raise DomainError(f"{name} must be > 0, got {value!r}")


def threshold(alpha: float, crb_k: float) -> float:
    """tau(alpha) = sqrt(CRB_K) * Phi^-1(1 - alpha/2).

    Evaluated as ``-Phi^-1(alpha/2)`` so tiny alpha keeps full precision.
    """
    _check_alpha(alpha)
    _check_positive(crb_k, "crb_k")
    return math.sqrt(crb_k) * float(-ndtri(0.5 * alpha))


def p_fa(tau: float, crb_k: float) -> float:
    """P_FA ~= 2 Q(tau / sqrt(CRB_K))."""
    if tau < 0:
        raise DomainError(f"tau must be >= 0, got {tau!r}")
    _check_positive(crb_k, "crb_k")
    return min(1.0, 2.0 * float(q_function(tau / math.sqrt(crb_k))))


def normal_interval_mass(lower: float, upper: float) -> float:
    """Phi(upper) - Phi(lower), subtracting whichever tails are smaller."""
    if lower > 0:
        return float(ndtr(-lower) - ndtr(-upper))
    if upper < 0:
        return float(ndtr(upper) - ndtr(lower))
    return float(1.0 - (ndtr(lower) + ndtr(-upper)))


def p_md(tau: float, delta: float, mcrb_k: float) -> float:
    """P_MD ~= Phi((tau - delta)/sd) - Phi((-tau - delta)/sd), sd = sqrt(MCRB_K)."""
    if tau < 0:
        raise DomainError(f"tau must be >= 0, got {tau!r}")
    _check_positive(mcrb_k, "mcrb_k")
    sd = math.sqrt(mcrb_k)
    return min(1.0, max(0.0, normal_interval_mass((-tau - delta) / sd, (tau - delta) / sd)))


def p_sd(tau: float, delta: float, mcrb_k: float) -> float:
    return 1.0 - p_md(tau, delta, mcrb_k)


def p_sd_vs_sigma(sigma: float, delta: float, tau: float) -> float:
    """Spoofing-detection probability as a function of the estimator standard deviation."""
    return p_sd(tau, delta, sigma * sigma)


def asymptotic_pmd_limit(alpha: float, crb1: float, mcrb1: float) -> float:
    """Large-K limit of P_MD(tau(alpha)) when delta = 0.

    2 Phi(z sqrt(CRB_1/MCRB_1)) - 1 with z = Phi^-1(1 - alpha/2); computed as
    ``1 - 2 Q(.)`` so that CRB_1 = MCRB_1 returns 1 - alpha to rounding.
    """
    _check_alpha(alpha)
    _check_positive(crb1, "crb1")
    if math.isinf(mcrb1):
        return 0.0
    _check_positive(mcrb1, "mcrb1")
    z = float(-ndtri(0.5 * alpha))
    return 1.0 - 2.0 * float(q_function(z * math.sqrt(crb1 / mcrb1)))


def critical_sigma(delta: float, tau: float) -> float | None:
    """Estimator standard deviation minimizing P_SD when |delta| > tau, else None.

    sigma*^2 = 2|delta| tau / ln((|delta| + tau) / (|delta| - tau)).  For
    |delta| <= tau, P_SD increases monotonically with sigma and no interior
    minimizer exists.
    """
    _check_positive(tau, "tau")
    d = abs(delta)
    if d <= tau:
        return None
    return math.sqrt(2.0 * d * tau / math.log1p(2.0 * tau / (d - tau)))


@dataclass(frozen=True)
class AnalyticReport:
    theta_u: float
    sigma2: float
    snapshots: int
    alpha: float
    crb_k: float
    theta0: float
    delta: float
    mcrb_k: float
    tau: float
    p_fa: float
    p_md: float
    p_sd: float
    p_d: float
    gamma_theta0: float
    d_theta0: float
    threshold_source: ThresholdSource = ThresholdSource.ANALYTIC_WALD
    p_fa_wald: float | None = None
    multimodal: bool = False

    def to_dict(self) -> dict:
        out = asdict(self)
        out["threshold_source"] = self.threshold_source.value
        out["snr_db"] = -10.0 * math.log10(self.sigma2)
        for name in ("theta_u", "theta0", "delta", "tau"):
            out[f"{name}_deg"] = math.degrees(getattr(self, name))
        return out


def analytic_report(
    geom: UlaGeometry,
    theta_u: float,
    spoofer: SpooferConfig,
    sigma2: float,
    K: int,
    alpha: float,
    tau: float | None = None,
    search: SearchSettings = PSEUDO_TRUE_SEARCH,
) -> AnalyticReport:
    """Closed-form CRB, pseudo-true angle, MCRB, threshold and error probabilities.

    With ``tau=None`` the Wald threshold is used and P_FA = alpha by
    construction.  A Monte Carlo calibrated ``tau`` keeps P_FA = alpha as the
    calibration target and reports the Wald value of P_FA at that threshold in
    ``p_fa_wald``.
    """
    theta_u = check_angle(theta_u, "theta_u")
    _check_alpha(alpha)
    crb_u = crb(geom, theta_u, sigma2, K)
    bound = mcrb_at_pseudo_true(geom, spoofer, sigma2, K, search)
    if tau is None:
        source = ThresholdSource.ANALYTIC_WALD
        tau_value = threshold(alpha, crb_u)
        wald = None
    else:
        source = ThresholdSource.MONTE_CARLO
        tau_value = float(tau)
        wald = p_fa(tau_value, crb_u)
    delta = bound.theta0 - theta_u
    md = p_md(tau_value, delta, bound.mcrb_k)
    return AnalyticReport(
        theta_u=theta_u,
        sigma2=sigma2,
        snapshots=K,
        alpha=alpha,
        crb_k=crb_u,
        theta0=bound.theta0,
        delta=delta,
        mcrb_k=bound.mcrb_k,
        tau=tau_value,
        p_fa=alpha,
        p_md=md,
        p_sd=1.0 - md,
        p_d=1.0 - alpha,
        gamma_theta0=bound.gamma,
        d_theta0=bound.d_curv,
        threshold_source=source,
        p_fa_wald=wald,
        multimodal=bound.multimodal,
    )
