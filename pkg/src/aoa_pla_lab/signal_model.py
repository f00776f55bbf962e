"""ULA steering vectors, their derivatives, and the spoofed mean signal.

Phase convention: ``a(theta)[m] = exp(-1j * kappa * m * sin(theta))`` with
``m = 0 .. M-1``.  All angles are radians.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, UnsupportedGeometryError

HALF_PI = 0.5 * math.pi

# Both sums are evaluated in extended precision (80-bit on x86): S2 for
# M ~ 128 has terms up to M**2 and a condition number that eats most of a
# double's mantissa.  Below NEAR_UNITY the closed forms also cancel
# catastrophically (error ~ eps * M**2 / |1 - r|**3), so direct summation is
# used there instead.
NEAR_UNITY = 0.05
_WIDE = np.clongdouble

# Self-test hook: a nonzero value is added to every S1 result so that the
# validation suite can demonstrate it catches a broken closed form.  See
# ``inject_s1_fault``.
_S1_FAULT = 0.0


def check_angle(theta: float, name: str = "theta") -> float:
    theta = float(theta)
    if not math.isfinite(theta) or abs(theta) >= HALF_PI:
        raise DomainError(f"{name} must lie in (-pi/2, pi/2), got {theta!r}")
    return theta


@dataclass(frozen=True)
class UlaGeometry:
    """Verifier array: ``num_elements`` antennas spaced ``spacing_ratio`` wavelengths apart."""

    num_elements: int
    spacing_ratio: float = 0.5

    def __post_init__(self):
        if int(self.num_elements) != self.num_elements or self.num_elements < 2:
            raise UnsupportedGeometryError(
                f"num_elements must be an integer M >= 2, got {self.num_elements!r}"
            )
        if not (self.spacing_ratio > 0 and math.isfinite(self.spacing_ratio)):
            raise DomainError(f"spacing_ratio must be > 0, got {self.spacing_ratio!r}")
        object.__setattr__(self, "num_elements", int(self.num_elements))
        object.__setattr__(self, "spacing_ratio", float(self.spacing_ratio))

    @property
    def wavenumber(self) -> float:
        return 2.0 * math.pi * self.spacing_ratio

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.num_elements, dtype=float)


@dataclass(frozen=True)
class LegitimateSource:
    aoa: float
    gain: complex = 1.0

    def __post_init__(self):
        check_angle(self.aoa, "aoa")
        if self.gain != 1:
            raise DomainError("only the normalized model with unit gain is supported")


@dataclass(frozen=True)
class SpooferConfig:
    """L-antenna impersonator: per-antenna AoAs and complex precoding weights."""

    angles: tuple[float, ...]
    weights: tuple[complex, ...]

    def __post_init__(self):
        angles = tuple(float(a) for a in np.atleast_1d(self.angles))
        weights = tuple(complex(w) for w in np.atleast_1d(self.weights))
        if len(angles) < 1 or len(angles) != len(weights):
            raise DomainError(
                f"angles and weights must have equal length L >= 1 "
                f"(got {len(angles)} and {len(weights)})"
            )
        for i, a in enumerate(angles):
            check_angle(a, f"angles[{i}]")
        if not all(math.isfinite(w.real) and math.isfinite(w.imag) for w in weights):
            raise DomainError(f"weights must be finite, got {weights!r}")
        object.__setattr__(self, "angles", angles)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def normalized(cls, angles: Sequence[float], weights: Sequence[complex]) -> "SpooferConfig":
        """Constructor enforcing ``sum(|q|) == 1`` (the benchmark normalization)."""
        total = float(np.sum(np.abs(np.asarray(weights, dtype=complex))))
        if abs(total - 1.0) > 1e-12:
            raise DomainError(f"sum of |weights| must equal 1, got {total!r}")
        return cls(tuple(angles), tuple(weights))

    @classmethod
    def colinear(
        cls, angle: float, num_antennas: int = 1, phases: Sequence[float] | None = None
    ) -> "SpooferConfig":
        """Every antenna at ``angle`` with weights ``exp(1j*phase)/L``."""
        if num_antennas < 1:
            raise DomainError("num_antennas must be >= 1")
        phases = np.zeros(num_antennas) if phases is None else np.asarray(phases, dtype=float)
        if phases.shape != (num_antennas,):
            raise DomainError("phases must have one entry per antenna")
        weights = np.exp(1j * phases) / num_antennas
        return cls((float(angle),) * num_antennas, tuple(weights))

    @property
    def num_antennas(self) -> int:
        return len(self.angles)

    @property
    def weight_array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=complex)

    @property
    def angle_array(self) -> np.ndarray:
        return np.asarray(self.angles, dtype=float)


def steering(geom: UlaGeometry, theta: float) -> np.ndarray:
    theta = check_angle(theta)
    return np.exp(-1j * geom.wavenumber * geom.indices * math.sin(theta))


def steering_matrix(geom: UlaGeometry, thetas) -> np.ndarray:
    """Rows are ``steering(geom, theta)`` for each theta; no domain check."""
    thetas = np.asarray(thetas, dtype=float)
    return np.exp(-1j * geom.wavenumber * np.sin(thetas)[..., None] * geom.indices)


def steering_d1(geom: UlaGeometry, theta: float) -> np.ndarray:
    """First derivative ``-1j*kappa*cos(theta) * Lambda @ a(theta)``."""
    a = steering(geom, theta)
    return -1j * geom.wavenumber * math.cos(theta) * geom.indices * a


def steering_d2(geom: UlaGeometry, theta: float) -> np.ndarray:
    """Second derivative ``(1j*kappa*sin Lambda - kappa**2 cos**2 Lambda**2) @ a``."""
    a = steering(geom, theta)
    k = geom.wavenumber
    m = geom.indices
    return (1j * k * math.sin(theta) * m - (k * math.cos(theta)) ** 2 * m**2) * a


def sum_of_squares(M: int) -> float:
    """``sum(m**2 for m in range(M))`` in closed form."""
    return (M - 1) * M * (2 * M - 1) / 6.0


def gamma(geom: UlaGeometry, theta: float) -> float:
    """Gamma(theta) = ||a'(theta)||**2 = kappa**2 cos**2(theta) * sum(m**2)."""
    theta = check_angle(theta)
    return (geom.wavenumber * math.cos(theta)) ** 2 * sum_of_squares(geom.num_elements)


def _direct_sum(r: np.ndarray, M: int, power: int) -> np.ndarray:
    m = np.arange(M)
    terms = (m**power).astype(np.longdouble) * np.asarray(r, dtype=_WIDE)[..., None] ** m
    return terms.sum(axis=-1)


def _check_terms(M) -> int:
    if int(M) != M or M < 1:
        raise DomainError(f"number of terms M must be an integer >= 1, got {M!r}")
    return int(M)


def _weighted_sum(r, M: int, power: int, closed_form) -> complex | np.ndarray:
    M = _check_terms(M)
    r_wide = np.asarray(r, dtype=_WIDE)
    near = np.abs(1.0 - r_wide) < NEAR_UNITY
    out = closed_form(np.where(near, _WIDE(0.5), r_wide), M)
    if np.any(near):
        out = np.where(near, _direct_sum(r_wide, M, power), out)
    out = out.astype(complex)
    return complex(out) if out.ndim == 0 else out


def _s1_closed(x, M):
    return x * (1 - M * x ** (M - 1) + (M - 1) * x**M) / (1 - x) ** 2


def _s2_closed(x, M):
    poly = 1 + x - M**2 * x ** (M - 1) + (2 * M**2 - 2 * M - 1) * x**M - (M - 1) ** 2 * x ** (M + 1)
    return x * poly / (1 - x) ** 3


def weighted_geom_sum_1(r, M: int):
    """S1(r) = sum_{m<M} m r**m.

    Closed form for r away from 1, direct summation near it.  Accepts a
    scalar or an array of ``r`` and returns the same shape.
    """
    out = _weighted_sum(r, M, 1, _s1_closed)
    return out + _S1_FAULT if _S1_FAULT else out


def inject_s1_fault(offset: float = 1e-6) -> None:
    """Perturb S1 by ``offset`` (0 restores exact behaviour); validation self-test only."""
    global _S1_FAULT
    _S1_FAULT = float(offset)


def weighted_geom_sum_2(r, M: int):
    """S2(r) = sum_{m<M} m**2 r**m; same evaluation strategy as S1."""
    return _weighted_sum(r, M, 2, _s2_closed)


def spoofed_mean(geom: UlaGeometry, spoofer: SpooferConfig) -> np.ndarray:
    """s = sum_l q_l a(theta_l)."""
    return spoofer.weight_array @ steering_matrix(geom, spoofer.angle_array)


def mismatch_vector(geom: UlaGeometry, spoofer: SpooferConfig, theta: float) -> np.ndarray:
    return spoofed_mean(geom, spoofer) - steering(geom, theta)
