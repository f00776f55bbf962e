"""Parameter sweeps, figure presets and the CSV result schema."""
from __future__ import annotations

import csv
import io
import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .authtest import analytic_report
from .errors import ConfigurationError
from .montecarlo import (
    Hypothesis,
    PhaseSpreadModel,
    Scenario,
    phase_averaged_analytic,
    run_trials,
    snr_to_sigma2,
)
from .search import ESTIMATOR_SEARCH, SearchSettings
from .signal_model import SpooferConfig, UlaGeometry

log = logging.getLogger(__name__)

AXES = ("snr_db", "M", "K", "L", "angular_offset_deg", "phi_max_deg")
INTEGER_AXES = {"M", "K", "L"}


@dataclass(frozen=True)
class ExperimentPoint:
    """One experiment setting in presentation units (degrees, dB).

    The spoofer is the co-linear benchmark (all L antennas at
    ``theta_u + angular_offset``, weights ``exp(1j*phi)/L``) unless explicit
    ``spoofer_angles_deg``/``spoofer_weights`` are given.
    """

    M: int = 16
    K: int = 20
    snr_db: float = 5.0
    theta_u_deg: float = 10.0
    angular_offset_deg: float = 0.25
    L: int = 1
    phi_max_deg: float = 0.0
    alpha: float = 1e-3
    spacing_ratio: float = 0.5
    phase_redraw: str = "per-trial"
    spoofer_angles_deg: tuple[float, ...] | None = None
    spoofer_weights: tuple[complex, ...] | None = None

    def with_axis(self, axis: str, value: float) -> "ExperimentPoint":
        if axis not in AXES:
            raise ConfigurationError(f"unknown sweep axis {axis!r}; choose from {', '.join(AXES)}", "sweep.axis")
        if axis in INTEGER_AXES:
            value = int(round(value))
        if self.spoofer_angles_deg is not None and axis in ("L", "angular_offset_deg"):
            raise ConfigurationError(f"axis {axis!r} needs the co-linear benchmark spoofer", "sweep.axis")
        return replace(self, **{axis: value})

    def geometry(self) -> UlaGeometry:
        return UlaGeometry(self.M, self.spacing_ratio)

    def spoofer(self) -> SpooferConfig:
        if self.spoofer_angles_deg is not None:
            return SpooferConfig(
                tuple(math.radians(a) for a in self.spoofer_angles_deg), tuple(self.spoofer_weights)
            )
        angle = math.radians(self.theta_u_deg + self.angular_offset_deg)
        return SpooferConfig.colinear(angle, self.L)

    def scenario(
        self, trials: int = 100_000, seed: int = 0, search: SearchSettings = ESTIMATOR_SEARCH
    ) -> Scenario:
        return Scenario(
            geometry=self.geometry(),
            theta_u=math.radians(self.theta_u_deg),
            sigma2=snr_to_sigma2(self.snr_db),
            snapshots=self.K,
            alpha=self.alpha,
            spoofer=self.spoofer(),
            trials=trials,
            seed=seed,
            phase_spread=PhaseSpreadModel(math.radians(self.phi_max_deg), self.phase_redraw),
            search=search,
        )


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: tuple[float, ...]
    base: ExperimentPoint
    label: str = ""

    def __post_init__(self):
        if self.axis not in AXES:
            raise ConfigurationError(f"unknown sweep axis {self.axis!r}", "sweep.axis")
        if len(self.values) == 0:
            raise ConfigurationError("sweep values must be nonempty", "sweep.values")
        for v in self.values:
            self.base.with_axis(self.axis, v).geometry()

    def points(self) -> Iterable[tuple[float, ExperimentPoint]]:
        for v in self.values:
            yield v, self.base.with_axis(self.axis, v)


def parse_values(text: str) -> tuple[float, ...]:
    """``"a:b:step"`` (inclusive range) or a comma-separated list."""
    text = text.strip()
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
            raise ValueError("range must be start:stop:step with step > 0 and stop >= start")
        start, stop, step = parts
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(round(start + i * step, 12) for i in range(n))
    values = tuple(float(p) for p in text.replace(";", ",").split(",") if p.strip())
    if not values:
        raise ValueError("empty value list")
    return values


# --- presets ---------------------------------------------------------------

FIG1_OFFSETS = (0.25, 0.5, 1.0, 2.0, 4.0)
FIG2_M = (4, 16, 32, 64, 128)
FIG2_K = (2, 5, 10, 20, 50)
FIG3_L = tuple(2**i for i in range(11))
FIG3_OFFSETS = (0.5, 1.0, 2.0)
FIG3_PHI_MAX = (0.0, 10.0)


@dataclass(frozen=True)
class Preset:
    name: str
    sweeps: tuple[SweepSpec, ...]
    x_label: str
    log_x: bool = False


def preset(name: str, snr_step: float = 1.0, offset_step: float = 0.25) -> Preset:
    if name == "fig1":
        base = ExperimentPoint(M=16, K=20, L=1, theta_u_deg=10.0)
        snrs = parse_values(f"-15:50:{snr_step}")
        sweeps = tuple(
            SweepSpec("snr_db", snrs, replace(base, angular_offset_deg=d), f"offset={d:g}deg")
            for d in FIG1_OFFSETS
        )
        return Preset(name, sweeps, "SNR [dB]")
    if name in ("fig2a", "fig2b"):
        offsets = parse_values(f"0:8:{offset_step}")
        base = ExperimentPoint(snr_db=0.0, L=1, theta_u_deg=10.0)
        if name == "fig2a":
            sweeps = tuple(
                SweepSpec("angular_offset_deg", offsets, replace(base, K=10, M=m), f"M={m}") for m in FIG2_M
            )
        else:
            sweeps = tuple(
                SweepSpec("angular_offset_deg", offsets, replace(base, M=32, K=k), f"K={k}") for k in FIG2_K
            )
        return Preset(name, sweeps, "angular offset [deg]")
    if name == "fig3":
        base = ExperimentPoint(M=8, K=2, snr_db=5.0, theta_u_deg=10.0)
        sweeps = tuple(
            SweepSpec(
                "L",
                tuple(float(v) for v in FIG3_L),
                replace(base, angular_offset_deg=d, phi_max_deg=p),
                f"offset={d:g}deg,phi_max={p:g}deg",
            )
            for p in FIG3_PHI_MAX
            for d in FIG3_OFFSETS
        )
        return Preset(name, sweeps, "spoofer antennas L", log_x=True)
    raise ConfigurationError(f"unknown preset {name!r}; choose fig1, fig2a, fig2b or fig3", "sweep.preset")


PRESETS = ("fig1", "fig2a", "fig2b", "fig3")


# --- running ---------------------------------------------------------------

COLUMNS = (
    "series",
    "axis",
    "value",
    "M",
    "K",
    "L",
    "snr_db",
    "theta_u_deg",
    "angular_offset_deg",
    "phi_max_deg",
    "alpha",
    "analytic_method",
    "crb_k",
    "mcrb_k",
    "theta0_deg",
    "delta_deg",
    "tau",
    "p_fa",
    "p_sd",
    "p_fa_hat",
    "p_fa_ci_low",
    "p_fa_ci_high",
    "p_sd_hat",
    "p_sd_ci_low",
    "p_sd_ci_high",
    "trials",
)


@dataclass
class ResultRow:
    series: str
    axis: str
    value: float
    point: ExperimentPoint
    analytic_method: str
    crb_k: float
    mcrb_k: float
    theta0_deg: float
    delta_deg: float
    tau: float
    p_fa: float
    p_sd: float
    empirical: dict | None = None
    runtime_ms: float = 0.0

    def as_record(self, timing: bool = False) -> dict:
        p = self.point
        rec = {
            "series": self.series,
            "axis": self.axis,
            "value": self.value,
            "M": p.M,
            "K": p.K,
            "L": p.L,
            "snr_db": p.snr_db,
            "theta_u_deg": p.theta_u_deg,
            "angular_offset_deg": p.angular_offset_deg,
            "phi_max_deg": p.phi_max_deg,
            "alpha": p.alpha,
            "analytic_method": self.analytic_method,
            "crb_k": self.crb_k,
            "mcrb_k": self.mcrb_k,
            "theta0_deg": self.theta0_deg,
            "delta_deg": self.delta_deg,
            "tau": self.tau,
            "p_fa": self.p_fa,
            "p_sd": self.p_sd,
        }
        emp = self.empirical or {}
        for key in COLUMNS[19:]:
            rec[key] = emp.get(key)
        if timing:
            rec["runtime_ms"] = self.runtime_ms
        return rec


@dataclass
class SweepRunner:
    """Evaluates sweep points; H0 simulations are shared between series."""

    empirical: bool = False
    trials: int = 100_000
    seed: int = 0
    workers: int = 1
    search: SearchSettings = ESTIMATOR_SEARCH
    phase_draws: int = 4096
    confidence: float = 0.99
    _h0_cache: dict = field(default_factory=dict, repr=False)

    def analytic(self, point: ExperimentPoint) -> dict:
        sc = point.scenario(self.trials, self.seed, self.search)
        base = analytic_report(sc.geometry, sc.theta_u, sc.spoofer, sc.sigma2, sc.snapshots, sc.alpha)
        out = {
            "analytic_method": "closed-form",
            "crb_k": base.crb_k,
            "mcrb_k": base.mcrb_k,
            "theta0_deg": math.degrees(base.theta0),
            "delta_deg": math.degrees(base.delta),
            "tau": base.tau,
            "p_fa": base.p_fa,
            "p_sd": base.p_sd,
        }
        if sc.phase_spread.active:
            avg = phase_averaged_analytic(sc, self.phase_draws)
            out.update(
                analytic_method="phase-averaged",
                mcrb_k=avg.mean_mcrb_k,
                theta0_deg=math.degrees(avg.mean_theta0),
                delta_deg=math.degrees(avg.mean_theta0 - sc.theta_u),
                p_sd=avg.p_sd,
            )
        return out

    def _h0(self, sc: Scenario):
        key = (
            sc.geometry,
            sc.theta_u,
            sc.sigma2,
            sc.snapshots,
            sc.alpha,
            sc.trials,
            sc.seed,
            sc.search,
        )
        if key not in self._h0_cache:
            self._h0_cache[key] = run_trials(sc, Hypothesis.H0, workers=self.workers, confidence=self.confidence)
        return self._h0_cache[key]

    def empirical_point(self, point: ExperimentPoint) -> dict:
        sc = point.scenario(self.trials, self.seed, self.search)
        h0 = self._h0(sc)
        h1 = run_trials(sc, Hypothesis.H1, workers=self.workers, confidence=self.confidence)
        fa, sd = h0.p_fa_hat, h1.p_sd_hat
        return {
            "p_fa_hat": fa.p_hat,
            "p_fa_ci_low": fa.ci_low,
            "p_fa_ci_high": fa.ci_high,
            "p_sd_hat": sd.p_hat,
            "p_sd_ci_low": sd.ci_low,
            "p_sd_ci_high": sd.ci_high,
            "trials": sc.trials,
        }

    def run(self, sweeps: Sequence[SweepSpec]) -> list[ResultRow]:
        rows = []
        for spec in sweeps:
            for value, point in spec.points():
                t0 = time.perf_counter()
                try:
                    ana = self.analytic(point)
                    emp = self.empirical_point(point) if self.empirical else None
                except Exception as exc:
                    raise type(exc)(f"[{spec.label or spec.axis} {spec.axis}={value:g}] {exc}") from exc
                rows.append(
                    ResultRow(
                        series=spec.label,
                        axis=spec.axis,
                        value=value,
                        point=point,
                        empirical=emp,
                        runtime_ms=1e3 * (time.perf_counter() - t0),
                        **ana,
                    )
                )
                log.debug("%s %s=%g done", spec.label, spec.axis, value)
        return rows


# --- CSV -------------------------------------------------------------------


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def csv_header_comment(seed: int) -> str:
    return f"# aoa-pla-lab v{__version__} seed={seed}"


def rows_to_csv(rows: Sequence[ResultRow], seed: int, timing: bool = False) -> str:
    columns = list(COLUMNS) + (["runtime_ms"] if timing else [])
    buf = io.StringIO()
    buf.write(csv_header_comment(seed) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        rec = row.as_record(timing)
        writer.writerow([_fmt(rec[c]) for c in columns])
    return buf.getvalue()


def read_csv(text: str) -> list[dict]:
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))
