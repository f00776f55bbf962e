"""INI scenario files.

Angles are given in degrees and noise as SNR in dB; everything is converted
once here.  Example::

    [array]
    num_elements = 16
    spacing_ratio = 0.5

    [scenario]
    theta_u_deg = 10
    snr_db = 5
    snapshots = 20
    alpha = 1e-3

    [spoofer]
    angular_offset_deg = 0.25     ; co-linear benchmark at theta_u + offset
    num_antennas = 1
    phi_max_deg = 0
    phase_redraw = per-trial
    ; or explicit antennas (overrides the benchmark):
    ; angles_deg = 10.5, 11
    ; weights = 0.5, 0.5j

    [montecarlo]
    trials = 100000
    seed = 0

    [search]
    grid_points = 4096            ; omit for the adaptive estimator grid

    [sweep]
    preset = fig1                 ; or axis/values/series_* below
    ; axis = snr_db
    ; values = -15:50:1
    ; series_axis = angular_offset_deg
    ; series_values = 0.25, 1
"""
from __future__ import annotations

import configparser
import math
import os
from dataclasses import dataclass, replace

from .errors import AoaPlaError, ConfigurationError
from .search import ESTIMATOR_SEARCH, SearchSettings
from .sweeps import AXES, ExperimentPoint, Preset, SweepSpec, parse_values, preset

KNOWN = {
    "array": {"num_elements", "spacing_ratio"},
    "scenario": {"theta_u_deg", "snr_db", "snapshots", "alpha"},
    "spoofer": {"angular_offset_deg", "num_antennas", "phi_max_deg", "phase_redraw", "angles_deg", "weights"},
    "montecarlo": {"trials", "seed", "phase_draws"},
    "search": {"grid_points", "guard_deg", "tol"},
    "sweep": {"preset", "axis", "values", "series_axis", "series_values", "snr_step", "offset_step"},
}

SEED_ENV = "AOA_PLA_SEED"


@dataclass(frozen=True)
class RunConfig:
    point: ExperimentPoint
    trials: int = 100_000
    seed: int = 0
    phase_draws: int = 4096
    search: SearchSettings = ESTIMATOR_SEARCH
    preset_name: str | None = None
    sweep_axis: str | None = None
    sweep_values: tuple[float, ...] | None = None
    series_axis: str | None = None
    series_values: tuple[float, ...] | None = None
    snr_step: float = 1.0
    offset_step: float = 0.25

    def sweeps(self) -> Preset:
        if self.preset_name is not None:
            return preset(self.preset_name, self.snr_step, self.offset_step)
        if self.sweep_axis is None:
            raise ConfigurationError("no sweep configured: set preset or axis/values", "sweep")
        if self.series_axis is None:
            specs = (SweepSpec(self.sweep_axis, self.sweep_values, self.point, ""),)
        else:
            specs = tuple(
                SweepSpec(
                    self.sweep_axis,
                    self.sweep_values,
                    self.point.with_axis(self.series_axis, v),
                    f"{self.series_axis}={v:g}",
                )
                for v in self.series_values
            )
        return Preset("custom", specs, self.sweep_axis, log_x=self.sweep_axis == "L")


def default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw.strip() == "":
        return 0
    try:
        return _check_seed(int(raw))
    except ValueError as exc:
        raise ConfigurationError(f"{raw!r} is not a nonnegative integer ({exc})", SEED_ENV) from None


def _check_seed(seed: int) -> int:
    if seed < 0:
        raise ValueError("seed must be >= 0")
    return seed


class _Reader:
    def __init__(self, parser: configparser.ConfigParser):
        self.p = parser

    def get(self, section, key, conv, default=None):
        if not self.p.has_option(section, key):
            return default
        raw = self.p.get(section, key).strip()
        try:
            return conv(raw)
        except (ValueError, SyntaxError) as exc:
            raise ConfigurationError(f"cannot parse {raw!r}: {exc}", f"{section}.{key}") from None


def _int(text: str) -> int:
    value = float(text)
    if value != int(value):
        raise ValueError("expected an integer")
    return int(value)


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(p) for p in text.split(",") if p.strip())


def _complexes(text: str) -> tuple[complex, ...]:
    return tuple(complex(p.strip().replace(" ", "")) for p in text.split(",") if p.strip())


def parse_config(text: str, seed: int | None = None) -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(str(exc).splitlines()[0], "file") from None
    for section in parser.sections():
        if section not in KNOWN:
            raise ConfigurationError(f"unknown section; expected one of {', '.join(KNOWN)}", section)
        for key in parser[section]:
            if key not in KNOWN[section]:
                raise ConfigurationError("unknown key", f"{section}.{key}")
    r = _Reader(parser)
    base = ExperimentPoint()
    angles = r.get("spoofer", "angles_deg", _floats)
    weights = r.get("spoofer", "weights", _complexes)
    if (angles is None) != (weights is None):
        raise ConfigurationError("angles_deg and weights must be given together", "spoofer.angles_deg")
    point = ExperimentPoint(
        M=r.get("array", "num_elements", _int, base.M),
        spacing_ratio=r.get("array", "spacing_ratio", float, base.spacing_ratio),
        theta_u_deg=r.get("scenario", "theta_u_deg", float, base.theta_u_deg),
        snr_db=r.get("scenario", "snr_db", float, base.snr_db),
        K=r.get("scenario", "snapshots", _int, base.K),
        alpha=r.get("scenario", "alpha", float, base.alpha),
        angular_offset_deg=r.get("spoofer", "angular_offset_deg", float, base.angular_offset_deg),
        L=r.get("spoofer", "num_antennas", _int, base.L),
        phi_max_deg=r.get("spoofer", "phi_max_deg", float, base.phi_max_deg),
        phase_redraw=r.get("spoofer", "phase_redraw", str, base.phase_redraw),
        spoofer_angles_deg=angles,
        spoofer_weights=weights,
    )
    grid = r.get("search", "grid_points", _int)
    try:
        search = SearchSettings(
            grid_points=grid,
            guard_deg=r.get("search", "guard_deg", float, ESTIMATOR_SEARCH.guard_deg),
            tol=r.get("search", "tol", float, ESTIMATOR_SEARCH.tol),
        )
    except ValueError as exc:
        raise ConfigurationError(str(exc), "search") from None

    file_seed = r.get("montecarlo", "seed", _int)
    if seed is None:
        seed = file_seed if file_seed is not None else default_seed()
    cfg = RunConfig(
        point=point,
        trials=r.get("montecarlo", "trials", _int, 100_000),
        seed=seed,
        phase_draws=r.get("montecarlo", "phase_draws", _int, 4096),
        search=search,
        preset_name=r.get("sweep", "preset", str),
        sweep_axis=r.get("sweep", "axis", str),
        sweep_values=r.get("sweep", "values", parse_values),
        series_axis=r.get("sweep", "series_axis", str),
        series_values=r.get("sweep", "series_values", parse_values),
        snr_step=r.get("sweep", "snr_step", float, 1.0),
        offset_step=r.get("sweep", "offset_step", float, 0.25),
    )
    validate(cfg)
    return cfg


def load_config(path: str | os.PathLike | None, seed: int | None = None) -> RunConfig:
    if path is None:
        return parse_config("", seed)
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config: {exc.strerror}", str(path)) from None
    return parse_config(text, seed)


_FIELDS = {
    "M": "array.num_elements",
    "spacing_ratio": "array.spacing_ratio",
    "theta_u_deg": "scenario.theta_u_deg",
    "snr_db": "scenario.snr_db",
    "K": "scenario.snapshots",
    "alpha": "scenario.alpha",
    "L": "spoofer.num_antennas",
    "phi_max_deg": "spoofer.phi_max_deg",
    "angular_offset_deg": "spoofer.angular_offset_deg",
}


def validate(cfg: RunConfig) -> None:
    """Field-by-field checks with the file path of the offending key."""
    p = cfg.point
    checks = [
        ("M", p.M >= 2, f"M >= 2 required (got {p.M})"),
        ("spacing_ratio", p.spacing_ratio > 0 and math.isfinite(p.spacing_ratio), "must be > 0"),
        ("theta_u_deg", abs(p.theta_u_deg) < 90, "must lie strictly inside (-90, 90)"),
        ("snr_db", math.isfinite(p.snr_db), "must be finite"),
        ("K", p.K >= 1, f"K >= 1 required (got {p.K})"),
        ("alpha", 0 < p.alpha < 1, "must lie in (0, 1)"),
        ("L", p.L >= 1, f"L >= 1 required (got {p.L})"),
        ("phi_max_deg", 0 <= p.phi_max_deg <= 180, "must lie in [0, 180]"),
        ("angular_offset_deg", abs(p.theta_u_deg + p.angular_offset_deg) < 90, "spoofer angle must lie inside (-90, 90)"),
    ]
    for name, ok, msg in checks:
        if not ok:
            raise ConfigurationError(msg, _FIELDS[name])
    if p.phase_redraw not in ("per-trial", "fixed"):
        raise ConfigurationError("must be 'per-trial' or 'fixed'", "spoofer.phase_redraw")
    if p.spoofer_angles_deg is not None:
        if len(p.spoofer_angles_deg) != len(p.spoofer_weights):
            raise ConfigurationError("angles_deg and weights differ in length", "spoofer.weights")
        if any(abs(a) >= 90 for a in p.spoofer_angles_deg):
            raise ConfigurationError("angles must lie inside (-90, 90)", "spoofer.angles_deg")
    if cfg.trials < 1:
        raise ConfigurationError("must be >= 1", "montecarlo.trials")
    if cfg.seed < 0:
        raise ConfigurationError("must be >= 0", "montecarlo.seed")
    if cfg.phase_draws < 1:
        raise ConfigurationError("must be >= 1", "montecarlo.phase_draws")
    if cfg.preset_name is not None and cfg.sweep_axis is not None:
        raise ConfigurationError("give either preset or axis, not both", "sweep.preset")
    if cfg.sweep_axis is not None:
        if cfg.sweep_axis not in AXES:
            raise ConfigurationError(f"must be one of {', '.join(AXES)}", "sweep.axis")
        if cfg.sweep_values is None:
            raise ConfigurationError("required when axis is set", "sweep.values")
    if (cfg.series_axis is None) != (cfg.series_values is None):
        raise ConfigurationError("series_axis and series_values go together", "sweep.series_axis")
    if cfg.series_axis is not None and cfg.series_axis not in AXES:
        raise ConfigurationError(f"must be one of {', '.join(AXES)}", "sweep.series_axis")
    try:
        p.spoofer()
        p.geometry()
        if cfg.preset_name is not None or cfg.sweep_axis is not None:
            cfg.sweeps()
    except ConfigurationError:
        raise
    except (AoaPlaError, ValueError) as exc:
        raise ConfigurationError(str(exc), "spoofer" if "weight" in str(exc) else "sweep") from None


def with_overrides(cfg: RunConfig, **kw) -> RunConfig:
    kw = {k: v for k, v in kw.items() if v is not None}
    out = replace(cfg, **kw)
    validate(out)
    return out
