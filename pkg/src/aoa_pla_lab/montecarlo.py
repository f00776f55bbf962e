"""Monte Carlo trial engine for the AoA authentication test.

Random streams are counter based: every (seed, stream tag) pair keys a Philox
generator, and trial ``t`` reads the fixed-size window of words starting at
``t * words_per_trial``.  Any trial can therefore be regenerated on its own, and
results do not depend on how trials are split across worker processes.
Gaussian noise uses Box-Muller on those uniforms, so every trial consumes a
fixed number of draws.

The estimator depends on the data only through the snapshot sum, so a trial's
noise is parameterized in an orthonormal (Helmert) basis over snapshots:
component 0 is ``sum_k n_k / sqrt(K)`` and comes from its own stream, while
components 1..K-1 come from a second stream.  ``run_trials`` draws only
component 0; ``generate_snapshots`` rebuilds all K i.i.d. snapshots, whose
sum matches the simulated one to rounding.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from scipy.linalg import helmert
from scipy.stats import binomtest

from . import authtest
from .bounds import crb, pseudo_true_many
from .errors import ConfigurationError, DomainError
from .estimator import SnapshotBatch, estimate_many
from .search import BLOCK_ROWS, ESTIMATOR_SEARCH, PSEUDO_TRUE_SEARCH, SearchSettings
from .signal_model import SpooferConfig, UlaGeometry, check_angle, steering, steering_matrix

log = logging.getLogger(__name__)

_MASK64 = (1 << 64) - 1
# complex entries (trials x M) simulated per in-memory block
_BLOCK_BUDGET = 1 << 20


class Hypothesis(str, Enum):
    H0 = "H0"
    H1 = "H1"


_STREAM_TAGS = {
    (Hypothesis.H0, "sum"): 0,
    (Hypothesis.H1, "sum"): 1,
    "phase": 2,
    (Hypothesis.H0, "rest"): 3,
    (Hypothesis.H1, "rest"): 4,
}


@dataclass(frozen=True)
class PhaseSpreadModel:
    """Spoofer precoding phases drawn uniformly on [-phi_max, phi_max] per antenna."""

    phi_max: float = 0.0
    redraw: str = "per-trial"

    def __post_init__(self):
        if not self.phi_max >= 0:
            raise DomainError(f"phi_max must be >= 0, got {self.phi_max!r}")
        if self.redraw not in ("per-trial", "fixed"):
            raise DomainError(f"redraw must be 'per-trial' or 'fixed', got {self.redraw!r}")

    @property
    def active(self) -> bool:
        return self.phi_max > 0

    @property
    def mean_gain(self) -> float:
        """E[exp(1j*phi)] = sin(phi_max) / phi_max."""
        return 1.0 if self.phi_max == 0 else math.sin(self.phi_max) / self.phi_max


@dataclass(frozen=True)
class Scenario:
    geometry: UlaGeometry
    theta_u: float
    sigma2: float
    snapshots: int
    alpha: float = 1e-3
    spoofer: SpooferConfig | None = None
    trials: int = 100_000
    seed: int = 0
    phase_spread: PhaseSpreadModel = field(default_factory=PhaseSpreadModel)
    search: SearchSettings = ESTIMATOR_SEARCH

    def __post_init__(self):
        check_angle(self.theta_u, "theta_u")
        if not (self.sigma2 > 0 and math.isfinite(self.sigma2)):
            raise DomainError(f"sigma2 must be > 0, got {self.sigma2!r}")
        if int(self.snapshots) != self.snapshots or self.snapshots < 1:
            raise DomainError(f"snapshots must be an integer >= 1, got {self.snapshots!r}")
        if not 0 < self.alpha < 1:
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        if int(self.trials) != self.trials or self.trials < 1:
            raise DomainError(f"trials must be an integer >= 1, got {self.trials!r}")

    @classmethod
    def from_snr_db(cls, geometry: UlaGeometry, theta_u: float, snr_db: float, snapshots: int, **kw):
        return cls(geometry, theta_u, snr_to_sigma2(snr_db), snapshots, **kw)

    @property
    def snr_db(self) -> float:
        return -10.0 * math.log10(self.sigma2)

    def with_(self, **changes) -> "Scenario":
        return replace(self, **changes)

    def crb_k(self) -> float:
        return crb(self.geometry, self.theta_u, self.sigma2, self.snapshots)

    def wald_threshold(self) -> float:
        return authtest.threshold(self.alpha, self.crb_k())

    def to_dict(self) -> dict:
        sp = self.spoofer
        return {
            "num_elements": self.geometry.num_elements,
            "spacing_ratio": self.geometry.spacing_ratio,
            "theta_u": self.theta_u,
            "sigma2": self.sigma2,
            "snr_db": self.snr_db,
            "snapshots": self.snapshots,
            "alpha": self.alpha,
            "trials": self.trials,
            "seed": self.seed,
            "spoofer": None
            if sp is None
            else {
                "angles": list(sp.angles),
                "weights": [[w.real, w.imag] for w in sp.weights],
            },
            "phi_max": self.phase_spread.phi_max,
            "phase_redraw": self.phase_spread.redraw,
            "grid_points": self.search.grid_points,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        if "sigma2" in data:
            sigma2 = float(data["sigma2"])
        else:
            sigma2 = snr_to_sigma2(float(data["snr_db"]))
        sp = data.get("spoofer")
        spoofer = None
        if sp is not None:
            spoofer = SpooferConfig(tuple(sp["angles"]), tuple(complex(a, b) for a, b in sp["weights"]))
        return cls(
            geometry=UlaGeometry(int(data["num_elements"]), float(data.get("spacing_ratio", 0.5))),
            theta_u=float(data["theta_u"]),
            sigma2=sigma2,
            snapshots=int(data["snapshots"]),
            alpha=float(data.get("alpha", 1e-3)),
            spoofer=spoofer,
            trials=int(data.get("trials", 100_000)),
            seed=int(data.get("seed", 0)),
            phase_spread=PhaseSpreadModel(float(data.get("phi_max", 0.0)), data.get("phase_redraw", "per-trial")),
            search=SearchSettings(grid_points=data.get("grid_points")),
        )


def snr_to_sigma2(snr_db: float) -> float:
    return 10.0 ** (-snr_db / 10.0)


@dataclass(frozen=True)
class EmpiricalEstimate:
    successes: int
    trials: int
    p_hat: float
    ci_low: float
    ci_high: float
    confidence: float = 0.99

    def contains(self, p: float) -> bool:
        return self.ci_low <= p <= self.ci_high


def wilson(successes: int, trials: int, confidence: float = 0.99) -> EmpiricalEstimate:
    if not 0 <= successes <= trials or trials < 1:
        raise DomainError(f"need 0 <= successes <= trials, trials >= 1 (got {successes}/{trials})")
    ci = binomtest(int(successes), int(trials)).proportion_ci(confidence_level=confidence, method="wilson")
    p_hat = successes / trials
    return EmpiricalEstimate(
        int(successes), int(trials), p_hat, float(min(ci.low, p_hat)), float(max(ci.high, p_hat)), confidence
    )


def coherent_gain(phases) -> complex:
    """c = mean(exp(1j*phi)) over the spoofer antennas."""
    phases = np.asarray(phases, dtype=float)
    if phases.size < 1:
        raise DomainError("coherent_gain needs at least one phase")
    return complex(np.mean(np.exp(1j * phases)))


# --- counter-based streams -------------------------------------------------


def stream_key(seed: int, tag) -> np.ndarray:
    tag_id = _STREAM_TAGS[tag]
    seq = np.random.SeedSequence(entropy=int(seed) & _MASK64, spawn_key=(tag_id,))
    return seq.generate_state(2, dtype=np.uint64)


def uniform_block(seed: int, tag, words_per_trial: int, t0: int, t1: int) -> np.ndarray:
    """Uniforms in [0, 1) for trials [t0, t1), shape (t1 - t0, words_per_trial).

    Philox emits four 64-bit words per counter step, so each trial owns a
    window rounded up to a multiple of four words.
    """
    stride = -(-words_per_trial // 4) * 4
    counter = np.zeros(4, dtype=np.uint64)
    counter[0] = np.uint64(t0 * (stride // 4))
    bitgen = np.random.Philox(key=stream_key(seed, tag), counter=counter)
    u = np.random.Generator(bitgen).random((t1 - t0) * stride)
    return u.reshape(t1 - t0, stride)[:, :words_per_trial]


def complex_noise_block(seed: int, tag, count: int, sigma2: float, t0: int, t1: int) -> np.ndarray:
    """CN(0, sigma2) samples of shape (t1 - t0, count) via Box-Muller."""
    u = uniform_block(seed, tag, 2 * count, t0, t1)
    radius = np.sqrt(-sigma2 * np.log1p(-u[:, :count]))
    angle = 2.0 * math.pi * u[:, count:]
    noise = np.empty((t1 - t0, count), dtype=complex)
    noise.real = radius * np.cos(angle)
    noise.imag = radius * np.sin(angle)
    return noise


def phase_draws(scenario: Scenario, t0: int, t1: int) -> np.ndarray:
    """Spoofer phases for trials [t0, t1), shape (t1 - t0, L)."""
    L = scenario.spoofer.num_antennas
    phi_max = scenario.phase_spread.phi_max
    if scenario.phase_spread.redraw == "fixed":
        u = np.broadcast_to(uniform_block(scenario.seed, "phase", L, 0, 1), (t1 - t0, L))
    else:
        u = uniform_block(scenario.seed, "phase", L, t0, t1)
    return phi_max * (2.0 * u - 1.0)


def trial_means(scenario: Scenario, hypothesis: Hypothesis, t0: int, t1: int) -> np.ndarray:
    """Per-trial mean vectors, shape (t1 - t0, M) (rows identical unless phases are random)."""
    geom = scenario.geometry
    if hypothesis is Hypothesis.H0:
        return np.broadcast_to(steering(geom, scenario.theta_u), (t1 - t0, geom.num_elements))
    if scenario.spoofer is None:
        raise ConfigurationError("hypothesis H1 requires a spoofer in the scenario", "spoofer")
    sp = scenario.spoofer
    A = steering_matrix(geom, sp.angle_array)
    if scenario.phase_spread.active:
        weights = sp.weight_array * np.exp(1j * phase_draws(scenario, t0, t1))
        return weights @ A
    return np.broadcast_to(sp.weight_array @ A, (t1 - t0, geom.num_elements))


def generate_snapshots(scenario: Scenario, hypothesis: Hypothesis | str, trial_index: int) -> SnapshotBatch:
    """The K x M snapshots of one trial; their sum is the one run_trials uses."""
    hypothesis = Hypothesis(hypothesis)
    geom = scenario.geometry
    K, M = scenario.snapshots, geom.num_elements
    t0, t1 = trial_index, trial_index + 1
    basis = np.empty((K, M), dtype=complex)
    basis[0] = complex_noise_block(scenario.seed, (hypothesis, "sum"), M, scenario.sigma2, t0, t1)[0]
    if K > 1:
        rest = complex_noise_block(scenario.seed, (hypothesis, "rest"), (K - 1) * M, scenario.sigma2, t0, t1)
        basis[1:] = rest.reshape(K - 1, M)
    noise = helmert(K, full=True).T @ basis
    mean = trial_means(scenario, hypothesis, t0, t1)[0]
    return SnapshotBatch(mean[None, :] + noise, geom)


def snapshot_sums(scenario: Scenario, hypothesis: Hypothesis, t0: int, t1: int) -> np.ndarray:
    """``sum_k x_k`` for trials [t0, t1): K * mean + sqrt(K) * (Helmert component 0)."""
    K, M = scenario.snapshots, scenario.geometry.num_elements
    mean = trial_means(scenario, hypothesis, t0, t1)
    w0 = complex_noise_block(scenario.seed, (hypothesis, "sum"), M, scenario.sigma2, t0, t1)
    return K * mean + math.sqrt(K) * w0


def _simulate_range(scenario: Scenario, hypothesis: Hypothesis, t0: int, t1: int):
    thetas, conv = [], []
    step = max(BLOCK_ROWS, _BLOCK_BUDGET // scenario.geometry.num_elements // BLOCK_ROWS * BLOCK_ROWS)
    for start in range(t0, t1, step):
        stop = min(start + step, t1)
        res = estimate_many(scenario.geometry, snapshot_sums(scenario, hypothesis, start, stop), scenario.search)
        thetas.append(res.theta)
        conv.append(res.converged)
    return np.concatenate(thetas), np.concatenate(conv)


def simulate_estimates(
    scenario: Scenario, hypothesis: Hypothesis | str, workers: int = 1
) -> tuple[np.ndarray, np.ndarray]:
    """AoA estimates (and convergence flags) for every trial, in trial order."""
    hypothesis = Hypothesis(hypothesis)
    n = scenario.trials
    if workers <= 1 or n <= BLOCK_ROWS:
        return _simulate_range(scenario, hypothesis, 0, n)
    # chunk boundaries on BLOCK_ROWS multiples keep the estimator's padded
    # blocks identical to the single-process run
    chunk = -(-n // workers)
    chunk = -(-chunk // BLOCK_ROWS) * BLOCK_ROWS
    bounds = [(s, min(s + chunk, n)) for s in range(0, n, chunk)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_simulate_range, *zip(*[(scenario, hypothesis, a, b) for a, b in bounds])))
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


@dataclass(frozen=True)
class TrialResult:
    hypothesis: Hypothesis
    threshold: float
    rejected: EmpiricalEstimate
    accepted: EmpiricalEstimate
    theta_mean: float
    theta_var: float
    theta_mse: float
    nonconverged: int
    estimates: np.ndarray | None = None

    @property
    def p_fa_hat(self) -> EmpiricalEstimate:
        self._expect(Hypothesis.H0)
        return self.rejected

    @property
    def p_d_hat(self) -> EmpiricalEstimate:
        self._expect(Hypothesis.H0)
        return self.accepted

    @property
    def p_sd_hat(self) -> EmpiricalEstimate:
        self._expect(Hypothesis.H1)
        return self.rejected

    @property
    def p_md_hat(self) -> EmpiricalEstimate:
        self._expect(Hypothesis.H1)
        return self.accepted

    def _expect(self, hyp: Hypothesis) -> None:
        if self.hypothesis is not hyp:
            raise AttributeError(f"result was simulated under {self.hypothesis.value}, not {hyp.value}")


def run_trials(
    scenario: Scenario,
    hypothesis: Hypothesis | str | None = None,
    threshold: float | None = None,
    workers: int = 1,
    confidence: float = 0.99,
    keep_estimates: bool = False,
) -> TrialResult:
    """Simulate the authentication test.

    Under H0 the rejection rate is the empirical P_FA (acceptance: P_D); under
    H1 it is P_SD (acceptance: P_MD).  The threshold defaults to the Wald
    threshold for ``scenario.alpha``.
    """
    if hypothesis is None:
        hypothesis = Hypothesis.H1 if scenario.spoofer is not None else Hypothesis.H0
    hypothesis = Hypothesis(hypothesis)
    tau = scenario.wald_threshold() if threshold is None else float(threshold)
    thetas, conv = simulate_estimates(scenario, hypothesis, workers)
    stats = np.abs(thetas - scenario.theta_u)
    n = thetas.size
    rejected = int(np.count_nonzero(stats > tau))
    return TrialResult(
        hypothesis=hypothesis,
        threshold=tau,
        rejected=wilson(rejected, n, confidence),
        accepted=wilson(n - rejected, n, confidence),
        theta_mean=float(np.mean(thetas)),
        theta_var=float(np.var(thetas, ddof=1)) if n > 1 else 0.0,
        theta_mse=float(np.mean((thetas - scenario.theta_u) ** 2)),
        nonconverged=int(np.count_nonzero(~conv)),
        estimates=thetas if keep_estimates else None,
    )


def calibrate_threshold_mc(scenario_h0: Scenario, alpha: float | None = None, workers: int = 1) -> float:
    """(1 - alpha)-quantile of |theta_hat - theta_u| under H0 by order statistic.

    Uses the ceil((1 - alpha) * trials)-th smallest statistic (1-based).
    """
    alpha = scenario_h0.alpha if alpha is None else float(alpha)
    if not 0 < alpha < 1:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha!r}")
    n = scenario_h0.trials
    if n < 10.0 / alpha:
        raise ConfigurationError(
            f"calibrating alpha={alpha:g} needs at least {math.ceil(10 / alpha)} trials, got {n}", "trials"
        )
    thetas, _ = simulate_estimates(scenario_h0, Hypothesis.H0, workers)
    stats = np.sort(np.abs(thetas - scenario_h0.theta_u))
    # tolerance guards (1 - alpha) * n landing a hair above an integer
    rank = math.ceil((1.0 - alpha) * n - 1e-9 * n)
    return float(stats[max(rank, 1) - 1])


# --- analytic curves for randomized precoding phases ------------------------


@dataclass(frozen=True)
class PhaseAveragedReport:
    p_sd: float
    p_md: float
    mean_theta0: float
    mean_mcrb_k: float
    mean_abs_gain: float
    draws: int


def phase_averaged_analytic(scenario: Scenario, draws: int = 4096) -> PhaseAveragedReport:
    """Analytic P_SD averaged over the random precoding phases.

    Each phase realization gives its own spoofed mean, hence its own
    pseudo-true angle and MCRB; P_SD is the Wald value averaged over
    ``draws`` realizations taken from the same stream as the Monte Carlo
    trials (the first ``draws`` trials).
    """
    if scenario.spoofer is None:
        raise ConfigurationError("phase-averaged analysis requires a spoofer", "spoofer")
    if draws < 1:
        raise DomainError("draws must be >= 1")
    geom = scenario.geometry
    count = 1 if scenario.phase_spread.redraw == "fixed" or not scenario.phase_spread.active else draws
    means = trial_means(scenario, Hypothesis.H1, 0, count)
    theta0, d_curv = pseudo_true_many(geom, np.array(means), PSEUDO_TRUE_SEARCH)
    m = geom.num_elements
    gam = (geom.wavenumber * np.cos(theta0)) ** 2 * (m - 1) * m * (2 * m - 1) / 6.0
    mcrb = scenario.sigma2 / (2.0 * scenario.snapshots) * gam / d_curv**2
    tau = scenario.wald_threshold()
    p_md = np.array(
        [authtest.p_md(tau, t0 - scenario.theta_u, v) for t0, v in zip(theta0, mcrb)]
    )
    phases = phase_draws(scenario, 0, count) if scenario.phase_spread.active else np.zeros((count, 1))
    gains = np.abs(np.mean(np.exp(1j * phases), axis=1))
    return PhaseAveragedReport(
        p_sd=float(1.0 - np.mean(p_md)),
        p_md=float(np.mean(p_md)),
        mean_theta0=float(np.mean(theta0)),
        mean_mcrb_k=float(np.mean(mcrb)),
        mean_abs_gain=float(np.mean(gains)),
        draws=count,
    )


def mean_gain_spoofer(spoofer: SpooferConfig, phase_spread: PhaseSpreadModel) -> SpooferConfig:
    """Spoofer with weights scaled by the expected coherent gain sin(phi_max)/phi_max."""
    g = phase_spread.mean_gain
    return SpooferConfig(spoofer.angles, tuple(w * g for w in spoofer.weights))
