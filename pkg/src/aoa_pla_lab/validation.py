"""Self-checks: every closed form against an independently computed route.

Each check compares two routes that share no code beyond the steering
vector, e.g. the S1/S2 closed forms against 40-digit direct summation, or
eta/D against finite differences of ``||s - a(theta)||**2``.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import mpmath
import numpy as np
from scipy import optimize

from . import authtest, bounds
from .montecarlo import Hypothesis, Scenario, run_trials
from .signal_model import (
    SpooferConfig,
    UlaGeometry,
    spoofed_mean,
    steering,
    steering_d1,
    steering_d2,
    weighted_geom_sum_1,
    weighted_geom_sum_2,
)

SOFT_BUDGET_S = 600.0


@dataclass
class CheckResult:
    suite: str
    name: str
    passed: bool
    detail: str

    def __post_init__(self):
        self.passed = bool(self.passed)


def exact_power_sum(r: complex, M: int, power: int) -> complex:
    """sum_m m**power * r**m for the exact floating-point ``r``, in 40-digit arithmetic.

    Using the exact input matters: near M = 128, S2 amplifies a 1e-16
    perturbation of r to ~1e-8, so an oracle built from cos/sin of the phase
    would disagree with any correct implementation.
    """
    with mpmath.workdps(40):
        rm = mpmath.mpc(r.real, r.imag)
        acc = mpmath.mpc(0)
        term = mpmath.mpc(1)
        for m in range(M):
            acc += m**power * term
            term *= rm
        return complex(acc)


def _objective(geom, s, theta):
    d = s - steering(geom, theta)
    return float(np.vdot(d, d).real)


def check_geometric_sums(rng: np.random.Generator, draws: int = 1000) -> list[CheckResult]:
    out = []
    Ms = rng.integers(2, 129, size=draws)
    Ms[:4] = (2, 16, 64, 128)
    phases = rng.uniform(-math.pi, math.pi, size=draws)
    phases[:2] = (1e-9, 0.03)
    for power, fn, name in ((1, weighted_geom_sum_1, "S1"), (2, weighted_geom_sum_2, "S2")):
        worst = 0.0
        for M, ph in zip(Ms, phases):
            r = complex(math.cos(ph), math.sin(ph))
            worst = max(worst, abs(fn(r, int(M)) - exact_power_sum(r, int(M), power)))
        out.append(
            CheckResult("geometric-sums", f"{name} closed form vs direct summation", worst <= 1e-9, f"max abs err {worst:.2e} (tol 1e-9)")
        )
    return out


CASES = (
    (UlaGeometry(16), SpooferConfig.colinear(math.radians(10.25))),
    (UlaGeometry(8), SpooferConfig((math.radians(5.0), math.radians(14.0)), (0.6, 0.4j))),
    (UlaGeometry(64, 0.4), SpooferConfig((math.radians(-30.0),), (0.8 * np.exp(0.3j),))),
    (UlaGeometry(128), SpooferConfig.colinear(math.radians(40.0), 4, (0.1, -0.2, 0.05, 0.0))),
)


def check_mismatch_forms() -> list[CheckResult]:
    rel_inner = rel_fd = 0.0
    for geom, sp in CASES:
        s = spoofed_mean(geom, sp)
        for theta in np.radians([-50.0, -3.0, 0.0, 12.0, 47.0]):
            mc = bounds.mismatch_curvature(geom, sp, float(theta))
            diff = s - steering(geom, theta)
            eta_ip = np.vdot(steering_d1(geom, theta), diff).real
            d_ip = mc.gamma - np.vdot(steering_d2(geom, theta), diff).real
            scale_eta = max(abs(eta_ip), 1e-3 * mc.gamma)
            rel_inner = max(rel_inner, abs(mc.eta - eta_ip) / scale_eta, abs(mc.d_curv - d_ip) / max(abs(d_ip), 1e-3 * mc.gamma))
            h = 1e-4 / (geom.num_elements * geom.wavenumber)
            f = [_objective(geom, s, theta + k * h) for k in (-2, -1, 0, 1, 2)]
            fd1 = (f[0] - 8 * f[1] + 8 * f[3] - f[4]) / (12 * h)
            fd2 = (-f[0] + 16 * f[1] - 30 * f[2] + 16 * f[3] - f[4]) / (12 * h * h)
            rel_fd = max(
                rel_fd,
                abs(-2 * mc.eta - fd1) / max(abs(fd1), 1e-3 * mc.gamma),
                abs(2 * mc.d_curv - fd2) / max(abs(fd2), 1e-3 * mc.gamma),
            )
    return [
        CheckResult("mismatch", "eta/D closed form vs inner-product form", rel_inner <= 1e-8, f"max rel err {rel_inner:.2e} (tol 1e-8)"),
        CheckResult("mismatch", "eta/D vs finite differences of ||s-a||^2", rel_fd <= 1e-4, f"max rel err {rel_fd:.2e} (tol 1e-4)"),
    ]


def dense_grid_argmin(geom: UlaGeometry, s: np.ndarray, points: int = 1_000_000) -> float:
    """Two-pass brute force: a global grid, then an equally dense grid on the best cell's neighbourhood."""
    edge = math.pi / 2 - 1e-6

    def scan(lo, hi):
        grid = np.linspace(lo, hi, points)
        best_v, best_t = -np.inf, 0.0
        for start in range(0, points, 50_000):
            g = grid[start : start + 50_000]
            a = np.exp(-1j * geom.wavenumber * np.outer(np.sin(g), geom.indices))
            v = (a.conj() @ s).real
            i = int(np.argmax(v))
            if v[i] > best_v:
                best_v, best_t = v[i], g[i]
        return best_t, grid[1] - grid[0]

    t, step = scan(-edge, edge)
    t, _ = scan(t - 2 * step, t + 2 * step)
    return float(t)


def check_pseudo_true() -> list[CheckResult]:
    worst = 0.0
    for geom, sp in CASES[:3]:
        got = bounds.pseudo_true(geom, sp).theta0
        worst = max(worst, abs(got - dense_grid_argmin(geom, spoofed_mean(geom, sp))))
    return [CheckResult("pseudo-true", "theta0 vs 1e6-point grid scan", worst <= 1e-7, f"max abs err {worst:.2e} rad (tol 1e-7)")]


def check_sandwich() -> list[CheckResult]:
    worst = 0.0
    for geom, sp in CASES:
        for theta in np.radians([-20.0, 11.0, 33.0]):
            A, B = bounds.sandwich_terms(geom, sp, float(theta), 0.7, 20)
            ref = bounds.mcrb_general(geom, sp, float(theta), 0.7, 20)
            worst = max(worst, abs(B / A**2 - ref) / ref)
    return [CheckResult("sandwich", "B/A^2 vs general MCRB", worst <= 1e-10, f"max rel err {worst:.2e} (tol 1e-10)")]


def check_analytic() -> list[CheckResult]:
    inv = 0.0
    for alpha in (1e-12, 1e-6, 1e-3, 0.05, 0.5, 0.9):
        for crb_k in (1e-8, 1e-3, 2.0):
            inv = max(inv, abs(authtest.p_fa(authtest.threshold(alpha, crb_k), crb_k) - alpha) / alpha)
    pmd = max(abs(authtest.p_md(authtest.threshold(a, 1e-4), 0.0, 1e-4) - (1 - a)) for a in (1e-3, 0.01, 0.05, 0.2))
    lim = max(abs(authtest.asymptotic_pmd_limit(a, 2.5, 2.5) - (1 - a)) for a in (1e-3, 0.05, 0.3))
    crit = 0.0
    for delta, tau in ((1.0, 0.5), (0.02, 0.0195), (3.0, 0.1), (-2.0, 1.5)):
        res = optimize.minimize_scalar(
            lambda ls: authtest.p_sd_vs_sigma(math.exp(ls), delta, tau),
            bracket=(math.log(0.05 * tau), math.log(abs(delta))),
            method="brent",
            options={"xtol": 1e-12},
        )
        crit = max(crit, abs(math.exp(res.x) - authtest.critical_sigma(delta, tau)) / authtest.critical_sigma(delta, tau))
    return [
        CheckResult("analytic", "threshold/p_fa inverse pair", inv <= 1e-10, f"max rel err {inv:.2e} (tol 1e-10)"),
        CheckResult("analytic", "P_MD(delta=0, MCRB=CRB) = 1 - alpha", pmd <= 1e-12, f"max abs err {pmd:.2e} (tol 1e-12)"),
        CheckResult("analytic", "asymptotic limit at CRB = MCRB", lim <= 1e-12, f"max abs err {lim:.2e} (tol 1e-12)"),
        CheckResult("analytic", "critical sigma vs numerical minimizer", crit <= 1e-6, f"max rel err {crit:.2e} (tol 1e-6)"),
    ]


def check_variance_tracking(trials: int = 20_000, seed: int = 0) -> list[CheckResult]:
    geom = UlaGeometry(16)
    theta_u = math.radians(10.0)
    sp = SpooferConfig.colinear(math.radians(11.0))
    sc = Scenario.from_snr_db(geom, theta_u, 10.0, 20, spoofer=sp, trials=trials, seed=seed)
    h0 = run_trials(sc, Hypothesis.H0)
    h1 = run_trials(sc, Hypothesis.H1)
    rep = bounds.mcrb_at_pseudo_true(geom, sp, sc.sigma2, sc.snapshots)
    r0 = h0.theta_var / sc.crb_k()
    r1 = h1.theta_var / rep.mcrb_k
    z = abs(h1.theta_mean - rep.theta0) / math.sqrt(h1.theta_var / trials)
    ok = lambda r: 1 / 1.3 <= r <= 1.3
    return [
        CheckResult("variance", "H0 variance tracks CRB", ok(r0), f"var/CRB = {r0:.4f} (within 1.3x)"),
        CheckResult("variance", "H1 variance tracks MCRB", ok(r1), f"var/MCRB = {r1:.4f} (within 1.3x)"),
        CheckResult("variance", "H1 mean at theta0", z <= 3.0, f"|mean - theta0| = {z:.2f} standard errors (tol 3)"),
    ]


SUITES: dict[str, Callable[[], list[CheckResult]]] = {
    "geometric-sums": lambda: check_geometric_sums(np.random.default_rng(20240611)),
    "mismatch": check_mismatch_forms,
    "pseudo-true": check_pseudo_true,
    "sandwich": check_sandwich,
    "analytic": check_analytic,
    "variance": check_variance_tracking,
}


def run_all(suites=None) -> tuple[list[CheckResult], float]:
    t0 = time.perf_counter()
    results = []
    for name in suites or SUITES:
        try:
            results.extend(SUITES[name]())
        except Exception as exc:  # a crashing suite is a failing suite
            results.append(CheckResult(name, "suite raised", False, f"{type(exc).__name__}: {exc}"))
    return results, time.perf_counter() - t0
