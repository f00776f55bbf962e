import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aoa_pla_lab import bounds
from aoa_pla_lab.errors import DegenerateCurvatureError, DomainError
from aoa_pla_lab.search import SearchSettings
from aoa_pla_lab.signal_model import SpooferConfig, UlaGeometry, spoofed_mean, steering, steering_d1, steering_d2

G16 = UlaGeometry(16)
SIGMA2_5DB = 10 ** (-0.5)


def objective(geom, s, theta):
    d = s - steering(geom, theta)
    return float(np.vdot(d, d).real)


def test_crb_frozen_value():
    # sigma2 / (2 K ||a'||^2) with ||a'||^2 from mpmath numerical differentiation
    got = bounds.crb(G16, math.radians(10), SIGMA2_5DB, 20)
    assert got == pytest.approx(6.6606353838449775017e-7, rel=1e-13)


def test_crb_is_inverse_fisher_information():
    for theta in (-0.9, 0.0, 0.4):
        fim = bounds.fisher_information(G16, theta, 0.3, 7)
        assert bounds.crb(G16, theta, 0.3, 7) == pytest.approx(1 / fim, rel=1e-13)


def test_crb_scales_inversely_with_snapshots():
    assert bounds.crb(G16, 0.2, 1.0, 1) == pytest.approx(10 * bounds.crb(G16, 0.2, 1.0, 10), rel=1e-14)


@pytest.mark.parametrize("sigma2,K", [(0.0, 1), (-1.0, 1), (1.0, 0), (1.0, 2.5), (float("inf"), 1)])
def test_crb_rejects_bad_noise_or_snapshots(sigma2, K):
    with pytest.raises(DomainError):
        bounds.crb(G16, 0.1, sigma2, K)


def test_eta_and_curvature_frozen_values():
    # halved first/second mpmath derivatives of ||s - a(theta)||^2 at 20 deg
    sp = SpooferConfig.colinear(math.radians(10.25))
    mc = bounds.mismatch_curvature(G16, sp, math.radians(20))
    assert mc.eta == pytest.approx(-23.02509099660731337, rel=1e-10)
    assert mc.d_curv == pytest.approx(3799.0728408538726834, rel=1e-12)


SPOOFERS = [
    SpooferConfig.colinear(math.radians(10.25)),
    SpooferConfig((math.radians(5.0), math.radians(14.0)), (0.6, 0.4j)),
    SpooferConfig.colinear(math.radians(-35.0), 3, (0.2, -0.1, 0.4)),
]


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(range(len(SPOOFERS))), st.floats(-1.3, 1.3), st.sampled_from([4, 16, 33]))
def test_eta_and_curvature_match_inner_products(which, theta, M):
    g = UlaGeometry(M)
    sp = SPOOFERS[which]
    mc = bounds.mismatch_curvature(g, sp, theta)
    diff = spoofed_mean(g, sp) - steering(g, theta)
    eta_ip = np.vdot(steering_d1(g, theta), diff).real
    d_ip = mc.gamma - np.vdot(steering_d2(g, theta), diff).real
    scale = mc.gamma
    assert abs(mc.eta - eta_ip) <= 1e-8 * max(abs(eta_ip), 1e-3 * scale)
    assert abs(mc.d_curv - d_ip) <= 1e-8 * max(abs(d_ip), 1e-3 * scale)


@pytest.mark.parametrize("which", range(len(SPOOFERS)))
@pytest.mark.parametrize("theta", [-0.6, 0.05, 0.3])
def test_eta_and_curvature_match_finite_differences(which, theta):
    sp = SPOOFERS[which]
    s = spoofed_mean(G16, sp)
    h = 1e-5
    f = [objective(G16, s, theta + k * h) for k in (-2, -1, 0, 1, 2)]
    fd1 = (f[0] - 8 * f[1] + 8 * f[3] - f[4]) / (12 * h)
    fd2 = (-f[0] + 16 * f[1] - 30 * f[2] + 16 * f[3] - f[4]) / (12 * h * h)
    mc = bounds.mismatch_curvature(G16, sp, theta)
    assert -2 * mc.eta == pytest.approx(fd1, rel=1e-4, abs=1e-4 * mc.gamma * 1e-3)
    assert 2 * mc.d_curv == pytest.approx(fd2, rel=1e-4)


def test_curvature_equals_gamma_for_matched_model():
    sp = SpooferConfig.colinear(0.3)
    mc = bounds.mismatch_curvature(G16, sp, 0.3)
    assert mc.eta == pytest.approx(0.0, abs=1e-9)
    assert mc.d_curv == pytest.approx(mc.gamma, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.sampled_from(range(len(SPOOFERS))), st.floats(-1.0, 1.0), st.floats(0.01, 10.0), st.integers(1, 100))
def test_sandwich_identity(which, theta, sigma2, K):
    sp = SPOOFERS[which]
    try:
        ref = bounds.mcrb_general(G16, sp, theta, sigma2, K)
    except DegenerateCurvatureError:
        return
    A, B = bounds.sandwich_terms(G16, sp, theta, sigma2, K)
    assert B / A**2 == pytest.approx(ref, rel=1e-10)


def test_degenerate_curvature_raises():
    # D vanishes between the main lobe and the first null for a matched source
    g = UlaGeometry(8)
    sp = SpooferConfig.colinear(0.0)
    grid = np.linspace(0.01, 0.5, 20001)
    d = np.array([bounds.d_curvature(g, sp, t) for t in grid])
    i = int(np.flatnonzero(np.sign(d[:-1]) != np.sign(d[1:]))[0])
    from scipy.optimize import brentq

    root = brentq(lambda t: bounds.d_curvature(g, sp, t), grid[i], grid[i + 1], xtol=1e-16)
    with pytest.raises(DegenerateCurvatureError):
        bounds.mcrb_general(g, sp, root, 1.0, 1)


def test_pseudo_true_of_single_source_is_its_angle():
    for deg in (-40.0, 0.0, 10.25, 20.0, 75.0):
        sp = SpooferConfig.colinear(math.radians(deg))
        res = bounds.pseudo_true(G16, sp)
        assert res.converged
        assert res.theta0 == pytest.approx(math.radians(deg), abs=1e-12)
        assert res.objective == pytest.approx(0.0, abs=1e-9)


def test_pseudo_true_two_sources_frozen():
    # mpmath root of the correlation derivative after a 0.1 deg scan
    g = UlaGeometry(8)
    rep = bounds.mcrb_at_pseudo_true(g, SPOOFERS[1], 1.0, 1)
    assert rep.theta0 == pytest.approx(0.1060682958139012541928017, abs=1e-12)
    assert rep.d_curv == pytest.approx(1069.4474102946594948, rel=1e-12)
    assert rep.gamma == pytest.approx(1366.2575312982324334, rel=1e-12)
    assert rep.ratio == pytest.approx(1.6320981465767670771, rel=1e-12)
    assert abs(rep.eta) < 1e-9 * rep.gamma


def test_pseudo_true_matches_dense_grid():
    g = UlaGeometry(8)
    s = spoofed_mean(g, SPOOFERS[1])
    grid = np.linspace(-math.pi / 2 + 1e-6, math.pi / 2 - 1e-6, 1_000_001)
    vals = (np.exp(1j * g.wavenumber * np.outer(np.sin(grid), g.indices)) @ s).real
    t = grid[np.argmax(vals)]
    fine = np.linspace(t - 4e-6, t + 4e-6, 100_001)
    vals = (np.exp(1j * g.wavenumber * np.outer(np.sin(fine), g.indices)) @ s).real
    assert bounds.pseudo_true(g, SPOOFERS[1]).theta0 == pytest.approx(fine[np.argmax(vals)], abs=1e-7)


def test_pseudo_true_eta_vanishes():
    for sp in SPOOFERS:
        res = bounds.pseudo_true(G16, sp)
        assert abs(res.eta_at_theta0) < 1e-9 * bounds.mismatch_curvature(G16, sp, res.theta0).gamma


def test_pseudo_true_tie_resolves_to_smallest_angle():
    # equal-weight sources symmetric in sin(theta) give two equally good peaks
    g = UlaGeometry(8)
    u = 0.5
    sp = SpooferConfig((math.asin(-u), math.asin(u)), (0.5, 0.5))
    res = bounds.pseudo_true(g, sp)
    assert res.multimodal
    assert res.theta0 < 0


def test_pseudo_true_requires_dense_enough_grid():
    with pytest.raises(DomainError):
        bounds.pseudo_true(G16, SPOOFERS[0], SearchSettings(grid_points=256))


def test_mcrb_equals_crb_for_matched_model():
    sp = SpooferConfig.colinear(0.2)
    rep = bounds.mcrb_at_pseudo_true(G16, sp, 0.5, 10)
    assert rep.ratio == pytest.approx(1.0, rel=1e-12)
    assert rep.mcrb_k == pytest.approx(bounds.crb(G16, 0.2, 0.5, 10), rel=1e-12)


def test_mcrb_general_reduces_at_pseudo_true():
    sp = SPOOFERS[1]
    g = UlaGeometry(8)
    rep = bounds.mcrb_at_pseudo_true(g, sp, 0.7, 3)
    assert bounds.mcrb_general(g, sp, rep.theta0, 0.7, 3) == pytest.approx(rep.mcrb_k, rel=1e-9)


def test_pseudo_true_many_matches_scalar_solver():
    g = UlaGeometry(8)
    means = np.stack([spoofed_mean(g, sp) for sp in SPOOFERS])
    theta0, d_curv = bounds.pseudo_true_many(g, means)
    for t, d, sp in zip(theta0, d_curv, SPOOFERS):
        ref = bounds.pseudo_true(g, sp)
        assert t == pytest.approx(ref.theta0, abs=1e-12)
        assert d == pytest.approx(bounds.d_curvature(g, sp, t), rel=1e-10)


def test_kl_objective_at_pseudo_true_equals_reported_objective():
    g = UlaGeometry(8)
    res = bounds.pseudo_true(g, SPOOFERS[1])
    assert bounds.kl_objective(g, SPOOFERS[1], res.theta0) == pytest.approx(res.objective, rel=1e-10)
