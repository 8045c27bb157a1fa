import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from warpflow import neckpinch
from warpflow.errors import ConfigError, InconclusiveRun, PinchDetected, StepTooLarge
from warpflow.neckpinch import BumpConfig


@pytest.mark.parametrize(
    "kw, key",
    [
        ({"n": 1}, "neckpinch.n"),
        ({"eps": 0.0}, "neckpinch.eps"),
        ({"eps": 0.5}, "neckpinch.eps"),
        ({"r0": -1.0}, "neckpinch.r0"),
        ({"r0": 2.0, "r1": 1.0}, "neckpinch.r1"),
    ],
)
def test_bump_config_validation(kw, key):
    with pytest.raises(ConfigError) as exc:
        BumpConfig(**kw)
    assert exc.value.path == key


@settings(max_examples=50, deadline=None)
@given(eps=st.floats(0.01, 0.45), r0=st.floats(0.1, 5.0), ratio=st.floats(1.0, 20.0))
def test_eta_shape_and_monotone_correspondence(eps, r0, ratio):
    cfg = BumpConfig(n=2, eps=eps, r0=r0, r1=ratio * r0)
    y = np.linspace(0.0, 0.999, 4001)
    eta = cfg.eta(y)
    assert np.all(np.diff(eta) <= 1e-12 * cfg.r1)
    np.testing.assert_allclose(eta[y <= eps], cfg.r1, rtol=1e-14)
    np.testing.assert_allclose(eta[y >= 2 * eps], cfg.r0, rtol=1e-14)
    # x_1 = eta(sqrt(1 - w^2)) w for w > 0 and r0 w otherwise
    w = np.linspace(-1.0, 1.0, 20001)
    x1 = np.where(w <= 0, r0 * w, cfg.eta(np.sqrt(np.clip(1 - w**2, 0, 1))) * w)
    assert np.min(np.diff(x1)) > 0


def test_nonmonotone_profile_rejected():
    class Rising(BumpConfig):
        def eta(self, y):
            return self.r0 + 50.0 * np.asarray(y, dtype=float)

    with pytest.raises(ConfigError):
        neckpinch.build_initial(Rising(n=2, eps=0.1, r0=1.0, r1=1.0), 50)


def test_degenerate_bump_is_round_sphere():
    p = neckpinch.build_initial(BumpConfig(n=2, eps=0.1, r0=1.5, r1=1.5), 100)
    np.testing.assert_allclose(np.hypot(p.xs, p.us), 1.5, atol=1e-9)
    assert p.us[0] == 0.0 and p.us[-1] == 0.0
    assert np.all(p.us[1:-1] > 0)


def test_witness_profile_has_plateau_and_collar():
    cfg = neckpinch.WITNESS
    p = neckpinch.build_initial(cfg, 300)
    assert p.xs[0] == pytest.approx(cfg.r1, rel=1e-6)
    assert p.xs[-1] == pytest.approx(-cfg.r0, rel=1e-6)
    # the radial graph passes from r1 to r0 across sin(psi) in [eps, 2 eps]
    rad = np.hypot(p.xs, p.us)
    # nodes are placed by PCHIP in x and y separately, so the radius may overshoot slightly
    assert rad.max() == pytest.approx(cfg.r1, rel=1e-4)
    assert rad.min() == pytest.approx(cfg.r0, rel=1e-4)
    assert np.max(p.us[p.xs > cfg.r0]) <= 2 * cfg.eps * cfg.r1 + 1e-9


def test_centred_sphere_angle_is_one():
    p = neckpinch.sphere_profile(2.0, 64)
    assert neckpinch.angle_min(p) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("center", [0.3, 0.6])
def test_off_centre_enclosing_sphere(center):
    p = neckpinch.sphere_profile(1.0, 401, center)
    phi = np.linspace(0.0, math.pi, 4001)
    # outward normal (cos phi, sin phi) at c + R (cos phi, sin phi)
    px, py = center + np.cos(phi), np.sin(phi)
    closed = np.min((px * np.cos(phi) + py * np.sin(phi)) / np.hypot(px, py))
    got = neckpinch.angle_min(p)
    assert 0 < got < 1
    assert got == pytest.approx(closed, abs=1e-4)


def test_non_enclosing_sphere_negative():
    p = neckpinch.sphere_profile(1.0, 101, 2.0)
    assert neckpinch.angle_min(p) < 0


@pytest.mark.parametrize("n", [2, 3])
def test_angle_routes_agree(n):
    for p in (neckpinch.build_initial(neckpinch.WITNESS, 200), neckpinch.sphere_profile(1.0, 101, 0.4)):
        a = neckpinch.angle_function(p, n, "euclidean")
        b = neckpinch.angle_function(p, n, "warped")
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-10)
    with pytest.raises(ValueError):
        neckpinch.angle_function(p, n, "polar")


@pytest.mark.parametrize("n", [2, 3])
def test_sphere_oracle(n):
    # R(t) = sqrt(R^2 - 2 n t) through 90% of the lifespan
    radius = 1.0
    p = neckpinch.sphere_profile(radius, 64)
    t_end = 0.9 * radius**2 / (2 * n)
    err = 0.0
    while p.t < t_end:
        h = min(neckpinch.stable_dt(p, n), t_end - p.t)
        p = neckpinch.step(p, n, h, radius, redistribute=False)
        rr = np.hypot(p.xs, p.us)
        exact = math.sqrt(radius**2 - 2 * n * p.t)
        err = max(err, float(np.max(np.abs(rr - exact))))
    assert err < 1e-4


def test_collar_rate():
    # on a long cylinder u_xx = 0, so the radius drops at (n - 1) / r
    n, r = 3, 0.5
    xs = np.linspace(-20.0, 20.0, 801)
    us = np.full_like(xs, r)
    us[0] = us[-1] = 0.0
    p = neckpinch.ProfileState(xs, us)
    dt = 1e-5
    q = neckpinch.step(p, n, min(dt, neckpinch.stable_dt(p, n)), redistribute=False)
    mid = len(xs) // 2
    rate = (p.us[mid] - q.us[mid]) / q.t
    assert rate == pytest.approx((n - 1) / r, rel=1e-3)
    # u_t = -(n - 1) / u exactly: u(t) = sqrt(r^2 - 2 (n - 1) t)
    assert q.us[mid] == pytest.approx(math.sqrt(r**2 - 2 * (n - 1) * q.t), rel=1e-10)


def test_step_errors():
    p = neckpinch.sphere_profile(1.0, 64)
    with pytest.raises(StepTooLarge):
        neckpinch.step(p, 2, 3.0 * neckpinch.stable_dt(p, 2, neckpinch.CFL_LIMIT))
    # a dumbbell with an interior neck below the threshold
    xs = np.linspace(-3.0, 3.0, 201)
    us = np.sqrt(np.clip(9.0 - xs**2, 0, None)) * (1.0 - 0.9 * np.exp(-(xs**2) * 4))
    q = neckpinch.ProfileState(xs, us)
    with pytest.raises(PinchDetected):
        neckpinch.step(q, 2, neckpinch.stable_dt(q, 2), redistribute=False, pinch_threshold=0.5)


def test_degenerate_run_shrinks_without_graph_loss():
    cfg = BumpConfig(n=2, eps=0.1, r0=1.0, r1=1.0)
    series, verdict = neckpinch.run_counterexample(cfg, n_nodes=64, cadence=0.01)
    assert verdict["graph_lost_at"] is None and verdict["pinched_at"] is None
    assert verdict["shrunk_at"] == pytest.approx(0.25, abs=0.01)
    assert not verdict["ordering_ok"]
    assert np.all(np.asarray(series.column("angle_min")) > 0.99)


def test_witness_loses_graph_before_pinch():
    series, verdict = neckpinch.run_counterexample(neckpinch.WITNESS, n_nodes=200, cadence=1e-4)
    assert verdict["ordering_ok"]
    assert 0 < verdict["graph_lost_at"] < verdict["pinched_at"]
    assert series.first_event("GraphLost")["t"] == verdict["graph_lost_at"]
    necks = np.asarray(series.column("neck_radius"))
    ts = np.asarray(series.column("t"))
    assert np.all(np.isfinite(necks))
    # the initial minimum sits in the steep blend (u_xx > (n - 1) / u) and is first lifted
    # by smoothing; the rise is below 1e-3 and ends long before the graph is lost
    peak = int(np.argmax(necks))
    assert necks[peak] - necks[0] < 1e-3
    assert ts[peak] < 0.1 * verdict["graph_lost_at"]
    # from then on the pinching neck never widens
    assert np.all(np.diff(necks[peak:]) <= 1e-6)


def test_short_horizon_inconclusive():
    with pytest.raises(InconclusiveRun):
        neckpinch.run_counterexample(BumpConfig(n=2, eps=0.4, r0=1.0, r1=1.2), n_nodes=64, t_max=1e-3)
