import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from warpflow import parallel, warp
from warpflow.errors import DomainError, HypothesisError, Inconclusive, StiffnessError


def test_exp_neg_z_squared_closed_form():
    tr = parallel.integrate_parallel(warp.ExpNegZSquared(), 1, -1.0, 1.0, tol=1e-10, t_eval=[0.5, 1.0])
    assert tr.terminal == "reached_t_end"
    assert abs(tr.at(1.0) + math.exp(2.0)) < 1e-8
    assert abs(tr.at(0.5) + math.exp(1.0)) < 1e-8


def test_double_exp_closed_form_and_exit():
    w = warp.DoubleExp()
    tr = parallel.integrate_parallel(w, 1, 0.0, 0.5, tol=1e-10, t_eval=[0.5])
    assert abs(tr.at(0.5) - math.log(0.5)) < 1e-8
    out = parallel.integrate_parallel(w, 1, 0.0, 3.0, tol=1e-10)
    assert out.terminal == "exited_domain"
    assert abs(out.t_exit - 1.0) < 1e-8
    lo, hi = out.exit_bracket
    assert lo < 1.0 <= hi + 1e-12


def test_linear_circle_closed_form():
    tr = parallel.integrate_parallel(warp.Linear(), 1, 2.0, 1.0, tol=1e-10, t_eval=[1.0])
    assert abs(tr.at(1.0) - math.sqrt(2.0)) < 1e-8


@pytest.mark.parametrize("n", [1, 2, 3])
def test_dimension_scales_time(n):
    # dz/dt = -n w(z): the n-dimensional slice at time t is the curve at time n t
    w = warp.ExpNegZSquared()
    tr = parallel.integrate_parallel(w, n, -0.5, 0.4, tol=1e-11, t_eval=[0.4])
    assert abs(tr.at(0.4) - (-0.5) * math.exp(2 * n * 0.4)) < 1e-8


@settings(max_examples=30, deadline=None)
@given(z0=st.floats(-20.0, -1.5), t_end=st.floats(0.1, 30.0))
def test_trajectory_invariants(z0, t_end):
    w = warp.PowerBeta(0.5)
    tr = parallel.integrate_parallel(w, 1, z0, t_end, tol=1e-9)
    assert np.all(np.diff(tr.t) > 0)
    assert np.all(np.diff(tr.z) < 0)  # r' > 0 drives z down
    assert np.all(w.contains(tr.z))
    # dz/dt = beta / z, so z^2 = z0^2 + 2 beta t
    assert abs(tr.z[-1] ** 2 - (z0**2 + t_end)) < 1e-6 * (z0**2 + t_end)


def test_errors():
    with pytest.raises(DomainError):
        parallel.integrate_parallel(warp.PowerBeta(0.5), 1, 0.5, 1.0)
    with pytest.raises(StiffnessError):
        parallel.dormand_prince(lambda t, y: math.nan, 0.0, 1.0, 1.0, 1e-8)


def test_dormand_prince_order():
    # y' = y: global error scales with tol
    errs = []
    for tol in (1e-6, 1e-9):
        ts, ys, _ = parallel.dormand_prince(lambda t, y: y, 0.0, 1.0, 2.0, tol)
        errs.append(abs(ys[-1] - math.exp(2.0)))
    assert errs[1] < 1e-7
    assert errs[1] < errs[0]


def test_contraction_examples():
    res = parallel.contraction_gap(warp.PowerBeta(1.0), 1, 1.0, -2.0, -3.0, 5.0)
    assert res.holds
    res = parallel.contraction_gap(warp.PowerBeta(0.5), 2, 1.0, -2.0, -2.5, 10.0)
    assert res.holds and res.gap < 0.5 and res.bound < 0.5
    with pytest.raises(ValueError):
        parallel.contraction_gap(warp.PowerBeta(1.0), 1, 1.0, -2.0, -2.0, 1.0)
    with pytest.raises(HypothesisError):
        parallel.contraction_gap(warp.PowerBeta(2.0), 1, 1.0, -2.0, -3.0, 1.0)


def test_contraction_gap_equality_for_beta_one():
    # w = -1/z, n = 1: z(t)^2 = z0^2 + 2 t; bound (z1_0 - z2_0) (r(z2)/r(z2_0)) with alpha = 1
    res = parallel.contraction_gap(warp.PowerBeta(1.0), 1, 1.0, -2.0, -3.0, 5.0)
    z1, z2 = -math.sqrt(4 + 10), -math.sqrt(9 + 10)
    assert res.gap == pytest.approx(z1 - z2, rel=1e-9)
    assert res.bound == pytest.approx(1.0 * (3.0 / -z2), rel=1e-9)


def test_blowdown_examples():
    assert parallel.blowdown_time(warp.Linear(), 1, 1.0).time == pytest.approx(0.5, abs=1e-8)
    assert parallel.blowdown_time(warp.DoubleExp(), 1, 0.0).time == pytest.approx(1.0, abs=1e-8)
    res = parallel.blowdown_time(warp.PowerBeta(1.0), 1, -2.0)
    assert res.infinite and res.certificate == "linear_lower_bound"
    assert res.sup_log_deriv == pytest.approx(0.5, rel=1e-12)


def test_blowdown_inconclusive():
    # r = exp(-z^2): w = -2z is unbounded below and the slice never exits within the horizon
    with pytest.raises(Inconclusive):
        parallel.blowdown_time(warp.ExpNegZSquared(), 1, -1.0, horizon=1.0)
