import math
from fractions import Fraction

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from warpflow import warp
from warpflow.errors import DomainError, HypothesisError, OrderError, UnsupportedModel

from curvature_oracle import full_norms

FAMILIES = [
    (warp.PowerBeta(0.5), -3.0),
    (warp.PowerBeta(2.0, a=-0.5), -1.7),
    (warp.ExpSqrtK(2.0), 0.4),
    (warp.CosSqrtK(1.5), 0.3),
    (warp.Linear(), 2.5),
    (warp.ExpNegZSquared(), -0.8),
    (warp.DoubleExp(), 0.2),
    (warp.Custom([0.0, 1.0, 2.0], [[1.0, 0.5, 0.25], [1.75, 1.0, 0.25, 0.1]]), 1.3),
]


@pytest.mark.parametrize(
    "w, z, order, expected",
    [
        (warp.PowerBeta(1.0, a=-1.0), -2.0, 1, [0.5, 0.25]),
        (warp.Linear(), 3.0, 2, [3.0, 1.0, 0.0]),
        (warp.ExpNegZSquared(), -1.0, 1, [math.exp(-1), 2 * math.exp(-1)]),
    ],
)
def test_eval_examples(w, z, order, expected):
    np.testing.assert_allclose(w.eval(z, order), expected, rtol=1e-15, atol=1e-15)


def test_eval_errors():
    with pytest.raises(DomainError):
        warp.PowerBeta(0.5).eval(0.5, 1)
    with pytest.raises(DomainError):
        warp.Linear().value(0.0)
    with pytest.raises(OrderError):
        warp.Linear().eval(1.0, warp.DEFAULT_MAX_ORDER + 1)


@pytest.mark.parametrize("w, z", FAMILIES, ids=lambda x: repr(x) if isinstance(x, warp.WarpingFunction) else "")
def test_derivatives_match_finite_differences(w, z):
    # central differences of r are O(h^2): halving h quarters the error
    exact = w.eval(z, 3)

    def fd(h):
        r = lambda s: float(w.value(s))  # noqa: E731
        d1 = (r(z + h) - r(z - h)) / (2 * h)
        d2 = (r(z + h) - 2 * r(z) + r(z - h)) / h**2
        return np.array([d1, d2])

    e1 = np.abs(fd(2e-3) - exact[1:3])
    e2 = np.abs(fd(1e-3) - exact[1:3])
    assert np.all(e2 < 1e-5 * max(1.0, np.max(np.abs(exact))))
    ratio = e1 / np.maximum(e2, 1e-300)
    assert np.all((ratio > 3.0) | (e1 < 1e-9))


@pytest.mark.parametrize("w, z", FAMILIES, ids=lambda x: repr(x) if isinstance(x, warp.WarpingFunction) else "")
def test_positive_on_domain(w, z):
    lo, hi = w.domain
    zs = np.linspace(max(lo, z - 5), min(hi, z + 5), 403)[1:-1]
    assert np.all(w.value(zs) > 0)


def test_ratios_match_sympy():
    z = sp.symbols("z")
    cases = [
        (warp.PowerBeta(0.5), (-z) ** sp.Rational(-1, 2), -3.0),
        (warp.ExpNegZSquared(), sp.exp(-(z**2)), -0.7),
        (warp.DoubleExp(), sp.exp(-sp.exp(-z)), 0.3),
        (warp.CosSqrtK(2.0), sp.cos(sp.sqrt(2) * z), 0.2),
    ]
    for w, expr, z0 in cases:
        got = w.ratios(z0, 4)
        want = [float((sp.diff(expr, z, i) / expr).subs(z, z0)) for i in range(5)]
        np.testing.assert_allclose(got, want, rtol=1e-12)


def test_from_dict_round_trip():
    for w, _ in FAMILIES:
        assert warp.from_dict(w.to_dict()) == w


def test_custom_rejects_nonpositive():
    with pytest.raises(ValueError):
        warp.Custom([0.0, 1.0], [[-1.0, 0.5]])


@pytest.mark.parametrize(
    "w, z, expected",
    [
        (warp.Linear(), 5.0, 0.0),
        (warp.CosSqrtK(2.0), 0.5, 2.0),
        (warp.CosSqrtK(0.5), -1.9, 0.5),
        (warp.ExpSqrtK(3.0), 1.2, -3.0),
    ],
)
def test_gauss_curvature_examples(w, z, expected):
    assert abs(warp.gauss_curvature(w, z) - expected) <= 1e-12


@pytest.mark.parametrize(
    "w, z, sec_tangent, sec_mixed",
    [
        (warp.Linear(), 2.0, -0.25, 0.0),
        (warp.PowerBeta(1.0), -10.0, -1 / 100, -2 / 100),
        (warp.ExpSqrtK(1.0), 0.0, -1.0, -1.0),
    ],
)
def test_curvature_components_examples(w, z, sec_tangent, sec_mixed):
    c = warp.curvature_components(w, 2, z)
    assert c.sec_tangent == pytest.approx(sec_tangent, abs=1e-15)
    assert c.sec_mixed == pytest.approx(sec_mixed, abs=1e-15)


def test_curvature_components_errors():
    with pytest.raises(UnsupportedModel):
        warp.curvature_components(warp.Linear(), 2, 1.0, model="hyperbolic")
    with pytest.raises(DomainError):
        warp.curvature_components(warp.Linear(), 2, -1.0)


@pytest.mark.parametrize(
    "fibre, n, r_expr_fn, w, z0",
    [
        ("flat", 2, lambda z: (-z) ** sp.Rational(-1, 2), warp.PowerBeta(0.5), -3.0),
        ("flat", 3, lambda z: sp.exp(-(z**2)), warp.ExpNegZSquared(), -0.6),
        ("sphere", 2, lambda z: (-z) ** sp.Rational(-1, 4), warp.PowerBeta(0.25), -2.0),
        ("sphere", 3, lambda z: sp.exp(z / 2), warp.ExpSqrtK(0.25), 0.3),
    ],
)
def test_curvature_norms_against_symbolic_tensor(fibre, n, r_expr_fn, w, z0):
    # independent oracle: full Riemann tensor and its covariant derivative from the metric
    z = sp.symbols("z", real=True)
    point = [0.7] * n + [z0]
    r2, d2, ric = full_norms(r_expr_fn(z), z, fibre, n, point)
    c = warp.curvature_components(w, n, z0, model=fibre)
    assert 4 * c.norm_R**2 == pytest.approx(r2, rel=1e-10)
    assert 4 * c.norm_gradR**2 == pytest.approx(d2, rel=1e-10)
    ar = warp.ambient_ricci(w, n, z0, model=fibre)
    np.testing.assert_allclose(ric[:n], ar.ric_tangent, rtol=1e-10)
    assert ric[n] == pytest.approx(ar.ric_z, rel=1e-10)


def test_ambient_ricci_examples():
    assert warp.ambient_ricci(warp.ExpSqrtK(1.0), 2, 0.0).ric_z == pytest.approx(-2.0)
    assert warp.ambient_ricci(warp.Linear(), 3, 1.0).ric_z == 0.0
    assert warp.ambient_ricci(warp.ExpSqrtK(1.0), 2, 0.0, model="sphere").ric_tangent == pytest.approx(-1.0)


GRID = np.linspace(-100.0, -1.0, 2002)[1:-1]


@pytest.mark.parametrize("beta, ok", [(0.25, True), (0.5, True), (1.0, True), (2.0, False)])
def test_beta_family_convexity(beta, ok):
    rep = warp.check_conditions(warp.PowerBeta(beta), GRID, 1.0, 0.0)
    assert (rep.rr2_margin >= 0) == ok
    # closed form beta (1 - beta) (-z)^(-2 (beta + 1)), minimized at the far end of the grid
    zs = GRID
    closed = beta * (1 - beta) * (-zs) ** (-2 * (beta + 1))
    assert rep.rr2_margin == pytest.approx(float(np.min(closed)), rel=1e-9, abs=1e-300)


def test_hyperbolic_convexity_fails():
    zs = np.linspace(-3, 3, 101)
    rep = warp.check_conditions(warp.ExpSqrtK(1.0), zs, 1.0, 0.0)
    assert rep.rr2_margin == pytest.approx(float(np.min(-np.exp(2 * zs))))
    assert rep.rr2_margin < 0


@pytest.mark.parametrize("rho", [-0.5, 0.0, 0.3])
def test_condition_report_c(rho):
    rep = warp.check_conditions(warp.PowerBeta(0.25), GRID, 2.0, rho)
    assert rep.c == max(rho, 0.0)


def test_c2_consistent_with_n1_condition():
    for beta in (0.25, 0.5, 1.0, 2.0):
        rep = warp.check_conditions(warp.PowerBeta(beta), GRID, 1.0, 0.0)
        assert rep.c2_margin == rep.rr2_margin


def test_log_gap_equality_case():
    res = warp.log_derivative_gap(warp.PowerBeta(1.0), 1.0, -2.0, -4.0)
    assert res.lhs == pytest.approx(-0.25, abs=1e-15) and res.rhs == pytest.approx(-0.25, abs=1e-15)
    assert res.holds
    # exact arithmetic for w = -1/z
    w1, w2 = Fraction(1, 2), Fraction(1, 4)
    assert w2 - w1 == -(Fraction(2)) * w1 * w2


def test_log_gap_examples():
    assert warp.log_derivative_gap(warp.PowerBeta(0.5), 1.0, -2.0, -3.0).holds
    res = warp.log_derivative_gap(warp.PowerBeta(0.5), 1.0, -2.0, -2.0 - 1e-12)
    assert abs(res.lhs) < 1e-12 and abs(res.rhs) < 1e-12 and res.holds


def test_log_gap_rejects_inadmissible():
    with pytest.raises(HypothesisError):
        warp.log_derivative_gap(warp.PowerBeta(2.0), 1.0, -2.0, -3.0)
    with pytest.raises(ValueError):
        warp.log_derivative_gap(warp.PowerBeta(0.5), 1.0, -3.0, -2.0)


@settings(max_examples=200, deadline=None)
@given(
    beta=st.floats(0.05, 1.0),
    frac=st.floats(0.0, 1.0),
    z1=st.floats(-99.0, -1.01),
    gap=st.floats(1e-6, 50.0),
)
def test_log_gap_property(beta, frac, z1, gap):
    # admissible alpha for (-z)^(-beta): 1 + alpha <= (beta + 1) / beta
    alpha = 1.0 + frac * (1.0 / beta - 1.0)
    z2 = z1 - gap
    res = warp.log_derivative_gap(warp.PowerBeta(beta), alpha, z1, z2)
    assert res.holds
