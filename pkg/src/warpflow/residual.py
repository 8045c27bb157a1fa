"""Evolution equations and inequalities checked as residuals along computed flows.

A window is a run of K >= 5 snapshots spaced by a fixed number of time steps.
At each interior snapshot (two excluded at each end) the heat operator
(d_t - Delta) is assembled from

* a centred time difference at fixed node index, corrected to a material
  derivative by subtracting tau d_s f, where tau is the tangential part of the
  index velocity (zero for pure normal motion, non-zero on a graph grid or after
  redistribution), and
* the intrinsic Laplacian of the discrete curve or symmetric hypersurface.

Equalities are reported as sup-norm residuals with an observed order under
(N, dt ~ N^-2) refinement; inequalities as signed margins (>= 0 means it holds).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import csf, mcf_sym
from .errors import GraphLost, HypothesisError, WindowTooShort
from .warp import WarpingFunction, check_conditions, curvature_components

__all__ = [
    "Window",
    "ResidualReport",
    "csf_window",
    "mcf_window",
    "evaluate",
    "residual_theta_n1",
    "residual_v",
    "residual_kappa_sq",
    "residual_theta_n",
    "residual_inequalities",
    "refinement_study",
    "observed_order",
    "EQUALITIES",
    "INEQUALITIES",
]

EQUALITIES = ("ThetaN1", "ThetaN", "Vn1", "Vn", "KappaSq")
INEQUALITIES = ("ASq_bound", "G_bound_n1", "G_bound_n", "F_bound")
ONE_SIDED_TOL = 1e-6
MIN_SNAPSHOTS = 5


@dataclass
class Window:
    kind: str  # "csf" | "mcf"
    warping: WarpingFunction
    states: list
    times: np.ndarray
    n_nodes: int
    dt: float
    alpha: float | None = None

    def __post_init__(self):
        if len(self.states) < MIN_SNAPSHOTS:
            raise WindowTooShort(f"need at least {MIN_SNAPSHOTS} snapshots, got {len(self.states)}")

    @property
    def n(self) -> int:
        return 1 if self.kind == "csf" else self.states[0].model.n


@dataclass
class ResidualReport:
    equation: str
    grid_levels: list  # (N, dt) pairs
    residual_norms: list  # equalities: sup |residual|; inequalities: worst normalized violation
    observed_order: float | None
    one_sided: bool
    margins: list = field(default_factory=list)  # inequalities: min signed margin per level
    tolerance: float = ONE_SIDED_TOL

    @property
    def passed(self) -> bool:
        if self.one_sided:
            return all(m >= -self.tolerance for m in self.residual_norms)
        return self.observed_order is not None and self.observed_order >= 1.5

    def to_dict(self) -> dict:
        return {
            "equation": self.equation,
            "grid_levels": [[int(n), float(dt)] for n, dt in self.grid_levels],
            "residual_norms": [float(x) for x in self.residual_norms],
            "observed_order": None if self.observed_order is None else float(self.observed_order),
            "one_sided": self.one_sided,
            "margins": [float(x) for x in self.margins],
            "passed": self.passed,
        }


# ---------------------------------------------------------------------------
# window builders
# ---------------------------------------------------------------------------


def _advance(state, stepper, t_target, dt):
    while state.t < t_target - 1e-14 * max(1.0, t_target):
        h = min(dt, t_target - state.t)
        state = stepper(state, h)
    return state


def csf_window(
    w: WarpingFunction,
    initial: dict,
    n_nodes: int,
    mode: str = "graph",
    t0: float = 0.01,
    n_snapshots: int = 7,
    snap_steps: int = 4,
    dt_coef: float | None = None,
    redistribute: bool = False,
) -> Window:
    """Snapshots of a curve flow after time t0, dt = dt_coef / N^2.

    ``dt_coef`` defaults to 0.2 (2 pi min r)^2 evaluated on the initial curve,
    so the time step is a fixed multiple of N^-2 across refinement levels.
    """
    if n_snapshots < MIN_SNAPSHOTS:
        raise WindowTooShort(f"need at least {MIN_SNAPSHOTS} snapshots")
    c = csf.initial_curve(initial, n_nodes, mode)
    if dt_coef is None:
        dt_coef = default_dt_coef(w, csf.initial_curve(initial, 64, mode).zs, 2 * math.pi)
    dt = dt_coef / n_nodes**2

    def stepper(s, h):
        return csf.step(s, w, h, redistribute)

    c = _advance(c, stepper, t0, dt)
    states = [c]
    for _ in range(n_snapshots - 1):
        c = _advance(c, stepper, c.t + snap_steps * dt, dt)
        states.append(c)
    return Window("csf", w, states, np.array([s.t for s in states]), n_nodes, dt)


def default_dt_coef(w, zs, period, cfl=0.2, n=1):
    r_min = float(np.min(w.value(zs)))
    return cfl * (period * r_min) ** 2 / n


def mcf_window(
    w: WarpingFunction,
    model: mcf_sym.ModelM,
    initial: dict,
    n_nodes: int,
    t0: float = 0.01,
    n_snapshots: int = 7,
    snap_steps: int = 4,
    dt_coef: float | None = None,
    alpha: float | None = None,
) -> Window:
    """Snapshots of the symmetric graph flow after time t0, dt = dt_coef / N^2."""
    if n_snapshots < MIN_SNAPSHOTS:
        raise WindowTooShort(f"need at least {MIN_SNAPSHOTS} snapshots")
    s = mcf_sym.initial_state(model, initial, n_nodes)
    if dt_coef is None:
        zs = mcf_sym.initial_state(model, initial, 64).zs
        dt_coef = default_dt_coef(w, zs, model.period, n=1 if model.kind == "torus" else model.n)
    dt = dt_coef / n_nodes**2

    def stepper(st, h):
        return mcf_sym.step(st, w, h)

    s = _advance(s, stepper, t0, dt)
    states = [s]
    for _ in range(n_snapshots - 1):
        s = _advance(s, stepper, s.t + snap_steps * dt, dt)
        states.append(s)
    return Window("mcf", w, states, np.array([x.t for x in states]), n_nodes, dt, alpha)


# ---------------------------------------------------------------------------
# pointwise geometry at a snapshot
# ---------------------------------------------------------------------------


@dataclass
class _Geo:
    q: np.ndarray  # r^(i)/r, i = 0..2
    r: np.ndarray
    theta: np.ndarray
    d_s: object  # arclength derivative operator
    lap: object  # intrinsic Laplacian
    z_s: np.ndarray
    tau: np.ndarray | None = None
    kappa: np.ndarray | None = None  # n = 1
    H: np.ndarray | None = None  # n >= 2
    A2: np.ndarray | None = None
    nablaA2: np.ndarray | None = None
    ric_nn: np.ndarray | None = None
    norm_r: np.ndarray | None = None
    norm_gr: np.ndarray | None = None


def _geo(win: Window, k: int) -> _Geo:
    w = win.warping
    st = win.states[k]
    if win.kind == "csf":
        fr = csf._frame(st.thetas, st.zs, w)
        if np.any(fr.theta <= 0):
            raise GraphLost(f"Theta <= 0 at t={st.t}")
        q = w.ratios(st.zs, 3)
        return _Geo(q, fr.r, fr.theta, fr.d_s, fr.lap, fr.dz / fr.sigma, kappa=fr.kappa)
    d = mcf_sym.mean_curvature(st, w)
    h, m = st.h, st.model
    q = w.ratios(st.zs, 3)

    def d_s(f):
        return mcf_sym._dx(m, f, h) / d.sigma

    def lap(f):
        return mcf_sym.laplacian(st, w, f, d.sigma)

    cc = curvature_components(w, m.n, st.zs, m.fibre)
    return _Geo(
        q,
        w.value(st.zs),
        d.theta_angle,
        d_s,
        lap,
        mcf_sym._dx(m, st.zs, h) / d.sigma,
        H=d.H,
        A2=d.A_norm2,
        nablaA2=d.nablaA2,
        ric_nn=d.ric_nn,
        norm_r=cc.norm_R,
        norm_gr=cc.norm_gradR,
    )


def _tangential_speed(win: Window, k: int, g: _Geo) -> np.ndarray:
    """<index velocity, unit tangent> from centred differences of node positions."""
    a, b = win.states[k - 1], win.states[k + 1]
    span = b.t - a.t
    z_t = (b.zs - a.zs) / span
    if win.kind == "csf":
        st = win.states[k]
        th_t = csf._wrap(b.thetas - a.thetas) / span
        fr = csf._frame(st.thetas, st.zs, win.warping)
        return fr.r**2 * th_t * fr.dth / fr.sigma + z_t * fr.dz / fr.sigma
    return z_t * g.z_s


def _heat(win: Window, k: int, g: _Geo, field_fn):
    """(d_t - Delta) of a scalar field at snapshot k, material time derivative."""
    prev = field_fn(_geo(win, k - 1))
    nxt = field_fn(_geo(win, k + 1))
    cur = field_fn(g)
    span = win.times[k + 1] - win.times[k - 1]
    tau = _tangential_speed(win, k, g)
    return (nxt - prev) / span - tau * g.d_s(cur) - g.lap(cur), cur


def _interior(win: Window):
    return range(2, len(win.states) - 2)


def _ricm(win: Window) -> float:
    return win.states[0].model.ric_m if win.kind == "mcf" else 0.0


# ---------------------------------------------------------------------------
# equalities
# ---------------------------------------------------------------------------


def _residual_field(win: Window, equation: str, k: int) -> np.ndarray:
    g = _geo(win, k)
    q = g.q
    w_ = q[1]
    th = g.theta
    if equation == "ThetaN1":
        lhs, _ = _heat(win, k, g, lambda x: x.theta)
        rhs = (q[2] - 2 * q[1] ** 2) * th * (1 - th**2) + (w_ * th - g.kappa) ** 2 * th
    elif equation == "Vn1":
        lhs, v = _heat(win, k, g, lambda x: 1.0 / x.theta)
        rhs = -2.0 / v * g.d_s(v) ** 2 - (q[2] - 2 * q[1] ** 2) * (v - 1 / v) - (w_ * th - g.kappa) ** 2 * v
    elif equation == "KappaSq":
        lhs, _ = _heat(win, k, g, lambda x: x.kappa**2)
        kap = g.kappa
        rhs = -2.0 * g.d_s(kap) ** 2 + 2 * kap**2 * (kap**2 - q[2])
    elif equation == "ThetaN":
        n = win.n
        lhs, _ = _heat(win, k, g, lambda x: x.theta)
        bracket = n * (q[2] - q[1] ** 2) + _ricm(win) / g.r**2
        rhs = (
            2 * w_ * (g.d_s(th) * g.z_s - g.H)
            + g.A2 * th
            + n * w_**2 * th
            + th * (1 - th**2) * bracket
        )
    elif equation == "Vn":
        n = win.n
        lhs, v = _heat(win, k, g, lambda x: 1.0 / x.theta)
        bracket = n * (q[2] - q[1] ** 2) + _ricm(win) / g.r**2
        dv = g.d_s(v)
        rhs = (
            -2.0 / v * dv**2
            + 2 * w_ * dv * g.z_s
            + 2 * w_ * g.H * v**2
            - g.A2 * v
            - n * w_**2 * v
            - bracket * (v - 1 / v)
        )
    else:
        raise ValueError(f"unknown equation {equation!r}")
    return lhs - rhs


def _check_kind(win: Window, equation: str):
    n1 = equation in ("ThetaN1", "Vn1", "KappaSq", "G_bound_n1")
    if n1 and win.kind != "csf":
        raise ValueError(f"{equation} applies to curves (n = 1)")
    if not n1 and win.kind != "mcf":
        raise ValueError(f"{equation} applies to hypersurfaces (n >= 2)")


def residual_norm(win: Window, equation: str) -> float:
    """Max |LHS - RHS| over nodes and interior snapshots."""
    _check_kind(win, equation)
    return float(max(np.max(np.abs(_residual_field(win, equation, k))) for k in _interior(win)))


# ---------------------------------------------------------------------------
# inequalities
# ---------------------------------------------------------------------------


def _phi(v, k):
    return v**2 / (1.0 - k * v**2)


def _sup_v(win: Window) -> float:
    return max(float(np.max(1.0 / _geo(win, k).theta)) for k in range(len(win.states)))


def _visited(win: Window) -> np.ndarray:
    lo = min(float(np.min(s.zs)) for s in win.states)
    hi = max(float(np.max(s.zs)) for s in win.states)
    return np.linspace(lo, hi, 257)


def _inequality_margin(win: Window, which: str, k: int, kconst: float):
    """Signed margin (>= 0 when the inequality holds) and the scale of both sides."""
    g = _geo(win, k)
    q = g.q
    w_ = q[1]
    th = g.theta
    v = 1.0 / th
    if which == "G_bound_n1":
        lhs, gf = _heat(win, k, g, lambda x: _phi(1.0 / x.theta, kconst) * x.kappa**2)
        phi = _phi(v, kconst)
        rhs = (
            -2 * kconst * gf**2
            + 4 * w_ * np.sqrt(phi) / v**3 * gf**1.5
            - ((q[2] - 2 * q[1] ** 2) * (v - 1 / v) * 2 * phi / v**3 + 2 * q[2]) * gf
        )
        margin = rhs - lhs
    elif which == "G_bound_n":
        n = win.n
        lhs, gf = _heat(win, k, g, lambda x: _phi(1.0 / x.theta, kconst) * x.A2)
        phi = _phi(v, kconst)
        bracket = n * (q[2] - q[1] ** 2) + _ricm(win) / g.r**2
        rhs = (
            -2 * kconst * gf**2
            + 4 * math.sqrt(n) * w_ * np.sqrt(phi) / v * gf**1.5
            + 4 * np.sqrt(phi) * g.norm_gr * np.sqrt(gf)
            + (-2 * phi / v**3 * bracket * (v - 1 / v) + 2 * g.ric_nn + 8 * g.norm_r) * gf
        )
        margin = rhs - lhs
    elif which == "ASq_bound":
        lhs, a2 = _heat(win, k, g, lambda x: x.A2)
        rhs = (
            -2 * g.nablaA2
            + 2 * a2 * (a2 + g.ric_nn)
            + 8 * a2 * g.norm_r
            + 4 * np.sqrt(a2) * g.norm_gr
        )
        margin = rhs - lhs
    elif which == "F_bound":
        n = win.n
        rho = win.states[0].model.rho
        c = max(rho, 0.0)
        lhs, f = _heat(win, k, g, lambda x: x.theta**2)
        df = g.d_s(f)
        rhs = 2 * w_ * df * g.z_s - df**2 / (2 * f) + 2 * n * (1 - f) * (w_**2 * (win.alpha * f - 1) + c * f / g.r**2)
        margin = lhs - rhs
    else:
        raise ValueError(f"unknown inequality {which!r}")
    scale = np.maximum(np.maximum(np.abs(lhs), np.abs(rhs)), 1.0)
    return margin, scale


def _check_hypotheses(win: Window, which: str):
    w = win.warping
    grid = _visited(win)
    if which in ("G_bound_n1", "G_bound_n"):
        if np.any(w.log_derivative(grid) <= 0):
            raise HypothesisError("the g inequalities are stated for r' > 0 on the visited range")
    if which == "F_bound":
        if win.alpha is None:
            raise HypothesisError("F_bound needs alpha")
        model = win.states[0].model
        rep = check_conditions(w, grid, win.alpha, model.rho)
        if win.alpha <= 1 or not rep.c1_holds or rep.c2_margin < -1e-12:
            raise HypothesisError(f"(C1)/(C2) fail on the visited range: {rep.to_dict()}")


def inequality_margin(win: Window, which: str) -> tuple[float, float]:
    """(worst normalized margin, worst raw margin) over nodes and interior snapshots."""
    _check_kind(win, which)
    _check_hypotheses(win, which)
    kconst = 1.0 / (2.0 * _sup_v(win) ** 2)
    worst_norm, worst_raw = math.inf, math.inf
    for k in _interior(win):
        margin, scale = _inequality_margin(win, which, k, kconst)
        worst_norm = min(worst_norm, float(np.min(margin / scale)))
        worst_raw = min(worst_raw, float(np.min(margin)))
    return worst_norm, worst_raw


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


def observed_order(levels, norms) -> float | None:
    """Least-squares slope of -log(residual) against log(N)."""
    ns = np.array([lv[0] for lv in levels], dtype=float)
    rs = np.array(norms, dtype=float)
    if len(ns) < 2 or np.any(rs <= 0) or not np.all(np.isfinite(rs)):
        return None
    slope = np.polyfit(np.log(ns), np.log(rs), 1)[0]
    return float(-slope)


def evaluate(windows: list[Window], equation: str) -> ResidualReport:
    """Report for one equation over windows at increasing resolution."""
    levels = [(win.n_nodes, win.dt) for win in windows]
    if equation in EQUALITIES:
        norms = [residual_norm(win, equation) for win in windows]
        return ResidualReport(equation, levels, norms, observed_order(levels, norms), False)
    if equation in INEQUALITIES:
        pairs = [inequality_margin(win, equation) for win in windows]
        return ResidualReport(
            equation, levels, [p[0] for p in pairs], None, True, margins=[p[1] for p in pairs]
        )
    raise ValueError(f"unknown equation {equation!r}")


def residual_theta_n1(windows: list[Window]) -> ResidualReport:
    return evaluate(windows, "ThetaN1")


def residual_theta_n(windows: list[Window]) -> ResidualReport:
    return evaluate(windows, "ThetaN")


def residual_v(windows: list[Window]) -> ResidualReport:
    return evaluate(windows, "Vn1" if windows[0].kind == "csf" else "Vn")


def residual_kappa_sq(windows: list[Window]) -> ResidualReport:
    return evaluate(windows, "KappaSq")


def residual_inequalities(windows: list[Window], which: str) -> ResidualReport:
    if which not in INEQUALITIES:
        raise ValueError(f"unknown inequality {which!r}")
    return evaluate(windows, which)


def refinement_study(builder, levels=(128, 256, 512), equations=None) -> list[ResidualReport]:
    """Build one window per N via ``builder(N)`` and report every applicable equation."""
    windows = [builder(n) for n in levels]
    if equations is None:
        if windows[0].kind == "csf":
            equations = ("ThetaN1", "Vn1", "KappaSq", "G_bound_n1")
        else:
            equations = ("ThetaN", "Vn", "ASq_bound", "G_bound_n") + (
                ("F_bound",) if windows[0].alpha is not None else ()
            )
    return [evaluate(windows, eq) for eq in equations]
