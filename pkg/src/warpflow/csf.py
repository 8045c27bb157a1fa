"""Curve shortening flow on S^1 x I with metric r(z)^2 dtheta^2 + dz^2.

Two discretizations share one geometry kernel:

* Lagrangian: nodes (theta_j, z_j) move with velocity -kappa N, optionally
  followed by uniform-arclength redistribution.
* Graph: z_j over the fixed grid theta_j = 2 pi j / N moves vertically with
  z_t = -kappa / Theta, which is the normal motion seen through the graph chart.

Orientation: the unit tangent is (Theta, -<N, E_theta>) in the frame
{E_theta = r^-1 d_theta, E_z}, and N is the tangent rotated by +90 degrees, so
Theta = r dtheta/ds > 0 on a graph traversed with increasing theta. The
curvature is kappa = <D_s N, tangent> = (r'/r) Theta - d(phi)/ds where phi is
the frame angle of the tangent; a horizontal slice has kappa = r'/r.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import integrate, sparse
from scipy.interpolate import CubicSpline

from .errors import DegenerateSegment, DomainError, DomainExit, GraphLost, StepTooLarge
from .series import DiagnosticSeries
from .warp import WarpingFunction

__all__ = [
    "CurveState",
    "CurveDiagnostics",
    "diagnostics",
    "step_lagrangian",
    "step_graph",
    "redistribute",
    "stable_dt",
    "g_function",
    "phi",
    "CSFConfig",
    "run",
    "initial_curve",
    "hausdorff",
]

TWO_PI = 2.0 * math.pi
CFL_DEFAULT = 0.4
# Heun on the 3-point Laplacian is stable up to dt = ds^2 / 2
CFL_LIMIT = 0.5


def _wrap(d):
    return (d + math.pi) % TWO_PI - math.pi


@dataclass(frozen=True)
class CurveState:
    thetas: np.ndarray
    zs: np.ndarray
    t: float = 0.0
    mode: str = "lagrangian"
    tangential_shift: np.ndarray | None = None

    def __post_init__(self):
        if self.mode not in ("lagrangian", "graph"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if len(self.thetas) != len(self.zs):
            raise ValueError("thetas and zs must have equal length")

    @property
    def n_nodes(self) -> int:
        return len(self.zs)

    @classmethod
    def from_graph(cls, zfunc, n_nodes: int, mode: str = "graph", t: float = 0.0) -> "CurveState":
        thetas = TWO_PI * np.arange(n_nodes) / n_nodes
        return cls(thetas, np.asarray(zfunc(thetas), dtype=float) * np.ones(n_nodes), t, mode)

    def with_mode(self, mode: str) -> "CurveState":
        return replace(self, mode=mode, tangential_shift=None)


def initial_curve(initial: dict, n_nodes: int, mode: str = "graph") -> CurveState:
    """Initial graph from a config table.

    kinds: constant {z0}; sinusoid {z0, amplitude, frequency, phase};
    random_fourier {z0, amplitude, modes, seed}.
    """
    kind = initial.get("kind", "sinusoid")
    z0 = float(initial["z0"])
    if kind == "constant":
        return CurveState.from_graph(lambda th: np.full_like(th, z0), n_nodes, mode)
    if kind == "sinusoid":
        amp = float(initial.get("amplitude", 0.0))
        freq = int(initial.get("frequency", 1))
        ph = float(initial.get("phase", 0.0))
        return CurveState.from_graph(lambda th: z0 + amp * np.sin(freq * th + ph), n_nodes, mode)
    if kind == "random_fourier":
        rng = np.random.default_rng(int(initial.get("seed", 0)))
        modes = int(initial.get("modes", 3))
        amp = float(initial.get("amplitude", 0.1))
        a = rng.normal(size=modes) / np.arange(1, modes + 1) ** 2
        b = rng.normal(size=modes) / np.arange(1, modes + 1) ** 2
        scale = amp / max(np.sum(np.abs(a) + np.abs(b)), 1e-300)

        def zf(th):
            k = np.arange(1, modes + 1)[:, None]
            return z0 + scale * (a[:, None] * np.cos(k * th) + b[:, None] * np.sin(k * th)).sum(0)

        return CurveState.from_graph(zf, n_nodes, mode)
    raise ValueError(f"unknown initial curve kind {kind!r}")


# ---------------------------------------------------------------------------
# geometry kernel
# ---------------------------------------------------------------------------


@dataclass
class _Frame:
    r: np.ndarray
    q: np.ndarray  # ratios r^(i)/r, i = 0..2
    sigma: np.ndarray  # |dX/dj| in the warped metric (index parameter)
    theta: np.ndarray  # Theta = <N, E_z>
    n_theta: np.ndarray  # <N, E_theta>
    kappa: np.ndarray
    ds_p: np.ndarray  # metric length of segment j -> j+1
    ds_m: np.ndarray  # metric length of segment j-1 -> j
    dth: np.ndarray  # centered index derivative of theta
    dz: np.ndarray  # centered index derivative of z

    def d_s(self, f):
        return 0.5 * (np.roll(f, -1) - np.roll(f, 1)) / self.sigma

    def lap(self, f):
        fp, fm = np.roll(f, -1), np.roll(f, 1)
        return ((fp - f) / self.ds_p - (f - fm) / self.ds_m) / (0.5 * (self.ds_p + self.ds_m))


def _frame(thetas, zs, w: WarpingFunction) -> _Frame:
    dth_p = _wrap(np.roll(thetas, -1) - thetas)
    dth_m = np.roll(dth_p, 1)
    dz_p = np.roll(zs, -1) - zs
    dz_m = np.roll(dz_p, 1)
    th_u = 0.5 * (dth_p + dth_m)
    z_u = 0.5 * (dz_p + dz_m)
    th_uu = dth_p - dth_m
    z_uu = dz_p - dz_m
    r = w.value(zs)
    q = w.ratios(zs, 2)
    r_mid = w.value(zs + 0.5 * dz_p)
    ds_p = np.sqrt((r_mid * dth_p) ** 2 + dz_p**2)
    if np.min(ds_p) <= 1e-14 * max(np.mean(ds_p), 1e-300):
        raise DegenerateSegment("adjacent nodes coincide")
    ds_m = np.roll(ds_p, 1)
    a = r * th_u
    b = z_u
    sigma = np.hypot(a, b)
    a_u = r * (q[1] * z_u * th_u + th_uu)
    kappa = q[1] * a / sigma - (a * z_uu - b * a_u) / sigma**3
    return _Frame(r, q, sigma, a / sigma, -b / sigma, kappa, ds_p, ds_m, th_u, z_u)


def _safe_frame(thetas, zs, w):
    try:
        return _frame(thetas, zs, w)
    except DomainError as exc:
        raise DomainExit(str(exc)) from exc


@dataclass(frozen=True)
class CurveDiagnostics:
    ds: np.ndarray
    kappa: np.ndarray
    theta_angle: np.ndarray
    n_theta: np.ndarray
    v: np.ndarray  # nan where Theta <= 0
    ds_kappa: dict
    extremes: dict
    z: np.ndarray
    w: np.ndarray
    r2_ratio: np.ndarray  # r''/r at the nodes


def phi(v, k):
    """phi(v) = v^2 / (1 - k v^2)."""
    return v**2 / (1.0 - k * v**2)


def diagnostics(c: CurveState, w: WarpingFunction, m_max: int = 3, k: float | None = None) -> CurveDiagnostics:
    """Geometric diagnostics of a curve state; ``k`` defaults to 1 / (2 max v^2)."""
    if m_max > 4:
        raise ValueError("m_max <= 4")
    fr = _safe_frame(c.thetas, c.zs, w)
    graph = np.all(fr.theta > 0)
    v = np.where(fr.theta > 0, 1.0 / np.where(fr.theta > 0, fr.theta, 1.0), np.nan)
    dsk = {}
    f = fr.kappa
    for m in range(1, m_max + 1):
        f = fr.d_s(f)
        dsk[m] = f
    extremes = {
        "theta_min": float(np.min(fr.theta)),
        "v_max": float(np.max(v)) if graph else math.inf,
        "kappa_max_abs": float(np.max(np.abs(fr.kappa))),
    }
    if graph:
        kk = 1.0 / (2.0 * extremes["v_max"] ** 2) if k is None else k
        extremes["g_max"] = float(np.max(phi(v, kk) * fr.kappa**2))
    else:
        extremes["g_max"] = math.nan
    for m, arr in dsk.items():
        extremes[f"dskappa{m}_max"] = float(np.max(np.abs(arr)))
    return CurveDiagnostics(
        ds=fr.ds_p,
        kappa=fr.kappa,
        theta_angle=fr.theta,
        n_theta=fr.n_theta,
        v=v,
        ds_kappa=dsk,
        extremes=extremes,
        z=np.asarray(c.zs),
        w=fr.q[1],
        r2_ratio=fr.q[2],
    )


def g_function(d: CurveDiagnostics, k: float) -> np.ndarray:
    """g = phi(v) kappa^2 with phi(v) = v^2 / (1 - k v^2)."""
    if np.any(~np.isfinite(d.v)):
        raise GraphLost("v is undefined where Theta <= 0")
    if np.any(k * d.v**2 >= 1):
        raise ValueError("k v^2 must stay below 1")
    return phi(d.v, k) * d.kappa**2


# ---------------------------------------------------------------------------
# time stepping
# ---------------------------------------------------------------------------


def stable_dt(c: CurveState, w: WarpingFunction, cfl: float = CFL_DEFAULT) -> float:
    """cfl * min(ds)^2, the explicit diffusion bound."""
    fr = _safe_frame(c.thetas, c.zs, w)
    return cfl * float(np.min(np.minimum(fr.ds_p, fr.sigma))) ** 2


def _check_dt(fr: _Frame, dt: float):
    lim = CFL_LIMIT * float(np.min(np.minimum(fr.ds_p, fr.sigma))) ** 2
    if dt > lim * (1 + 1e-12):
        raise StepTooLarge(f"dt={dt:.3e} exceeds {CFL_LIMIT} min(ds)^2 = {lim:.3e}")


def _normal_velocity(thetas, zs, w):
    fr = _safe_frame(thetas, zs, w)
    # -kappa N with N = <N,E_theta> E_theta + Theta E_z; E_theta = d_theta / r
    return fr, -fr.kappa * fr.n_theta / fr.r, -fr.kappa * fr.theta


def _inside(w, zs):
    if not np.all(w.contains(zs)):
        raise DomainExit("a node left the warping domain")


def redistribute(thetas, zs, w: WarpingFunction):
    """Uniform metric-arclength reparameterization keeping node 0 fixed.

    Returns (thetas, zs, shift) where shift_j is the arclength each node slid
    along the curve.
    """
    n = len(zs)
    fr = _safe_frame(thetas, zs, w)
    s = np.concatenate([[0.0], np.cumsum(fr.ds_p)])
    length = s[-1]
    lift = thetas[0] + np.concatenate([[0.0], np.cumsum(_wrap(np.diff(thetas)))])
    lift_closed = np.concatenate([lift, [lift[0] + TWO_PI]])
    per_th = lift_closed - TWO_PI * s / length
    per_th[-1] = per_th[0]
    z_closed = np.concatenate([zs, [zs[0]]])
    target = length * np.arange(n) / n
    sp_th = CubicSpline(s, per_th, bc_type="periodic")
    sp_z = CubicSpline(s, z_closed, bc_type="periodic")
    new_th = np.mod(sp_th(target) + TWO_PI * target / length, TWO_PI)
    new_z = sp_z(target)
    return new_th, new_z, target - s[:-1]


def step_lagrangian(c: CurveState, w: WarpingFunction, dt: float, redistribute_nodes: bool = True) -> CurveState:
    """One Heun step of the normal motion -kappa N, then optional redistribution."""
    if c.mode != "lagrangian":
        raise ValueError("step_lagrangian needs a Lagrangian state")
    fr, vt1, vz1 = _normal_velocity(c.thetas, c.zs, w)
    _check_dt(fr, dt)
    th1, z1 = c.thetas + dt * vt1, c.zs + dt * vz1
    _inside(w, z1)
    _, vt2, vz2 = _normal_velocity(th1, z1, w)
    th = np.mod(c.thetas + 0.5 * dt * (vt1 + vt2), TWO_PI)
    z = c.zs + 0.5 * dt * (vz1 + vz2)
    _inside(w, z)
    shift = None
    if redistribute_nodes:
        th, z, shift = redistribute(th, z, w)
        _inside(w, z)
    return CurveState(th, z, c.t + dt, "lagrangian", shift)


def graph_rhs(thetas, zs, w: WarpingFunction):
    """Vertical velocity z_t = -kappa / Theta of a graph over the theta grid."""
    fr = _safe_frame(thetas, zs, w)
    if np.any(fr.theta <= 0):
        raise GraphLost("Theta <= 0 on a graph state")
    return fr, -fr.kappa / fr.theta


def step_graph(c: CurveState, w: WarpingFunction, dt: float) -> CurveState:
    """One Heun step of the graph form of the flow on the fixed theta grid."""
    if c.mode != "graph":
        raise ValueError("step_graph needs a graph state")
    fr, k1 = graph_rhs(c.thetas, c.zs, w)
    _check_dt(fr, dt)
    z1 = c.zs + dt * k1
    _inside(w, z1)
    _, k2 = graph_rhs(c.thetas, z1, w)
    z = c.zs + 0.5 * dt * (k1 + k2)
    _inside(w, z)
    return CurveState(c.thetas, z, c.t + dt, "graph")


def step(c: CurveState, w: WarpingFunction, dt: float, redistribute_nodes: bool = True) -> CurveState:
    if c.mode == "graph":
        return step_graph(c, w, dt)
    return step_lagrangian(c, w, dt, redistribute_nodes)


def hausdorff(a: CurveState, b: CurveState, w: WarpingFunction, refine: int = 8) -> float:
    """Symmetric Hausdorff distance in the (r(z) theta, z)-chart metric.

    Each curve is densified by periodic cubic interpolation and the distance
    is measured with the metric frozen at the pair midpoint, which is adequate
    for the small separations compared here.
    """

    def dense(c):
        th, z, _ = redistribute(c.thetas, c.zs, w)
        n = len(z)
        u = np.arange(n + 1)
        lift = th[0] + np.concatenate([[0.0], np.cumsum(_wrap(np.diff(np.concatenate([th, th[:1]]))))])
        per = lift - TWO_PI * u / n
        per[-1] = per[0]
        sp_t = CubicSpline(u, per, bc_type="periodic")
        sp_z = CubicSpline(u, np.concatenate([z, z[:1]]), bc_type="periodic")
        uu = np.linspace(0, n, refine * n, endpoint=False)
        return sp_t(uu) + TWO_PI * uu / n, sp_z(uu)

    ta, za = dense(a)
    tb, zb = dense(b)

    def directed(t1, z1, t2, z2):
        # distance from each point of curve 1 to the polyline of curve 2, in
        # the chart (r theta, z) with r frozen at the query point
        m = len(z2)
        best = np.empty_like(z1)
        for i in range(0, len(z1), 256):
            sl = slice(i, i + 256)
            rq = w.value(z1[sl])[:, None]
            dx = rq * _wrap(t2[None, :] - t1[sl, None])
            dy = z2[None, :] - z1[sl, None]
            k = np.argmin(np.hypot(dx, dy), axis=1)
            rows = np.arange(len(k))
            out = np.full(len(k), np.inf)
            for nb in ((k - 1) % m, (k + 1) % m):
                ax, ay = dx[rows, k], dy[rows, k]
                ex, ey = dx[rows, nb] - ax, dy[rows, nb] - ay
                lam = np.clip(-(ax * ex + ay * ey) / (ex**2 + ey**2), 0.0, 1.0)
                out = np.minimum(out, np.hypot(ax + lam * ex, ay + lam * ey))
            best[sl] = out
        return best.max()

    return float(max(directed(ta, za, tb, zb), directed(tb, zb, ta, za)))


# ---------------------------------------------------------------------------
# experiment driver
# ---------------------------------------------------------------------------


@dataclass
class CSFConfig:
    warping: WarpingFunction
    initial: dict
    n_nodes: int = 128
    mode: str = "graph"
    t_end: float = 1.0
    cadence: float = 0.01
    cfl: float = CFL_DEFAULT
    dt: float | None = None
    integrator: str = "explicit"  # or "bdf" (graph mode only)
    rtol: float = 1e-9
    atol: float = 1e-11
    redistribute: bool = True
    kappa_threshold: float = 1e3
    m_max: int = 3
    stop_z_max_below: float | None = None
    snapshot_times: tuple = ()


def csf_columns(m_max: int) -> list[str]:
    return (
        ["t", "theta_min", "v_max", "kappa_max", "g_max"]
        + [f"dskappa{m}_max" for m in range(1, m_max + 1)]
        + ["z_min", "z_max"]
    )


class _Recorder:
    def __init__(self, cfg: CSFConfig):
        self.cfg = cfg
        self.series = DiagnosticSeries(csf_columns(cfg.m_max))
        self.sup_v = 0.0
        self.snapshots: dict[float, CurveState] = {}
        self.stop = False

    def __call__(self, c: CurveState):
        cfg = self.cfg
        d = diagnostics(c, cfg.warping, cfg.m_max)
        ex = d.extremes
        if ex["theta_min"] <= 0:
            self.series.add_event("GraphLost", c.t, theta_min=ex["theta_min"])
            self.stop = True
            g_max = math.nan
        else:
            self.sup_v = max(self.sup_v, ex["v_max"])
            g_max = float(np.max(g_function(d, 1.0 / (2.0 * self.sup_v**2))))
        row = {
            "t": c.t,
            "theta_min": ex["theta_min"],
            "v_max": ex["v_max"],
            "kappa_max": ex["kappa_max_abs"],
            "g_max": g_max,
            "z_min": float(np.min(c.zs)),
            "z_max": float(np.max(c.zs)),
        }
        for m in range(1, cfg.m_max + 1):
            row[f"dskappa{m}_max"] = ex[f"dskappa{m}_max"]
        self.series.record(**row)
        if ex["kappa_max_abs"] > cfg.kappa_threshold:
            self.series.add_event("CurvatureBlowup", c.t, kappa_max=ex["kappa_max_abs"])
            self.stop = True
        if cfg.stop_z_max_below is not None and row["z_max"] < cfg.stop_z_max_below:
            self.stop = True
        for ts in cfg.snapshot_times:
            if abs(ts - c.t) <= 1e-12 * max(1.0, ts):
                self.snapshots[ts] = c


def _cadence_times(cfg: CSFConfig):
    count = int(math.floor(cfg.t_end / cfg.cadence + 1e-9))
    times = [cfg.cadence * i for i in range(1, count + 1)]
    if not times or times[-1] < cfg.t_end - 1e-12:
        times.append(cfg.t_end)
    extra = [t for t in cfg.snapshot_times if 0 < t < cfg.t_end]
    return sorted(set(times) | set(extra))


def _run_explicit(c: CurveState, cfg: CSFConfig, rec: _Recorder):
    w = cfg.warping
    for target in _cadence_times(cfg):
        while c.t < target - 1e-14 * max(1.0, target):
            dt = cfg.dt if cfg.dt is not None else stable_dt(c, w, cfg.cfl)
            if target - c.t < dt * (1 + 1e-9):
                dt = target - c.t
            try:
                c = step(c, w, dt, cfg.redistribute)
            except DomainExit as exc:
                rec.series.add_event("DomainExit", c.t, detail=str(exc))
                return c
        c = replace(c, t=target)
        rec(c)
        if rec.stop:
            break
    return c


def _periodic_tridiagonal(n):
    main = np.ones(n)
    return sparse.diags([main[:-1], main, main[:-1], [1.0], [1.0]], [-1, 0, 1, n - 1, -(n - 1)], format="csc")


def _run_bdf(c: CurveState, cfg: CSFConfig, rec: _Recorder):
    if c.mode != "graph":
        raise ValueError("the bdf integrator is only available in graph mode")
    w = cfg.warping
    thetas = c.thetas

    def fun(_t, z):
        return graph_rhs(thetas, z, w)[1]

    times = _cadence_times(cfg)
    t0 = c.t
    z = c.zs
    for target in times:
        sol = integrate.solve_ivp(
            fun,
            (t0, target),
            z,
            method="BDF",
            rtol=cfg.rtol,
            atol=cfg.atol,
            jac_sparsity=_periodic_tridiagonal(len(z)),
        )
        if not sol.success:
            rec.series.add_event("DomainExit", t0, detail=sol.message)
            break
        z, t0 = sol.y[:, -1], target
        c = CurveState(thetas, z, target, "graph")
        rec(c)
        if rec.stop:
            break
    return c


def run(cfg: CSFConfig, initial_state: CurveState | None = None):
    """Step the configured solver and record extrema at each cadence time.

    Returns (series, final_state, snapshots).
    """
    c = initial_state if initial_state is not None else initial_curve(cfg.initial, cfg.n_nodes, cfg.mode)
    rec = _Recorder(cfg)
    rec(c)
    if not rec.stop:
        if cfg.integrator == "bdf":
            c = _run_bdf(c, cfg, rec)
        elif cfg.integrator == "explicit":
            c = _run_explicit(c, cfg, rec)
        else:
            raise ValueError(f"unknown integrator {cfg.integrator!r}")
    rec.series.meta.update({"final_t": c.t, "sup_v": rec.sup_v})
    return rec.series, c, rec.snapshots
