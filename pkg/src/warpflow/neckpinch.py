"""Loss of the radial-graph property for an axially symmetric flow in R^{n+1} minus the origin.

R^{n+1} minus {0} is the warped product S^n x (0, inf) with metric
z^2 g_S + dz^2, so a hypersurface is a geodesic graph exactly when
Theta = <P/|P|, N> > 0. The initial surface is the radial graph
z = eta(sqrt(1 - w_1^2)) over the sphere: a sphere of radius r0 with a thin
spike of angular half-width ~ eps that reaches out to radius r1 along the x_1 axis.

The flow is computed on the profile curve (x, y), y >= 0, as a parametric
curve whose endpoints sit on the axis:

    X_t = -H N,   N = (y_s, -x_s),   H = kappa + (n - 1) (-x_s) / y,
    kappa = y_ss x_s - x_ss y_s,

for the counterclockwise traversal from the right tip over the top to the
left tip, so that N is the outward normal; H -> n kappa at the tips. Nodes are
periodically redistributed by equidistributing the smoothed monitor
1/r0 + |H| + |kappa|, which concentrates nodes in the neck as it thins.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import ConfigError, DegenerateSegment, InconclusiveRun, PinchDetected, StepTooLarge
from .series import DiagnosticSeries

__all__ = [
    "BumpConfig",
    "ProfileState",
    "ProfileGeometry",
    "build_initial",
    "sphere_profile",
    "geometry",
    "angle_function",
    "angle_min",
    "neck_radius",
    "step",
    "stable_dt",
    "run_counterexample",
    "parameter_search",
    "SEARCH_GRID",
    "WITNESS",
]

PINCH_FRACTION = 1e-3
CFL_DEFAULT = 0.2
CFL_LIMIT = 0.5


def smoothstep5(s):
    """C^2 monotone blend 6 s^5 - 15 s^4 + 10 s^3 clipped to [0, 1]."""
    s = np.clip(s, 0.0, 1.0)
    return s**3 * (10.0 + s * (-15.0 + 6.0 * s))


@dataclass(frozen=True)
class BumpConfig:
    n: int = 2
    eps: float = 0.1
    r0: float = 1.0
    r1: float = 3.0

    def __post_init__(self):
        if self.n < 2:
            raise ConfigError("neckpinch.n", "must be >= 2")
        if not 0 < self.eps < 0.5:
            raise ConfigError("neckpinch.eps", "must lie in (0, 1/2)")
        if not self.r0 > 0:
            raise ConfigError("neckpinch.r0", "must be positive")
        if not self.r1 >= self.r0:
            raise ConfigError("neckpinch.r1", "must be >= r0")

    def eta(self, y):
        """r1 on [0, eps], r0 on [2 eps, 1), quintic blend in between."""
        y = np.asarray(y, dtype=float)
        return self.r1 + (self.r0 - self.r1) * smoothstep5((y - self.eps) / self.eps)

    def radius(self, psi):
        """Distance to the origin as a function of the angle psi from the +x_1 axis."""
        psi = np.asarray(psi, dtype=float)
        return np.where(psi < 0.5 * math.pi, self.eta(np.sin(psi)), self.r0)

    @property
    def degenerate(self) -> bool:
        return self.r1 == self.r0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ProfileState:
    """Profile curve from the right tip (x > 0, y = 0) over the top to the left tip."""

    xs: np.ndarray
    us: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        if len(self.xs) != len(self.us) or len(self.xs) < 5:
            raise ValueError("need matching arrays with at least 5 nodes")


def _resample(xs, ys, n_nodes, weight=None):
    """Nodes equidistributing ``weight`` ds along the polyline (uniform arclength by default)."""
    seg = np.hypot(np.diff(xs), np.diff(ys))
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if weight is None:
        m = s
    else:
        m = np.concatenate([[0.0], np.cumsum(0.5 * (weight[1:] + weight[:-1]) * seg)])
    targets = np.linspace(0.0, m[-1], n_nodes)
    s_new = np.interp(targets, m, s)
    fx = PchipInterpolator(s, xs)
    fy = PchipInterpolator(s, ys)
    x_new, y_new = fx(s_new), fy(s_new)
    y_new[0] = y_new[-1] = 0.0
    return x_new, np.maximum(y_new, 0.0)


def build_initial(cfg: BumpConfig, n_nodes: int, samples: int = 200_001) -> ProfileState:
    """Sample the radial graph densely in the polar angle and place nodes by the monitor.

    Raises ConfigError if x_1 is not strictly increasing in w_1 = cos(psi) on
    the sample grid, which is the one-to-one correspondence needed to write the
    surface as a profile over the axis.
    """
    omega = np.linspace(-1.0, 1.0, samples)
    x1 = np.where(omega <= 0, cfg.r0 * omega, cfg.eta(np.sqrt(np.clip(1 - omega**2, 0, 1))) * omega)
    if np.min(np.diff(x1)) <= 0:
        raise ConfigError("neckpinch.eps", "x_1 is not monotone in w_1; the blend is too steep for the grid")
    # dense sampling in psi, refined where the radius varies
    psi = np.linspace(0.0, math.pi, samples)
    pe = np.arcsin(np.clip([cfg.eps, 2 * cfg.eps], 0, 1))
    psi = np.union1d(psi, np.linspace(pe[0], pe[1], samples))
    rad = cfg.radius(psi)
    xs, ys = rad * np.cos(psi), rad * np.sin(psi)
    # polyline length weighting by curvature estimate from the polar sampling
    p = ProfileState(*_resample(xs, ys, max(4 * n_nodes, 2001)))
    p = ProfileState(*_resample(p.xs, p.us, max(4 * n_nodes, 2001), _monitor(p, cfg.n, cfg.r0)))
    for _ in range(3):
        p = ProfileState(*_resample(p.xs, p.us, n_nodes, _monitor(p, cfg.n, cfg.r0)))
    return p


def sphere_profile(radius: float, n_nodes: int, center: float = 0.0) -> ProfileState:
    """Round sphere of the given radius centred at (center, 0) on the axis."""
    phi = np.linspace(0.0, math.pi, n_nodes)
    xs = center + radius * np.cos(phi)
    ys = radius * np.sin(phi)
    ys[0] = ys[-1] = 0.0
    return ProfileState(xs, ys)


# ---------------------------------------------------------------------------
# geometry
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProfileGeometry:
    ds: np.ndarray  # segment lengths
    tangent: np.ndarray  # (2, N) unit tangent
    normal: np.ndarray  # (2, N) outward unit normal
    kappa: np.ndarray
    H: np.ndarray
    A2: np.ndarray
    theta: np.ndarray  # <P/|P|, N>


def _ghosted(p: ProfileState):
    """Reflect across the axis at both tips."""
    x = np.concatenate([[p.xs[1]], p.xs, [p.xs[-2]]])
    y = np.concatenate([[-p.us[1]], p.us, [-p.us[-2]]])
    return x, y


def geometry(p: ProfileState, n: int) -> ProfileGeometry:
    x, y = _ghosted(p)
    dxp, dyp = np.diff(x), np.diff(y)
    ds = np.hypot(dxp, dyp)
    if np.min(ds[1:-1]) <= 1e-15 * np.mean(ds):
        raise DegenerateSegment("adjacent profile nodes coincide")
    hp, hm = ds[1:], ds[:-1]
    # non-uniform three-point derivatives in arclength
    fx_p, fx_m = dxp[1:] / hp, dxp[:-1] / hm
    fy_p, fy_m = dyp[1:] / hp, dyp[:-1] / hm
    x_s = (hm * fx_p + hp * fx_m) / (hp + hm)
    y_s = (hm * fy_p + hp * fy_m) / (hp + hm)
    x_ss = 2.0 * (fx_p - fx_m) / (hp + hm)
    y_ss = 2.0 * (fy_p - fy_m) / (hp + hm)
    norm = np.hypot(x_s, y_s)
    tx, ty = x_s / norm, y_s / norm
    kappa = y_ss * tx - x_ss * ty
    yy = p.us
    rot = np.empty_like(kappa)
    rot[1:-1] = -tx[1:-1] / yy[1:-1]
    rot[0], rot[-1] = kappa[0], kappa[-1]
    H = kappa + (n - 1) * rot
    a2 = kappa**2 + (n - 1) * rot**2
    nx, ny = ty, -tx
    rad = np.hypot(p.xs, p.us)
    theta = (p.xs * nx + p.us * ny) / rad
    return ProfileGeometry(ds[1:-1], np.array([tx, ty]), np.array([nx, ny]), kappa, H, a2, theta)


def angle_function(p: ProfileState, n: int = 2, route: str = "euclidean") -> np.ndarray:
    """Theta at each node.

    ``euclidean``: <P/|P|, N>. ``warped``: the E_z component of N in the
    frame {E_z = radial unit, E_psi} of z^2 g_S + dz^2, built from the polar
    components of the same discrete tangent.
    """
    g = geometry(p, n)
    if route == "euclidean":
        return g.theta
    if route == "warped":
        psi = np.arctan2(p.us, p.xs)
        e_psi = np.array([-np.sin(psi), np.cos(psi)])
        t_psi = np.sum(g.tangent * e_psi, axis=0)
        # N is the tangent turned by -90 degrees: E_r -> -E_psi, E_psi -> E_r
        return t_psi
    raise ValueError(f"unknown route {route!r}")


def angle_min(p: ProfileState, n: int = 2) -> float:
    return float(np.min(angle_function(p, n)))


def neck_radius(p: ProfileState) -> float:
    """Smallest interior local minimum of the profile height (nan if there is none)."""
    y = p.us
    interior = (y[1:-1] < y[:-2]) & (y[1:-1] <= y[2:])
    if not np.any(interior):
        return math.nan
    return float(np.min(y[1:-1][interior]))


# ---------------------------------------------------------------------------
# time stepping
# ---------------------------------------------------------------------------


def _smooth(m, passes=4):
    for _ in range(passes):
        m = np.concatenate([[m[0]], 0.25 * m[:-2] + 0.5 * m[1:-1] + 0.25 * m[2:], [m[-1]]])
    return m


def _monitor(p: ProfileState, n: int, r0: float):
    g = geometry(p, n)
    return _smooth(1.0 / r0 + np.abs(g.H) + np.abs(g.kappa))


def stable_dt(p: ProfileState, n: int, cfl: float = CFL_DEFAULT) -> float:
    g = geometry(p, n)
    h = np.minimum(g.ds[1:], g.ds[:-1])
    return cfl * float(np.min(h)) ** 2 / n


def _velocity(p: ProfileState, n: int):
    g = geometry(p, n)
    vx, vy = -g.H * g.normal[0], -g.H * g.normal[1]
    vy[0] = vy[-1] = 0.0
    return vx, vy


def step(
    p: ProfileState,
    n: int,
    dt: float,
    r0: float = 1.0,
    redistribute: bool = True,
    pinch_threshold: float | None = None,
) -> ProfileState:
    """One Heun step of X_t = -H N followed by monitor redistribution."""
    lim = stable_dt(p, n, CFL_LIMIT)
    if dt > lim * (1 + 1e-12):
        raise StepTooLarge(f"dt={dt:.3e} exceeds the stability bound {lim:.3e}")
    vx1, vy1 = _velocity(p, n)
    q = ProfileState(p.xs + dt * vx1, np.maximum(p.us + dt * vy1, 0.0), p.t + dt)
    if np.any(q.us[1:-1] <= 0):
        raise PinchDetected(f"the profile touched the axis at t={q.t:.6g}")
    vx2, vy2 = _velocity(q, n)
    xs = p.xs + 0.5 * dt * (vx1 + vx2)
    ys = p.us + 0.5 * dt * (vy1 + vy2)
    ys[0] = ys[-1] = 0.0
    if np.any(ys[1:-1] <= 0):
        raise PinchDetected(f"the profile touched the axis at t={p.t + dt:.6g}")
    out = ProfileState(xs, ys, p.t + dt)
    if redistribute:
        out = ProfileState(*_resample(out.xs, out.us, len(xs), _monitor(out, n, r0)), out.t)
    if pinch_threshold is not None:
        neck = neck_radius(out)
        if neck < pinch_threshold:
            raise PinchDetected(f"neck radius {neck:.3e} below {pinch_threshold:.3e} at t={out.t:.6g}")
    return out


# ---------------------------------------------------------------------------
# experiment
# ---------------------------------------------------------------------------

NECK_COLUMNS = ["t", "angle_min", "neck_radius", "A_max", "extent", "radius_min"]


def _extent(p: ProfileState) -> float:
    return float(np.max(np.hypot(p.xs, p.us)))


def run_counterexample(
    cfg: BumpConfig,
    n_nodes: int = 400,
    dt: float | None = None,
    t_max: float = 2.0,
    cadence: float = 1e-3,
    cfl: float = CFL_DEFAULT,
    redistribute_every: int = 5,
    stop_on_graph_lost: bool = False,
    shrink_fraction: float = 0.05,
):
    """Flow the bump surface until pinch, shrinkage toward the origin, or t_max.

    Returns (series, verdict). The verdict records the first times of
    GraphLost and PinchDetected and ``ordering_ok`` = graph loss strictly first.
    Raises InconclusiveRun when neither event nor shrinkage happens by t_max.
    """
    p = build_initial(cfg, n_nodes)
    series = DiagnosticSeries(list(NECK_COLUMNS), meta={"config": cfg.to_dict(), "n_nodes": n_nodes})
    threshold = PINCH_FRACTION * cfg.r0
    graph_lost_at = pinched_at = shrunk_at = None

    def record(q):
        g = geometry(q, cfg.n)
        neck = neck_radius(q)
        series.record(
            t=q.t,
            angle_min=float(np.min(g.theta)),
            neck_radius=neck,
            A_max=float(np.sqrt(np.max(g.A2))),
            extent=_extent(q),
            radius_min=float(np.min(np.hypot(q.xs, q.us))),
        )

    record(p)
    next_out = cadence
    count = 0
    while p.t < t_max:
        h = dt if dt is not None else stable_dt(p, cfg.n, cfl)
        h = min(h, t_max - p.t)
        count += 1
        try:
            p = step(p, cfg.n, h, cfg.r0, redistribute=count % redistribute_every == 0, pinch_threshold=threshold)
        except PinchDetected as exc:
            pinched_at = p.t + h
            series.add_event("PinchDetected", pinched_at, detail=str(exc))
            break
        if graph_lost_at is None and angle_min(p, cfg.n) <= 0:
            graph_lost_at = p.t
            series.add_event("GraphLost", p.t, angle_min=angle_min(p, cfg.n))
            record(p)
            if stop_on_graph_lost:
                break
        if _extent(p) < shrink_fraction * cfg.r0:
            shrunk_at = p.t
            series.add_event("Shrunk", p.t, extent=_extent(p))
            record(p)
            break
        if p.t >= next_out - 1e-15:
            record(p)
            next_out += cadence
    verdict = {
        "graph_lost_at": graph_lost_at,
        "pinched_at": pinched_at,
        "shrunk_at": shrunk_at,
        "ordering_ok": bool(
            graph_lost_at is not None and pinched_at is not None and graph_lost_at < pinched_at
        ),
    }
    series.meta["verdict"] = verdict
    if graph_lost_at is None and pinched_at is None and shrunk_at is None and not stop_on_graph_lost:
        raise InconclusiveRun(f"no GraphLost, pinch or shrinkage before t={t_max}; final neck {neck_radius(p)}")
    return series, verdict


SEARCH_GRID = {"eps": (0.05, 0.1, 0.15), "r1_over_r0": (2.0, 3.0, 4.0)}

# Witness found by parameter_search(n=2, r0=1) over SEARCH_GRID; see tests/test_neckpinch.py.
WITNESS = BumpConfig(n=2, eps=0.1, r0=1.0, r1=3.0)


def parameter_search(n: int = 2, r0: float = 1.0, n_nodes: int = 300, grid=SEARCH_GRID, t_max: float = 2.0):
    """Run the bump flow over the grid; returns [(cfg, verdict or error string)]."""
    results = []
    for eps in grid["eps"]:
        for ratio in grid["r1_over_r0"]:
            cfg = BumpConfig(n=n, eps=eps, r0=r0, r1=ratio * r0)
            try:
                _, verdict = run_counterexample(cfg, n_nodes=n_nodes, t_max=t_max)
                results.append((cfg, verdict))
            except InconclusiveRun as exc:
                results.append((cfg, f"inconclusive: {exc}"))
    return results
