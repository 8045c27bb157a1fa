"""Mean curvature flow of symmetric graphs z = u(x) over M^n, n >= 2.

Two fibres are supported:

* FlatTorus(n): u depends on one periodic coordinate x in [0, 2 pi).
* RoundSphere(n): u depends on the polar angle x in [0, pi]; the grid is
  cell-centred with even reflection at both poles.

The ambient metric is r(z)^2 g_M + dz^2. The profile curve lives in the
(x, z) plane with metric r^2 dx^2 + dz^2 and carries the principal curvature
kappa_1 (same convention as the curve flow: a slice has kappa_1 = r'/r). The
remaining n - 1 principal directions are tangent to the orbits, with

    kappa_2 = Theta r'/r - u_x cot(x) / (r sigma)    (sphere)
    kappa_2 = Theta r'/r                             (torus)

where sigma = sqrt(r^2 + u_x^2) and Theta = r / sigma.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    DegenerateGrid,
    DomainError,
    DomainExit,
    HypothesisError,
    InitialConditionError,
    StepTooLarge,
)
from .series import DiagnosticSeries
from .warp import WarpingFunction, ambient_ricci, check_conditions, fibre_ricci

__all__ = [
    "ModelM",
    "FlatTorus",
    "RoundSphere",
    "SymmetricGraphState",
    "HypersurfaceDiagnostics",
    "mean_curvature",
    "graph_velocity",
    "step",
    "stable_dt",
    "laplacian",
    "MCFConfig",
    "theorem2_experiment",
    "initial_state",
]

CFL_DEFAULT = 0.4
CFL_LIMIT = 0.5


@dataclass(frozen=True)
class ModelM:
    kind: str  # "torus" | "sphere"
    n: int
    rho: float

    def __post_init__(self):
        if self.kind not in ("torus", "sphere"):
            raise ValueError(f"unknown fibre kind {self.kind!r}")
        if self.n < 2:
            raise ValueError("n must be >= 2")
        # (C0): Ric_M >= n rho g_M
        if n_rho_max(self.kind, self.n) < self.n * self.rho - 1e-15:
            raise HypothesisError(f"rho={self.rho} violates Ric_M >= n rho g_M for {self.kind}")

    @property
    def fibre(self) -> str:
        return "flat" if self.kind == "torus" else "sphere"

    @property
    def ric_m(self) -> float:
        return fibre_ricci(self.fibre, self.n)

    @property
    def period(self) -> float:
        return 2.0 * math.pi if self.kind == "torus" else math.pi

    def to_dict(self) -> dict:
        return {"kind": self.kind, "n": self.n, "rho": self.rho}


def n_rho_max(kind: str, n: int) -> float:
    return 0.0 if kind == "torus" else float(n - 1)


def FlatTorus(n: int, rho: float = 0.0) -> ModelM:
    return ModelM("torus", n, rho)


def RoundSphere(n: int, rho: float | None = None) -> ModelM:
    return ModelM("sphere", n, (n - 1) / n if rho is None else rho)


@dataclass(frozen=True)
class SymmetricGraphState:
    model: ModelM
    xs: np.ndarray
    zs: np.ndarray
    t: float = 0.0

    @staticmethod
    def grid(model: ModelM, n_nodes: int) -> np.ndarray:
        if model.kind == "torus":
            return 2.0 * math.pi * np.arange(n_nodes) / n_nodes
        return (np.arange(n_nodes) + 0.5) * math.pi / n_nodes

    @classmethod
    def from_function(cls, model: ModelM, zfunc, n_nodes: int, t: float = 0.0):
        if n_nodes < 4:
            raise DegenerateGrid("need at least 4 nodes")
        xs = cls.grid(model, n_nodes)
        return cls(model, xs, np.asarray(zfunc(xs), dtype=float) * np.ones(n_nodes), t)

    @property
    def h(self) -> float:
        return self.model.period / len(self.xs)


def initial_state(model: ModelM, initial: dict, n_nodes: int) -> SymmetricGraphState:
    """Initial graph: kind constant {z0} or cosine/sine {z0, amplitude, frequency}.

    On the sphere only even (cosine) profiles are smooth at the poles.
    """
    kind = initial.get("kind", "cosine" if model.kind == "sphere" else "sine")
    z0 = float(initial["z0"])
    amp = float(initial.get("amplitude", 0.0))
    freq = int(initial.get("frequency", 1))
    if kind == "constant":
        f = lambda x: np.full_like(x, z0)  # noqa: E731
    elif kind == "cosine":
        f = lambda x: z0 + amp * np.cos(freq * x)  # noqa: E731
    elif kind == "sine":
        if model.kind == "sphere":
            raise InitialConditionError("sine profiles are not smooth at the poles of the sphere")
        f = lambda x: z0 + amp * np.sin(freq * x)  # noqa: E731
    else:
        raise ValueError(f"unknown initial kind {kind!r}")
    return SymmetricGraphState.from_function(model, f, n_nodes)


# ---------------------------------------------------------------------------
# discrete geometry
# ---------------------------------------------------------------------------


def _pad(model: ModelM, f):
    """One ghost cell on each side: periodic or even reflection."""
    if model.kind == "torus":
        return np.concatenate([f[-1:], f, f[:1]])
    return np.concatenate([f[:1], f, f[-1:]])


def _dx(model, f, h):
    p = _pad(model, f)
    return 0.5 * (p[2:] - p[:-2]) / h


def _dxx(model, f, h):
    p = _pad(model, f)
    return (p[2:] - 2.0 * p[1:-1] + p[:-2]) / h**2


@dataclass(frozen=True)
class HypersurfaceDiagnostics:
    H: np.ndarray
    A_norm2: np.ndarray
    theta_angle: np.ndarray
    f: np.ndarray
    v: np.ndarray
    g_frak: np.ndarray
    mu: float
    kappa1: np.ndarray
    kappa2: np.ndarray
    n_x: np.ndarray  # <N, E_x>
    sigma: np.ndarray  # |d/dx| of the profile in the warped metric
    nablaA2: np.ndarray  # surrogate |nabla A|^2
    nabla2A: np.ndarray  # surrogate max of second arclength derivatives
    ric_nn: np.ndarray
    extremes: dict


def _orbit_radius(s: SymmetricGraphState, r):
    return r if s.model.kind == "torus" else r * np.sin(s.xs)


def mean_curvature(
    s: SymmetricGraphState, w: WarpingFunction, k: float | None = None
) -> HypersurfaceDiagnostics:
    """Principal curvatures, H, |A|^2, Theta and the derived quantities.

    ``k`` is the constant in phi(v) = v^2 / (1 - k v^2); defaults to 1 / (2 max v^2).
    """
    m, n, h = s.model, s.model.n, s.h
    if len(s.xs) < 4:
        raise DegenerateGrid("need at least 4 nodes")
    try:
        r = w.value(s.zs)
        q = w.ratios(s.zs, 2)
    except DomainError as exc:
        raise DomainExit(str(exc)) from exc
    ux = _dx(m, s.zs, h)
    uxx = _dxx(m, s.zs, h)
    sigma = np.hypot(r, ux)
    theta = r / sigma
    n_x = -ux / sigma
    kappa1 = q[1] * theta - (r * uxx - r * q[1] * ux**2) / sigma**3
    kappa2 = q[1] * theta
    if m.kind == "sphere":
        kappa2 = kappa2 - ux / (np.tan(s.xs) * r * sigma)
    H = kappa1 + (n - 1) * kappa2
    a2 = kappa1**2 + (n - 1) * kappa2**2
    v = 1.0 / theta
    kk = 1.0 / (2.0 * np.max(v) ** 2) if k is None else k
    g = v**2 / (1.0 - kk * v**2) * a2

    def d_s(f):
        return _dx(m, f, h) / sigma

    dk1, dk2 = d_s(kappa1), d_s(kappa2)
    gam = d_s(_orbit_radius(s, r)) / _orbit_radius(s, r)
    nabla_a2 = dk1**2 + (n - 1) * dk2**2 + 2 * (n - 1) * (kappa1 - kappa2) ** 2 * gam**2
    nabla2 = np.maximum(np.abs(d_s(dk1)), np.abs(d_s(dk2)))
    ric = ambient_ricci(w, n, s.zs, m.fibre)
    ric_nn = n_x**2 * ric.ric_tangent + theta**2 * ric.ric_z
    f = theta**2
    extremes = {
        "mu": float(np.min(f)),
        "theta_min": float(np.min(theta)),
        "A2_max": float(np.max(a2)),
        "g_max": float(np.max(g)),
        "nablaA_surrogate_max": float(np.sqrt(np.max(nabla_a2))),
        "nabla2A_surrogate_max": float(np.max(nabla2)),
        "H_max_abs": float(np.max(np.abs(H))),
    }
    return HypersurfaceDiagnostics(
        H, a2, theta, f, v, g, extremes["mu"], kappa1, kappa2, n_x, sigma, nabla_a2, nabla2, ric_nn, extremes
    )


def laplacian(s: SymmetricGraphState, w: WarpingFunction, f: np.ndarray, sigma=None) -> np.ndarray:
    """Laplace-Beltrami of an x-dependent function on the hypersurface.

    Conservative form (1 / (sigma P)) d_x (P / sigma d_x f) with P = rho^(n-1),
    rho the orbit radius; fluxes live on half points.
    """
    m, h = s.model, s.h
    r = w.value(s.zs)
    if sigma is None:
        sigma = np.hypot(r, _dx(m, s.zs, h))
    p = _orbit_radius(s, r) ** (m.n - 1)
    coef = _pad(m, p / sigma)
    fp = _pad(m, f)
    flux = 0.5 * (coef[1:] + coef[:-1]) * (fp[1:] - fp[:-1]) / h
    if m.kind == "sphere":
        # no flux through the poles
        flux[0] = 0.0
        flux[-1] = 0.0
    return (flux[1:] - flux[:-1]) / h / (sigma * p)


# ---------------------------------------------------------------------------
# time stepping
# ---------------------------------------------------------------------------


def graph_velocity(s: SymmetricGraphState, w: WarpingFunction) -> np.ndarray:
    """Vertical speed z_t = -H / Theta of the graph under normal speed -H."""
    m, h = s.model, s.h
    try:
        r = w.value(s.zs)
        q = w.ratios(s.zs, 1)
    except DomainError as exc:
        raise DomainExit(str(exc)) from exc
    ux = _dx(m, s.zs, h)
    uxx = _dxx(m, s.zs, h)
    out = (uxx - 2.0 * q[1] * ux**2 - r**2 * q[1]) / (r**2 + ux**2) - (m.n - 1) * q[1]
    if m.kind == "sphere":
        out = out + (m.n - 1) * ux / (np.tan(s.xs) * r**2)
    return out


def stable_dt(s: SymmetricGraphState, w: WarpingFunction, cfl: float = CFL_DEFAULT) -> float:
    """Explicit diffusion bound; the sphere's polar term adds (n - 1) to the stiffness."""
    r = w.value(s.zs)
    ux = _dx(s.model, s.zs, s.h)
    d_eff = np.max(1.0 / (r**2 + ux**2))
    if s.model.kind == "sphere":
        d_eff = d_eff + (s.model.n - 1) * np.max(1.0 / r**2)
    return cfl * s.h**2 / d_eff


def step(s: SymmetricGraphState, w: WarpingFunction, dt: float) -> SymmetricGraphState:
    """One Heun step of the graph equation."""
    lim = stable_dt(s, w, CFL_LIMIT)
    if dt > lim * (1 + 1e-12):
        raise StepTooLarge(f"dt={dt:.3e} exceeds the stability bound {lim:.3e}")
    k1 = graph_velocity(s, w)
    s1 = replace(s, zs=s.zs + dt * k1)
    if not np.all(w.contains(s1.zs)):
        raise DomainExit("a node left the warping domain")
    k2 = graph_velocity(s1, w)
    z = s.zs + 0.5 * dt * (k1 + k2)
    if not np.all(w.contains(z)):
        raise DomainExit("a node left the warping domain")
    return SymmetricGraphState(s.model, s.xs, z, s.t + dt)


# ---------------------------------------------------------------------------
# experiment driver
# ---------------------------------------------------------------------------


@dataclass
class MCFConfig:
    warping: WarpingFunction
    model: ModelM
    initial: dict
    alpha: float = 2.0
    n_nodes: int = 64
    t_end: float = 1.0
    cadence: float = 0.1
    cfl: float = CFL_DEFAULT
    dt: float | None = None
    kappa_threshold: float = 1e3
    check_hypotheses: bool = True
    snapshot_times: tuple = ()


MCF_COLUMNS = [
    "t",
    "mu",
    "theta_min",
    "A2_max",
    "g_max",
    "nablaA_surrogate_max",
    "nabla2A_surrogate_max",
    "z_min",
    "z_max",
]


def visited_grid(cfg: MCFConfig, s: SymmetricGraphState, points: int = 2001) -> np.ndarray:
    """Heights the run can reach: between the initial max and the parallel slice
    from the initial min pushed down by sup(n r'/r) t_end."""
    w = cfg.warping
    lo_dom, hi_dom = w.domain
    z_hi = float(np.max(s.zs))
    span = np.linspace(float(np.min(s.zs)), z_hi, 64)
    speed = cfg.model.n * float(np.max(np.abs(w.log_derivative(span))))
    z_lo = max(float(np.min(s.zs)) - speed * cfg.t_end - 1.0, lo_dom + 1e-9 * max(1.0, abs(lo_dom)))
    return np.linspace(z_lo, min(z_hi, hi_dom), points)


def _validate(cfg: MCFConfig, s: SymmetricGraphState) -> dict:
    if cfg.alpha <= 1:
        raise HypothesisError("alpha must exceed 1")
    rep = check_conditions(cfg.warping, visited_grid(cfg, s), cfg.alpha, cfg.model.rho)
    if not rep.c1_holds or rep.c2_margin < -1e-12:
        raise HypothesisError(f"(C1)/(C2) fail on the visited range: {rep.to_dict()}")
    theta0 = mean_curvature(s, cfg.warping).extremes["theta_min"]
    if not theta0 > cfg.alpha**-0.5:
        raise InitialConditionError(f"min Theta_0 = {theta0:.6g} must exceed alpha^(-1/2) = {cfg.alpha**-0.5:.6g}")
    return rep.to_dict()


def theorem2_experiment(cfg: MCFConfig, initial: SymmetricGraphState | None = None):
    """Run the symmetric graph flow and record mu, |A|^2, g and the nabla A surrogates.

    Returns (series, final_state, snapshots). ``series.meta['max_mu_drop']`` is the
    largest one-step decrease of mu seen over all steps.
    """
    w = cfg.warping
    s = initial if initial is not None else initial_state(cfg.model, cfg.initial, cfg.n_nodes)
    series = DiagnosticSeries(list(MCF_COLUMNS))
    if cfg.check_hypotheses:
        series.meta["conditions"] = _validate(cfg, s)
    snapshots = {}
    sup_v = [0.0]

    def record(st):
        d0 = mean_curvature(st, w)
        sup_v[0] = max(sup_v[0], float(np.max(d0.v)))
        d = mean_curvature(st, w, k=1.0 / (2.0 * sup_v[0] ** 2))
        ex = d.extremes
        series.record(
            t=st.t,
            mu=ex["mu"],
            theta_min=ex["theta_min"],
            A2_max=ex["A2_max"],
            g_max=ex["g_max"],
            nablaA_surrogate_max=ex["nablaA_surrogate_max"],
            nabla2A_surrogate_max=ex["nabla2A_surrogate_max"],
            z_min=float(np.min(st.zs)),
            z_max=float(np.max(st.zs)),
        )
        for ts in cfg.snapshot_times:
            if abs(ts - st.t) <= 1e-12 * max(1.0, ts):
                snapshots[ts] = st
        if math.sqrt(ex["A2_max"]) > cfg.kappa_threshold:
            series.add_event("CurvatureBlowup", st.t, A2_max=ex["A2_max"])
            return True
        return False

    stop = record(s)
    count = int(math.floor(cfg.t_end / cfg.cadence + 1e-9))
    targets = sorted({cfg.cadence * i for i in range(1, count + 1)} | {cfg.t_end} | set(cfg.snapshot_times))
    targets = [t for t in targets if 0 < t <= cfg.t_end]
    max_drop = 0.0
    mu_prev = mean_curvature(s, w).mu
    for target in targets:
        if stop:
            break
        while s.t < target - 1e-14 * max(1.0, target):
            dt = cfg.dt if cfg.dt is not None else stable_dt(s, w, cfg.cfl)
            if target - s.t < dt * (1 + 1e-9):
                dt = target - s.t
            try:
                s = step(s, w, dt)
            except DomainExit as exc:
                series.add_event("DomainExit", s.t, detail=str(exc))
                stop = True
                break
            theta = w.value(s.zs) / np.hypot(w.value(s.zs), _dx(s.model, s.zs, s.h))
            mu = float(np.min(theta**2))
            max_drop = max(max_drop, mu_prev - mu)
            mu_prev = mu
        if stop:
            break
        s = replace(s, t=target)
        stop = record(s)
    series.meta.update({"final_t": s.t, "max_mu_drop": max_drop, "sup_v": sup_v[0]})
    return series, s, snapshots
