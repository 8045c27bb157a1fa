"""Warping functions r(z) and the ambient geometry of M x I with metric r(z)^2 g_M + dz^2.

Every family stores closed forms for the derivative ratios r^(i)/r, which is
the quantity all curvature formulas are written in. ``eval`` multiplies back by
r when raw derivatives are wanted.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DomainError, HypothesisError, OrderError, UnsupportedModel

__all__ = [
    "WarpingFunction",
    "PowerBeta",
    "ExpSqrtK",
    "CosSqrtK",
    "Linear",
    "ExpNegZSquared",
    "DoubleExp",
    "Custom",
    "from_dict",
    "gauss_curvature",
    "CurvatureComponents",
    "curvature_components",
    "AmbientRicci",
    "ambient_ricci",
    "ConditionReport",
    "check_conditions",
    "GapResult",
    "log_derivative_gap",
    "NORM_CONVENTION",
]

NORM_CONVENTION = (
    "pairwise: |R|^2 = C(n,2) R_ijij^2 + n R_iziz^2 (a quarter of the full tensor sum); "
    "|gradR|^2 is a quarter of the full tensor sum including the connection term"
)

DEFAULT_MAX_ORDER = 8


class WarpingFunction:
    """A positive function r on an open interval (z_lo, z_hi).

    Subclasses implement ``_value`` and ``_ratios``; the latter returns the
    stacked ratios r^(i)/r for i = 0..order (row 0 is identically 1).
    """

    family: str = "abstract"
    max_order: int = DEFAULT_MAX_ORDER

    @property
    def domain(self) -> tuple[float, float]:
        raise NotImplementedError

    def params(self) -> dict:
        return {}

    def to_dict(self) -> dict:
        return {"family": self.family, **self.params()}

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{type(self).__name__}({args})"

    def __eq__(self, other):
        return type(self) is type(other) and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(repr(self))

    # -- domain handling -------------------------------------------------
    def contains(self, z) -> np.ndarray | bool:
        lo, hi = self.domain
        z = np.asarray(z, dtype=float)
        inside = (z > lo) & (z < hi)
        return bool(inside) if inside.ndim == 0 else inside

    def _check(self, z, order=0):
        if order > self.max_order or order < 0:
            raise OrderError(f"order {order} outside 0..{self.max_order} for {self!r}")
        if isinstance(z, float):
            # scalar fast path for ODE right-hand sides
            lo, hi = self.domain
            if not lo < z < hi:
                raise DomainError(f"z={z!r} not in open interval ({lo}, {hi})")
            return np.float64(z)
        z = np.asarray(z, dtype=float)
        if not np.all(self.contains(z)):
            lo, hi = self.domain
            bad = z[~np.asarray(self.contains(z))] if z.ndim else z
            raise DomainError(f"z={np.ravel(bad)[0]!r} not in open interval ({lo}, {hi})")
        return z

    # -- evaluation -----------------------------------------------------
    def value(self, z):
        z = self._check(z)
        return self._value(z)

    def ratios(self, z, order: int) -> np.ndarray:
        """Return r^(i)(z)/r(z) for i = 0..order, stacked along axis 0."""
        z = self._check(z, order)
        return np.asarray(self._ratios(z, order), dtype=float)

    def eval(self, z, order: int) -> np.ndarray:
        """Return [r, r', ..., r^(order)] at z."""
        z = self._check(z, order)
        return self._value(z) * np.asarray(self._ratios(z, order), dtype=float)

    def log_derivative(self, z):
        """w = r'/r."""
        return self.ratios(z, 1)[1]

    def convexity_ratio(self, z, alpha: float):
        """(r r'' - (1 + alpha) r'^2) / r^2."""
        q = self.ratios(z, 2)
        return q[2] - (1.0 + alpha) * q[1] ** 2

    def _value(self, z):
        raise NotImplementedError

    def _ratios(self, z, order):
        raise NotImplementedError


def _exp_ratios(gders, order):
    """Ratios for r = exp(g) given g', g'', ... (list of arrays, length >= order)."""
    out = [np.ones_like(gders[0])]
    for m in range(order):
        acc = np.zeros_like(gders[0])
        for k in range(m + 1):
            acc = acc + math.comb(m, k) * gders[k] * out[m - k]
        out.append(acc)
    return out


class PowerBeta(WarpingFunction):
    """r(z) = (-z)^(-beta) on (-inf, a) with a < 0."""

    family = "power_beta"

    def __init__(self, beta: float, a: float = -1.0):
        if not beta > 0:
            raise ValueError("beta must be positive")
        if not a <= 0:
            raise ValueError("a must be nonpositive")
        self.beta = float(beta)
        self.a = float(a)

    @property
    def domain(self):
        return (-math.inf, self.a)

    def params(self):
        return {"beta": self.beta, "a": self.a}

    def _value(self, z):
        return (-z) ** (-self.beta)

    def _rising(self, k):
        return math.prod(self.beta + j for j in range(k))

    def _ratios(self, z, order):
        return [self._rising(k) * (-z) ** (-k) * np.ones_like(z) for k in range(order + 1)]

    def convexity_ratio(self, z, alpha):
        # factored so that beta = 1/(1 + alpha) gives an exact zero
        z = self._check(z, 2)
        b = self.beta
        return (b * (b + 1.0) - (1.0 + alpha) * b * b) / (z * z)


class ExpSqrtK(WarpingFunction):
    """r(z) = exp(sqrt(k) z) on R; constant curvature -k."""

    family = "exp_sqrt_k"

    def __init__(self, k: float = 1.0):
        if not k > 0:
            raise ValueError("k must be positive")
        self.k = float(k)

    @property
    def domain(self):
        return (-math.inf, math.inf)

    def params(self):
        return {"k": self.k}

    def _value(self, z):
        return np.exp(math.sqrt(self.k) * z)

    def _ratios(self, z, order):
        sk = math.sqrt(self.k)
        return [
            (self.k ** (i // 2) * (sk if i % 2 else 1.0)) * np.ones_like(z)
            for i in range(order + 1)
        ]


class CosSqrtK(WarpingFunction):
    """r(z) = cos(sqrt(k) z) on (-pi/(2 sqrt k), pi/(2 sqrt k)); constant curvature k."""

    family = "cos_sqrt_k"

    def __init__(self, k: float = 1.0):
        if not k > 0:
            raise ValueError("k must be positive")
        self.k = float(k)

    @property
    def domain(self):
        h = math.pi / (2.0 * math.sqrt(self.k))
        return (-h, h)

    def params(self):
        return {"k": self.k}

    def _value(self, z):
        return np.cos(math.sqrt(self.k) * z)

    def _ratios(self, z, order):
        sk = math.sqrt(self.k)
        tan = np.tan(sk * z)
        out = []
        for i in range(order + 1):
            if i % 2 == 0:
                out.append((-self.k) ** (i // 2) * np.ones_like(z))
            else:
                sign = -1.0 if (i // 2) % 2 == 0 else 1.0
                out.append(sign * self.k ** (i // 2) * sk * tan)
        return out


class Linear(WarpingFunction):
    """r(z) = z on (0, inf): the flat plane (n = 1) or Euclidean space in polar form."""

    family = "linear"

    @property
    def domain(self):
        return (0.0, math.inf)

    def _value(self, z):
        return z * 1.0

    def _ratios(self, z, order):
        out = [np.ones_like(z)]
        if order >= 1:
            out.append(1.0 / z)
        out.extend(np.zeros_like(z) for _ in range(order - 1))
        return out


class ExpNegZSquared(WarpingFunction):
    """r(z) = exp(-z^2) on (-inf, 0); r'/r = -2z is unbounded."""

    family = "exp_neg_z_squared"

    @property
    def domain(self):
        return (-math.inf, 0.0)

    def _value(self, z):
        return np.exp(-z * z)

    def _ratios(self, z, order):
        g = [-2.0 * z, -2.0 * np.ones_like(z)] + [np.zeros_like(z)] * max(order - 2, 0)
        return _exp_ratios(g, order)


class DoubleExp(WarpingFunction):
    """r(z) = exp(-exp(-z)) on R; r'/r = exp(-z)."""

    family = "double_exp"

    @property
    def domain(self):
        return (-math.inf, math.inf)

    def _value(self, z):
        return np.exp(-np.exp(-z))

    def _ratios(self, z, order):
        e = np.exp(-z)
        g = [(-1.0) ** (j + 1) * e for j in range(1, max(order, 1) + 1)]
        return _exp_ratios(g, order)


class Custom(WarpingFunction):
    """Piecewise polynomial table.

    ``breaks`` has m + 1 increasing entries; ``coeffs[i]`` lists power-basis
    coefficients of piece i in the local variable (z - breaks[i]).
    The domain is the open interval (breaks[0], breaks[-1]).
    """

    family = "custom"

    def __init__(self, breaks, coeffs, check_points: int = 257):
        breaks = [float(b) for b in breaks]
        if len(breaks) < 2 or any(b1 <= b0 for b0, b1 in zip(breaks, breaks[1:])):
            raise ValueError("breaks must be strictly increasing with at least two entries")
        if len(coeffs) != len(breaks) - 1:
            raise ValueError("need one coefficient row per piece")
        self.breaks = breaks
        self.coeffs = [[float(c) for c in row] for row in coeffs]
        self._polys = [np.polynomial.Polynomial(row) for row in self.coeffs]
        zs = np.linspace(breaks[0], breaks[-1], check_points)[1:-1]
        if np.any(self._value(zs) <= 0):
            raise ValueError("custom warping function must be positive on its domain")

    @property
    def domain(self):
        return (self.breaks[0], self.breaks[-1])

    def params(self):
        return {"breaks": self.breaks, "coeffs": self.coeffs}

    def _piece(self, z):
        idx = np.searchsorted(self.breaks, z, side="right") - 1
        return np.clip(idx, 0, len(self._polys) - 1)

    def _poly_eval(self, z, d):
        z = np.asarray(z, dtype=float)
        idx = self._piece(z)
        out = np.empty_like(z)
        for i, p in enumerate(self._polys):
            mask = idx == i
            if np.any(mask):
                out[mask] = p.deriv(d)(z[mask] - self.breaks[i]) if d else p(z[mask] - self.breaks[i])
        return out

    def _value(self, z):
        return self._poly_eval(z, 0)

    def _ratios(self, z, order):
        r = self._poly_eval(z, 0)
        return [self._poly_eval(z, i) / r for i in range(order + 1)]


_FAMILIES = {
    "power_beta": (PowerBeta, ("beta", "a")),
    "exp_sqrt_k": (ExpSqrtK, ("k",)),
    "cos_sqrt_k": (CosSqrtK, ("k",)),
    "linear": (Linear, ()),
    "exp_neg_z_squared": (ExpNegZSquared, ()),
    "double_exp": (DoubleExp, ()),
    "custom": (Custom, ("breaks", "coeffs")),
}

FAMILY_PARAMS = {name: params for name, (_, params) in _FAMILIES.items()}


def from_dict(d: dict) -> WarpingFunction:
    """Build a warping function from ``{"family": name, **params}``."""
    d = dict(d)
    name = d.pop("family")
    cls, _ = _FAMILIES[name]
    return cls(**d)


# ---------------------------------------------------------------------------
# ambient geometry
# ---------------------------------------------------------------------------


def gauss_curvature(w: WarpingFunction, z):
    """K = -r''/r of the surface S^1 x I (n = 1)."""
    return -w.ratios(z, 2)[2]


@dataclass(frozen=True)
class CurvatureComponents:
    sec_tangent: float
    sec_mixed: float
    norm_R: float
    norm_gradR: float
    convention: str = NORM_CONVENTION


def curvature_components(w: WarpingFunction, n: int, z, model: str = "flat") -> CurvatureComponents:
    """Orthonormal-frame curvature of the warped product over a flat or unit-sphere fibre.

    sec_tangent is R_ijij = K_M / r^2 - (r'/r)^2, sec_mixed is R_iziz = -r''/r.
    The z-derivative of R carries s_t' and s_m'; the tangential derivative
    carries the connection term w (s_t - s_m), because d z has Hessian w g_T.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    k_m = fibre_ricci(model, n) / (n - 1)
    r = w.value(z)
    q = w.ratios(z, 3)
    st = k_m / r**2 - q[1] ** 2
    sm = -q[2]
    dw = q[2] - q[1] ** 2
    dst = -2.0 * q[1] * (k_m / r**2 + dw)
    dsm = -(q[3] - q[2] * q[1])
    pairs = n * (n - 1) / 2
    norm_r = np.sqrt(pairs * st**2 + n * sm**2)
    norm_g = np.sqrt(pairs * dst**2 + n * dsm**2 + 2 * n * (n - 1) * (q[1] * (st - sm)) ** 2)
    return CurvatureComponents(st, sm, norm_r, norm_g)


@dataclass(frozen=True)
class AmbientRicci:
    ric_tangent: float
    ric_z: float


def fibre_ricci(model: str, n: int) -> float:
    """Ric_M as a multiple of g_M: 0 for a flat torus, n - 1 for the unit sphere."""
    if model == "flat":
        return 0.0
    if model == "sphere":
        return float(n - 1)
    raise UnsupportedModel(f"unknown fibre model {model!r}")


def ambient_ricci(w: WarpingFunction, n: int, z, model: str = "flat") -> AmbientRicci:
    """Ricci curvature in the orthonormal frame {E_i = E^M_i / r, E_z}."""
    if n < 2:
        raise ValueError("n must be at least 2")
    ric_m = fibre_ricci(model, n)
    r = w.value(z)
    q = w.ratios(z, 2)
    ric_t = ric_m / r**2 - q[2] - (n - 1) * q[1] ** 2
    return AmbientRicci(ric_t, -n * q[2])


@dataclass(frozen=True)
class ConditionReport:
    c1_holds: bool
    c2_margin: float
    sup_log_deriv: float
    rr2_margin: float
    alpha: float
    rho: float
    c: float

    def to_dict(self) -> dict:
        return {k: (bool(v) if k == "c1_holds" else float(v)) for k, v in asdict(self).items()}


def check_conditions(w: WarpingFunction, grid, alpha: float, rho: float = 0.0) -> ConditionReport:
    """Sample (C1), (C2) and the n = 1 convexity r r'' - 2 r'^2 >= 0 on ``grid``.

    ``alpha = 1`` is accepted so that the n = 1 condition can share the report.
    """
    if alpha < 1:
        raise ValueError("alpha must be >= 1")
    grid = np.asarray(grid, dtype=float)
    c = max(rho, 0.0)
    r = w.value(grid)
    q = w.ratios(grid, 1)
    c2 = r**2 * w.convexity_ratio(grid, alpha) + rho - c
    rr2 = r**2 * w.convexity_ratio(grid, 1.0)
    return ConditionReport(
        c1_holds=bool(np.all(q[1] * r > 0)),
        c2_margin=float(np.min(c2)),
        sup_log_deriv=float(np.max(q[1])),
        rr2_margin=float(np.min(rr2)),
        alpha=float(alpha),
        rho=float(rho),
        c=c,
    )


@dataclass(frozen=True)
class GapResult:
    lhs: float
    rhs: float
    holds: bool


def log_derivative_gap(
    w: WarpingFunction, alpha: float, z1: float, z2: float, tol: float = 1e-12, samples: int = 257
) -> GapResult:
    """Compare w(z2) - w(z1) with -alpha (z1 - z2) w(z1) w(z2) for z2 < z1, w = r'/r."""
    if not z2 < z1:
        raise ValueError("need z2 < z1")
    zs = np.linspace(z2, z1, samples)
    margin = w.convexity_ratio(zs, alpha)
    if np.any(margin < -1e-12 * np.maximum(1.0, np.abs(w.ratios(zs, 2)[2]))):
        raise HypothesisError("r r'' - (1 + alpha) r'^2 < 0 between z2 and z1")
    w1, w2 = w.log_derivative(z1), w.log_derivative(z2)
    lhs = float(w2 - w1)
    rhs = float(-alpha * (z1 - z2) * w1 * w2)
    scale = max(1.0, abs(lhs), abs(rhs))
    return GapResult(lhs, rhs, lhs <= rhs + tol * scale)
