"""Parallel slices M x {z(t)}: the scalar ODE dz/dt = -n r'(z)/r(z).

The integrator is a Dormand-Prince 5(4) pair with a PI step controller. When
r'/r grows past a cap the remaining time to the domain boundary is computed
as the quadrature of dz / (n r'/r), which brackets the exit time without
stepping into the singularity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import DomainError, HypothesisError, Inconclusive, StiffnessError
from .warp import WarpingFunction

__all__ = [
    "ParallelTrajectory",
    "integrate_parallel",
    "ContractionResult",
    "contraction_gap",
    "BlowdownResult",
    "blowdown_time",
    "dormand_prince",
]

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


def dormand_prince(f, t0, y0, t_end, tol, t_eval=(), stop=None, h0=None, h_min=1e-14):
    """Adaptive scalar DOPRI5 integration of y' = f(t, y).

    Returns (ts, ys, status) with status "done" or "stopped" (``stop(t, y)``
    returned True after an accepted step). Points in ``t_eval`` are hit exactly.
    Local error per unit time is held below ``tol``.
    """
    targets = sorted(float(t) for t in t_eval if t0 < t < t_end) + [float(t_end)]
    t, y = float(t0), float(y0)
    ts, ys = [t], [y]
    k1 = f(t, y)
    h = h0 or min(abs(t_end - t0), 0.01 * max(abs(y), 1.0) / max(abs(k1), 1e-12), 0.1)
    err_prev = 1.0
    safety, beta, alpha = 0.9, 0.04, 0.2 - 0.75 * 0.04
    ti = 0
    while ti < len(targets):
        target = targets[ti]
        h = min(h, target - t)
        if h < h_min * max(1.0, abs(t)):
            raise StiffnessError(f"step size underflow at t={t:.17g}, z={y:.17g}")
        k = [k1]
        for s in range(1, 7):
            ys_ = y + h * sum(a * kk for a, kk in zip(_A[s], k))
            k.append(f(t + _C[s] * h, ys_))
        y5 = y + h * sum(b * kk for b, kk in zip(_B5, k))
        err = abs(h * sum(e * kk for e, kk in zip(_E, k)))
        if not math.isfinite(y5) or not math.isfinite(err):
            h *= 0.25
            continue
        # error per unit time against tol
        scaled = err / (tol * h) if h > 0 else 0.0
        if scaled <= 1.0:
            t = target if target - (t + h) <= 1e-15 * max(1.0, abs(target)) else t + h
            y = y5
            k1 = k[6]
            ts.append(t)
            ys.append(y)
            if t >= target:
                ti += 1
            if stop is not None and stop(t, y):
                return np.array(ts), np.array(ys), "stopped"
            fac = safety * max(scaled, 1e-10) ** (-alpha) * err_prev**beta
            h *= min(5.0, max(0.2, fac))
            err_prev = max(scaled, 1e-4)
        else:
            h *= max(0.1, safety * scaled ** (-0.2))
    return np.array(ts), np.array(ys), "done"


@dataclass(frozen=True)
class ParallelTrajectory:
    n: int
    z0: float
    t: np.ndarray
    z: np.ndarray
    terminal: str  # "reached_t_end" | "exited_domain" | "converged"
    t_exit: float | None = None
    exit_bracket: tuple[float, float] | None = None

    def at(self, t: float) -> float:
        """Sample value at a recorded time (exact match required)."""
        idx = np.flatnonzero(np.isclose(self.t, t, rtol=0, atol=1e-14 * max(1.0, abs(t))))
        if idx.size == 0:
            raise KeyError(f"t={t} was not requested via t_eval")
        return float(self.z[idx[0]])

    def summary(self) -> dict:
        out = {"terminal": self.terminal}
        if self.t_exit is not None:
            out["t_exit"] = self.t_exit
        return out


def _exit_tail(w: WarpingFunction, n: int, z: float) -> float | None:
    """Time for dz/dt = -n w(z) to run from z to the lower domain boundary, if finite."""
    lo, _ = w.domain

    def rate(s):
        return 1.0 / (n * float(w.log_derivative(s)))

    with np.errstate(all="ignore"):
        out = integrate.quad(rate, lo, z, limit=200, epsabs=1e-14, epsrel=1e-12, full_output=1)
    # a fourth element is quad's warning message: divergence or accuracy loss
    val, err = out[0], out[1]
    if len(out) > 3 or not math.isfinite(val) or err > 1e-8 * max(1.0, abs(val)):
        return None
    return float(val)


def integrate_parallel(
    w: WarpingFunction,
    n: int,
    z0: float,
    t_end: float,
    tol: float = 1e-10,
    t_eval=(),
    w_cap: float = 1e3,
) -> ParallelTrajectory:
    """Integrate the parallel-slice ODE from z0 up to t_end."""
    if not w.contains(z0):
        raise DomainError(f"z0={z0} outside {w.domain}")
    if n < 1:
        raise ValueError("n must be >= 1")
    if tol <= 0:
        raise ValueError("tol must be positive")

    last = [None, None]

    def wz(z):
        # stop() and the next rhs() evaluate the same accepted point
        if z != last[0]:
            last[0], last[1] = z, float(w.log_derivative(float(z)))
        return last[1]

    def rhs(_t, z):
        if not w.contains(z):
            return math.nan
        return -n * wz(z)

    cap = max(w_cap, 10.0 * abs(float(w.log_derivative(z0))))

    def stop(_t, z):
        q = abs(wz(z))
        return q < 1e-14 or q > cap

    ts, zs, status = dormand_prince(rhs, 0.0, z0, t_end, tol, t_eval=t_eval, stop=stop)
    terminal, t_exit, bracket = "reached_t_end", None, None
    if status == "stopped":
        z_last = zs[-1]
        if abs(float(w.log_derivative(z_last))) < 1e-14:
            terminal = "converged"
        else:
            tail = _exit_tail(w, n, z_last) if w.log_derivative(z_last) > 0 else None
            if tail is not None and ts[-1] + tail <= t_end:
                terminal, t_exit = "exited_domain", float(ts[-1] + tail)
                bracket = (float(ts[-1]), t_exit)
            else:
                # not a finite exit within the horizon: keep stepping without a cap
                ts2, zs2, _ = dormand_prince(rhs, ts[-1], z_last, t_end, tol, t_eval=t_eval)
                ts = np.concatenate([ts, ts2[1:]])
                zs = np.concatenate([zs, zs2[1:]])
    return ParallelTrajectory(n, float(z0), ts, zs, terminal, t_exit, bracket)


@dataclass(frozen=True)
class ContractionResult:
    gap: float
    bound: float
    holds: bool


def contraction_gap(
    w: WarpingFunction,
    n: int,
    alpha: float,
    z1_0: float,
    z2_0: float,
    t: float,
    tol: float = 1e-10,
    rel_tol: float = 1e-8,
) -> ContractionResult:
    """Distance between two parallel slices against (z1_0 - z2_0) (r(z2(t)) / r(z2_0))^alpha."""
    if not z2_0 < z1_0:
        raise ValueError("need z2_0 < z1_0")
    tr1 = integrate_parallel(w, n, z1_0, t, tol=tol, t_eval=[t])
    tr2 = integrate_parallel(w, n, z2_0, t, tol=tol, t_eval=[t])
    if tr1.terminal != "reached_t_end" or tr2.terminal != "reached_t_end":
        raise HypothesisError("a trajectory left the domain before t")
    z1, z2 = tr1.at(t), tr2.at(t)
    zs = np.linspace(min(z2, z2_0), max(z1, z1_0), 513)
    r = w.value(zs)
    margin = r**2 * w.convexity_ratio(zs, alpha)
    if np.any(w.log_derivative(zs) <= 0) or np.any(margin < -1e-12 * np.maximum(r**2, 1e-300)):
        raise HypothesisError("r' > 0 and r r'' - (1 + alpha) r'^2 >= 0 must hold along both trajectories")
    gap = z1 - z2
    bound = (z1_0 - z2_0) * (float(w.value(z2)) / float(w.value(z2_0))) ** alpha
    return ContractionResult(gap, bound, bool(0 < gap <= bound * (1 + rel_tol)))


@dataclass(frozen=True)
class BlowdownResult:
    time: float  # math.inf when global existence is certified
    certificate: str  # "finite_exit" | "linear_lower_bound"
    horizon: float | None = None
    sup_log_deriv: float | None = None

    @property
    def infinite(self) -> bool:
        return math.isinf(self.time)


def _sampled_sup(w: WarpingFunction, z0: float, decades: int = 8):
    """Sup of r'/r on (lo, z0] sampled geometrically; None if it does not saturate."""
    lo, _ = w.domain
    if math.isfinite(lo):
        return None
    span = np.concatenate([[0.0], np.logspace(-3, decades, 40 * (decades + 3))])
    zs = z0 - span
    with np.errstate(over="ignore", invalid="ignore"):
        vals = np.asarray(w.log_derivative(zs), dtype=float)
    if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
        return None
    tail = vals[-40:]
    if np.max(tail) > np.max(vals[:-40]) * (1 + 1e-3) and (tail[-1] - tail[0]) > 1e-3 * abs(tail[0]):
        return None
    return float(np.max(vals))


def blowdown_time(
    w: WarpingFunction, n: int, z0: float, horizon: float = 1e3, tol: float = 1e-10
) -> BlowdownResult:
    """Finite exit time of the parallel slice from z0, or a global-existence certificate.

    Global existence is only certified through z(t) >= z0 - M t with M the
    sampled sup of r'/r below z0 and an unbounded-below domain.
    """
    if not w.contains(z0):
        raise DomainError(f"z0={z0} outside {w.domain}")
    m = _sampled_sup(w, z0)
    if m is not None:
        return BlowdownResult(math.inf, "linear_lower_bound", horizon, m)
    tr = integrate_parallel(w, n, z0, horizon, tol=tol)
    if tr.terminal == "exited_domain":
        return BlowdownResult(tr.t_exit, "finite_exit")
    raise Inconclusive(f"no exit before t={horizon} and sup r'/r below z0={z0} is not certified finite")
