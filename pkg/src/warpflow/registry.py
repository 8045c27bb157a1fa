"""Named experiment configs, one per acceptance criterion, with their verdicts.

An entry bundles the configs it runs and a verdict function that turns the
run results into ``{"passed": bool, ...details}``. ``run_entry`` executes an
entry and writes ``verdict.json`` next to the per-config run directories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import warp
from .errors import ConfigError
from .runner import RunResult, dump_json, out_root, run_experiment
from .config import ExperimentConfig

ONE_SIDED_TOL = 1e-6
ORDER_MIN = 1.5

PB_HALF = {"family": "power_beta", "beta": 0.5, "a": -1.0}
PB_QUARTER = {"family": "power_beta", "beta": 0.25, "a": -1.0}
WAVY = {"kind": "sinusoid", "z0": -3.0, "amplitude": 0.2}


@dataclass(frozen=True)
class RegistryEntry:
    name: str
    criterion: int
    claim: str
    configs: tuple
    verdict: Callable[[list[RunResult]], dict]
    version: int = 1
    repeat: int = 1


# ---------------------------------------------------------------------------
# verdict helpers
# ---------------------------------------------------------------------------


def _nonincreasing(x, slack):
    d = np.diff(np.asarray(x, dtype=float))
    worst = float(np.max(d)) if d.size else -math.inf
    return bool(worst <= slack), worst


def _by_name(results):
    return {r.config.name: r for r in results}


def _v_growth_constant(w, z_lo, z_hi, points=4001):
    """sup over [z_lo, z_hi] of max(-(r r'' - 2 r'^2) / r^2, 0)."""
    zs = np.linspace(z_lo, z_hi, points)
    zs = zs[w.contains(zs)]
    return float(max(0.0, np.max(-w.convexity_ratio(zs, 1.0))))


# ---------------------------------------------------------------------------
# 1. parallel-slice closed forms
# ---------------------------------------------------------------------------


def _closed_form(family, z0, t):
    if family == "exp_neg_z_squared":
        return z0 * np.exp(2 * t)
    if family == "double_exp":
        return np.log(np.exp(z0) - t)
    raise ValueError(family)


def _verdict_closedforms(results):
    details, ok = {}, True
    for r in results:
        s = r.series
        fam = r.config.raw["warping"]["family"]
        z0 = np.asarray(s.column("z0"))
        t, z = s.column("t"), s.column("z")
        err = float(np.max(np.abs(z - _closed_form(fam, z0, t))))
        item = {"max_error": err}
        if fam == "double_exp":
            exit_info = r.summary["runs"][0]["horizon"]
            t_exit = exit_info.get("t_exit")
            item["t_exit"] = t_exit
            item["t_exit_error"] = abs(t_exit - math.exp(z0[0])) if t_exit is not None else math.inf
            ok &= item["t_exit_error"] < 1e-8
            ok &= bool(t[-1] >= 0.9 * math.exp(z0[0]) - 1e-12)
        ok &= err < 1e-8
        details[r.config.name] = item
    return {"passed": bool(ok), "runs": details}


CLOSED_FORM_CONFIGS = (
    {
        "name": "closedform-exp-neg-z-squared",
        "module": "parallel",
        "warping": {"family": "exp_neg_z_squared"},
        "initial": {"z0": -1.0, "n": 1},
        "numerics": {"t_end": 1.0, "tol": 1e-10, "samples": 201},
    },
    {
        "name": "closedform-double-exp-z0",
        "module": "parallel",
        "warping": {"family": "double_exp"},
        "initial": {"z0": 0.0, "n": 1},
        "numerics": {"t_end": 0.9, "tol": 1e-10, "samples": 201, "horizon": 2.0},
    },
    {
        "name": "closedform-double-exp-z1",
        "module": "parallel",
        "warping": {"family": "double_exp"},
        "initial": {"z0": 1.0, "n": 1},
        "numerics": {"t_end": 0.9 * math.e, "tol": 1e-10, "samples": 201, "horizon": 4.0},
    },
)


# ---------------------------------------------------------------------------
# 2-4. warping-function geometry
# ---------------------------------------------------------------------------

CONSTANT_CURVATURE = (("linear", {}, 0.0), ("cos_sqrt_k", {"k": 2.0}, 2.0), ("exp_sqrt_k", {"k": 2.0}, -2.0))


def _verdict_constant_curvature(results):
    details, ok = {}, True
    for (fam, _, expected), r in zip(CONSTANT_CURVATURE, results):
        err = float(np.max(np.abs(r.series.column("gauss") - expected)))
        details[fam] = {"expected": expected, "max_error": err, "points": len(r.series)}
        ok &= err <= 1e-12 and len(r.series) == 100
    return {"passed": bool(ok), "families": details}


def _constant_curvature_configs():
    out = []
    for fam, params, _ in CONSTANT_CURVATURE:
        w = warp.from_dict({"family": fam, **params})
        lo, hi = w.domain
        z_min = max(lo, -3.0)
        z_max = min(hi, 3.0)
        out.append(
            {
                "name": f"gauss-{fam.replace('_', '-')}",
                "module": "geometry",
                "warping": {"family": fam, **params},
                "numerics": {"z_min": z_min, "z_max": z_max, "points": 100, "sampling": "random"},
                "seed": 2024,
            }
        )
    return tuple(out)


BETAS = (0.25, 0.5, 1.0, 2.0)


def _verdict_beta(results):
    details, ok = {}, True
    for beta, r in zip(BETAS, results):
        margin = r.summary["conditions"]["rr2_margin"]
        expect_ok = beta <= 1.0
        details[str(beta)] = {"rr2_margin": margin, "expected_nonnegative": expect_ok}
        ok &= (margin >= 0) if expect_ok else (margin < 0)
    return {"passed": bool(ok), "betas": details}


BETA_CONFIGS = tuple(
    {
        "name": f"beta-conditions-{beta:g}",
        "module": "geometry",
        "warping": {"family": "power_beta", "beta": beta, "a": -1.0},
        "numerics": {"z_min": -100.0, "z_max": -1.0, "points": 2000},
    }
    for beta in BETAS
)


def _verdict_gap(results):
    details, ok = {}, True
    for r in results:
        g = r.summary["gap"]
        beta = r.config.raw["warping"]["beta"]
        item = dict(g)
        ok &= g["holds"] == g["pairs"] == 1000
        if beta == 1.0:
            ok &= g["max_abs_difference"] <= 1e-12
        details[str(beta)] = item
    return {"passed": bool(ok), "betas": details}


GAP_CONFIGS = tuple(
    {
        "name": f"log-gap-beta-{beta:g}",
        "module": "geometry",
        "warping": {"family": "power_beta", "beta": beta, "a": -1.0},
        "numerics": {"z_min": -100.0, "z_max": -1.0, "points": 64, "pairs": 1000},
        "hypotheses": {"alpha": 1.0},
        "seed": seed,
    }
    for beta, seed in ((0.5, 11), (1.0, 12))
)


# ---------------------------------------------------------------------------
# 5-6. evolution-equation residuals and inequalities
# ---------------------------------------------------------------------------


def _verdict_orders(results):
    details, ok = {}, True
    for r in results:
        for rep in r.summary["reports"]:
            order = rep["observed_order"]
            details[f"{r.config.name}:{rep['equation']}"] = {"order": order, "norms": rep["residual_norms"]}
            ok &= order is not None and order >= ORDER_MIN
    return {"passed": bool(ok), "equations": details}


RESIDUAL_CONFIGS = (
    {
        "name": "residual-curve-beta-half",
        "module": "residual",
        "warping": PB_HALF,
        "initial": WAVY,
        "numerics": {"levels": [128, 256, 512]},
        "study": {"equations": ["ThetaN1", "Vn1", "KappaSq"]},
    },
    {
        "name": "residual-torus-beta-half",
        "module": "residual",
        "warping": PB_HALF,
        "model": {"kind": "torus", "n": 2},
        "initial": {"kind": "sine", "z0": -5.0, "amplitude": 0.3},
        "numerics": {"levels": [128, 256, 512]},
        "study": {"equations": ["ThetaN", "Vn"]},
    },
    {
        "name": "residual-sphere-beta-half",
        "module": "residual",
        "warping": PB_HALF,
        "model": {"kind": "sphere", "n": 2},
        "initial": {"kind": "cosine", "z0": -5.0, "amplitude": 0.3},
        "numerics": {"levels": [128, 256, 512]},
        "study": {"equations": ["ThetaN", "Vn"]},
    },
)


def _verdict_inequalities(results):
    details, ok = {}, True
    for r in results:
        for rep in r.summary["reports"]:
            worst = min(rep["residual_norms"])
            details[f"{r.config.name}:{rep['equation']}"] = {"worst_normalized_margin": worst}
            ok &= worst >= -ONE_SIDED_TOL
    return {"passed": bool(ok), "inequalities": details}


def _inequality_configs():
    out = []
    for t0 in (0.01, 0.5):
        out.append(
            {
                "name": f"inequality-curve-t{t0:g}",
                "module": "residual",
                "warping": PB_HALF,
                "initial": WAVY,
                "numerics": {"levels": [64, 128], "t0": t0},
                "study": {"equations": ["G_bound_n1"]},
            }
        )
    for kind, shape in (("torus", "sine"), ("sphere", "cosine")):
        for t0 in (0.01, 1.0):
            out.append(
                {
                    "name": f"inequality-{kind}-t{t0:g}",
                    "module": "residual",
                    "warping": PB_QUARTER,
                    "model": {"kind": kind, "n": 2},
                    "initial": {"kind": shape, "z0": -5.0, "amplitude": 0.3},
                    "numerics": {"levels": [64, 128], "t0": t0},
                    "hypotheses": {"alpha": 2.0},
                    "study": {"equations": ["ASq_bound", "G_bound_n", "F_bound"]},
                }
            )
    return tuple(out)


# ---------------------------------------------------------------------------
# 7-8. curve shortening flow runs
# ---------------------------------------------------------------------------

DECAY_CONFIG = {
    "name": "decay-beta-half",
    "module": "csf",
    "warping": PB_HALF,
    "initial": WAVY,
    "numerics": {
        "n_nodes": 128,
        "integrator": "bdf",
        "t_end": 2000.0,
        "cadence": 5.0,
        "stop_z_max_below": -30.0,
    },
}

GRAPH_CONFIGS = (
    {
        "name": "graph-beta-half",
        "module": "csf",
        "warping": PB_HALF,
        "initial": WAVY,
        "numerics": {"n_nodes": 128, "t_end": 2.0, "cadence": 0.05},
    },
    {
        "name": "graph-beta-one-random",
        "module": "csf",
        "warping": {"family": "power_beta", "beta": 1.0, "a": -1.0},
        "initial": {"kind": "random_fourier", "z0": -3.0, "amplitude": 0.4, "modes": 4},
        "numerics": {"n_nodes": 128, "t_end": 1.0, "cadence": 0.05},
        "seed": 7,
    },
    {
        "name": "graph-hyperbolic",
        "module": "csf",
        "warping": {"family": "exp_sqrt_k", "k": 1.0},
        "initial": {"kind": "sinusoid", "z0": 0.0, "amplitude": 0.3, "frequency": 2},
        "numerics": {"n_nodes": 128, "t_end": 1.0, "cadence": 0.05},
    },
    {
        "name": "graph-flat-polar",
        "module": "csf",
        "warping": {"family": "linear"},
        "initial": {"kind": "sinusoid", "z0": 2.0, "amplitude": 0.3},
        "numerics": {"n_nodes": 128, "t_end": 0.5, "cadence": 0.025},
    },
    {
        "name": "graph-spherical",
        "module": "csf",
        "warping": {"family": "cos_sqrt_k", "k": 1.0},
        "initial": {"kind": "sinusoid", "z0": 0.3, "amplitude": 0.2, "frequency": 3},
        "numerics": {"n_nodes": 128, "t_end": 0.2, "cadence": 0.01},
    },
    {
        "name": "graph-lagrangian-beta-half",
        "module": "csf",
        "warping": PB_HALF,
        "initial": WAVY,
        "numerics": {"n_nodes": 128, "mode": "lagrangian", "t_end": 1.0, "cadence": 0.05},
    },
    DECAY_CONFIG,
)


def graph_preservation_check(r: RunResult) -> dict:
    """Angle positivity and the sampled v_max growth bound for one CSF run."""
    s = r.series
    w = r.config.warping()
    t, v, th = s.column("t"), s.column("v_max"), s.column("theta_min")
    z_lo, z_hi = float(np.min(s.column("z_min"))), float(np.max(s.column("z_max")))
    c = _v_growth_constant(w, z_lo, z_hi)
    growth = np.log(v) - math.log(v[0]) - c * t
    out = {
        "theta_min": float(np.min(th)),
        "C": c,
        "max_growth_excess": float(np.max(growth)),
        "events": r.summary["events"],
    }
    ok = bool(np.all(th > 0)) and out["max_growth_excess"] <= 1e-4 and "GraphLost" not in r.summary["events"]
    if c == 0.0:
        rate = np.diff(v) / np.diff(t)
        out["max_v_rate"] = float(np.max(rate))
        ok &= out["max_v_rate"] <= 1e-6
    out["passed"] = ok
    return out


def _verdict_graph(results):
    runs = {r.config.name: graph_preservation_check(r) for r in results}
    return {"passed": all(v["passed"] for v in runs.values()), "runs": runs}


def _verdict_decay(results):
    (r,) = results
    s = r.series
    t = s.column("t")
    half = t >= t[-1] / 2
    k = s.column("kappa_max")
    out = {"final_t": float(t[-1]), "z_max_end": float(s.column("z_max")[-1]),
           "kappa_ratio": float(k[-1] / k[0])}
    ok = out["z_max_end"] < -30 and out["kappa_ratio"] < 0.1
    for col in ("kappa_max", "dskappa1_max", "dskappa2_max"):
        mono, worst = _nonincreasing(s.column(col)[half], 1e-6)
        out[f"{col}_worst_increase"] = worst
        ok &= mono
    out["passed"] = bool(ok)
    return out


# ---------------------------------------------------------------------------
# 9. symmetric hypersurface flow
# ---------------------------------------------------------------------------

MCF_ALPHA = 2.0
MCF_CONFIGS = (
    {
        "name": "angle-torus-quarter",
        "module": "mcf",
        "warping": PB_QUARTER,
        "model": {"kind": "torus", "n": 2},
        "initial": {"kind": "sine", "z0": -5.0, "amplitude": 0.3},
        "numerics": {"n_nodes": 64, "t_end": 50.0, "cadence": 1.0},
        "hypotheses": {"alpha": MCF_ALPHA},
    },
    {
        "name": "angle-torus-constant",
        "module": "mcf",
        "warping": PB_QUARTER,
        "model": {"kind": "torus", "n": 2},
        "initial": {"kind": "constant", "z0": -5.0},
        "numerics": {"n_nodes": 8, "t_end": 1.0, "cadence": 0.1, "dt": 1e-5},
        "hypotheses": {"alpha": MCF_ALPHA},
    },
)


def _verdict_mcf(results):
    runs = _by_name(results)
    main, const = runs["angle-torus-quarter"], runs["angle-torus-constant"]
    s = main.series
    t = s.column("t")
    half = t >= t[-1] / 2
    cond = main.summary["conditions"]
    mono, worst = _nonincreasing(s.column("A2_max")[half], 0.0)
    out = {
        "c2_margin": cond["c2_margin"],
        "theta0_min": float(s.column("theta_min")[0]),
        "alpha_threshold": MCF_ALPHA**-0.5,
        "max_mu_drop": main.summary["max_mu_drop"],
        "A2_worst_increase": worst,
        "parallel_error": const.summary["parallel_error"],
    }
    out["passed"] = bool(
        cond["c1_holds"]
        and cond["c2_margin"] >= 0
        and out["theta0_min"] > out["alpha_threshold"]
        and out["max_mu_drop"] <= 1e-8
        and mono
        and out["parallel_error"] < 1e-6
    )
    return out


# ---------------------------------------------------------------------------
# 10. rotationally symmetric bump surface
# ---------------------------------------------------------------------------

NECK_CONFIGS = (
    {
        "name": "bump-witness",
        "module": "neckpinch",
        "bump": {"n": 2, "eps": 0.1, "r0": 1.0, "r1": 3.0},
        "numerics": {"n_nodes": 400},
    },
    {
        "name": "bump-degenerate-sphere",
        "module": "neckpinch",
        "bump": {"n": 2, "eps": 0.1, "r0": 1.0, "r1": 1.0},
        "numerics": {"n_nodes": 200},
    },
)


def _verdict_neck(results):
    runs = _by_name(results)
    wit, ctl = runs["bump-witness"].summary, runs["bump-degenerate-sphere"].summary
    out = {
        "witness": wit.get("verdict", wit),
        "control": ctl.get("verdict", ctl),
        "sphere_oracle_error": ctl.get("sphere_oracle_error"),
    }
    out["passed"] = bool(
        "verdict" in wit
        and wit["verdict"]["ordering_ok"]
        and "verdict" in ctl
        and ctl["verdict"]["graph_lost_at"] is None
        and ctl["verdict"]["shrunk_at"] is not None
        and out["sphere_oracle_error"] is not None
        and out["sphere_oracle_error"] < 1e-4
    )
    return out


# ---------------------------------------------------------------------------
# 11-12. solver agreement and reproducibility
# ---------------------------------------------------------------------------

CROSS_CONFIG = {
    "name": "cross-solver-beta-half",
    "module": "csf",
    "warping": PB_HALF,
    "initial": WAVY,
    "numerics": {"t_end": 0.05, "compare_levels": [64, 128, 256]},
}


def _verdict_cross(results):
    (r,) = results
    out = {"hausdorff": r.summary["hausdorff"], "observed_order": r.summary["observed_order"]}
    out["passed"] = bool(out["observed_order"] is not None and out["observed_order"] >= ORDER_MIN)
    return out


REPRO_CONFIGS = (GRAPH_CONFIGS[0], CLOSED_FORM_CONFIGS[1])


def _verdict_repro(results):
    """``results`` holds two passes over the same configs, in order."""
    half = len(results) // 2
    files = {}
    ok = True
    for a, b in zip(results[:half], results[half:]):
        for name in a.files:
            same = (a.out_dir / name).read_bytes() == (b.out_dir / name).read_bytes()
            files[f"{a.config.name}/{name}"] = same
            ok &= same
    return {"passed": bool(ok and half > 0), "files": files}


# ---------------------------------------------------------------------------
# the registry
# ---------------------------------------------------------------------------

_ENTRIES = (
    RegistryEntry(
        "remark4-1-closedforms", 1,
        "parallel slices follow z0 e^(2t) for r = exp(-z^2) and log(e^z0 - t) for r = exp(-exp(-z))",
        CLOSED_FORM_CONFIGS, _verdict_closedforms,
    ),
    RegistryEntry(
        "constant-curvature-models", 2,
        "r = z, cos(sqrt(k) z), exp(sqrt(k) z) give Gauss curvature 0, k, -k",
        _constant_curvature_configs(), _verdict_constant_curvature,
    ),
    RegistryEntry(
        "beta-family-conditions", 3,
        "r = (-z)^(-beta) satisfies r r'' - 2 r'^2 >= 0 exactly when beta <= 1",
        BETA_CONFIGS, _verdict_beta,
    ),
    RegistryEntry(
        "log-derivative-contraction", 4,
        "under r r'' - (1 + alpha) r'^2 >= 0 the gap of r'/r is bounded by -alpha (z1 - z2) w(z1) w(z2)",
        GAP_CONFIGS, _verdict_gap,
    ),
    RegistryEntry(
        "evolution-residuals", 5,
        "discrete flows satisfy the evolution equations of the angle, its inverse and the curvature",
        RESIDUAL_CONFIGS, _verdict_orders,
    ),
    RegistryEntry(
        "inequality-suite", 6,
        "the g-function, |A|^2 and angle-squared differential inequalities hold along registered runs",
        _inequality_configs(), _verdict_inequalities,
    ),
    RegistryEntry(
        "thm1-1-graph-preservation", 7,
        "curves stay geodesic graphs; v_max grows at most like exp(C t) and is nonincreasing when C = 0",
        GRAPH_CONFIGS, _verdict_graph,
    ),
    RegistryEntry(
        "thm1-2b-decay", 8,
        "for r = (-z)^(-1/2) the curvature and its arclength derivatives decay as the curve moves down",
        (DECAY_CONFIG,), _verdict_decay,
    ),
    RegistryEntry(
        "thm1-2-angle-monotone", 9,
        "on a flat torus fibre min of the squared angle is nondecreasing and |A|^2 decays",
        MCF_CONFIGS, _verdict_mcf,
    ),
    RegistryEntry(
        "appendix-graph-loss", 10,
        "a bump surface stops being a geodesic graph before its neck pinches",
        NECK_CONFIGS, _verdict_neck,
    ),
    RegistryEntry(
        "cross-solver-equivalence", 11,
        "graph and Lagrangian curve solvers agree to second order in the node spacing",
        (CROSS_CONFIG,), _verdict_cross,
    ),
    RegistryEntry(
        "reproducibility", 12,
        "rerunning a config reproduces every output file byte for byte",
        REPRO_CONFIGS, _verdict_repro, repeat=2,
    ),
)

REGISTRY = {e.name: e for e in _ENTRIES}


def list_registry() -> list[tuple[str, int, str]]:
    """(name, acceptance criterion, claim) rows in criterion order."""
    return [(e.name, e.criterion, e.claim) for e in _ENTRIES]


def get(name: str) -> RegistryEntry:
    try:
        return REGISTRY[name]
    except KeyError:
        raise ConfigError("registry", f"unknown entry {name!r}; see `warpflow registry list`") from None


def run_entry(name: str, out=None, cache: dict | None = None) -> dict:
    """Run every config of an entry, compute its verdict and write verdict.json.

    ``cache`` maps config hashes to earlier RunResults so entries that share
    configs (for example the decay run) are only computed once per session.
    Repeated passes (``repeat`` > 1) always rerun.
    """
    entry = get(name)
    root = out_root(out) / "registry" / entry.name
    results = []
    for rep in range(entry.repeat):
        pass_root = root if entry.repeat == 1 else root / f"pass{rep + 1}"
        for raw in entry.configs:
            cfg = ExperimentConfig.from_dict(raw)
            use_cache = cache is not None and entry.repeat == 1
            if use_cache and cfg.hash in cache:
                results.append(cache[cfg.hash])
                continue
            res = run_experiment(cfg, pass_root)
            if use_cache:
                cache[cfg.hash] = res
            results.append(res)
    verdict = {"name": entry.name, "criterion": entry.criterion, "claim": entry.claim, "version": entry.version}
    verdict.update(entry.verdict(results))
    verdict["run_dirs"] = sorted({str(Path(r.out_dir)) for r in results})
    root.mkdir(parents=True, exist_ok=True)
    (root / "verdict.json").write_text(dump_json(verdict))
    return verdict
