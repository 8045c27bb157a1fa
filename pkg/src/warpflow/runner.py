"""Execute one validated config and write its artifacts.

Each run writes into ``<out_root>/<name>-<hash12>/``:

- ``config.json``: the canonical config,
- ``series.csv``: the module's diagnostic table (17 significant digits),
- ``events.json``: detected events,
- ``summary.json``: scalar results used by registry verdicts.

Nothing time- or host-dependent is written, so a rerun of the same config
reproduces every file byte for byte.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import csf, mcf_sym, neckpinch, parallel, residual, warp
from .config import ExperimentConfig, canonical
from .errors import InconclusiveRun
from .series import DiagnosticSeries, fmt

DEFAULT_OUT = "warpflow-out"


def out_root(explicit=None) -> Path:
    """Output root: explicit argument, else $WARPFLOW_OUT, else ./warpflow-out."""
    if explicit is not None:
        return Path(explicit)
    return Path(os.environ.get("WARPFLOW_OUT", DEFAULT_OUT))


@dataclass
class RunResult:
    config: ExperimentConfig
    out_dir: Path
    summary: dict
    series: DiagnosticSeries | None = None
    files: list[str] = field(default_factory=list)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else fmt(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


def dump_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def table_csv(columns, rows) -> str:
    """CSV with a header; numbers at 17 significant digits, strings verbatim."""
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else fmt(v) for v in row))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# module runners: each returns (series or None, summary dict, extra files)
# ---------------------------------------------------------------------------


def _finite_box(w, z_min, z_max):
    lo, hi = w.domain
    z_min = max(lo, -10.0) if z_min is None else z_min
    z_max = min(hi, 10.0) if z_max is None else z_max
    return float(z_min), float(z_max)


def _run_geometry(cfg: ExperimentConfig):
    w = cfg.warping()
    num = cfg.section("numerics")
    hyp = cfg.section("hypotheses")
    z_min, z_max = _finite_box(w, num.get("z_min"), num.get("z_max"))
    points = int(num.get("points", 201))
    rng = np.random.default_rng(cfg.raw.get("seed", 0))
    if num.get("sampling", "grid") == "random":
        zs = np.sort(rng.uniform(z_min, z_max, points))
    else:
        # open grid: the domain endpoints themselves are excluded
        zs = np.linspace(z_min, z_max, points + 2)[1:-1]
    zs = zs[w.contains(zs)]
    n = int(num.get("n", 2))
    fibre = num.get("fibre", "flat")
    q = w.ratios(zs, 2)
    comp = warp.curvature_components(w, n, zs, fibre)
    cols = ["z", "r", "w", "r2_over_r", "gauss", "rr2", "norm_R", "norm_gradR"]
    rows = np.column_stack(
        [zs, w.value(zs), q[1], q[2], warp.gauss_curvature(w, zs),
         w.value(zs) ** 2 * w.convexity_ratio(zs, 1.0), comp.norm_R, comp.norm_gradR]
    )
    series = DiagnosticSeries(cols, rows.tolist())
    alpha = float(hyp.get("alpha", 1.0))
    report = warp.check_conditions(w, zs, alpha, float(hyp.get("rho", 0.0)))
    summary = {"conditions": report.to_dict(), "z_range": [z_min, z_max], "points": int(zs.size),
               "norm_convention": warp.NORM_CONVENTION}
    files = {}
    pairs = int(num.get("pairs", 0))
    if pairs > 0:
        rows_gap, n_hold = [], 0
        for _ in range(pairs):
            a, b = rng.uniform(z_min, z_max, 2)
            z1, z2 = max(a, b), min(a, b)
            if z1 == z2:
                continue
            res = warp.log_derivative_gap(w, alpha, z1, z2)
            rows_gap.append([z1, z2, res.lhs, res.rhs, int(res.holds)])
            n_hold += res.holds
        files["gap.csv"] = table_csv(["z1", "z2", "lhs", "rhs", "holds"], rows_gap)
        gaps = np.array([[r[2], r[3]] for r in rows_gap])
        summary["gap"] = {
            "pairs": len(rows_gap),
            "holds": int(n_hold),
            "max_abs_difference": float(np.max(np.abs(gaps[:, 0] - gaps[:, 1]))),
        }
    return series, summary, files


def _run_parallel(cfg: ExperimentConfig):
    w = cfg.warping()
    init = cfg.section("initial")
    num = cfg.section("numerics")
    z0s = init["z0"] if isinstance(init["z0"], list) else [init["z0"]]
    n = int(init.get("n", 1))
    t_end = float(num.get("t_end", 1.0))
    tol = float(num.get("tol", 1e-10))
    samples = int(num.get("samples", 101))
    horizon = float(num.get("horizon", t_end))
    t_eval = np.linspace(0.0, t_end, samples)
    series = DiagnosticSeries(["index", "z0", "t", "z"])
    runs = []
    for i, z0 in enumerate(z0s):
        tr = parallel.integrate_parallel(w, n, float(z0), t_end, tol=tol, t_eval=t_eval)
        for t, z in zip(tr.t, tr.z):
            series.record(index=i, z0=z0, t=t, z=z)
        info = {"z0": float(z0), **tr.summary()}
        if horizon > t_end:
            info["horizon"] = parallel.integrate_parallel(w, n, float(z0), horizon, tol=tol).summary()
        runs.append(info)
    return series, {"n": n, "tol": tol, "runs": runs}, {}


def _csf_config(cfg: ExperimentConfig, **override) -> csf.CSFConfig:
    num = cfg.section("numerics")
    num.pop("compare_levels", None)
    if "snapshot_times" in num:
        num["snapshot_times"] = tuple(num["snapshot_times"])
    init = cfg.section("initial")
    if init.get("kind") == "random_fourier" and "seed" not in init:
        init["seed"] = int(cfg.raw.get("seed", 0))
    num.update(override)
    return csf.CSFConfig(warping=cfg.warping(), initial=init, **num)


def _run_csf(cfg: ExperimentConfig):
    levels = cfg.section("numerics").get("compare_levels")
    if levels:
        return _run_cross_solver(cfg, [int(n) for n in levels])
    ccfg = _csf_config(cfg)
    series, final, _ = csf.run(ccfg)
    summary = {
        "final_t": final.t,
        "sup_v": series.meta["sup_v"],
        "events": [e["event"] for e in series.events],
        "rows": len(series),
    }
    curve = table_csv(["theta", "z"], np.column_stack([final.thetas, final.zs]).tolist())
    return series, summary, {"final_curve.csv": curve}


def _run_cross_solver(cfg: ExperimentConfig, levels):
    """Run graph and Lagrangian solvers to t_end at each N; Hausdorff distance per N."""
    rows = []
    for n_nodes in levels:
        finals = {}
        for mode in ("graph", "lagrangian"):
            ccfg = _csf_config(cfg, n_nodes=n_nodes, mode=mode)
            ccfg.cadence = ccfg.t_end
            _, finals[mode], _ = csf.run(ccfg)
        dist = csf.hausdorff(finals["graph"], finals["lagrangian"], ccfg.warping)
        rows.append([n_nodes, dist])
    norms = [r[1] for r in rows]
    order = residual.observed_order([(n, None) for n in levels], norms)
    series = DiagnosticSeries(["n_nodes", "hausdorff"], rows)
    return series, {"levels": levels, "hausdorff": norms, "observed_order": order}, {}


def _model(cfg: ExperimentConfig) -> mcf_sym.ModelM:
    m = cfg.section("model")
    kind = m.get("kind", "torus")
    n = int(m.get("n", 2))
    if kind == "torus":
        return mcf_sym.FlatTorus(n, float(m.get("rho", 0.0)))
    if kind == "sphere":
        return mcf_sym.RoundSphere(n, m.get("rho"))
    return mcf_sym.ModelM(kind, n, float(m.get("rho", 0.0)))


def _run_mcf(cfg: ExperimentConfig):
    w = cfg.warping()
    model = _model(cfg)
    num = cfg.section("numerics")
    alpha = float(cfg.section("hypotheses").get("alpha", 2.0))
    mcfg = mcf_sym.MCFConfig(warping=w, model=model, initial=cfg.section("initial"), alpha=alpha, **num)
    series, final, _ = mcf_sym.theorem2_experiment(mcfg)
    summary = {k: series.meta[k] for k in ("final_t", "max_mu_drop", "sup_v")}
    summary["conditions"] = series.meta.get("conditions")
    summary["events"] = [e["event"] for e in series.events]
    init = cfg.section("initial")
    if init.get("kind") == "constant":
        # a constant graph is a parallel slice: compare with the scalar ODE
        ts = series.column("t")
        tr = parallel.integrate_parallel(w, model.n, float(init["z0"]), float(ts[-1]), tol=1e-12, t_eval=ts)
        ref = np.array([tr.at(t) for t in ts])
        err = np.maximum(np.abs(series.column("z_min") - ref), np.abs(series.column("z_max") - ref))
        summary["parallel_error"] = float(np.max(err))
    profile = table_csv(["x", "z"], np.column_stack([final.xs, final.zs]).tolist())
    return series, summary, {"final_profile.csv": profile}


def _run_residual(cfg: ExperimentConfig):
    w = cfg.warping()
    num = cfg.section("numerics")
    levels = [int(n) for n in num.pop("levels", [128, 256, 512])]
    equations = cfg.section("study").get("equations")
    init = cfg.section("initial")
    common = {k: num[k] for k in ("t0", "n_snapshots", "snap_steps", "dt_coef") if k in num}
    if "model" in cfg.raw:
        model = _model(cfg)
        alpha = cfg.section("hypotheses").get("alpha")

        def builder(n_nodes):
            return residual.mcf_window(w, model, init, n_nodes, alpha=alpha, **common)

    else:
        mode = num.get("mode", "graph")
        redis = bool(num.get("redistribute", False))

        def builder(n_nodes):
            return residual.csf_window(w, init, n_nodes, mode=mode, redistribute=redis, **common)

    reports = residual.refinement_study(builder, levels, equations)
    rows = []
    for rep in reports:
        order = math.nan if rep.observed_order is None else rep.observed_order
        for i, (n_nodes, dt) in enumerate(rep.grid_levels):
            margin = rep.margins[i] if rep.margins else math.nan
            rows.append([rep.equation, n_nodes, dt, rep.residual_norms[i], order, margin])
    columns = ["equation", "n_nodes", "dt", "residual", "order", "raw_margin"]
    files = {"series.csv": table_csv(columns, rows)}
    summary = {"levels": levels, "reports": [rep.to_dict() for rep in reports]}
    return None, summary, files


def _run_neckpinch(cfg: ExperimentConfig):
    b = cfg.section("bump")
    bump = neckpinch.BumpConfig(
        n=int(b.get("n", 2)), eps=float(b.get("eps", 0.1)), r0=float(b.get("r0", 1.0)), r1=float(b.get("r1", 3.0))
    )
    num = cfg.section("numerics")
    try:
        series, verdict = neckpinch.run_counterexample(bump, **num)
    except InconclusiveRun as exc:
        empty = table_csv(neckpinch.NECK_COLUMNS, [])
        return None, {"config": bump.to_dict(), "inconclusive": str(exc)}, {"series.csv": empty}
    summary = {"config": bump.to_dict(), "verdict": verdict}
    if bump.degenerate:
        # the degenerate bump is the round sphere: radius sqrt(r0^2 - 2 n t)
        t = series.column("t")
        t_sing = bump.r0**2 / (2 * bump.n)
        keep = t <= 0.9 * t_sing
        exact = np.sqrt(bump.r0**2 - 2 * bump.n * t[keep])
        err = np.maximum(
            np.abs(series.column("extent")[keep] - exact), np.abs(series.column("radius_min")[keep] - exact)
        )
        summary["sphere_oracle_error"] = float(np.max(err))
        summary["sphere_oracle_t_max"] = float(t[keep][-1])
    return series, summary, {"verdict.json": dump_json(verdict)}


RUNNERS = {
    "geometry": _run_geometry,
    "parallel": _run_parallel,
    "csf": _run_csf,
    "mcf": _run_mcf,
    "residual": _run_residual,
    "neckpinch": _run_neckpinch,
}


def run_dir(cfg: ExperimentConfig, root) -> Path:
    return Path(root) / f"{cfg.name}-{cfg.hash[:12]}"


def run_experiment(cfg, out=None) -> RunResult:
    """Run a config (dict or ExperimentConfig) and write its artifact bundle."""
    if not isinstance(cfg, ExperimentConfig):
        cfg = ExperimentConfig.from_dict(cfg)
    series, summary, files = RUNNERS[cfg.module](cfg)
    directory = run_dir(cfg, out_root(out))
    directory.mkdir(parents=True, exist_ok=True)
    outputs = {"config.json": canonical(cfg.raw) + "\n", "summary.json": dump_json(summary)}
    if series is not None:
        outputs["series.csv"] = series.to_csv()
        outputs["events.json"] = series.events_json() + "\n"
    else:
        outputs["events.json"] = "[]\n"
    outputs.update(files)
    for name, text in outputs.items():
        (directory / name).write_text(text)
    return RunResult(cfg, directory, summary, series, sorted(outputs))


__all__ = ["RunResult", "run_experiment", "out_root", "run_dir", "dump_json", "table_csv"]
