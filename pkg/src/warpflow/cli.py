"""Command line interface.

    warpflow <module> run --config FILE [--out DIR]
    warpflow geometry check --config FILE
    warpflow residual study --config FILE [--out DIR]
    warpflow registry list
    warpflow registry show NAME
    warpflow registry run NAME [--out DIR]

The output root defaults to $WARPFLOW_OUT, then ./warpflow-out.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import config as config_mod
from . import registry, warp
from .errors import ConfigError, WarpflowError
from .runner import dump_json, run_experiment

MODULE_ACTIONS = {
    "geometry": ("run", "check"),
    "parallel": ("run",),
    "csf": ("run",),
    "mcf": ("run",),
    "residual": ("run", "study"),
    "neckpinch": ("run",),
}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="warpflow", description="Mean curvature flow in warped products.")
    sub = p.add_subparsers(dest="command", required=True)
    for module, actions in MODULE_ACTIONS.items():
        mp = sub.add_parser(module, help=f"{module} experiments")
        msub = mp.add_subparsers(dest="action", required=True)
        for action in actions:
            ap = msub.add_parser(action)
            ap.add_argument("--config", required=True, help="JSON config file")
            ap.add_argument("--out", default=None, help="output root (overrides WARPFLOW_OUT)")
    rp = sub.add_parser("registry", help="registered experiments")
    rsub = rp.add_subparsers(dest="action", required=True)
    rsub.add_parser("list")
    show = rsub.add_parser("show")
    show.add_argument("name")
    run = rsub.add_parser("run")
    run.add_argument("name")
    run.add_argument("--out", default=None)
    return p


def _load_for(module: str, path: str) -> dict:
    cfg = config_mod.load(path)
    if cfg["module"] != module:
        raise ConfigError("module", f"config is for {cfg['module']!r}, command is {module!r}")
    return cfg


def _geometry_check(cfg: dict) -> dict:
    """Sample (C1), (C2) and the n = 1 convexity on the configured grid."""
    ec = config_mod.ExperimentConfig.from_dict(cfg)
    w = ec.warping()
    num, hyp = ec.section("numerics"), ec.section("hypotheses")
    lo, hi = w.domain
    z_min = num.get("z_min", max(lo, -10.0))
    z_max = num.get("z_max", min(hi, 10.0))
    grid = np.linspace(z_min, z_max, int(num.get("points", 201)) + 2)[1:-1]
    rep = warp.check_conditions(w, grid, float(hyp.get("alpha", 1.0)), float(hyp.get("rho", 0.0)))
    return rep.to_dict()


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "registry":
            if args.action == "list":
                for name, crit, claim in registry.list_registry():
                    print(f"{crit:>3}  {name:<28}  {claim}")
                return 0
            if args.action == "show":
                entry = registry.get(args.name)
                print(json.dumps(list(entry.configs), indent=2))
                return 0
            verdict = registry.run_entry(args.name, args.out)
            print(dump_json(verdict), end="")
            return 0 if verdict["passed"] else 1
        cfg = _load_for(args.command, args.config)
        if args.action == "check":
            print(dump_json(_geometry_check(cfg)), end="")
            return 0
        result = run_experiment(cfg, args.out)
        print(result.out_dir)
        print(dump_json(result.summary), end="")
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except WarpflowError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
