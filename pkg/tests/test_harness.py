import json
import math

import pytest

from warpflow import cli, config, registry, runner
from warpflow.config import ExperimentConfig
from warpflow.errors import ConfigError

PB = {"family": "power_beta", "beta": 0.5, "a": -1.0}

SMALL = {
    "geometry": {
        "name": "geo",
        "module": "geometry",
        "warping": PB,
        "numerics": {"z_min": -10.0, "z_max": -1.0, "points": 50, "pairs": 20},
        "hypotheses": {"alpha": 1.0},
    },
    "parallel": {
        "name": "par",
        "module": "parallel",
        "warping": {"family": "exp_neg_z_squared"},
        "initial": {"z0": [-1.0, -0.5], "n": 1},
        "numerics": {"t_end": 0.5, "tol": 1e-10, "samples": 11},
    },
    "csf": {
        "name": "curve",
        "module": "csf",
        "warping": PB,
        "initial": {"kind": "sinusoid", "z0": -3.0, "amplitude": 0.2},
        "numerics": {"n_nodes": 32, "t_end": 0.1, "cadence": 0.05},
    },
    "mcf": {
        "name": "torus",
        "module": "mcf",
        "warping": {"family": "power_beta", "beta": 0.25, "a": -1.0},
        "model": {"kind": "torus", "n": 2},
        "initial": {"kind": "sine", "z0": -5.0, "amplitude": 0.1},
        "numerics": {"n_nodes": 16, "t_end": 0.5, "cadence": 0.25},
        "hypotheses": {"alpha": 2.0},
    },
    "residual": {
        "name": "res",
        "module": "residual",
        "warping": PB,
        "initial": {"kind": "sinusoid", "z0": -3.0, "amplitude": 0.3},
        "numerics": {"levels": [32, 64], "mode": "lagrangian"},
        "study": {"equations": ["ThetaN1", "Vn1"]},
    },
    "neckpinch": {
        "name": "sphere",
        "module": "neckpinch",
        "bump": {"n": 2, "eps": 0.1, "r0": 1.0, "r1": 1.0},
        "numerics": {"n_nodes": 32, "cadence": 0.05},
    },
}


@pytest.mark.parametrize(
    "mutate, path",
    [
        (lambda c: c["numerics"].update(foo=1), "numerics.foo"),
        (lambda c: c.update(extra=1), "extra"),
        (lambda c: c["warping"].pop("beta"), "warping.beta"),
        (lambda c: c["numerics"].update(n_nodes="many"), "numerics.n_nodes"),
        (lambda c: c.update(module="plot"), "module"),
        (lambda c: c.pop("warping"), "warping"),
    ],
)
def test_config_errors_name_the_field(mutate, path):
    cfg = json.loads(json.dumps(SMALL["csf"]))
    mutate(cfg)
    with pytest.raises(ConfigError) as exc:
        config.validate(cfg)
    assert exc.value.path == path


def test_unknown_family_and_param():
    cfg = json.loads(json.dumps(SMALL["csf"]))
    cfg["warping"] = {"family": "power_beta", "beta": 0.5, "gamma": 1.0}
    with pytest.raises(ConfigError) as exc:
        config.validate(cfg)
    assert exc.value.path == "warping.gamma"


def test_hash_is_canonical():
    a = ExperimentConfig.from_dict(SMALL["csf"])
    reordered = dict(reversed(list(SMALL["csf"].items())))
    assert ExperimentConfig.from_dict(reordered).hash == a.hash
    changed = json.loads(json.dumps(SMALL["csf"]))
    changed["numerics"]["n_nodes"] = 33
    assert ExperimentConfig.from_dict(changed).hash != a.hash


@pytest.mark.parametrize("module", sorted(SMALL))
def test_each_module_runs_and_reproduces(module, tmp_path):
    a = runner.run_experiment(SMALL[module], tmp_path / "a")
    b = runner.run_experiment(SMALL[module], tmp_path / "b")
    assert a.out_dir.name == f"{SMALL[module]['name']}-{a.config.hash[:12]}"
    for name in ("config.json", "series.csv", "events.json", "summary.json"):
        assert (a.out_dir / name).exists()
    files = sorted(p.name for p in a.out_dir.iterdir())
    assert files == sorted(p.name for p in b.out_dir.iterdir())
    for name in files:
        assert (a.out_dir / name).read_bytes() == (b.out_dir / name).read_bytes()


def test_csv_uses_17_significant_digits(tmp_path):
    res = runner.run_experiment(SMALL["parallel"], tmp_path)
    header, first = (res.out_dir / "series.csv").read_text().splitlines()[:2]
    assert header == "index,z0,t,z"
    assert first.split(",")[-1] == "-1"
    last = (res.out_dir / "series.csv").read_text().splitlines()[-1]
    z = last.split(",")[-1]
    assert z == format(float(z), ".17g") and float(z) == res.series.rows[-1][-1]


def test_geometry_summary(tmp_path):
    res = runner.run_experiment(SMALL["geometry"], tmp_path)
    assert res.summary["conditions"]["c1_holds"]
    assert res.summary["gap"]["pairs"] == 20 and res.summary["gap"]["holds"]


def test_parallel_summary_matches_closed_form(tmp_path):
    res = runner.run_experiment(SMALL["parallel"], tmp_path)
    runs = res.summary["runs"]
    assert [r["terminal"] for r in runs] == ["reached_t_end", "reached_t_end"]
    zs = [row for row in res.series.rows if row[2] == 0.5]
    for (_, z0, _, z) in zs:
        assert abs(z - z0 * math.exp(1.0)) < 1e-8


def test_out_root_environment(monkeypatch, tmp_path):
    monkeypatch.setenv("WARPFLOW_OUT", str(tmp_path / "env"))
    assert runner.out_root() == tmp_path / "env"
    assert runner.out_root(tmp_path / "x") == tmp_path / "x"
    res = runner.run_experiment(SMALL["csf"])
    assert res.out_dir.parent == tmp_path / "env"
    monkeypatch.delenv("WARPFLOW_OUT")
    assert str(runner.out_root()) == runner.DEFAULT_OUT


def test_registry_contents():
    rows = registry.list_registry()
    names = [r[0] for r in rows]
    assert len(rows) == 12
    assert sorted(r[1] for r in rows) == list(range(1, 13))
    assert "thm1-2b-decay" in names and "appendix-graph-loss" in names
    assert "remark4-1-closedforms" in names
    assert len(set(names)) == len(names)
    with pytest.raises(ConfigError):
        registry.get("no-such-entry")


def test_registry_configs_validate():
    for name, _, _ in registry.list_registry():
        for raw in registry.get(name).configs:
            ExperimentConfig.from_dict(raw)


def test_registry_run_closed_forms(tmp_path):
    verdict = registry.run_entry("remark4-1-closedforms", tmp_path)
    assert verdict["passed"]
    stored = json.loads((tmp_path / "registry" / "remark4-1-closedforms" / "verdict.json").read_text())
    assert stored["passed"] is True and stored["criterion"] == 1


def test_registry_cache_reuses_results(tmp_path):
    cache = {}
    registry.run_entry("remark4-1-closedforms", tmp_path, cache)
    assert len(cache) == len(registry.get("remark4-1-closedforms").configs)
    before = dict(cache)
    registry.run_entry("remark4-1-closedforms", tmp_path / "again", cache)
    assert all(cache[k] is before[k] for k in before)


def _write(tmp_path, cfg):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return str(path)


def test_cli_run_and_errors(tmp_path, capsys):
    path = _write(tmp_path, SMALL["csf"])
    assert cli.main(["csf", "run", "--config", path, "--out", str(tmp_path / "out")]) == 0
    out = capsys.readouterr().out
    assert str(tmp_path / "out") in out
    # wrong module for the command
    assert cli.main(["mcf", "run", "--config", path]) == 2
    bad = json.loads(json.dumps(SMALL["csf"]))
    del bad["warping"]["beta"]
    assert cli.main(["csf", "run", "--config", _write(tmp_path, bad)]) == 2
    assert "warping.beta" in capsys.readouterr().err
    (tmp_path / "broken.json").write_text("{not json")
    assert cli.main(["csf", "run", "--config", str(tmp_path / "broken.json")]) == 2


def test_cli_geometry_check(tmp_path, capsys):
    assert cli.main(["geometry", "check", "--config", _write(tmp_path, SMALL["geometry"])]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["c1_holds"] is True


def test_cli_registry(tmp_path, capsys):
    assert cli.main(["registry", "list"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 12
    assert cli.main(["registry", "show", "thm1-2b-decay"]) == 0
    shown = json.loads(capsys.readouterr().out)
    assert shown[0]["module"] == "csf"
    assert cli.main(["registry", "show", "missing"]) == 2
    assert cli.main(["registry", "run", "remark4-1-closedforms", "--out", str(tmp_path)]) == 0
    assert json.loads(capsys.readouterr().out)["passed"] is True
