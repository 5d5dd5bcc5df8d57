import json

import pytest

from charmonic.cli import CONFIG_SCHEMA, SCHEMA_ID, main, run_experiment
from charmonic.experiments import EXPERIMENTS


def _write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def test_list_experiments(capsys):
    assert main(["list-experiments"]) == 0
    out = capsys.readouterr().out
    for name in EXPERIMENTS:
        assert name in out


def test_flat_curvature_suite_exit_zero(tmp_path):
    cfg = {"experiment": "curvature-suite", "metric": {"kind": "flat"}, "grid": {"sizes": 8}}
    assert main(["run", _write(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 0
    rep = json.loads((tmp_path / "o" / "report.json").read_text())
    assert rep["schema"] == SCHEMA_ID and rep["rng"] == "Philox" and rep["passed"]
    assert all(c["value"] == 0.0 for c in rep["checks"])


def test_unknown_experiment_exit_two(tmp_path, capsys):
    assert main(["run", _write(tmp_path, {"experiment": "nope"})]) == 2
    assert "unknown experiment" in capsys.readouterr().err


def test_schema_error_reports_path(tmp_path, capsys):
    assert main(["run", _write(tmp_path, {"experiment": "curvature-suite", "grid": {"sizes": 6}})]) == 2
    assert "grid/sizes" in capsys.readouterr().err


def test_unreadable_config_exit_two(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert main(["run", str(p)]) == 2


def test_failed_check_exit_one(tmp_path):
    cfg = {"experiment": "gjms-einstein-check", "tolerances": {"flat": -1.0}}
    assert main(["run", _write(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 1


def test_reports_bit_stable_and_seeded(tmp_path):
    cfg = {"experiment": "conformal-invariance-e4", "seed": 5, "grid": {"sizes": 8},
           "params": {"draws": 5, "coarse": 8}, "tolerances": {"spread": 1.0}}
    path = _write(tmp_path, cfg)
    main(["run", path, "--out", str(tmp_path / "a")])
    main(["run", path, "--out", str(tmp_path / "b")])
    a = (tmp_path / "a" / "report.json").read_bytes()
    assert a == (tmp_path / "b" / "report.json").read_bytes()
    assert (tmp_path / "a" / "e4_values.csv").exists()
    main(["run", path, "--out", str(tmp_path / "c"), "--seed", "6"])
    rep = json.loads((tmp_path / "c" / "report.json").read_text())
    assert rep["seed"] == 6
    assert json.loads(a)["metrics"] != rep["metrics"]


def test_run_experiment_api():
    report, tables = run_experiment({"experiment": "einstein-closed-form"})
    assert report["passed"] and report["metrics"]["E4_id_S4"] == "32/3*pi^2"


def test_schema_lists_metric_kinds():
    kinds = CONFIG_SCHEMA["properties"]["metric"]["properties"]["kind"]["enum"]
    assert set(kinds) == {"flat", "conformal", "generic", "homogeneous"}


def test_missing_subcommand_exit_two():
    assert main([]) == 2


def test_unusable_metric_kind_exits_2(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"experiment": "curvature-suite", "metric": {"kind": "homogeneous"}}))
    assert main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 2
