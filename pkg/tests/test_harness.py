import csv
import json
import logging

import numpy as np
import pytest

from rcident import rc_linear as rl
from rcident.errors import DataError, ValidationError
from rcident.harness import load_dataset, resolve, run_pipeline
from rcident.harness.cli import main
from rcident.harness.datasets import write_rows
from rcident.harness.report import RunReport, canonical, dumps, emit_report
from rcident.uniqueness import SupportSet


def _report(path):
    return json.loads((path / "report.json").read_text())


@pytest.fixture
def cwd(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


# exit codes and flags

def test_success_exit_and_report(cwd):
    assert main(["riesz", "--out", "r"]) == 0
    rep = _report(cwd / "r")
    assert rep["schema_version"] == "1.0" and rep["status"] == "ok" and rep["failed_stage"] is None
    assert rep["config"]["pipeline"] == "riesz" and "out" not in rep["config"]
    assert "gram_eigenvalues.csv" in rep["artifacts"] and (cwd / "r" / "gram_eigenvalues.csv").is_file()
    assert set(json.loads((cwd / "r" / "timings.json").read_text())) == set(rep["stages"])


@pytest.mark.parametrize("config, extra", [
    ("pipeline: riesz\nbogus: 1\n", []),
    ("pipeline: riesz\ninputs:\n  nope: 3\n", []),
    ("pipeline: panel\n", []),
    ("pipeline: riesz\ntolerances:\n  l1: -1\n", []),
    ("pipeline: riesz\nseed: -4\n", []),
    ("pipeline: uniqueness\ninputs:\n  support_csv: missing.csv\n", []),
    ("pipeline: riesz\n", ["--tol-l1", "abc"]),
    ("pipeline: riesz\n", ["--tol-unknown", "1"]),
    ("pipeline: riesz\n", ["--bogus-flag"]),
    ("- just\n- a list\n", []),
])
def test_validation_errors_exit_2(cwd, config, extra):
    (cwd / "c.yaml").write_text(config)
    assert main(["riesz", "--config", "c.yaml", "--out", "o"] + extra) == 2
    assert not (cwd / "o" / "report.json").exists()


def test_missing_config_and_unwritable_out_exit_2(cwd):
    assert main(["riesz", "--config", "nowhere.yaml"]) == 2
    (cwd / "afile").write_text("x")
    assert main(["riesz", "--out", "afile/sub"]) == 2
    assert main(["riesz", "--threads", "0"]) == 2


def test_numerical_failure_exit_3(cwd, capsys):
    # a normal error law's characteristic function underflows well inside |t| <= 8
    (cwd / "k.yaml").write_text("pipeline: kotlarski\ninputs:\n  delta: {kind: normal}\n  t_max: 8.0\n")
    assert main(["kotlarski", "--config", "k.yaml", "--out", "o"]) == 3
    rep = _report(cwd / "o")
    assert rep["status"] == "failed" and rep["failed_stage"] == "kotlarski_recover"
    assert rep["error"].startswith("NumericalFailure")
    assert "kotlarski_recover" in capsys.readouterr().err


def test_tolerance_overrides_and_precedence(cwd):
    (cwd / "c.yaml").write_text("pipeline: binary_invert\ntolerances:\n  l1: 0.5\n  tv: 0.2\n")
    assert main(["binary-invert", "--config", "c.yaml", "--out", "a", "--tol-l1", "0.004", "--tol-zero=1e-7"]) == 0
    tol = _report(cwd / "a")["config"]["tolerances"]
    assert tol["l1"] == 0.004 and tol["zero"] == 1e-7 and tol["tv"] == 0.2
    verdict = _report(cwd / "a")["results"]["verdict"]
    assert verdict["tolerance"] == 0.004


def test_seed_flag_overrides_file(cwd):
    (cwd / "c.json").write_text(json.dumps({"pipeline": "simulate", "seed": 5, "inputs": {"n": 20}}))
    assert main(["simulate", "--config", "c.json", "--out", "a"]) == 0
    assert main(["simulate", "--config", "c.json", "--out", "b", "--seed", "6"]) == 0
    assert _report(cwd / "a")["config"]["seed"] == 5 and _report(cwd / "b")["config"]["seed"] == 6
    assert (cwd / "a" / "linear.csv").read_text() != (cwd / "b" / "linear.csv").read_text()


def test_threads_default_from_environment(cwd, monkeypatch):
    monkeypatch.setenv("RCIDENT_THREADS", "3")
    assert main(["riesz", "--out", "a"]) == 0
    assert _report(cwd / "a")["config"]["threads"] == 3


def test_yaml_and_json_configs_agree(cwd):
    cfg = {"pipeline": "uniqueness", "seed": 2,
           "inputs": {"support": {"generator": "parabola", "x": [0, 1, 2, 3, 4]}, "degree": 2}}
    (cwd / "c.json").write_text(json.dumps(cfg))
    (cwd / "c.yaml").write_text("pipeline: uniqueness\nseed: 2\ninputs:\n  support: {generator: parabola, x: [0, 1, 2, 3, 4]}\n"
                                "  degree: 2\n")
    assert main(["uniqueness", "--config", "c.json", "--out", "j"]) == 0
    assert main(["uniqueness", "--config", "c.yaml", "--out", "y"]) == 0
    assert (cwd / "j" / "report.json").read_bytes() == (cwd / "y" / "report.json").read_bytes()
    assert _report(cwd / "j")["results"]["full_rank"] is False


def test_config_relative_paths_resolve_against_config_dir(cwd):
    d = cwd / "cfgdir"
    d.mkdir()
    (d / "pts.csv").write_text("x1,x2\n0,0\n1,1\n2,4\n3,9\n")
    (d / "c.yaml").write_text("pipeline: uniqueness\ninputs:\n  support_csv: pts.csv\n  degree: 1\n")
    assert main(["uniqueness", "--config", "cfgdir/c.yaml", "--out", "o"]) == 0
    assert _report(cwd / "o")["results"]["n_points"] == 4


@pytest.mark.parametrize("command", ["riesz", "counterexample", "simulate", "uniqueness"])
def test_rerun_is_byte_identical(cwd, command):
    assert main([command, "--out", "a", "--seed", "7"]) == 0
    assert main([command, "--out", "b/c", "--seed", "7"]) == 0
    assert (cwd / "a" / "report.json").read_bytes() == (cwd / "b" / "c" / "report.json").read_bytes()
    for name in _report(cwd / "a")["artifacts"]:
        assert (cwd / "a" / name).read_bytes() == (cwd / "b" / "c" / name).read_bytes()


# pipeline content

def test_determinacy_roster_verdicts(cwd):
    assert main(["determinacy", "--out", "o"]) == 0
    seqs = _report(cwd / "o")["results"]["sequences"]
    got = {k: v["verdict"] for k, v in seqs.items()}
    assert got == {"normal": "determinate_evidence", "chi2_3": "determinate_evidence",
                   "gamma_2": "determinate_evidence", "lognormal": "indeterminate_evidence",
                   "abs_normal_3": "determinate_evidence", "abs_normal_5": "indeterminate_evidence"}
    rows = list(csv.reader(open(cwd / "o" / "verdicts.csv")))
    assert rows[0] == ["name", "verdict", "growth_exponent"] and len(rows) == 7
    for c in seqs["normal"]["criteria"]:
        assert {"name", "window", "tolerance", "passed"} <= set(c)


def test_counterexample_evidence(cwd):
    assert main(["counterexample", "--out", "o"]) == 0
    res = _report(cwd / "o")["results"]
    eq, tv = res["equality_of_moments"], res["tv_difference"]
    assert eq["passed"] and eq["value"] <= 1e-6 and eq["criterion"] == "moment_equality"
    assert tv["passed"] and tv["value"] >= 1e-2
    assert eq["window"] and tv["window"]
    rows = list(csv.reader(open(cwd / "o" / "index_moments.csv")))
    assert len(rows) > 1


def test_binary_invert_records_l1(cwd):
    assert main(["binary-invert", "--out", "o"]) == 0
    res = _report(cwd / "o")["results"]
    errs = [res["l1_errors"][k] for k in ("8", "16", "32", "64")]
    assert res["monotone"] and all(a > b for a, b in zip(errs, errs[1:]))
    v = res["verdict"]
    assert v["passed"] and v["value"] == errs[-1] and v["value"] <= v["tolerance"] == 1e-3
    with open(cwd / "o" / "spectrum.csv") as fh:
        assert fh.readline() == "degree,l1_norm,l2_norm\n"


def test_failed_stage_keeps_partial_artifacts(cwd):
    (cwd / "bad.csv").write_text("order,value,absolute_value\n0,1,1\n1,zero,0\n")
    roster = _report_roster()
    cfg = {"pipeline": "determinacy", "inputs": {"sequences": roster + [{"name": "broken", "csv": "bad.csv"}]}}
    (cwd / "c.json").write_text(json.dumps(cfg))
    assert main(["determinacy", "--config", "c.json", "--out", "o"]) == 2
    rep = _report(cwd / "o")
    assert rep["status"] == "failed" and rep["failed_stage"] == "sequence:broken"
    assert "line 3" in rep["error"]
    rows = list(csv.reader(open(cwd / "o" / "verdicts.csv")))
    assert len(rows) == 1 + len(roster)


def _report_roster():
    from rcident.harness import DEFAULT_INPUTS
    return DEFAULT_INPUTS["determinacy"]["sequences"]


def test_run_pipeline_api(tmp_path):
    cfg = resolve("riesz", {"inputs": {"n": 5}}, seed=1, out=str(tmp_path))
    rep = run_pipeline(cfg, tmp_path)
    assert rep.status == "ok" and rep.results["gram"]["size"] == 10
    with pytest.raises(ValidationError):
        resolve("riesz", {"pipeline": "panel"})
    with pytest.raises(ValidationError):
        resolve("nonexistent")


# reports

def test_empty_report_is_valid_json(tmp_path):
    emit_report(RunReport("riesz", {}), tmp_path)
    d = json.loads((tmp_path / "report.json").read_text())
    assert d == {"schema_version": "1.0", "pipeline": "riesz", "status": "ok", "failed_stage": None,
                 "error": None, "stages": [], "results": {}, "artifacts": [], "config": {}}


def test_canonical_json():
    assert canonical({"b": np.float64("nan"), "a": [np.inf, -np.inf, np.int64(3)], "c": np.arange(2),
                      "d": 1 + 2j, "e": np.bool_(True)}) == \
        {"b": "nan", "a": ["inf", "-inf", 3], "c": [0, 1], "d": {"re": 1.0, "im": 2.0}, "e": True}
    text = dumps({"z": 1, "a": {"y": 2, "b": 3}})
    assert text.index('"a"') < text.index('"z"') and text.index('"b"') < text.index('"y"')
    assert dumps({"x": 0.1}) == dumps({"x": 0.1})


# datasets

def test_dataset_errors_name_lines(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("x1,x2,y\n1,2,3\n4,5\n")
    with pytest.raises(DataError, match="line 3"):
        load_dataset(p, "linear")
    p.write_text("x1,x2,y\n1,2,3\n4,5,six\n")
    with pytest.raises(DataError, match="line 3"):
        load_dataset(p, "linear")
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ValidationError, match="schema"):
        load_dataset(p, "linear")
    with pytest.raises(ValidationError):
        load_dataset(p, "nonsense")
    with pytest.raises(ValidationError):
        load_dataset(tmp_path / "absent.csv", "linear")


def test_empty_dataset_warns(tmp_path, caplog):
    p = tmp_path / "d.csv"
    p.write_text("y,x1\n")
    with caplog.at_level(logging.WARNING, logger="rcident.harness"):
        ds = load_dataset(p, "binary")
    assert ds.n_rows == 0 and ds.warnings and "no rows" in caplog.text
    assert ds.columns["y"].shape == (0,)


def test_panel_missing_period_names_unit(tmp_path):
    p = tmp_path / "panel.csv"
    p.write_text("unit,period,y,x\n1,1,0.5,1\n1,2,0.7,1\n3,1,0.2,2\n2,1,0.1,1\n2,2,0.3,2\n")
    with pytest.raises(ValidationError, match="unit 3"):
        load_dataset(p, "panel")
    p.write_text("unit,period,y,x\n1,1,0.5,1\n1,2,0.7,1\n")
    assert load_dataset(p, "panel").n_rows == 2


def test_million_row_linear_round_trip(tmp_path):
    atoms = np.array([[0.5, 1.0, -0.5], [-0.3, 0.2, 0.8], [1.1, -0.7, 0.1], [0.0, 0.4, -0.9]])
    w = np.array([0.1, 0.2, 0.3, 0.4])
    V = SupportSet.from_points([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0], [1.5, -1.0]])
    X, y = rl.simulate_linear(rl.RCModel(atoms, w), V, 250_000, 4)
    path = tmp_path / "lin.csv"
    write_rows(path, ["x1", "x2", "y"], [(a, b, c) for (a, b), c in zip(X, y)])
    ds = load_dataset(path, "linear")
    assert ds.n_rows == 1_000_000
    assert np.array_equal(ds.columns["y"], y)
    stats = ds.stats()
    assert stats["x1"]["mean"] == pytest.approx(V.points[:, 0].mean(), abs=1e-12)
    assert stats["x2"]["mean"] == pytest.approx(V.points[:, 1].mean(), abs=1e-12)
    idx = atoms[:, 0][None, :] + V.points @ atoms[:, 1:].T
    mean = float(np.mean(idx @ w))
    var = float(np.mean(idx**2 @ w - (idx @ w) ** 2))
    assert abs(stats["y"]["mean"] - mean) <= 4 * np.sqrt(var / 1_000_000)
    assert stats["y"]["min"] == pytest.approx(idx.min()) and stats["y"]["max"] == pytest.approx(idx.max())
