import csv
import json
import subprocess
import sys

import pytest

from optrot.cli import run
from optrot.harness import CSV_COLUMNS

SQUARE = {"builtin": "unit-square", "params": {"subdivisions": 6}}


def write_config(tmp_path, data, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data) if not isinstance(data, str) else data)
    return path


def invoke(tmp_path, command, data=None, *extra):
    argv = [command, "--out", str(tmp_path / "out"), *extra]
    if data is not None:
        argv += ["--config", str(write_config(tmp_path, data))]
    return run(argv)


def report(tmp_path):
    return json.loads((tmp_path / "out" / "report.json").read_text())


@pytest.mark.parametrize("field, kind", [("uniform-tension", "Singleton"), ("tangential-2d", "FullGroup")])
def test_classify(tmp_path, field, kind):
    assert invoke(tmp_path, "classify", {"mesh": SQUARE, "field": {"builtin": field}}) == 0
    rep = report(tmp_path)
    assert rep["kind"] == kind
    assert len(rep["sample_members"]) == (1 if kind == "Singleton" else 3)
    meta = json.loads((tmp_path / "out" / "meta.json").read_text())
    assert meta["command"] == "classify"
    assert set(meta["versions"]) == {"optrot", "python", "numpy", "scipy"}


def test_appendix_demo_needs_no_config(tmp_path):
    assert invoke(tmp_path, "appendix-demo") == 0
    rep = report(tmp_path)
    assert rep["max_err_W0"] <= 1e-10 and rep["passed"]


def test_solve_linear_tension_value(tmp_path):
    cfg = {"mesh": SQUARE, "field": {"builtin": "uniform-tension"}, "density": {"mu": 1, "lambda": 1}}
    assert invoke(tmp_path, "solve-linear", cfg) == 0
    rep = report(tmp_path)
    assert rep["value"] == pytest.approx(-0.25, rel=1e-12)
    assert rep["min_over_R"]["value"] == pytest.approx(-0.25, rel=1e-12)


def test_minimize_report(tmp_path):
    cfg = {"mesh": SQUARE, "field": {"builtin": "uniform-tension"}, "epsilons": [0.05]}
    assert invoke(tmp_path, "minimize", cfg) == 0
    rep = report(tmp_path)
    assert rep["converged"]
    assert -0.26 <= rep["energy"]["J_over_eps2"] <= 0


def test_sweep_recovery_writes_csv(tmp_path):
    cfg = {
        "mesh": SQUARE,
        "field": {"builtin": "uniform-tension"},
        "recovery": {"u0": "zero", "R0": "base", "W0": [[0, -1], [1, 0]]},
    }
    assert invoke(tmp_path, "sweep-recovery", cfg) == 0
    with open(tmp_path / "out" / "sweep.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) == 5
    rep = report(tmp_path)
    assert rep["limit_value"] == pytest.approx(1.0)
    assert rep["dist_rate"]["slope"] == pytest.approx(0.5, abs=0.05)
    # plot data mirrors the CSV
    assert [r["epsilon"] for r in rep["rows"]] == [float(r["epsilon"]) for r in rows]


def test_reruns_are_byte_identical(tmp_path):
    cfg = {"mesh": SQUARE, "field": {"builtin": "uniform-tension"}, "epsilons": [0.1, 0.05]}
    path = write_config(tmp_path, cfg)
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert run(["sweep-minimizers", "--config", str(path), "--out", str(out), "--seed", "3"]) == 0
        outs.append({name: (out / name).read_bytes() for name in ("report.json", "sweep.csv", "meta.json")})
    assert outs[0] == outs[1]


@pytest.mark.parametrize(
    "data, field",
    [
        ({"mesh": SQUARE, "density": {"mu": -1}}, "density.mu"),
        ({"mesh": SQUARE, "colour": 1}, "colour"),
        ({"field": {"builtin": "zero"}}, "mesh"),
        ({"mesh": {"builtin": "unit-cube"}}, "mesh"),
        ({"mesh": SQUARE, "field": {"builtin": "gravity"}}, "field"),
        ({"mesh": SQUARE, "epsilons": [0.1, 0]}, "epsilons[1]"),
        ({"mesh": SQUARE, "solver": {"max_iters": "many"}}, "solver.max_iters"),
        ({"mesh": SQUARE, "recovery": {"W0": [[1, 0], [0, 1]]}}, "recovery.W0"),
        ('{"mesh": {', "<json line 1"),
    ],
)
def test_config_errors_exit_2_with_field(tmp_path, capsys, data, field):
    assert invoke(tmp_path, "classify", data) == 2
    assert field in capsys.readouterr().err
    assert not (tmp_path / "out" / "report.json").exists()


def test_missing_config_exits_2(tmp_path, capsys):
    assert invoke(tmp_path, "classify") == 2
    assert "--config" in capsys.readouterr().err


def test_non_optimal_base_rotation_exits_2(tmp_path, capsys):
    cfg = {
        "mesh": SQUARE,
        "field": {"builtin": "uniform-tension"},
        "recovery": {"R0": [[0, -1], [1, 0]]},
    }
    assert invoke(tmp_path, "solve-linear", cfg) == 2
    assert "recovery.R0" in capsys.readouterr().err


def test_tangential_w0_rejected(tmp_path, capsys):
    cfg = {
        "mesh": SQUARE,
        "field": {"builtin": "tangential-2d"},
        "recovery": {"W0": [[0, -1], [1, 0]]},
    }
    assert invoke(tmp_path, "sweep-recovery", cfg) == 2
    assert "recovery.W0" in capsys.readouterr().err


def test_numerical_failure_exits_3(tmp_path, capsys):
    # loads so large that the energy overflows
    mesh = {"n": 2, "vertices": [[0, 0], [1, 0], [0, 1]], "cells": [[0, 1, 2]]}
    load = {"0": [1e200, 1e200], "1": [-1e200, 0]}
    cfg = {"mesh": mesh, "field": {"traction": load}, "epsilons": [0.1]}
    code = invoke(tmp_path, "minimize", cfg)
    assert code == 3
    assert "numerical error" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "optrot", "appendix-demo", "--out", str(tmp_path / "o"), "--quiet"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert proc.stderr == ""
    assert json.loads((tmp_path / "o" / "report.json").read_text())["passed"]
