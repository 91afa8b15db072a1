import json
import math
from pathlib import Path

import pytest

from heisgeom import cayley
from heisgeom.cli import run
from heisgeom.report import load_schema, to_jsonable, validate_report

GOLDEN = Path(__file__).parent / "golden"


def invoke(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def report_of(capsys, *argv):
    code, out, err = invoke(capsys, *argv)
    rep = json.loads(out)
    validate_report(rep)
    return code, rep


def close(a, b, tol=1e-9):
    if isinstance(a, dict):
        return a.keys() == b.keys() and all(close(a[k], b[k], tol) for k in a)
    if isinstance(a, list):
        return len(a) == len(b) and all(close(x, y, tol) for x, y in zip(a, b))
    if isinstance(a, float) and isinstance(b, (int, float)) and not isinstance(b, bool):
        return math.isclose(a, b, rel_tol=tol, abs_tol=tol)
    return a == b


def test_ball_csv_artifact(tmp_path, capsys):
    out = tmp_path / "b2.csv"
    code, rep = report_of(capsys, "ball", "--radius", "2", "--format", "csv", "--out", str(out))
    assert code == 0
    lines = out.read_text().strip().split("\n")
    assert lines[0] == "x,y,z,dist"
    assert len(lines) - 1 == 17
    assert rep["artifacts"] == [str(out)]
    assert rep["results"]["size"] == 17


def test_csv_to_stdout_moves_report_to_stderr(capsys):
    code, out, err = invoke(capsys, "ball", "--radius", "1", "--format", "csv")
    assert code == 0
    assert out.startswith("x,y,z,dist\n")
    assert len(out.strip().split("\n")) == 6
    assert '"command": "ball"' in err


def test_params_precondition_failure(capsys):
    code, rep = report_of(capsys, "params", "--p", "2", "--t", "63")
    assert code == 1
    assert rep["status"] == "failed"
    assert "8^p" in rep["error"]["message"]
    assert rep["command"] == "cocycle params"


def test_cocycle_prefix_optional(capsys):
    a = report_of(capsys, "cocycle", "params", "--p", "2", "--t", "100")[1]
    b = report_of(capsys, "params", "--p", "2", "--t", "100")[1]
    assert a["results"] == b["results"]
    assert a["results"]["m"] == 2


@pytest.mark.parametrize("argv", [
    ["ball", "--radius", "2", "--bogus"],
    ["ball"],
    ["dist", "--element", "1,2"],
    ["trend", "--radii", "2,3"],
    ["frobnicate"],
    ["cocycle", "thm71", "--lambda", "1", "--step", "1/0.5"],
])
def test_usage_errors_exit_two(argv, capsys):
    code, out, err = invoke(capsys, *argv)
    assert code == 2
    assert out == ""
    assert "usage" in err


def test_usage_error_names_flag(capsys):
    code, _, err = invoke(capsys, "ball", "--radius", "2", "--bogus")
    assert "--bogus" in err


def test_budget_exceeded_exit_one(monkeypatch, capsys):
    monkeypatch.setenv("HEIS_MEM_BUDGET", "1K")
    cayley.clear_cache()
    try:
        code, rep = report_of(capsys, "ball", "--radius", "25")
    finally:
        cayley.clear_cache()
    assert code == 1
    assert rep["error"]["type"] == "BudgetExceeded"


def test_convergence_failure_embeds_residual(capsys):
    code, rep = report_of(capsys, "poincare", "--radius", "1", "--preset", "mini:5", "--max-iter", "1",
                          "--tol", "1e-15")
    assert code == 1
    err = rep["error"]
    assert err["type"] == "ConvergenceError"
    assert err["iterations"] == 1
    assert err["residual"] > 0 and err["estimate"] > 0


def test_energy_guard_failure_exits_one(capsys):
    code, rep = report_of(capsys, "thm71", "--lambda", "0.1")
    assert code == 1
    assert rep["results"]["w_bound_ok"] is False
    code, rep = report_of(capsys, "thm71", "--lambda", "1")
    assert code == 0


def test_dist_and_profile(capsys):
    code, rep = report_of(capsys, "dist", "--element", "0,0,9")
    assert code == 0 and rep["results"]["distance"] == 12
    assert rep["params"]["element"] == "0,0,9"
    code, rep = report_of(capsys, "profile", "--k", "25")
    assert rep["results"]["square_law_ok"]


@pytest.mark.parametrize("argv", [
    ["growth", "--rmin", "2", "--rmax", "10"],
    ["local-poincare", "--radius", "1", "--inner-factor", "2", "--outer-factor", "5", "--method", "dense"],
    ["lower-bound", "--radius", "1", "--constant", "1.2"],
    ["distort", "--radius", "1"],
    ["distort", "--radius", "1", "--p", "1", "--dim", "2"],
    ["embed-lp", "--radius", "1", "--p", "inf", "--dim", "2"],
    ["finite", "--q", "64", "--pairs", "50"],
    ["pi-lambda", "--lambda", "0.5", "--half-width", "3", "--step", "1/16"],
    ["lemma31", "--trials", "20", "--max-dim", "8"],
    ["lemma42"],
    ["lemma43", "--m", "10", "--n", "4"],
    ["lemma44", "--m", "6", "--n", "4"],
    ["compress", "--q", "4096"],
    ["admissible", "--family", "sqrt"],
])
def test_subcommands_succeed_with_valid_reports(argv, capsys):
    code, rep = report_of(capsys, *argv)
    assert code == 0, rep.get("error")
    assert rep["status"] == "ok"
    assert rep["seed"] == 0


def test_seed_is_recorded(capsys):
    _, rep = report_of(capsys, "lemma31", "--trials", "5", "--max-dim", "4", "--seed", "7")
    assert rep["seed"] == 7


def test_distort_instance_file(tmp_path, capsys):
    f = tmp_path / "p3.csv"
    f.write_text("i,j,d\n0,1,1\n0,2,2\n1,2,1\n")
    code, rep = report_of(capsys, "distort", "--instance", str(f))
    assert code == 0
    assert rep["results"]["D"] == pytest.approx(1.0, abs=1e-6)
    code, _, _ = invoke(capsys, "distort", "--instance", str(tmp_path / "missing.csv"))
    assert code == 2


def test_schema_rejects_malformed_reports():
    import jsonschema

    schema = load_schema()
    good = {"command": "ball", "params": {}, "results": {}, "seed": 0, "wall_ms": 1,
            "version": "0.1.0", "status": "ok"}
    validate_report(good)
    for bad in ({**good, "extra": 1}, {k: v for k, v in good.items() if k != "seed"},
                {**good, "status": "failed"}, {**good, "wall_ms": -1}):
        with pytest.raises(jsonschema.ValidationError):
            validate_report(bad)
    assert schema["type"] == "object"


def test_to_jsonable_handles_numeric_types():
    import numpy as np
    from fractions import Fraction

    out = to_jsonable({"a": np.float64(1.5), "b": np.arange(3), "c": Fraction(1, 4), "d": 1 + 2j,
                       "e": float("nan"), "f": (np.int32(2),)})
    assert out == {"a": 1.5, "b": [0, 1, 2], "c": 0.25, "d": {"re": 1.0, "im": 2.0}, "e": None, "f": [2]}


@pytest.mark.parametrize("name,argv", [
    ("ball_r2.csv", ["ball", "--radius", "2"]),
    ("profile_k30.csv", ["profile", "--k", "30"]),
    ("growth_2_12.csv", ["growth", "--rmin", "2", "--rmax", "12"]),
])
def test_golden_csv(name, argv, tmp_path, capsys):
    out = tmp_path / name
    assert run(argv + ["--out", str(out)]) == 0
    capsys.readouterr()
    assert out.read_bytes() == (GOLDEN / name).read_bytes()


@pytest.mark.parametrize("name", ["params_p2_t100", "poincare_mini5", "admissible_log06", "distort_c4"])
def test_golden_json(name, monkeypatch, capsys):
    golden = json.loads((GOLDEN / f"{name}.json").read_text())
    monkeypatch.chdir(GOLDEN)
    code, rep = report_of(capsys, *golden["argv"])
    assert code == 0
    assert rep["command"] == golden["command"]
    assert rep["params"] == golden["params"]
    assert close(rep["results"], golden["results"])


def test_repeated_runs_identical(capsys):
    argv = ["lemma31", "--trials", "30", "--max-dim", "16"]
    a = report_of(capsys, *argv)[1]
    b = report_of(capsys, *argv)[1]
    assert a["results"] == b["results"]


def test_module_entry_point():
    import subprocess
    import sys

    proc = subprocess.run([sys.executable, "-m", "heisgeom", "dist", "--element", "1,0,0"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["results"]["distance"] == 1
