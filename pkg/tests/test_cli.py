from __future__ import annotations

import orjson
import pytest

from main import normalize_argv, run_cli


def _run(capsys: pytest.CaptureFixture[str], argv: list[str]) -> tuple[int, dict]:
    code = run_cli(argv)
    out = capsys.readouterr().out
    return code, (orjson.loads(out) if code == 0 and out.strip() else {})


def test_help_exits_cleanly(capsys):
    assert run_cli(["--help"]) == 0
    assert "simulate" in capsys.readouterr().out


def test_equilibria_json(capsys):
    code, data = _run(capsys, ["equilibria", "--gamma", "1/3,1/3,1/3", "--theta", "1"])
    assert code == 0
    assert len(data["equilibria"]) == 5
    kinds = sorted(e["stability"] for e in data["equilibria"])
    assert kinds == ["Center", "Center", "Saddle", "Saddle", "Saddle"]
    assert data["circulations"] == ["1/3", "1/3", "1/3"]


def test_config_file_supplies_parameters(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_bytes(orjson.dumps({"circulations": ["1/3", "1/3", "1/3"], "theta": 1}))
    code, data = _run(capsys, ["equilibria", "--config", str(cfg)])
    assert code == 0
    assert len(data["equilibria"]) == 5


@pytest.mark.parametrize(
    "argv",
    [
        ["equilibria", "--gamma", "1,2", "--theta", "1"],
        ["equilibria", "--gamma", "1,1,1"],
        ["equilibria", "--gamma", "1,1,-2", "--theta", "1"],
        ["scan", "--range", "1:0:0.1"],
        ["nosuchcommand"],
        ["equilibria", "--config", "/nonexistent/run.json"],
    ],
)
def test_bad_parameters_exit_with_one(capsys, argv):
    assert run_cli(argv) == 1


def test_coincident_vortices_are_numerical_failure(tmp_path):
    argv = ["simulate", "--gamma", "1,1,1", "--positions", "0,0,1", "--out", str(tmp_path)]
    assert run_cli(argv) == 2


def test_simulate_writes_trajectory(tmp_path, capsys):
    argv = ["simulate", "--gamma", "1,1,1", "--positions", "1,-0.5+0.866j,-0.5-0.866j", "--t-end", "1",
            "--samples", "11", "--out", str(tmp_path)]
    code, data = _run(capsys, argv)
    assert code == 0
    assert data["status"] == "completed"
    assert (tmp_path / "trajectory.csv").exists()
    assert (tmp_path / "summary.json").exists()
    assert data["max_drift"]["dH"] < 1e-8


def test_reduce_from_positions(capsys):
    code, data = _run(capsys, ["reduce", "--gamma", "1,1,1", "--positions", "0,2,1"])
    assert code == 0
    assert data["state"]["Theta"] == pytest.approx(2.0)
    assert sorted(data["state"]["distances_sq"].values()) == pytest.approx([1.0, 1.0, 4.0])


def test_collapse_defaults(capsys):
    code, data = _run(capsys, ["collapse"])
    assert code == 0
    assert data["status"] == "collapse"
    assert data["relative_error"] < 0.01


def test_zero_circulation(capsys):
    code, data = _run(capsys, ["zerocirc", "--gamma", "2,1,-3", "--state", "0.3,0.7"])
    assert code == 0
    assert data["singularities"]["S13"] == pytest.approx(3.0)
    assert data["bracket_constant"] == pytest.approx(1.5)
    assert {e["stability"] for e in data["equilibria"]} == {"Saddle"}


def test_portrait_json_output(tmp_path, capsys):
    argv = ["portrait", "--gamma", "1/3,1/3,1/3", "--theta", "1", "--orbits", "0", "--no-separatrices",
            "--format", "all", "--out", str(tmp_path)]
    code, data = _run(capsys, argv)
    assert code == 0
    assert data["counts"]["equilibria"] == 5
    assert (tmp_path / "portrait.json").exists()
    assert (tmp_path / "portrait.svg").exists()


def test_scan_trilinear(tmp_path, capsys):
    argv = ["scan", "--axis", "trilinear", "--step", "0.5", "--extent", "1", "--out", str(tmp_path)]
    code, data = _run(capsys, argv)
    assert code == 0
    assert data["rows"] > 0
    assert (tmp_path / "scan_trilinear.csv").exists()


def test_normalize_argv_joins_negative_values():
    argv = ["scan", "--theta", "-1,1", "--range", "-2.5:1.5:0.01", "-v", "--workers", "2"]
    assert normalize_argv(argv) == ["scan", "--theta=-1,1", "--range=-2.5:1.5:0.01", "-v", "--workers", "2"]
    assert normalize_argv(["equilibria", "--theta=-1"]) == ["equilibria", "--theta=-1"]


def test_scan_accepts_negative_values_without_equals(tmp_path, capsys):
    argv = ["scan", "--axis", "symmetric", "--theta", "-1,1", "--range", "-2.5:1.5:0.01", "--out", str(tmp_path)]
    code, data = _run(capsys, argv)
    assert code == 0
    assert data["rows"] == 6368
    assert (tmp_path / "scan_symmetric.csv").exists()


def test_equilibria_with_negative_gamma_and_theta(capsys):
    code, data = _run(capsys, ["equilibria", "--gamma", "-2,-2,5", "--theta", "-1"])
    assert code == 0
    assert len(data["equilibria"]) == 3
    assert data["order"] == [1, 2, 3]

    code, data = _run(capsys, ["equilibria", "--gamma", "-2,-2,5", "--theta", "-1/3"])
    assert code == 0
    assert data["theta"] == pytest.approx(-1 / 3)
    assert len(data["equilibria"]) == 3


def test_equilibria_reports_original_labels_after_relabeling(capsys):
    code, data = _run(capsys, ["equilibria", "--gamma", "1,-1,1", "--theta", "1"])
    assert code == 0
    assert data["order"] == [1, 3, 2]
    assert {sp["label"] for sp in data["singularities"]} == {"S12", "S13", "S23"}
    s13 = next(sp for sp in data["singularities"] if sp["label"] == "S13")
    assert (s13["X"], s13["Z"]) == (0.0, -1.0)
