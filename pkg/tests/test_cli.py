import csv
import json
from pathlib import Path

import pytest
from typer.testing import CliRunner

from phturnpike.main import app

runner = CliRunner()


def _meta(out: Path) -> dict:
    return json.loads((out / "meta.json").read_text())


class TestValidate:
    def test_valid_system(self, tmp_path, write_json, msd_document):
        out = tmp_path / "out"
        result = runner.invoke(app, ["validate", "--input", str(write_json("msd.json", msd_document)), "--out", str(out)])

        assert result.exit_code == 0
        report = json.loads((out / "validation.json").read_text())
        assert report["valid"] and report["kind"] == "ode" and report["n"] == 3
        meta = _meta(out)
        assert meta["exit_code"] == 0
        assert meta["subcommand"] == "validate"
        assert "validation.json" in meta["files"]

    def test_violation_exits_with_structure_code(self, tmp_path, write_json, msd_document):
        msd_document["R"] = [[-1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]
        out = tmp_path / "out"
        result = runner.invoke(app, ["validate", "-i", str(write_json("bad.json", msd_document)), "-o", str(out)])

        assert result.exit_code == 2
        report = json.loads((out / "validation.json").read_text())
        assert not report["valid"]
        assert report["violations"]
        assert _meta(out)["error_type"] == "StructureError"

    def test_malformed_json_still_leaves_meta(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{"J": [[0.0]],')
        out = tmp_path / "out"
        result = runner.invoke(app, ["validate", "-i", str(path), "-o", str(out)])

        assert result.exit_code == 1
        meta = _meta(out)
        assert meta["exit_code"] == 1
        assert meta["error_type"] == "InputFormatError"

    def test_unknown_key_is_rejected(self, tmp_path, write_json, msd_document):
        msd_document["K"] = [[1.0]]
        result = runner.invoke(app, ["validate", "-i", str(write_json("extra.json", msd_document)), "-o", str(tmp_path)])
        assert result.exit_code == 2

    def test_tol_override_is_recorded(self, tmp_path, write_json, msd_document):
        out = tmp_path / "out"
        path = write_json("msd.json", msd_document)
        runner.invoke(app, ["validate", "-i", str(path), "-o", str(out), "--tol", "1e-6"])
        assert _meta(out)["tolerances"]["structure"] == pytest.approx(1e-6)


def test_solve_writes_trajectory_and_summary(tmp_path, write_json, msd_document):
    out = tmp_path / "out"
    result = runner.invoke(app, ["solve", "-i", str(write_json("msd.json", msd_document)), "-o", str(out)])

    assert result.exit_code == 0
    with (out / "trajectory.csv").open() as handle:
        rows = list(csv.reader(handle))
    assert rows[0] == ["t", "x1", "x2", "x3", "u1", "y1", "lambda1", "lambda2", "lambda3", "distW"]
    assert len(rows) == 1 + 101
    summary = json.loads((out / "solution.json").read_text())
    assert summary["terminal_error"] <= 1e-6
    assert summary["T"] == 10.0 and summary["N"] == 100
    assert _meta(out)["control_set_default"] is True


def test_solve_horizon_override(tmp_path, write_json, msd_document):
    out = tmp_path / "out"
    path = write_json("msd.json", msd_document)
    result = runner.invoke(app, ["solve", "-i", str(path), "-o", str(out), "--horizon", "12", "--steps", "60"])

    assert result.exit_code == 0
    summary = json.loads((out / "solution.json").read_text())
    assert summary["T"] == 12.0 and summary["N"] == 60


def test_solve_needs_an_ocp_file(tmp_path, write_json, robot_document):
    result = runner.invoke(app, ["solve", "-i", str(write_json("robot.json", robot_document)), "-o", str(tmp_path)])
    assert result.exit_code == 1


def test_infeasible_horizon_exits_with_three(tmp_path, write_json, msd_document):
    msd_document.update(T=0.1, N=10)
    out = tmp_path / "out"
    result = runner.invoke(app, ["solve", "-i", str(write_json("short.json", msd_document)), "-o", str(out)])

    assert result.exit_code == 3
    assert _meta(out)["error_type"] == "InfeasibleProblemError"


def test_analyze_pencil_on_robot(tmp_path, write_json, robot_document):
    out = tmp_path / "out"
    result = runner.invoke(app, ["analyze-pencil", "-i", str(write_json("robot.json", robot_document)), "-o", str(out)])

    assert result.exit_code == 0
    report = json.loads((out / "pencil.json").read_text())
    assert report["kind"] == "dae"
    assert report["regular"]
    assert report["index"] == 2
    assert report["n1"] == 3
    assert report["dh_regularity"] is True
    assert report["dh_index_le1"] is False


def test_analyze_pencil_on_msd(tmp_path, write_json, msd_document):
    out = tmp_path / "out"
    result = runner.invoke(app, ["analyze-pencil", "-i", str(write_json("msd.json", msd_document)), "-o", str(out)])

    assert result.exit_code == 0
    report = json.loads((out / "pencil.json").read_text())
    assert report["kind"] == "ode"
    assert report["index"] == 0
    assert report["n1"] == 3 and report["n2"] == 0
    assert report["dh_pencil"] is True
    assert len(report["details"]["eigenvalues"]) == 3
    assert "dh_regularity" not in report


def test_analyze_control_on_msd(tmp_path, write_json, msd_document):
    out = tmp_path / "out"
    result = runner.invoke(app, ["analyze-control", "-i", str(write_json("msd.json", msd_document)), "-o", str(out)])

    assert result.exit_code == 0
    report = json.loads((out / "control.json").read_text())
    assert report["controllable"] is True
    assert report["kalman_dim"] == 3
    assert report["optimal_steady_basis"] == []
    assert report["alpha_t"] > 0.0


class TestReduce:
    def test_ode_input_is_refused(self, tmp_path, write_json, msd_document):
        result = runner.invoke(app, ["reduce", "-i", str(write_json("msd.json", msd_document)), "-o", str(tmp_path)])
        assert result.exit_code == 2

    def test_robot_uses_constraint_elimination(self, tmp_path, write_json, robot_document):
        out = tmp_path / "out"
        result = runner.invoke(app, ["reduce", "-i", str(write_json("robot.json", robot_document)), "-o", str(out)])

        assert result.exit_code == 0
        transform = json.loads((out / "transform.json").read_text())
        assert transform["method"] == "constraint_elimination"
        assert transform["n1"] == 3
        reduced = json.loads((out / "reduced_system.json").read_text())
        assert set(reduced) == {"J", "R", "Q", "B", "P", "D"}
        assert len(reduced["J"]) == 3


def test_reproduce_needs_an_example(tmp_path):
    result = runner.invoke(app, ["reproduce", "-o", str(tmp_path)])
    assert result.exit_code == 2


def test_turnpike_on_a_single_horizon(tmp_path, write_json, msd_document):
    out = tmp_path / "out"
    path = write_json("msd.json", msd_document)
    result = runner.invoke(app, ["turnpike", "-i", str(path), "-o", str(out), "--eps-grid", "0.1,0.5"])

    assert result.exit_code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["subspace_kind"] == "ker W"
    assert [r["T"] for r in report["records"]] == [10.0]
    assert (out / "profile_T10.csv").exists()


@pytest.mark.slow
def test_reproduce_msd_single_horizon(tmp_path):
    out = tmp_path / "out"
    result = runner.invoke(app, ["reproduce", "msd", "-o", str(out), "--horizon", "10"])

    assert result.exit_code == 0
    for name in ("report.json", "trajectory.csv", "trajectory_T10.csv", "solution_T10.json", "example.json"):
        assert (out / name).exists(), name
    assert (out / "plot_orbit_T10.dat").exists()
    facts = json.loads((out / "example.json").read_text())
    assert facts["example"] == "msd"
