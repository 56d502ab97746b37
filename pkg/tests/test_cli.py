import csv
import json

import numpy as np
import pytest

from dlqg.cli import main
from dlqg.model import benchmark_problem, save_problem


@pytest.fixture
def problem(tmp_path):
    path = tmp_path / "problem.json"
    save_problem(benchmark_problem(N=30), path)
    return path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_synth_writes_gain_schedule(problem, tmp_path, capsys):
    code, out, _ = run(capsys, "synth", "--problem", problem, "--pattern", "three-player", "--out", tmp_path / "g.json")
    assert code == 0
    doc = json.loads((tmp_path / "g.json").read_text())
    assert len(doc["F"]) == 30 and len(doc["F1"]) == 29
    values = dict(line.split() for line in out.splitlines())
    assert float(values["J"]) == pytest.approx(float(values["Jw"]) + float(values["Jtilde"]))
    assert len(values["J"].replace(".", "").lstrip("0")) >= 15

    run(capsys, "synth", "--problem", problem, "--out", tmp_path / "g2.json")
    assert (tmp_path / "g.json").read_bytes() == (tmp_path / "g2.json").read_bytes()


def test_input_errors_exit_2(problem, tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{\"A\": ")
    code, _, err = run(capsys, "synth", "--problem", bad, "--out", tmp_path / "g.json")
    assert code == 2 and json.loads(err)["error"] == "ValidationError"

    code, _, err = run(capsys, "compare", "--problem", problem, "--pattern", "two-player", "--out", tmp_path / "r")
    assert code == 2 and "two-player" in json.loads(err)["message"]

    code, _, _ = run(capsys, "synth", "--problem", tmp_path / "missing.json", "--out", tmp_path / "g.json")
    assert code == 2

    code, _, _ = run(capsys, "compare", "--problem", problem, "--runs", "0", "--out", tmp_path / "r")
    assert code == 2

    code, _, _ = run(capsys, "frobnicate")
    assert code == 2


def test_numerical_failure_exit_3(tmp_path, capsys):
    spec = benchmark_problem(N=5).replace(
        B=np.diag([1.0, 1.0, 0.0]), Qxu=np.zeros((3, 3)), Quu=np.diag([1e3, 1e3, 2e-10]))
    save_problem(spec, tmp_path / "p.json")
    code, _, err = run(capsys, "synth", "--problem", tmp_path / "p.json", "--out", tmp_path / "g.json")
    assert code == 3 and json.loads(err)["exit_code"] == 3


def test_compare_writes_reports(problem, tmp_path, capsys):
    code, out, _ = run(capsys, "compare", "--problem", problem, "--runs", "20", "--seed", "42", "--out", tmp_path / "r")
    assert code == 0 and "ratio three-player/one-step" in out
    with open(tmp_path / "r" / "report.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["pattern"] for r in rows] == ["central-2", "three-player", "one-step", "central-0"]
    assert all(int(r["runs"]) == 20 for r in rows)
    first = (tmp_path / "r" / "report.json").read_bytes()
    run(capsys, "compare", "--problem", problem, "--runs", "20", "--seed", "42", "--out", tmp_path / "r")
    assert (tmp_path / "r" / "report.json").read_bytes() == first


def test_compare_single_run(problem, tmp_path, capsys):
    code, _, _ = run(capsys, "compare", "--problem", problem, "--runs", "1", "--pattern", "one-step", "--out", tmp_path / "r")
    assert code == 0
    doc = json.loads((tmp_path / "r" / "report.json").read_text())
    assert doc["rows"][0]["mc_stderr"] == float("inf")


def test_simulate(problem, tmp_path, capsys):
    run(capsys, "synth", "--problem", problem, "--pattern", "one-step", "--out", tmp_path / "g.json")
    code, out, _ = run(capsys, "simulate", "--problem", problem, "--gains", tmp_path / "g.json", "--seed", "7",
                       "--out", tmp_path / "a.csv")
    assert code == 0 and out.startswith("cost ")
    run(capsys, "simulate", "--problem", problem, "--gains", tmp_path / "g.json", "--seed", "7", "--out", tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    other = tmp_path / "other.json"
    save_problem(benchmark_problem(N=31), other)
    code, _, _ = run(capsys, "simulate", "--problem", other, "--gains", tmp_path / "g.json", "--out", tmp_path / "c.csv")
    assert code == 2


def test_simulate_without_noise(tmp_path, capsys):
    spec = benchmark_problem(N=12).replace(W=np.zeros((3, 3)), P0=np.zeros((3, 3)), V=1e-9 * np.eye(3))
    save_problem(spec, tmp_path / "p.json")
    run(capsys, "synth", "--problem", tmp_path / "p.json", "--out", tmp_path / "g.json")
    run(capsys, "simulate", "--problem", tmp_path / "p.json", "--gains", tmp_path / "g.json", "--out", tmp_path / "t.csv")
    with open(tmp_path / "t.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert max(abs(float(r["x1"])) for r in rows) < 1e-3


def test_example_command(tmp_path, capsys):
    code, _, _ = run(capsys, "example", "--horizon", "12", "--out", tmp_path / "p.json")
    assert code == 0 and json.loads((tmp_path / "p.json").read_text())["N"] == 12
