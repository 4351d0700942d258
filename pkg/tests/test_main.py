import csv
import json
import logging
import math
from pathlib import Path

import numpy as np
import pytest

from discretization.function_space import Grid
from main import EXIT_CHECK_FAILED, EXIT_INPUT_ERROR, EXIT_OK, EXIT_SOLVER_FAILURE, main, parse_args
from reporting.report_writer import ReportWriter
from reporting.run_logger import LOGGER_NAME
from tests.conftest import sine, write_config


def fast_config(**changes):
    """The default instance with light sampling, so command tests stay quick."""
    document = {
        "annuli": [{"r": 1.0, "R": 60.0, "beta": 0.2}],
        "solver": {"constant_samples": 3},
        "hypotheses": {"samples": 3},
        "verify": {"slope_steps": 800},
    }
    document.update(changes)
    return document


@pytest.fixture(scope="module")
def solved(tmp_path_factory):
    """One acceptance solve written to disk, shared by the verify tests."""
    directory = tmp_path_factory.mktemp("solve")
    config = write_config(directory, fast_config())
    out = directory / "out"
    code = main(["solve", "--config", config, "--out", str(out)])
    return code, config, out


def read_csv(path):
    with open(path) as f:
        return list(csv.DictReader(f))


def test_parse_args():
    args = parse_args(["verify", "--solution", "u.csv", "--seed", "3", "--json"])
    assert args.command == "verify"
    assert args.solution == "u.csv"
    assert args.seed == 3 and args.json and not args.force
    with pytest.raises(SystemExit):
        parse_args(["sweep"])


class TestCheck:
    def test_acceptance_instance(self, tmp_path, capsys):
        config = write_config(tmp_path, fast_config())
        assert main(["check", "--config", config, "--json"]) == EXIT_OK
        document = json.loads(capsys.readouterr().out)
        hypotheses = document["annuli"][0]["hypotheses"]
        assert hypotheses["h1_left_margin"] == pytest.approx(math.pi - 3.0)
        assert hypotheses["h1_right_margin"] == pytest.approx(4.7735, abs=1e-4)
        assert hypotheses["which_of_H234"] == "H2"
        assert document["annuli"][0]["status"] == "passed"

    def test_text_output(self, tmp_path, capsys):
        config = write_config(tmp_path, fast_config(hypotheses={"samples": 0}))
        assert main(["check", "--config", config]) == EXIT_OK
        assert "verdict: PASS" in capsys.readouterr().out

    def test_failing_h1(self, tmp_path):
        config = write_config(tmp_path, fast_config(annuli=[{"r": 1.0, "R": 10.0, "beta": 0.2}]))
        assert main(["check", "--config", config]) == EXIT_CHECK_FAILED

    @pytest.mark.parametrize(
        "changes",
        [
            {"annuli": [{"r": 1.0, "R": 60.0, "beta": 0.3}]},
            {"annuli": []},
            {"annuli": [{"r": 1.0, "R": 60.0, "beta": 0.2}, {"r": 50.0, "R": 90.0, "beta": 0.2}]},
            {"nonlinearity": {"family": "power", "params": {"a": -3.0, "p": 3.0}}},
        ],
    )
    def test_input_errors(self, tmp_path, changes, capsys):
        config = write_config(tmp_path, fast_config(**changes))
        assert main(["check", "--config", config]) == EXIT_INPUT_ERROR
        assert capsys.readouterr().err.startswith("Error:")

    def test_missing_config(self, tmp_path):
        assert main(["check", "--config", str(tmp_path / "absent.json")]) == EXIT_INPUT_ERROR

    def test_input_error_leaves_no_log_file_open(self, tmp_path):
        config = write_config(tmp_path, fast_config(nonlinearity={"family": "power", "params": {"a": -3.0, "p": 3.0}}))
        assert main(["check", "--config", config, "--out", str(tmp_path / "out")]) == EXIT_INPUT_ERROR
        root = tmp_path.resolve()
        assert not [
            h for h in logging.getLogger(LOGGER_NAME).handlers
            if isinstance(h, logging.FileHandler) and Path(h.baseFilename).is_relative_to(root)
        ]

    def test_outer_annulus_certifies_after_inner_fails(self, tmp_path, capsys):
        annuli = [{"r": 0.1, "R": 0.5, "beta": 0.2}, {"r": 1.0, "R": 60.0, "beta": 0.2}]
        config = write_config(tmp_path, fast_config(annuli=annuli, hypotheses={"samples": 0}))
        assert main(["check", "--config", config, "--json"]) == EXIT_CHECK_FAILED
        entries = json.loads(capsys.readouterr().out)["annuli"]
        assert [entry["status"] for entry in entries] == ["failed", "passed"]
        assert entries[1]["hypotheses"]["which_of_H234"] == "H2"


@pytest.mark.slow
@pytest.mark.timeout(900)
class TestSolveAndVerify:
    def test_solve_writes_outputs(self, solved):
        code, _, out = solved
        assert code == EXIT_OK
        for name in ("solution.csv", "trace.csv", "report.json", "run.log", "events.json"):
            assert (out / name).exists()
        report = json.loads((out / "report.json").read_text())
        entry = report["annuli"][0]
        assert report["command"] == "solve"
        assert entry["status"] == "solved"
        assert entry["solution"]["certified"] is True
        assert entry["solution"]["norm"] == pytest.approx(4.584, rel=1e-3)
        assert entry["certificate"]["shooting_agrees"] is True
        assert report["execution"]["solved"] == 1

    def test_trace_file(self, solved):
        _, _, out = solved
        rows = read_csv(out / "trace.csv")
        energies = [float(row["energy"]) for row in rows]
        assert rows[0]["iter"] == "0"
        assert all(b <= a + 1e-12 * max(1.0, abs(a)) for a, b in zip(energies, energies[1:]))

    def test_verify_round_trip(self, solved, capsys):
        _, config, out = solved
        assert main(["verify", "--config", config, "--solution", str(out / "solution.csv")]) == EXIT_OK
        assert "certified: True" in capsys.readouterr().out

    def test_verify_perturbed_profile(self, solved, tmp_path, capsys):
        _, config, out = solved
        grid = Grid(400)
        u = ReportWriter.read_solution(str(out / "solution.csv"), grid)
        perturbed = u + sine(grid, 2) * 0.1
        path = ReportWriter(str(tmp_path)).write_solution("perturbed.csv", perturbed)
        assert main(["verify", "--config", config, "--solution", path, "--json"]) == EXIT_CHECK_FAILED
        certificate = json.loads(capsys.readouterr().out)["annuli"][0]["certificate"]
        assert certificate["cone"]["symmetry_defect"] == pytest.approx(0.2, rel=1e-2)
        assert not certificate["cone"]["passes"]

    def test_verify_zero_profile(self, solved, tmp_path):
        _, config, _ = solved
        path = ReportWriter(str(tmp_path)).write_solution("zero.csv", Grid(400).zeros())
        assert main(["verify", "--config", config, "--solution", path, "--json"]) == EXIT_CHECK_FAILED

    def test_verify_wrong_grid(self, solved, tmp_path):
        _, config, _ = solved
        path = ReportWriter(str(tmp_path)).write_solution("coarse.csv", sine(Grid(200)))
        assert main(["verify", "--config", config, "--solution", path]) == EXIT_INPUT_ERROR

    def test_two_annuli(self, tmp_path):
        annuli = [{"r": 1.0, "R": 60.0, "beta": 0.2}, {"r": 70.0, "R": 100.0, "beta": 0.2}]
        config = write_config(tmp_path, fast_config(annuli=annuli))
        out = tmp_path / "out"
        assert main(["solve", "--config", config, "--out", str(out)]) == EXIT_OK
        assert (out / "solution_1.csv").exists()
        assert not (out / "solution_2.csv").exists()
        statuses = [entry["status"] for entry in json.loads((out / "report.json").read_text())["annuli"]]
        assert statuses == ["solved", "skipped"]

    def test_forced_failure(self, tmp_path):
        config = write_config(tmp_path, fast_config(annuli=[{"r": 70.0, "R": 100.0, "beta": 0.2}]))
        assert main(["solve", "--config", config]) == EXIT_CHECK_FAILED
        assert main(["solve", "--config", config, "--force"]) == EXIT_SOLVER_FAILURE


class TestSweep:
    def test_small_grid(self, tmp_path):
        config = write_config(tmp_path, fast_config())
        sweep = tmp_path / "sweep.json"
        sweep.write_text(json.dumps({"axes": {"a": {"values": [2.0, 3.0]}, "R": {"values": [40.0, 60.0]}}, "samples": 0}))
        table = tmp_path / "table.csv"
        code = main(["sweep", "--config", config, "--sweep", str(sweep), "--out-csv", str(table)])
        assert code == EXIT_OK
        passing = [(float(row["a"]), float(row["R"])) for row in read_csv(table) if row["passes"] == "true"]
        assert passing == [(3.0, 60.0)]

    def test_empty_range(self, tmp_path):
        config = write_config(tmp_path, fast_config())
        sweep = tmp_path / "sweep.json"
        sweep.write_text(json.dumps({"axes": {"a": {"start": 3.0, "stop": 2.0, "num": 3}}}))
        assert main(["sweep", "--config", config, "--sweep", str(sweep)]) == EXIT_INPUT_ERROR

    def test_analytic_boundary(self, tmp_path):
        config = write_config(tmp_path, fast_config())
        sweep = tmp_path / "sweep.yaml"
        sweep.write_text(
            "axes:\n  a: {start: 1.0, stop: 5.0, num: 9}\n  R: {start: 20.0, stop: 100.0, num: 9}\nsamples: 0\n"
        )
        out = tmp_path / "out"
        assert main(["sweep", "--config", config, "--sweep", str(sweep), "--out", str(out)]) == EXIT_OK
        rows = read_csv(out / "sweep.csv")
        assert len(rows) == 81
        for row in rows:
            a, R = float(row["a"]), float(row["R"])
            # (H1) for f = a x^3, g = 1, r = 1, beta = 0.2
            expected = a < np.pi and a * R ** 2 * 0.12 ** 4 * 0.6 > 1.0
            assert (row["passes"] == "true") == expected
        report = json.loads((out / "report.json").read_text())
        assert report["sweep"]["stats"]["points"] == 81
