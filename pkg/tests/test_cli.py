"""
Tests for the command-line entry point.
"""
import json
from unittest.mock import patch

import pytest

from dob_toolkit.cli import main as cli
from dob_toolkit.domain.errors import NumericalBlowup
from dob_toolkit.storage.csv_export import BODE_HEADER, LOCUS_HEADER, SIM_HEADER


@pytest.fixture
def weak_velocity_path(tmp_path, position_path):
    """Position scenario whose velocity filter is too slow for the DOB bandwidth."""
    doc = json.loads(position_path.read_text())
    doc["bandwidths"]["g_v"] = 500.0
    path = tmp_path / "weak.json"
    path.write_text(json.dumps(doc))
    return path


@pytest.fixture
def force_path(tmp_path, force_scenario_doc):
    path = tmp_path / "force.json"
    path.write_text(json.dumps(force_scenario_doc))
    return path


def read_rows(path):
    return path.read_text().splitlines()


def test_check_passes_for_shipped_scenario(position_path, capsys):
    assert cli.run(["check", str(position_path)]) == cli.EXIT_OK
    out = capsys.readouterr().out
    assert out.splitlines()[0].startswith("robustness")
    assert "FAIL" not in out
    assert "# alpha = 2" in out


def test_check_reports_failed_rule(weak_velocity_path, capsys):
    assert cli.run(["check", str(weak_velocity_path)]) == cli.EXIT_RULE_FAILED
    out = capsys.readouterr().out
    assert out.splitlines()[0].split()[:2] == ["robustness", "FAIL"]


def test_check_writes_report_file(position_path, tmp_path):
    target = tmp_path / "report.txt"
    assert cli.run(["check", str(position_path), "-o", str(target)]) == cli.EXIT_OK
    assert read_rows(target)[0].startswith("robustness")


def test_invalid_scenario_exit_code(tmp_path, force_scenario_doc, caplog):
    del force_scenario_doc["plant"]["J_m"]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(force_scenario_doc))
    assert cli.run(["check", str(path)]) == cli.EXIT_INVALID_SCENARIO
    assert "plant.J_m" in caplog.text


def test_missing_scenario_file(tmp_path):
    assert cli.run(["check", str(tmp_path / "absent.json")]) == cli.EXIT_INVALID_SCENARIO


def test_usage_errors():
    assert cli.run([]) == cli.EXIT_USAGE
    assert cli.run(["plot", "x.json"]) == cli.EXIT_USAGE
    assert cli.run(["bode", "x.json", "--tf", "nyquist"]) == cli.EXIT_USAGE


def test_simulate_writes_one_row_per_sample(position_path, tmp_path):
    target = tmp_path / "trace.csv"
    assert cli.run(["simulate", str(position_path), "-o", str(target)]) == cli.EXIT_OK
    rows = read_rows(target)
    assert rows[0] == ",".join(SIM_HEADER)
    assert len(rows) == 1 + 10001
    assert rows[1].split(",")[0] == "0"


def test_simulation_blowup_exit_code(position_path, mocker):
    mocker.patch("dob_toolkit.cli.main.simulate", side_effect=NumericalBlowup(12, "q_m", 1e13))
    assert cli.run(["simulate", str(position_path)]) == cli.EXIT_RULE_FAILED


def test_bode_csv(position_path, tmp_path):
    target = tmp_path / "bode.csv"
    assert cli.run(["bode", str(position_path), "--tf", "inner-cosens", "-o", str(target)]) == cli.EXIT_OK
    rows = read_rows(target)
    assert rows[0] == ",".join(BODE_HEADER)
    assert len(rows) == 1 + 301


def test_bode_grid_options(position_path, tmp_path):
    target = tmp_path / "bode.csv"
    argv = ["bode", str(position_path), "--tf", "pos-closed", "--omega-lo", "10",
            "--omega-hi", "1000", "--points-per-decade", "5", "-o", str(target)]
    assert cli.run(argv) == cli.EXIT_OK
    rows = read_rows(target)
    assert len(rows) == 1 + 11
    assert rows[1].split(",")[0] == "10"


@pytest.mark.parametrize("band", [
    ["--omega-lo", "100", "--omega-hi", "10"],
    ["--omega-lo", "0", "--omega-hi", "10"],
    ["--omega-lo", "-1"],
    ["--points-per-decade", "0"],
])
def test_bode_rejects_bad_band(position_path, tmp_path, band, caplog):
    target = tmp_path / "bode.csv"
    argv = ["bode", str(position_path), "--tf", "inner-cosens", "-o", str(target)] + band
    assert cli.run(argv) == cli.EXIT_USAGE
    assert not target.exists()
    assert "omega-lo" in caplog.text


def test_force_transfer_needs_environment(position_path):
    assert cli.run(["bode", str(position_path), "--tf", "rtob-open"]) == cli.EXIT_INVALID_SCENARIO
    assert cli.run(["rootlocus", str(position_path), "--sweep", "cf"]) == cli.EXIT_INVALID_SCENARIO


def test_rootlocus_over_force_gain(hybrid_path, tmp_path):
    target = tmp_path / "locus.csv"
    assert cli.run(["rootlocus", str(hybrid_path), "--sweep", "cf", "-o", str(target)]) == cli.EXIT_OK
    rows = read_rows(target)
    assert rows[0] == ",".join(LOCUS_HEADER)
    assert len(rows) == 1 + 421 * 4
    assert {row.split(",")[4] for row in rows[1:]} <= {"0", "1"}


def test_rootlocus_over_alpha(position_path, tmp_path):
    target = tmp_path / "locus.csv"
    assert cli.run(["rootlocus", str(position_path), "--sweep", "alpha", "-o", str(target)]) == cli.EXIT_OK
    assert len(read_rows(target)) == 1 + 181 * 4


def test_metrics_for_position_step(position_path, capsys):
    assert cli.run(["metrics", str(position_path)]) == cli.EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert [line.split(" = ")[0] for line in lines] == [
        "q_m.overshoot_pct", "q_m.settling_time_s", "q_m.ss_error", "q_m.rms_residual",
    ]


def test_metrics_for_unsettled_reference(tmp_path, force_scenario_doc, capsys):
    force_scenario_doc["references"]["force"] = {"kind": "sine", "amplitude": 0.5, "omega": 2.0, "offset": 1.0}
    force_scenario_doc["simulation"]["duration"] = 0.5
    path = tmp_path / "sine.json"
    path.write_text(json.dumps(force_scenario_doc))
    assert cli.run(["metrics", str(path)]) == cli.EXIT_OK
    assert capsys.readouterr().out == "tau_load_hat: not settled\n"


def test_normalize_round_trip(force_path, tmp_path, capsys):
    assert cli.run(["normalize", str(force_path)]) == cli.EXIT_OK
    printed = capsys.readouterr().out
    target = tmp_path / "normalized.json"
    assert cli.run(["normalize", str(force_path), "-o", str(target)]) == cli.EXIT_OK
    assert target.read_text() == printed
    assert cli.run(["normalize", str(target)]) == cli.EXIT_OK
    assert capsys.readouterr().out == printed


def test_main_reads_sys_argv(position_path):
    with patch("sys.argv", ["dob-toolkit", "check", str(position_path)]):
        assert cli.main() == cli.EXIT_OK
