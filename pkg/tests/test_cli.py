# test_cli.py

import json

import pytest

from cli import (
    EXIT_BUDGET,
    EXIT_INFEASIBLE,
    EXIT_OK,
    EXIT_VALIDATION,
    CliConfig,
    main,
    parse_count,
)
from design import random_design
from errors import ValidationError
from search import REPORT_CSV_COLUMNS
from tables import golden_path


def run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().out


def test_parse_count():
    assert parse_count("1000") == 1000
    assert parse_count("10^6") == 10 ** 6
    assert parse_count("1e9") == 10 ** 9
    assert parse_count("1_000") == 1000


def test_cli_config_validates():
    with pytest.raises(ValidationError):
        CliConfig(trials=0)
    with pytest.raises(ValidationError):
        CliConfig(work_budget=10)


def test_constants(capsys):
    code, out = run(capsys, "constants", "--L", "1")
    doc = json.loads(out)
    assert code == EXIT_OK
    assert (doc["rho_L"], doc["C_L"]) == ("0.2500", "16.00")


def test_feasibility_reports_regime(capsys):
    code, out = run(capsys, "feasibility", "--n", "1000", "--lambda", "1", "--alpha", "0.1", "--asymptotic")
    assert code == EXIT_OK
    assert json.loads(out)["regime"] == "infeasible"


def test_truncation(capsys):
    code, out = run(capsys, "truncation", "--lambda", "5", "--gamma", "0.95")
    doc = json.loads(out)
    assert code == EXIT_OK and doc["L"] == 9
    code, out = run(capsys, "truncation", "--lambda", "2", "--gamma", "0.9", "--n", "10^6")
    doc = json.loads(out)
    assert doc["L"] == "infeasible" and doc["finite_L"] == "infeasible"


def test_tables_csv_matches_golden(capsys):
    code, out = run(capsys, "tables", "--id", "4", "--format", "csv")
    assert code == EXIT_OK
    assert len(out.splitlines()) == 13
    with open(golden_path(4), encoding="utf-8") as handle:
        assert out == handle.read()


def test_tables_check(capsys):
    code, out = run(capsys, "tables", "check")
    assert code == EXIT_OK
    assert json.loads(out)["mismatches"] == []


def test_tables_needs_an_id(capsys):
    code, _ = run(capsys, "tables")
    assert code == EXIT_VALIDATION


def test_bounds(capsys):
    code, out = run(capsys, "bounds", "--n", "10^9", "--lambda", "3", "--alpha", "0.1")
    doc = json.loads(out)
    assert code == EXIT_OK
    assert doc["L"] == 6 and doc["m"] == 3293
    assert 0 < doc["lower_bound"] <= doc["upper_bound"]


def test_bounds_infeasible_exit_code(capsys):
    code, out = run(capsys, "bounds", "--n", "1000", "--lambda", "1", "--alpha", "0.05")
    assert code == EXIT_INFEASIBLE
    assert out == ""


@pytest.mark.parametrize("argv", [
    ["feasibility", "--n", "10", "--lambda", "1", "--alpha", "1.5"],
    ["bounds", "--n", "1000"],
    ["constants", "--L", "zero"],
    ["simulate", "--n", "50", "--lambda", "1", "--L", "2", "--trials", "0"],
    ["nonsense"],
])
def test_validation_exit_code(capsys, argv):
    code, _ = run(capsys, *argv)
    assert code == EXIT_VALIDATION


def test_design_build_and_verify(capsys, tmp_path):
    path = tmp_path / "design.json"
    code, _ = run(capsys, "design", "build", "--n", "40", "--L", "2", "--seed", "3", "--verify",
                  "--out", str(path))
    assert code == EXIT_OK
    doc = json.loads(path.read_text(encoding="utf-8"))
    assert doc["verified"] == "verified_disjunct" and doc["n"] == 40

    code, out = run(capsys, "design", "verify", "--file", str(path), "--L", "2")
    result = json.loads(out)
    assert code == EXIT_OK and result["disjunct"] is True and result["work"] > 0


def test_design_build_without_verification(capsys):
    code, out = run(capsys, "design", "build", "--n", "100", "--L", "3", "--seed", "1")
    doc = json.loads(out)
    assert code == EXIT_OK
    assert doc["verified"] == "unverified" and doc["sizing"] in ("union_bound", "proof_constant")


def test_design_verify_over_budget(capsys, tmp_path):
    path = tmp_path / "big.json"
    random_design(200, 10, 0.3, seed=0).save(str(path))
    code, _ = run(capsys, "design", "verify", "--file", str(path), "--L", "3", "--work-budget", "10^6")
    assert code == EXIT_BUDGET


def test_simulate_is_byte_identical(capsys):
    argv = ["simulate", "--n", "50", "--lambda", "1", "--L", "2", "--trials", "2000", "--seed", "7"]
    code, first = run(capsys, *argv)
    _, second = run(capsys, *argv)
    assert code == EXIT_OK and first == second
    doc = json.loads(first)
    assert doc["verdict"] == "PASS"
    assert doc["report"]["trials"] == 2000


def test_simulate_csv_record(capsys):
    code, out = run(capsys, "simulate", "--n", "50", "--lambda", "1", "--L", "2", "--trials", "200",
                    "--output", "csv")
    header, row = out.splitlines()
    assert code == EXIT_OK
    assert header.split(",") == REPORT_CSV_COLUMNS
    assert row.split(",")[0] == "200"


def test_simulate_rejects_mismatched_design_file(capsys, tmp_path):
    path = tmp_path / "design.json"
    random_design(30, 20, 0.5, seed=0).save(str(path))
    code, _ = run(capsys, "simulate", "--n", "50", "--lambda", "1", "--L", "1", "--design", str(path),
                  "--trials", "10")
    assert code == EXIT_VALIDATION


def test_sample_histogram(capsys):
    code, out = run(capsys, "sample", "--n", "100", "--lambda", "2", "--draws", "500", "--seed", "4")
    doc = json.loads(out)
    assert code == EXIT_OK
    assert sum(entry["count"] for entry in doc["histogram"]) == 500


def test_markdown_output(capsys):
    code, out = run(capsys, "constants", "--L", "2", "--output", "markdown")
    assert code == EXIT_OK
    assert out.splitlines()[0].startswith("| L | rho_L | C_L |")
