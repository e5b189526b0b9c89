# tables.py

import os
import logging
from dataclasses import dataclass
from typing import List, Tuple

import pandas as pd

from design import proof_constant, rho, tests_required
from errors import GoldenFileError, ValidationError
from model import PopulationModel, limit_max_success, limit_prob_no_excellent, truncation_level
from search import expected_tests_exact
from utils import format_decimal, golden_dir

INFEASIBLE = "infeasible"
TABLE_IDS = (1, 2, 3, 4)


@dataclass(frozen=True)
class TableSpec:
    id: int
    title: str
    columns: Tuple[str, ...]
    rows: Tuple[tuple, ...]
    formats: Tuple[int, ...]


@dataclass(frozen=True)
class Mismatch:
    table: int
    row: int
    column: str
    expected: str
    computed: str

    def to_dict(self):
        return {"table": self.table, "row": self.row, "column": self.column,
                "expected": self.expected, "computed": self.computed}


_TARGETS = ((1, (0.50, 0.80, 0.90, 0.95)),
            (2, (0.50, 0.80, 0.90, 0.95)),
            (3, (0.50, 0.80, 0.90, 0.95)),
            (5, (0.50, 0.80, 0.90, 0.95)))

_SPECS = {
    1: TableSpec(
        1, "Limiting feasibility boundary",
        ("lambda", "e^-lambda", "1-e^-lambda"),
        tuple((lam,) for lam in (0.5, 1.0, 1.5, 2.0, 3.0, 5.0, 8.0)),
        (1, 4, 4)),
    2: TableSpec(
        2, "Smallest Poisson truncation level",
        ("lambda", "1-alpha", "smallest L", "P(1<=K<=L)"),
        tuple((lam, gamma) for lam, gammas in _TARGETS for gamma in gammas),
        (0, 2, 0, 4)),
    3: TableSpec(
        3, "Constants of the random disjunct construction",
        ("L", "rho_L", "C_L"),
        tuple((L,) for L in range(1, 12)),
        (0, 4, 2)),
    4: TableSpec(
        4, "Constructive upper bound on the expected number of tests",
        ("lambda", "1-alpha", "L", "n", "m_L(n)", "E[T_n] upper bound"),
        tuple((lam, gamma, exponent)
              for lam, gamma in ((1, 0.50), (2, 0.80), (3, 0.90), (5, 0.95))
              for exponent in (3, 6, 9)),
        (0, 2, 0, 0, 0, 2)),
}


def table_spec(table_id):
    try:
        return _SPECS[int(table_id)]
    except (KeyError, ValueError):
        raise ValidationError(f"unknown table id {table_id!r}; expected one of {TABLE_IDS}") from None


def _row_t1(lam):
    return [limit_prob_no_excellent(lam), limit_max_success(lam)]


def _row_t2(lam, gamma):
    truncation = truncation_level(lam, gamma)
    if truncation is None:
        return [INFEASIBLE, ""]
    return [truncation.L, truncation.achieved]


def _row_t3(L):
    return [rho(L), proof_constant(L)]


def _row_t4(lam, gamma, exponent):
    n = 10 ** exponent
    L = truncation_level(lam, gamma).L
    m = tests_required(L, n)
    return [L, f"10^{exponent}", m, expected_tests_exact(PopulationModel(n, lam), m)]


_ROW_BUILDERS = {1: _row_t1, 2: _row_t2, 3: _row_t3, 4: _row_t4}


def format_cell(value, places):
    if isinstance(value, str):
        return value
    if isinstance(value, int):
        return str(value)
    return format_decimal(value, places)


def compute_rows(spec):
    """Every cell of the table as the printed string."""
    rows = []
    for params in spec.rows:
        leading = [params[0]] if spec.id in (1, 3) else list(params[:2])
        values = leading + _ROW_BUILDERS[spec.id](*params)
        rows.append([format_cell(value, places) for value, places in zip(values, spec.formats)])
    return rows


def emit_table(spec, fmt="csv"):
    """
    Render a table as CSV (header row, no quoting) or a markdown pipe table.
    """
    rows = compute_rows(spec)
    if fmt == "csv":
        frame = pd.DataFrame(rows, columns=list(spec.columns))
        return frame.to_csv(index=False, lineterminator="\n")
    if fmt == "markdown":
        lines = ["| " + " | ".join(spec.columns) + " |",
                 "|" + "|".join("---" for _ in spec.columns) + "|"]
        lines += ["| " + " | ".join(row) + " |" for row in rows]
        return "\n".join(lines) + "\n"
    raise ValidationError(f"unknown table format {fmt!r}")


def golden_path(table_id):
    return os.path.join(golden_dir(), f"table_{int(table_id)}.csv")


def load_golden(golden_file):
    """Read a golden CSV as strings, exactly as stored."""
    if not os.path.isfile(golden_file):
        logging.error(f"Golden file not found: {golden_file}")
        raise GoldenFileError(f"golden file not found: {golden_file}")
    try:
        return pd.read_csv(golden_file, dtype=str, keep_default_na=False)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        logging.error(f"Error parsing golden file {golden_file}: {e}")
        raise GoldenFileError(f"cannot parse golden file {golden_file}: {e}") from e


def cell_matches(expected, computed_value, places):
    """True when computed_value rounds to the printed string at `places` decimals."""
    return expected == format_cell(computed_value, places)


def diff_against_golden(spec, golden_file=None) -> List[Mismatch]:
    """
    Compare computed cells with a golden CSV at printed precision.

    Returns:
        list: One Mismatch per differing cell; empty on an exact match.

    Raises:
        GoldenFileError: missing file, wrong header or wrong row count.
    """
    golden_file = golden_file or golden_path(spec.id)
    golden = load_golden(golden_file)
    if tuple(golden.columns) != spec.columns:
        raise GoldenFileError(f"{golden_file}: header {list(golden.columns)} does not match {list(spec.columns)}")
    computed = compute_rows(spec)
    if len(golden) != len(computed):
        raise GoldenFileError(f"{golden_file}: {len(golden)} rows, expected {len(computed)}")

    mismatches = []
    for index, (expected_row, computed_row) in enumerate(zip(golden.itertuples(index=False), computed)):
        for column, expected, value in zip(spec.columns, expected_row, computed_row):
            if expected != value:
                mismatches.append(Mismatch(spec.id, index + 1, column, expected, value))
    if mismatches:
        logging.warning(f"Table {spec.id}: {len(mismatches)} cell(s) differ from {golden_file}")
    else:
        logging.info(f"Table {spec.id} matches {golden_file}")
    return mismatches


def check_all_tables(directory=None):
    """Golden diff for every table; maps table id to its mismatches."""
    results = {}
    for table_id in TABLE_IDS:
        path = os.path.join(directory, f"table_{table_id}.csv") if directory else None
        results[table_id] = diff_against_golden(table_spec(table_id), path)
    return results
