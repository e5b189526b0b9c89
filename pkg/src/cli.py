# cli.py

import os
import re
import sys
import logging
import argparse
from dataclasses import dataclass, replace
from typing import Optional

import pandas as pd

from bounds import BOUND_CSV_COLUMNS, theorem_bracket
from design import (
    DEFAULT_MAX_RETRIES,
    DEFAULT_WORK_BUDGET,
    TestDesign,
    build_verified_design,
    design_size,
    disjunct_check,
    proof_constant,
    random_design,
    rho,
    verify_design,
)
from errors import DimensionMismatch, InfeasibleError, SearchError, ValidationError, WorkBudgetExceeded
from model import (
    PopulationModel,
    binomial_pmf,
    classify_feasibility,
    finite_truncation_level,
    sample_count_histogram,
    truncation_level,
)
from search import DEFAULT_TRIALS, REPORT_CSV_COLUMNS, verify_success_floor
from tables import TABLE_IDS, check_all_tables, emit_table, table_spec
from utils import dumps_json, ensure_directory_exists, format_decimal, setup_logging

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INFEASIBLE = 2
EXIT_VALIDATION = 3
EXIT_BUDGET = 4
MIN_WORK_BUDGET = 10 ** 6


@dataclass(frozen=True)
class CliConfig:
    seed: int = 0
    trials: int = DEFAULT_TRIALS
    work_budget: int = DEFAULT_WORK_BUDGET
    output: str = "json"
    out_path: Optional[str] = None
    log_level: str = "WARNING"

    def __post_init__(self):
        if self.trials < 1:
            raise ValidationError(f"--trials must be at least 1, got {self.trials}")
        if self.work_budget < MIN_WORK_BUDGET:
            raise ValidationError(f"--work-budget must be at least {MIN_WORK_BUDGET}, got {self.work_budget}")


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with the validation code instead of argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def parse_count(text):
    """Accept 1000, 10^6 and 1e9 style integers."""
    text = text.strip().replace("_", "").replace(",", "")
    match = re.fullmatch(r"(\d+)\^(\d+)", text)
    if match:
        return int(match.group(1)) ** int(match.group(2))
    match = re.fullmatch(r"(\d+)[eE](\d+)", text)
    if match:
        return int(match.group(1)) * 10 ** int(match.group(2))
    if text.isdigit():
        return int(text)
    raise argparse.ArgumentTypeError(f"not a nonnegative integer: {text!r}")


def _common_options():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=parse_count, default=0, help="Root seed (default 0)")
    common.add_argument("--trials", type=parse_count, default=DEFAULT_TRIALS, help="Monte Carlo trials")
    common.add_argument("--work-budget", type=parse_count, default=DEFAULT_WORK_BUDGET,
                        help="Row-check budget for disjunctness verification")
    common.add_argument("--output", choices=("json", "csv", "markdown"), default="json")
    common.add_argument("--out", dest="out_path", default=None, help="Write output here instead of stdout")
    common.add_argument("--log-level", default="WARNING",
                        choices=("DEBUG", "INFO", "WARNING", "ERROR"))
    return common


def build_parser():
    common = _common_options()
    parser = _Parser(prog="cli.py", description="Two-round search for one excellent element.")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    feasibility = commands.add_parser("feasibility", parents=[common], help="Classify a success target")
    feasibility.add_argument("--n", type=parse_count, required=True)
    feasibility.add_argument("--lambda", dest="lam", type=float, required=True)
    feasibility.add_argument("--alpha", type=float, required=True)
    feasibility.add_argument("--asymptotic", action="store_true", help="Judge against e^-lambda")

    truncation = commands.add_parser("truncation", parents=[common], help="Smallest Poisson truncation level")
    truncation.add_argument("--lambda", dest="lam", type=float, required=True)
    truncation.add_argument("--gamma", type=float, required=True)
    truncation.add_argument("--n", type=parse_count, default=None, help="Also report the Binomial level at this n")

    constants = commands.add_parser("constants", parents=[common], help="rho_L and C_L")
    constants.add_argument("--L", type=parse_count, required=True)

    design = commands.add_parser("design", help="Build or verify a test design")
    design_commands = design.add_subparsers(dest="design_command", required=True, parser_class=_Parser)
    build = design_commands.add_parser("build", parents=[common])
    build.add_argument("--n", type=parse_count, required=True)
    build.add_argument("--L", type=parse_count, required=True)
    build.add_argument("--q", type=float, default=None, help="Row inclusion probability (default 1/(L+1))")
    build.add_argument("--verify", action="store_true", help="Retry until the design is L-disjunct")
    build.add_argument("--max-retries", type=parse_count, default=DEFAULT_MAX_RETRIES)
    verify = design_commands.add_parser("verify", parents=[common])
    verify.add_argument("--file", required=True)
    verify.add_argument("--L", type=parse_count, required=True)

    simulate = commands.add_parser("simulate", parents=[common], help="Monte Carlo evaluation")
    simulate.add_argument("--n", type=parse_count, required=True)
    simulate.add_argument("--lambda", dest="lam", type=float, required=True)
    simulate.add_argument("--L", type=parse_count, required=True)
    simulate.add_argument("--design", dest="design_file", default=None)
    simulate.add_argument("--ci", choices=("normal", "wilson"), default="normal")
    simulate.add_argument("--workers", type=parse_count, default=1)

    bounds = commands.add_parser("bounds", parents=[common], help="Upper and lower bounds on E[T_n]")
    bounds.add_argument("--n", type=parse_count, required=True)
    bounds.add_argument("--lambda", dest="lam", type=float, required=True)
    bounds.add_argument("--alpha", type=float, required=True)
    bounds.add_argument("--c", type=float, default=0.5, help="t = floor(c log2 n) in the lower bound")

    tables = commands.add_parser("tables", parents=[common], help="Emit or check the numerical tables")
    tables.add_argument("action", nargs="?", choices=("check",), default=None)
    tables.add_argument("--id", dest="table_id", type=int, choices=TABLE_IDS)
    tables.add_argument("--format", dest="table_format", choices=("csv", "markdown"), default="csv")
    tables.add_argument("--golden-dir", default=None)

    sample = commands.add_parser("sample", parents=[common], help="Histogram of the excellent-set size")
    sample.add_argument("--n", type=parse_count, required=True)
    sample.add_argument("--lambda", dest="lam", type=float, required=True)
    sample.add_argument("--draws", type=parse_count, default=10 ** 4)

    return parser


def render(payload, fmt, columns=None):
    """Render a flat record (or list of records) as json, csv or markdown."""
    if fmt == "json":
        return dumps_json(payload)
    records = payload if isinstance(payload, list) else [payload]
    frame = pd.DataFrame(records, columns=columns)
    frame = frame.astype(object).where(frame.notna(), "")
    if fmt == "csv":
        return frame.to_csv(index=False, lineterminator="\n")
    header = list(frame.columns)
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    lines += ["| " + " | ".join(str(value) for value in row) + " |" for row in frame.itertuples(index=False)]
    return "\n".join(lines) + "\n"


def cmd_feasibility(args, config):
    verdict = classify_feasibility(PopulationModel(args.n, args.lam), args.alpha, asymptotic=args.asymptotic)
    doc = {"n": args.n, "lambda": args.lam}
    doc.update(verdict.to_dict())
    return render(doc, config.output)


def cmd_truncation(args, config):
    truncation = truncation_level(args.lam, args.gamma)
    doc = {"lambda": args.lam, "gamma": args.gamma}
    if truncation is None:
        doc.update({"L": "infeasible", "achieved": None})
    else:
        doc.update({"L": truncation.L, "achieved": truncation.achieved})
    if args.n is not None:
        finite = finite_truncation_level(PopulationModel(args.n, args.lam), args.gamma)
        doc["n"] = args.n
        doc["finite_L"] = "infeasible" if finite is None else finite.L
        doc["finite_achieved"] = None if finite is None else finite.achieved
    return render(doc, config.output)


def cmd_constants(args, config):
    doc = {"L": args.L, "rho_L": format_decimal(rho(args.L), 4),
           "C_L": format_decimal(proof_constant(args.L), 2),
           "rho_L_exact": rho(args.L), "C_L_exact": proof_constant(args.L)}
    return render(doc, config.output)


def cmd_design(args, config):
    if args.design_command == "build":
        if args.verify:
            design = build_verified_design(args.n, args.L, config.seed, max_retries=args.max_retries,
                                           work_budget=config.work_budget, q=args.q)
        else:
            m, sizing = design_size(args.L, args.n)
            q = 1.0 / (args.L + 1) if args.q is None else args.q
            design = random_design(args.n, m, q, config.seed, L=args.L)
            design = replace(design, sizing=sizing)
        return dumps_json(design.to_dict())

    design = TestDesign.load(args.file, config.work_budget)
    ok, checked = disjunct_check(design, args.L, config.work_budget)
    return render({"file": args.file, "n": design.n, "m": design.m, "L": args.L,
                   "disjunct": ok, "work": checked}, config.output)


def cmd_simulate(args, config):
    model = PopulationModel(args.n, args.lam)
    if args.design_file:
        design = TestDesign.load(args.design_file, config.work_budget)
        if design.n != model.n:
            raise DimensionMismatch(f"design file has n={design.n}, --n is {model.n}")
        if not design.is_verified and design.failure_bound is None:
            design, _ = verify_design(design, args.L, config.work_budget)
    else:
        design = build_verified_design(args.n, args.L, config.seed, work_budget=config.work_budget)
    check = verify_success_floor(model, design, args.L, config.trials, config.seed,
                                 ci_method=args.ci, workers=args.workers)
    if config.output == "json":
        return dumps_json(check.to_dict())
    return render(check.report.csv_record(), config.output, columns=REPORT_CSV_COLUMNS)


def cmd_bounds(args, config):
    report = theorem_bracket(args.n, args.lam, args.alpha, c=args.c)
    if config.output == "json":
        return dumps_json(report.to_dict())
    return render(report.csv_record(), config.output, columns=BOUND_CSV_COLUMNS)


def cmd_tables(args, config):
    if args.action == "check":
        results = check_all_tables(args.golden_dir)
        mismatches = [m.to_dict() for table_id in TABLE_IDS for m in results[table_id]]
        return dumps_json({"tables": list(TABLE_IDS), "mismatches": mismatches}), (EXIT_FAILURE if mismatches else EXIT_OK)
    if args.table_id is None:
        raise ValidationError("tables needs --id or the 'check' action")
    return emit_table(table_spec(args.table_id), args.table_format)


def cmd_sample(args, config):
    model = PopulationModel(args.n, args.lam)
    counts = sample_count_histogram(model, args.draws, config.seed)
    records = [{"k": k, "count": int(count), "expected": args.draws * binomial_pmf(model, k)}
               for k, count in enumerate(counts) if count or k <= 2 * model.lam + 5]
    if config.output == "json":
        return dumps_json({"n": args.n, "lambda": args.lam, "draws": args.draws, "seed": config.seed,
                           "histogram": records})
    return render(records, config.output, columns=["k", "count", "expected"])


COMMANDS = {
    "feasibility": cmd_feasibility,
    "truncation": cmd_truncation,
    "constants": cmd_constants,
    "design": cmd_design,
    "simulate": cmd_simulate,
    "bounds": cmd_bounds,
    "tables": cmd_tables,
    "sample": cmd_sample,
}


def _emit(text, out_path):
    if out_path:
        ensure_directory_exists(os.path.dirname(os.path.abspath(out_path)))
        with open(out_path, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        logging.info(f"Wrote output to {out_path}")
    else:
        sys.stdout.write(text)


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_VALIDATION

    log_level = getattr(args, "log_level", "WARNING")
    setup_logging("cli", getattr(logging, log_level))

    try:
        config = CliConfig(
            seed=getattr(args, "seed", 0),
            trials=getattr(args, "trials", DEFAULT_TRIALS),
            work_budget=getattr(args, "work_budget", DEFAULT_WORK_BUDGET),
            output=getattr(args, "output", "json"),
            out_path=getattr(args, "out_path", None),
            log_level=log_level,
        )
        result = COMMANDS[args.command](args, config)
        text, code = result if isinstance(result, tuple) else (result, EXIT_OK)
        _emit(text, config.out_path)
        return code
    except InfeasibleError as e:
        logging.error(f"Infeasible: {e}")
        return EXIT_INFEASIBLE
    except WorkBudgetExceeded as e:
        logging.error(f"Budget exceeded: {e}")
        return EXIT_BUDGET
    except ValidationError as e:
        logging.error(f"Invalid input: {e}")
        return EXIT_VALIDATION
    except SearchError as e:
        logging.error(f"Failed: {e}")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
