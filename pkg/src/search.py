# search.py

import math
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np
from scipy.stats import norm

from design import decode_compatible, check_level
from errors import DimensionMismatch, ValidationError
from model import POPULATION_STREAM, RNG_ALGORITHM, check_seed, child_seed, max_success, prob_k_in_range, sample_excellent_set

DEFAULT_TRIALS = 10 ** 5
CI_METHODS = ("normal", "wilson")
REPORT_CSV_COLUMNS = ["trials", "successes", "success_rate", "ci", "mean_tests", "tests_ci",
                      "n", "lambda", "L", "m", "seed"]


class SubsetOracle:
    """
    Noiseless subset tests against a fixed excellent set.

    `calls` counts every test answered, one per pool.
    """

    def __init__(self, truth):
        self.truth = truth
        self.calls = 0
        self._packed = np.packbits(truth.indicator())

    def __call__(self, pool):
        pool = set(pool)
        bad = [i for i in pool if not 1 <= i <= self.truth.n]
        if bad:
            raise DimensionMismatch(f"pool indices outside 1..{self.truth.n}: {sorted(bad)[:5]}")
        self.calls += 1
        return not self.truth.members.isdisjoint(pool)

    def test_population(self):
        self.calls += 1
        return self.truth.size > 0

    def test_rows(self, rows):
        """Answer each packed row as its own test."""
        if rows.shape[1] != self._packed.shape[0]:
            raise DimensionMismatch(f"rows pack {rows.shape[1] * 8} columns, truth has {self.truth.n}")
        self.calls += rows.shape[0]
        return np.any(rows & self._packed, axis=1)


def subset_test(pool, oracle):
    """Y(A) = 1{A meets E_n}; the oracle's counter goes up by one."""
    return oracle(pool)


@dataclass(frozen=True)
class ProcedureResult:
    found: Optional[int]
    tests_used: int
    round1_positive: bool
    compatible_size: int

    @property
    def declared_failure(self):
        return self.found is None

    def succeeded(self, truth):
        return self.found is not None and self.found in truth

    def to_dict(self):
        return {
            "outcome": "declared_failure" if self.found is None else "found",
            "found": self.found,
            "tests_used": self.tests_used,
            "round1_positive": self.round1_positive,
            "compatible_size": self.compatible_size,
        }


def run_two_round(truth, design):
    """
    Test [n]; if positive apply every design row, decode, output min of the compatible set.
    """
    if design.n != truth.n:
        raise DimensionMismatch(f"design has {design.n} columns, population has {truth.n}")
    oracle = SubsetOracle(truth)
    if not oracle.test_population():
        return ProcedureResult(None, oracle.calls, False, 0)
    outcomes = oracle.test_rows(design.rows)
    compatible = decode_compatible(design, outcomes)
    found = min(compatible) if compatible else None
    return ProcedureResult(found, oracle.calls, True, len(compatible))


def expected_tests_exact(model, m):
    """E[T_n] = 1 + {1 - (1 - lam/n)^n} m."""
    return 1.0 + max_success(model) * m


def confidence_z(confidence=0.95):
    return float(norm.ppf(0.5 + confidence / 2.0))


def proportion_halfwidth(successes, trials, z, method="normal"):
    """
    Half-width of a confidence interval for successes / trials.

    normal: z sqrt(p(1-p)/N).
    wilson: half the Wilson score interval width,
            z / (1 + z^2/N) * sqrt(p(1-p)/N + z^2/(4N^2)).
    """
    p = successes / trials
    if method == "normal":
        return z * math.sqrt(p * (1.0 - p) / trials)
    if method == "wilson":
        z2 = z * z
        return z / (1.0 + z2 / trials) * math.sqrt(p * (1.0 - p) / trials + z2 / (4.0 * trials * trials))
    raise ValidationError(f"unknown CI method {method!r}; expected one of {CI_METHODS}")


@dataclass(frozen=True)
class SimulationReport:
    trials: int
    successes: int
    success_rate: float
    mean_tests: float
    success_ci_halfwidth: float
    tests_ci_halfwidth: float
    seed: int
    model: object
    design_ref: dict
    ci_method: str = "normal"
    confidence: float = 0.95
    declared_failures: int = 0
    false_discoveries: int = 0
    rng: str = field(default=RNG_ALGORITHM)

    def to_dict(self):
        return {
            "trials": self.trials,
            "successes": self.successes,
            "success_rate": self.success_rate,
            "success_ci_halfwidth": self.success_ci_halfwidth,
            "mean_tests": self.mean_tests,
            "tests_ci_halfwidth": self.tests_ci_halfwidth,
            "declared_failures": self.declared_failures,
            "false_discoveries": self.false_discoveries,
            "ci_method": self.ci_method,
            "confidence": self.confidence,
            "seed": self.seed,
            "rng": self.rng,
            "model": self.model.to_dict(),
            "design": self.design_ref,
        }

    def csv_record(self):
        return {
            "trials": self.trials,
            "successes": self.successes,
            "success_rate": repr(self.success_rate),
            "ci": repr(self.success_ci_halfwidth),
            "mean_tests": repr(self.mean_tests),
            "tests_ci": repr(self.tests_ci_halfwidth),
            "n": self.model.n,
            "lambda": repr(self.model.lam),
            "L": self.design_ref.get("L"),
            "m": self.design_ref.get("m"),
            "seed": self.seed,
        }


def _run_block(model, design, seed, start, stop):
    successes = declared = false_hits = 0
    total = total_sq = 0
    for trial in range(start, stop):
        truth = sample_excellent_set(model, child_seed(seed, trial, POPULATION_STREAM))
        result = run_two_round(truth, design)
        if result.found is None:
            declared += 1
        elif result.found in truth:
            successes += 1
        else:
            false_hits += 1
        total += result.tests_used
        total_sq += result.tests_used * result.tests_used
    return successes, declared, false_hits, total, total_sq


def _blocks(trials, workers):
    size = -(-trials // workers)
    return [(start, min(start + size, trials)) for start in range(0, trials, size)]


def monte_carlo(model, design, trials, seed, ci_method="normal", workers=1, confidence=0.95):
    """
    Replicate the two-round procedure `trials` times on fresh populations.

    Trial i draws its population from population stream i of `seed`; the design is
    fixed. Counts are integers, so splitting trials across `workers` processes
    does not change the report.

    Returns:
        SimulationReport
    """
    if isinstance(trials, bool) or not isinstance(trials, int) or trials < 1:
        raise ValidationError(f"trials must be a positive integer, got {trials!r}")
    if design.n != model.n:
        raise DimensionMismatch(f"design has {design.n} columns, model has n={model.n}")
    if ci_method not in CI_METHODS:
        raise ValidationError(f"unknown CI method {ci_method!r}; expected one of {CI_METHODS}")
    seed = check_seed(seed)

    blocks = _blocks(trials, max(1, int(workers)))
    if len(blocks) == 1:
        parts = [_run_block(model, design, seed, 0, trials)]
    else:
        with ProcessPoolExecutor(max_workers=len(blocks)) as pool:
            futures = [pool.submit(_run_block, model, design, seed, start, stop) for start, stop in blocks]
            parts = [future.result() for future in futures]
    successes, declared, false_hits, total, total_sq = (sum(column) for column in zip(*parts))

    z = confidence_z(confidence)
    mean_tests = Fraction(total, trials)
    if trials > 1:
        variance = (Fraction(total_sq) - Fraction(total * total, trials)) / (trials - 1)
    else:
        variance = Fraction(0)
    report = SimulationReport(
        trials=trials,
        successes=successes,
        success_rate=successes / trials,
        mean_tests=float(mean_tests),
        success_ci_halfwidth=proportion_halfwidth(successes, trials, z, ci_method),
        tests_ci_halfwidth=z * math.sqrt(float(variance) / trials),
        seed=seed,
        model=model,
        design_ref=design.metadata(),
        ci_method=ci_method,
        confidence=confidence,
        declared_failures=declared,
        false_discoveries=false_hits,
    )
    logging.info(f"Simulated {trials} runs (n={model.n}, lambda={model.lam}, m={design.m}): "
                 f"success {report.success_rate:.4f} +/- {report.success_ci_halfwidth:.4f}, "
                 f"mean tests {report.mean_tests:.2f}")
    return report


@dataclass(frozen=True)
class FloorCheck:
    passed: bool
    floor: float
    threshold: float
    report: SimulationReport

    def to_dict(self):
        return {
            "verdict": "PASS" if self.passed else "FAIL",
            "floor": self.floor,
            "threshold": self.threshold,
            "success_rate": self.report.success_rate,
            "success_ci_halfwidth": self.report.success_ci_halfwidth,
            "report": self.report.to_dict(),
        }


def verify_success_floor(model, design, L, trials, seed, ci_method="normal", workers=1):
    """
    PASS iff the simulated success rate reaches P(1 <= K_n <= L) - 3 CI half-widths.
    """
    L = check_level(L)
    if not design.is_verified and design.failure_bound is None:
        logging.warning("Floor check on a design that is neither verified nor carrying a failure bound")
    floor = prob_k_in_range(model, 1, min(L, model.n))
    report = monte_carlo(model, design, trials, seed, ci_method=ci_method, workers=workers)
    threshold = floor - 3.0 * report.success_ci_halfwidth
    passed = report.success_rate >= threshold
    logging.info(f"Success floor {floor:.4f}: observed {report.success_rate:.4f} -> {'PASS' if passed else 'FAIL'}")
    return FloorCheck(passed, floor, threshold, report)
