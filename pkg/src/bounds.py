# bounds.py

import math
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from design import check_level, proof_constant, tests_required
from errors import BracketViolation, InfeasibleError, ValidationError
from model import (
    PopulationModel,
    Regime,
    classify_feasibility,
    limit_max_success,
    poisson_interval,
    truncation_level,
)
from search import expected_tests_exact

EXACT_COMBINATORICS_LIMIT = 100


@dataclass(frozen=True)
class UpperBound:
    L: int
    m: int
    value: float


@dataclass(frozen=True)
class LowerBound:
    value: float
    t_used: int
    L: int
    canonical_t: int
    canonical_value: float
    slack: float


@dataclass(frozen=True)
class BoundReport:
    n: int
    lam: float
    alpha: float
    L: int
    m: int
    upper_bound: float
    lower_bound: float
    t_used: int
    feasible: bool
    regime: str
    lower_L: int = 0
    canonical_t: int = 0
    canonical_lower: float = 0.0
    slack: float = 0.0
    slack_small: bool = False
    asymptotic_upper: Optional[float] = None
    asymptotic_lower_constant: Optional[float] = None

    @property
    def upper_per_log_n(self):
        return self.upper_bound / math.log(self.n)

    @property
    def lower_per_log_n(self):
        return self.lower_bound / math.log(self.n)

    def to_dict(self):
        return {
            "n": self.n,
            "lambda": self.lam,
            "alpha": self.alpha,
            "L": self.L,
            "m": self.m,
            "upper_bound": self.upper_bound,
            "lower_bound": self.lower_bound,
            "t_used": self.t_used,
            "feasible": self.feasible,
            "regime": self.regime,
            "lower_L": self.lower_L,
            "canonical_t": self.canonical_t,
            "canonical_lower": self.canonical_lower,
            "slack": self.slack,
            "slack_small": self.slack_small,
            "upper_per_log_n": self.upper_per_log_n,
            "lower_per_log_n": self.lower_per_log_n,
            "asymptotic_upper": self.asymptotic_upper,
            "asymptotic_lower_constant": self.asymptotic_lower_constant,
        }

    def csv_record(self):
        return {
            "n": self.n,
            "lambda": repr(self.lam),
            "alpha": repr(self.alpha),
            "L": self.L,
            "m": self.m,
            "upper_bound": repr(self.upper_bound),
            "lower_bound": repr(self.lower_bound),
            "t_used": self.t_used,
            "feasible": self.feasible,
        }


BOUND_CSV_COLUMNS = ["n", "lambda", "alpha", "L", "m", "upper_bound", "lower_bound", "t_used", "feasible"]


def _feasible_verdict(n, lam, alpha):
    verdict = classify_feasibility(PopulationModel(n, lam), alpha)
    if verdict.regime is Regime.INFEASIBLE:
        logging.error(f"Target 1-alpha={1 - alpha} is infeasible for n={n}, lambda={lam} (max {verdict.max_success:.4f})")
        raise InfeasibleError(f"success {1 - alpha} exceeds the maximum {verdict.max_success} for n={n}, lambda={lam}")
    return verdict


def constructive_upper(n, lam, alpha):
    """
    L from the Poisson truncation, m = m_L(n), value = exact E[T_n] of the construction.
    """
    verdict = _feasible_verdict(n, lam, alpha)
    if verdict.regime is Regime.TRIVIAL_LOW_SUCCESS:
        return UpperBound(0, 0, 0.0)
    truncation = truncation_level(lam, 1.0 - alpha)
    if truncation is None:
        raise InfeasibleError(f"no Poisson truncation level reaches {1 - alpha} for lambda={lam}")
    m = tests_required(truncation.L, n)
    return UpperBound(truncation.L, m, expected_tests_exact(PopulationModel(n, lam), m))


def upper_bound(n, lam, alpha):
    return constructive_upper(n, lam, alpha).value


def asymptotic_upper_bound(n, lam, alpha):
    """1 + (1 - e^{-lam}) C_L ln n."""
    bound = constructive_upper(n, lam, alpha)
    if bound.L == 0:
        return 0.0
    return 1.0 + limit_max_success(lam) * proof_constant(bound.L) * math.log(n)


def success_fraction_bound(t, k, n):
    """min(1, 2^{t+1} k / n): share of k-sets a depth-t procedure can get right."""
    if t < 0 or not 1 <= k <= n:
        raise ValidationError(f"need t >= 0 and 1 <= k <= n, got t={t}, k={k}, n={n}")
    return float(min(Fraction(1), Fraction(2 ** (t + 1) * k, n)))


def fixed_output_fraction(k, n):
    """C(n-1, k-1) / C(n, k); exact for n <= 100, log-space above."""
    if not 1 <= k <= n:
        raise ValidationError(f"need 1 <= k <= n, got k={k}, n={n}")
    if n <= EXACT_COMBINATORICS_LIMIT:
        return Fraction(math.comb(n - 1, k - 1), math.comb(n, k))
    log_ratio = (math.lgamma(n) - math.lgamma(k) - math.lgamma(n - k + 1)
                 - math.lgamma(n + 1) + math.lgamma(k + 1) + math.lgamma(n - k + 1))
    return math.exp(log_ratio)


def lower_truncation_level(lam, gamma):
    """Smallest L >= 1 with Poisson tail P(K > L) < gamma / 2."""
    limit = int(math.ceil(lam + 40.0 * math.sqrt(lam) + 60.0))
    L = 1
    while L < limit and 1.0 - poisson_interval(lam, 0, L) >= gamma / 2.0:
        L += 1
    return L


def lower_bound_formula(t, gamma, L, n):
    """t (gamma/2 - 2^{t+1} L / n) in exact rationals, clamped at zero."""
    value = t * (Fraction(gamma) / 2 - Fraction(2 ** (t + 1) * L, n))
    return max(Fraction(0), value)


def _floor_c_log2(n, c):
    # Largest t with 2^t <= n^c, decided on integers.
    ratio = Fraction(c).limit_denominator(1000)
    t = 0
    while 2 ** ((t + 1) * ratio.denominator) <= n ** ratio.numerator:
        t += 1
    return t


def lower_bound_details(n, lam, alpha, c=0.5, forced_L=None):
    """
    Information-counting lower bound on E[T_n] for any admissible two-round procedure.

    Evaluates t (gamma/2 - 2^{t+1} L/n) at t = floor(c log2 n) and at the best
    integer t in [1, floor(log2 n)], and keeps the larger value.
    """
    if isinstance(n, bool) or not isinstance(n, int) or n < 4:
        raise ValidationError(f"lower bound needs an integer n >= 4, got {n!r}")
    if not 0 < c < 1:
        raise ValidationError(f"c must lie in (0, 1), got {c!r}")
    verdict = _feasible_verdict(n, lam, alpha)
    if verdict.regime is Regime.TRIVIAL_LOW_SUCCESS:
        return LowerBound(0.0, 0, 0, 0, 0.0, 0.0)

    gamma = 1.0 - alpha
    L = check_level(forced_L) if forced_L is not None else lower_truncation_level(lam, gamma)
    canonical_t = _floor_c_log2(n, c)
    canonical = lower_bound_formula(canonical_t, gamma, L, n)

    best_t, best = canonical_t, canonical
    for t in range(1, n.bit_length()):
        value = lower_bound_formula(t, gamma, L, n)
        if value > best:
            best_t, best = t, value
    slack = float(Fraction(2 ** (canonical_t + 1) * L, n))
    logging.debug(f"Lower bound n={n}: canonical t={canonical_t} -> {float(canonical):.4f}, best t={best_t} -> {float(best):.4f}")
    return LowerBound(float(best), best_t, L, canonical_t, float(canonical), slack)


def lower_bound(n, lam, alpha, c=0.5, forced_L=None):
    details = lower_bound_details(n, lam, alpha, c=c, forced_L=forced_L)
    return details.value, details.t_used


def asymptotic_lower_constant(alpha):
    """gamma / (8 ln 2): the natural-log constant of the lower bound (not a finite-n guarantee)."""
    return (1.0 - alpha) / (8.0 * math.log(2.0))


def theorem_bracket(n, lam, alpha, c=0.5):
    """
    Both bounds on the optimal expected test count, with their bookkeeping.

    Raises:
        InfeasibleError: beyond the feasibility boundary.
        BracketViolation: lower > upper although the slack term is at most gamma/4.
    """
    if isinstance(n, bool) or not isinstance(n, int) or n < 4:
        raise ValidationError(f"bracket needs an integer n >= 4, got {n!r}")
    upper = constructive_upper(n, lam, alpha)
    if upper.L == 0:
        return BoundReport(n, float(lam), float(alpha), 0, 0, 0.0, 0.0, 0, True,
                           Regime.TRIVIAL_LOW_SUCCESS.value, slack_small=True,
                           asymptotic_upper=0.0, asymptotic_lower_constant=0.0)
    lower = lower_bound_details(n, lam, alpha, c=c)
    gamma = 1.0 - alpha
    slack_small = lower.slack <= gamma / 4.0
    if not slack_small:
        logging.warning(f"n={n} is too small for the lower-bound slack ({lower.slack:.3g} > gamma/4)")
    elif lower.value > upper.value:
        logging.error(f"Bracket violated at n={n}: lower {lower.value} > upper {upper.value}")
        raise BracketViolation(f"lower bound {lower.value} exceeds upper bound {upper.value} at n={n}")
    return BoundReport(
        n=n,
        lam=float(lam),
        alpha=float(alpha),
        L=upper.L,
        m=upper.m,
        upper_bound=upper.value,
        lower_bound=lower.value,
        t_used=lower.t_used,
        feasible=True,
        regime=Regime.NONTRIVIAL_FEASIBLE.value,
        lower_L=lower.L,
        canonical_t=lower.canonical_t,
        canonical_lower=lower.canonical_value,
        slack=lower.slack,
        slack_small=slack_small,
        asymptotic_upper=1.0 + limit_max_success(lam) * proof_constant(upper.L) * math.log(n),
        asymptotic_lower_constant=asymptotic_lower_constant(alpha),
    )


def scaling_series(lam, alpha, ns):
    """Bracket reports over a grid of population sizes."""
    return [theorem_bracket(n, lam, alpha) for n in ns]
