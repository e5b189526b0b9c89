# model.py

import math
import logging
from dataclasses import dataclass
from enum import Enum
from typing import FrozenSet

import numpy as np
from scipy.stats import binom, poisson

from errors import ValidationError

RNG_ALGORITHM = "PCG64/SeedSequence"
MAX_SEED = 2 ** 64 - 1

# Spawn-key namespaces under one root seed.
CONSTRUCTION_STREAM = 0
POPULATION_STREAM = 1

# Above this n, 1 - lam/n is no longer exact and the literal power drifts to 1.
EXACT_POWER_LIMIT = 2 ** 53


def check_seed(seed):
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)) or not 0 <= seed <= MAX_SEED:
        raise ValidationError(f"seed must be an integer in [0, 2^64), got {seed!r}")
    return int(seed)


def child_seed(seed, index, stream):
    """
    Child stream `index` in namespace `stream` of the root seed.

    SeedSequence(seed, spawn_key=(stream, index)) is what
    SeedSequence(seed).spawn()[stream].spawn()[index] hands out, so children can be
    built in any order. Design attempts draw from
    CONSTRUCTION_STREAM and simulated populations from POPULATION_STREAM.
    """
    if stream not in (CONSTRUCTION_STREAM, POPULATION_STREAM):
        raise ValidationError(f"unknown seed stream {stream!r}")
    return np.random.SeedSequence(check_seed(seed), spawn_key=(int(stream), int(index)))


@dataclass(frozen=True)
class PopulationModel:
    """n elements, each independently excellent with probability lam / n."""
    n: int
    lam: float

    def __post_init__(self):
        if isinstance(self.n, bool) or not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise ValidationError(f"n must be a positive integer, got {self.n!r}")
        if not (isinstance(self.lam, (int, float, np.floating)) and math.isfinite(self.lam) and self.lam > 0):
            raise ValidationError(f"lambda must be a positive real, got {self.lam!r}")
        if self.lam / self.n > 1:
            raise ValidationError(f"lambda/n = {self.lam / self.n} exceeds 1")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "lam", float(self.lam))

    @property
    def p(self):
        return self.lam / self.n

    def to_dict(self):
        return {"n": self.n, "lambda": self.lam}


@dataclass(frozen=True)
class ExcellentSet:
    """The excellent elements E_n, labelled 1..n."""
    n: int
    members: FrozenSet[int]

    def __post_init__(self):
        members = frozenset(int(i) for i in self.members)
        bad = [i for i in members if not 1 <= i <= self.n]
        if bad:
            raise ValidationError(f"excellent indices out of range 1..{self.n}: {sorted(bad)[:5]}")
        object.__setattr__(self, "members", members)

    @property
    def size(self):
        return len(self.members)

    def indicator(self):
        bits = np.zeros(self.n, dtype=bool)
        if self.members:
            bits[np.fromiter(self.members, dtype=np.int64) - 1] = True
        return bits

    def __contains__(self, index):
        return index in self.members

    def __len__(self):
        return len(self.members)


class Regime(Enum):
    INFEASIBLE = "infeasible"
    NONTRIVIAL_FEASIBLE = "nontrivial_feasible"
    TRIVIAL_LOW_SUCCESS = "trivial_low_success"


@dataclass(frozen=True)
class FeasibilityVerdict:
    regime: Regime
    prob_no_excellent: float
    max_success: float
    alpha: float
    asymptotic: bool

    @property
    def feasible(self):
        return self.regime is not Regime.INFEASIBLE

    def to_dict(self):
        return {
            "regime": self.regime.value,
            "prob_no_excellent": self.prob_no_excellent,
            "max_success": self.max_success,
            "alpha": self.alpha,
            "gamma": 1.0 - self.alpha,
            "asymptotic": self.asymptotic,
        }


@dataclass(frozen=True)
class Truncation:
    L: int
    achieved: float


def prob_no_excellent(model):
    """
    (1 - lam/n)^n as a double power; exp(n log1p(-lam/n)) once n exceeds 2^53.
    """
    if model.n <= EXACT_POWER_LIMIT:
        return (1.0 - model.p) ** model.n
    return math.exp(model.n * math.log1p(-model.p))


def limit_prob_no_excellent(lam):
    if not lam > 0:
        raise ValidationError(f"lambda must be positive, got {lam!r}")
    return math.exp(-lam)


def max_success(model):
    return 1.0 - prob_no_excellent(model)


def limit_max_success(lam):
    return 1.0 - limit_prob_no_excellent(lam)


def classify_feasibility(model, alpha, asymptotic=False):
    """
    Classify the success target 1 - alpha for the given population.

    Args:
        model (PopulationModel): The population.
        alpha (float): Allowed failure probability, 0 < alpha <= 1.
        asymptotic (bool): Use e^{-lam} instead of (1 - lam/n)^n.

    Returns:
        FeasibilityVerdict: Regime plus the boundary values it was judged on.
    """
    if not 0 < alpha <= 1:
        raise ValidationError(f"alpha must lie in (0, 1], got {alpha!r}")
    p0 = limit_prob_no_excellent(model.lam) if asymptotic else prob_no_excellent(model)
    best = 1.0 - p0
    gamma = 1.0 - alpha
    if alpha == 1:
        regime = Regime.TRIVIAL_LOW_SUCCESS
    elif gamma > best:
        regime = Regime.INFEASIBLE
    else:
        regime = Regime.NONTRIVIAL_FEASIBLE
    logging.debug(f"Feasibility n={model.n} lambda={model.lam} alpha={alpha}: {regime.value}")
    return FeasibilityVerdict(regime, p0, best, float(alpha), asymptotic)


def _check_count(k, name="k"):
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or k < 0:
        raise ValidationError(f"{name} must be a nonnegative integer, got {k!r}")
    return int(k)


def poisson_pmf(lam, k):
    """e^{-lam} lam^k / k!, computed in log-space."""
    k = _check_count(k)
    if k == 0:
        return math.exp(-lam)
    return math.exp(float(poisson.logpmf(k, lam)))


def poisson_interval(lam, lo, hi):
    """P(lo <= K <= hi) for K ~ Poisson(lam) by log-space pmf summation."""
    lo, hi = _check_count(lo, "lo"), _check_count(hi, "hi")
    hi = min(hi, _poisson_search_limit(lam))
    if lo > hi:
        return 0.0
    ks = np.arange(lo, hi + 1)
    return math.fsum(np.exp(poisson.logpmf(ks, lam)).tolist())


def binomial_pmf(model, k):
    k = _check_count(k)
    if k > model.n:
        return 0.0
    if model.p == 1.0:
        return 1.0 if k == model.n else 0.0
    return math.exp(float(binom.logpmf(k, model.n, model.p)))


def prob_k_in_range(model, lo, hi):
    """
    Exact Binomial(n, lam/n) interval probability P(lo <= K_n <= hi).

    Terms above lam + 40 sqrt(lam) + 60 underflow and are not summed, so the
    work is independent of n.

    Raises:
        ValidationError: unless 0 <= lo <= hi <= n.
    """
    lo, hi = _check_count(lo, "lo"), _check_count(hi, "hi")
    if not lo <= hi <= model.n:
        raise ValidationError(f"invalid range [{lo}, {hi}] for n={model.n}")
    if model.p == 1.0:
        return 1.0 if lo <= model.n <= hi else 0.0
    hi = min(hi, _poisson_search_limit(model.lam))
    if lo > hi:
        return 0.0
    ks = np.arange(lo, hi + 1)
    return math.fsum(np.exp(binom.logpmf(ks, model.n, model.p)).tolist())


def _poisson_search_limit(lam):
    # Beyond this the remaining Poisson mass is far below double resolution.
    return int(math.ceil(lam + 40.0 * math.sqrt(lam) + 60.0))


def _check_gamma(gamma):
    if not 0 < gamma < 1:
        raise ValidationError(f"gamma must lie in (0, 1), got {gamma!r}")


def truncation_level(lam, gamma):
    """
    Smallest L >= 1 with P(1 <= K <= L) >= gamma for K ~ Poisson(lam).

    Returns:
        Truncation or None: None when gamma > 1 - e^{-lam} (no L exists).
    """
    _check_gamma(gamma)
    if gamma > limit_max_success(lam):
        logging.info(f"No truncation level: gamma={gamma} exceeds 1 - e^-{lam}")
        return None
    terms = []
    for L in range(1, _poisson_search_limit(lam) + 1):
        terms.append(poisson_pmf(lam, L))
        achieved = math.fsum(terms)
        if achieved >= gamma:
            return Truncation(L, achieved)
    logging.warning(f"gamma={gamma} is within rounding of the boundary for lambda={lam}")
    return None


def finite_truncation_level(model, gamma):
    """Smallest L with the Binomial probability P(1 <= K_n <= L) >= gamma."""
    _check_gamma(gamma)
    if gamma > max_success(model):
        return None
    limit = min(model.n, _poisson_search_limit(model.lam))
    terms = []
    for L in range(1, limit + 1):
        terms.append(binomial_pmf(model, L))
        achieved = math.fsum(terms)
        if achieved >= gamma:
            return Truncation(L, achieved)
    return None


def sample_excellent_set(model, rng_seed):
    """
    Draw E_n: each index enters independently with probability lam/n.

    Args:
        model (PopulationModel): The population.
        rng_seed: An integer seed, a SeedSequence or a numpy Generator.
    """
    if isinstance(rng_seed, (np.random.SeedSequence, np.random.Generator)):
        rng = np.random.default_rng(rng_seed)
    else:
        rng = np.random.default_rng(check_seed(rng_seed))
    draws = rng.random(model.n) < model.p
    return ExcellentSet(model.n, frozenset((np.flatnonzero(draws) + 1).tolist()))


def sample_count_histogram(model, draws, seed):
    """
    Histogram of |E_n| over `draws` independent samples.

    Draw i uses population stream i of `seed`.

    Returns:
        numpy.ndarray: counts[k] = number of draws with |E_n| = k, k = 0..n.
    """
    if draws < 1:
        raise ValidationError(f"draws must be positive, got {draws!r}")
    counts = np.zeros(model.n + 1, dtype=np.int64)
    for i in range(draws):
        counts[sample_excellent_set(model, child_seed(seed, i, POPULATION_STREAM)).size] += 1
    logging.info(f"Sampled {draws} populations (n={model.n}, lambda={model.lam}), mean size {counts @ np.arange(model.n + 1) / draws:.4f}")
    return counts
