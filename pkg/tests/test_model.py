# test_model.py

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import chisquare

from errors import ValidationError
from model import (
    CONSTRUCTION_STREAM,
    POPULATION_STREAM,
    ExcellentSet,
    PopulationModel,
    Regime,
    binomial_pmf,
    child_seed,
    classify_feasibility,
    finite_truncation_level,
    limit_max_success,
    limit_prob_no_excellent,
    max_success,
    poisson_interval,
    poisson_pmf,
    prob_k_in_range,
    prob_no_excellent,
    sample_count_histogram,
    sample_excellent_set,
    truncation_level,
)
from utils import format_decimal

TABLE_LAMBDAS = (0.5, 1.0, 1.5, 2.0, 3.0, 5.0, 8.0)


def test_population_model_rejects_bad_parameters():
    with pytest.raises(ValidationError):
        PopulationModel(0, 1.0)
    with pytest.raises(ValidationError):
        PopulationModel(10, 0.0)
    with pytest.raises(ValidationError):
        PopulationModel(5, 6.0)
    with pytest.raises(ValidationError):
        PopulationModel(10, float("nan"))


def test_excellent_set_bounds():
    truth = ExcellentSet(10, {1, 10})
    assert truth.size == 2 and 10 in truth and 5 not in truth
    assert truth.indicator().sum() == 2
    with pytest.raises(ValidationError):
        ExcellentSet(10, {0})
    with pytest.raises(ValidationError):
        ExcellentSet(10, {11})


def test_prob_no_excellent_examples():
    assert prob_no_excellent(PopulationModel(5, 5.0)) == 0.0
    assert prob_no_excellent(PopulationModel(1000, 1.0)) == pytest.approx(0.999 ** 1000, abs=1e-12)
    assert prob_no_excellent(PopulationModel(1000, 1.0)) == pytest.approx(0.3676954247, abs=1e-9)


@given(n=st.integers(1, 2 ** 53), lam=st.floats(0.01, 1.0))
def test_prob_no_excellent_is_the_double_power(n, lam):
    model = PopulationModel(n, lam)
    assert prob_no_excellent(model) == (1.0 - lam / n) ** n


@pytest.mark.parametrize("k", [54, 60, 79])
def test_prob_no_excellent_beyond_exact_doubles(k):
    assert prob_no_excellent(PopulationModel(2 ** k, 3.0)) == pytest.approx(math.exp(-3.0), rel=1e-12)


def test_limit_prob_no_excellent_examples():
    assert format_decimal(limit_prob_no_excellent(1.0), 4) == "0.3679"
    assert format_decimal(limit_prob_no_excellent(2.0), 4) == "0.1353"
    assert format_decimal(limit_prob_no_excellent(8.0), 4) == "0.0003"
    assert limit_prob_no_excellent(1e-12) == pytest.approx(1.0)
    with pytest.raises(ValidationError):
        limit_prob_no_excellent(0.0)


@pytest.mark.parametrize("lam", TABLE_LAMBDAS)
def test_finite_boundary_converges_to_limit(lam):
    # (1 - lam/n)^n increases toward e^-lam
    values = [prob_no_excellent(PopulationModel(10 ** k, lam)) for k in range(1, 7)]
    assert all(a < b for a, b in zip(values, values[1:]))
    assert values[-1] <= limit_prob_no_excellent(lam)
    assert abs(values[-1] - limit_prob_no_excellent(lam)) < 1e-4


def test_max_success_complements():
    model = PopulationModel(1000, 2.0)
    assert max_success(model) == pytest.approx(1.0 - prob_no_excellent(model))
    assert limit_max_success(2.0) == pytest.approx(1.0 - math.exp(-2.0))


def test_classify_feasibility_examples():
    model = PopulationModel(1000, 1.0)
    verdict = classify_feasibility(model, 0.10, asymptotic=True)
    assert verdict.regime is Regime.INFEASIBLE and not verdict.feasible
    assert classify_feasibility(model, 1.0).regime is Regime.TRIVIAL_LOW_SUCCESS
    verdict = classify_feasibility(PopulationModel(1000, 3.0), 0.10, asymptotic=True)
    assert verdict.regime is Regime.NONTRIVIAL_FEASIBLE
    assert verdict.to_dict()["regime"] == "nontrivial_feasible"


@pytest.mark.parametrize("alpha", [0.0, -0.1, 1.5])
def test_classify_feasibility_rejects_alpha(alpha):
    with pytest.raises(ValidationError):
        classify_feasibility(PopulationModel(100, 1.0), alpha)


@given(lam=st.floats(0.1, 10.0), a=st.floats(0.001, 1.0), b=st.floats(0.001, 1.0),
       asymptotic=st.booleans())
def test_feasibility_monotone_in_alpha(lam, a, b, asymptotic):
    model = PopulationModel(1000, lam)
    low, high = sorted((a, b))
    if classify_feasibility(model, low, asymptotic).feasible:
        assert classify_feasibility(model, high, asymptotic).feasible


def test_poisson_pmf_examples():
    assert poisson_pmf(1.0, 0) == math.exp(-1.0)
    assert format_decimal(poisson_pmf(1.0, 0), 4) == "0.3679"
    assert format_decimal(math.fsum(poisson_pmf(3.0, k) for k in range(1, 7)), 4) == "0.9167"
    assert poisson_pmf(4.0, 2) == pytest.approx(math.exp(-4.0) * 16 / 2, rel=1e-12)


@pytest.mark.parametrize("lam", [0.5, 3.0, 50.0])
def test_poisson_mass_sums_to_one(lam):
    assert abs(poisson_interval(lam, 0, int(lam + 40 * math.sqrt(lam) + 60)) - 1.0) < 1e-12


def test_poisson_pmf_large_k_does_not_overflow():
    assert 0.0 <= poisson_pmf(2.0, 500) < 1e-300


@pytest.mark.parametrize("lam,gamma,L,achieved", [
    (5.0, 0.95, 9, "0.9614"),
    (3.0, 0.95, 11, "0.9501"),
    (3.0, 0.90, 6, "0.9167"),
    (1.0, 0.50, 2, "0.5518"),
])
def test_truncation_level_examples(lam, gamma, L, achieved):
    truncation = truncation_level(lam, gamma)
    assert truncation.L == L
    assert format_decimal(truncation.achieved, 4) == achieved


def test_truncation_level_infeasible():
    assert truncation_level(2.0, 0.90) is None
    assert truncation_level(1.0, 0.80) is None


@pytest.mark.parametrize("gamma", [0.0, 1.0, 1.2])
def test_truncation_level_rejects_gamma(gamma):
    with pytest.raises(ValidationError):
        truncation_level(1.0, gamma)


@given(lam=st.floats(0.5, 10.0), gamma=st.floats(0.05, 0.95))
def test_truncation_level_is_minimal(lam, gamma):
    truncation = truncation_level(lam, gamma)
    if truncation is None:
        assert gamma > limit_max_success(lam) - 1e-12
        return
    assert truncation.achieved >= gamma
    below = math.fsum(poisson_pmf(lam, k) for k in range(1, truncation.L))
    assert below < gamma


def test_finite_truncation_level_matches_poisson_at_large_n():
    finite = finite_truncation_level(PopulationModel(10 ** 6, 3.0), 0.90)
    assert finite.L == 6
    assert finite_truncation_level(PopulationModel(100, 1.0), 0.9) is None


def test_binomial_pmf_corner():
    model = PopulationModel(5, 5.0)
    assert binomial_pmf(model, 5) == 1.0
    assert binomial_pmf(model, 4) == 0.0
    assert binomial_pmf(PopulationModel(10, 1.0), 11) == 0.0


def test_prob_k_in_range_examples():
    model = PopulationModel(1000, 1.0)
    assert prob_k_in_range(model, 0, 0) == pytest.approx(prob_no_excellent(model), abs=1e-12)
    assert prob_k_in_range(model, 0, 1000) == pytest.approx(1.0, abs=1e-12)
    poisson = math.fsum(poisson_pmf(3.0, k) for k in range(1, 7))
    assert abs(prob_k_in_range(PopulationModel(10 ** 6, 3.0), 1, 6) - poisson) < 5e-4


def test_prob_k_in_range_full_support_at_a_billion():
    model = PopulationModel(10 ** 9, 3.0)
    assert prob_k_in_range(model, 0, model.n) == pytest.approx(1.0, abs=1e-12)
    assert prob_k_in_range(model, 1, model.n) == pytest.approx(max_success(model), abs=1e-12)
    assert prob_k_in_range(model, 10 ** 6, model.n) == 0.0
    assert poisson_interval(3.0, 0, 10 ** 9) == pytest.approx(1.0, abs=1e-12)


def test_prob_k_in_range_rejects_bad_range():
    model = PopulationModel(10, 1.0)
    with pytest.raises(ValidationError):
        prob_k_in_range(model, 3, 2)
    with pytest.raises(ValidationError):
        prob_k_in_range(model, 0, 11)
    with pytest.raises(ValidationError):
        prob_k_in_range(model, -1, 2)


@given(n=st.integers(2, 500), lam=st.floats(0.1, 2.0), cut=st.data())
def test_prob_k_in_range_is_additive(n, lam, cut):
    model = PopulationModel(n, lam)
    lo = cut.draw(st.integers(0, n - 1))
    hi = cut.draw(st.integers(lo + 1, n))
    mid = cut.draw(st.integers(lo, hi - 1))
    total = prob_k_in_range(model, lo, hi)
    assert abs(prob_k_in_range(model, lo, mid) + prob_k_in_range(model, mid + 1, hi) - total) < 1e-12


def test_sampler_is_deterministic():
    model = PopulationModel(1000, 3.0)
    assert sample_excellent_set(model, 42) == sample_excellent_set(model, 42)
    assert sample_excellent_set(PopulationModel(10, 10.0), 5).members == frozenset(range(1, 11))


def test_sampler_rejects_negative_seed():
    with pytest.raises(ValidationError):
        sample_excellent_set(PopulationModel(10, 1.0), -1)


def test_sample_count_histogram_rejects_zero_draws():
    with pytest.raises(ValidationError):
        sample_count_histogram(PopulationModel(10, 1.0), 0, 0)


@pytest.mark.slow
def test_sampler_mean_size():
    draws = 10 ** 5
    counts = sample_count_histogram(PopulationModel(1000, 1.0), draws, seed=2024)
    mean = counts @ np.arange(counts.shape[0]) / draws
    assert abs(mean - 1.0) <= 0.01


@pytest.mark.slow
def test_sampler_chi_square_against_binomial():
    draws = 10 ** 5
    model = PopulationModel(100, 2.0)
    counts = sample_count_histogram(model, draws, seed=11)
    observed = np.append(counts[:7], counts[7:].sum())
    expected = np.array([draws * binomial_pmf(model, k) for k in range(7)])
    expected = np.append(expected, draws - expected.sum())
    assert chisquare(observed, expected).pvalue > 1e-3


def test_seed_streams_are_separate_namespaces():
    for seed in range(20):
        construction = child_seed(seed, 0, CONSTRUCTION_STREAM)
        population = child_seed(seed, 0, POPULATION_STREAM)
        assert not np.array_equal(construction.generate_state(4), population.generate_state(4))


def test_child_seed_matches_nested_spawn():
    root = np.random.SeedSequence(99)
    nested = root.spawn(2)[POPULATION_STREAM].spawn(4)[3]
    assert np.array_equal(nested.generate_state(4), child_seed(99, 3, POPULATION_STREAM).generate_state(4))


def test_child_seed_rejects_unknown_stream():
    with pytest.raises(ValidationError):
        child_seed(0, 0, 2)
