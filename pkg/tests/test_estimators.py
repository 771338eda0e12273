# /tests/test_estimators.py

import math

import numpy as np
import pytest

from bitflip import (BitDistribution, BitState, DomainError, ReturnOutcome, clt_check,
                     conditional_moment_growth, derive_seed, mean_growth, return_stats,
                     simulate_returns, tail_index)
from bitflip.utilities import replica_rng


def outcome(tau, horizon=100):
    if tau is None:
        return ReturnOutcome(tau=None, censored=True, horizon=horizon, m0=0, peak_m=1)
    return ReturnOutcome(tau=tau, censored=False, horizon=horizon, m0=0, peak_m=1)


# moments

def test_return_stats_constant_sample():
    summary = return_stats(np.full(200, 2.0), r_grid=[0.5, 0.25])
    assert summary.mean == 2.0
    assert summary.fractional_moments[0.5] == pytest.approx(math.sqrt(2.0))
    assert summary.fractional_moments[0.25] == pytest.approx(2.0**0.25)
    assert summary.mean_stable
    assert all(summary.moments_stable.values())
    assert summary.notes == []


def test_return_stats_empty():
    with pytest.raises(DomainError):
        return_stats([])


def test_return_stats_all_censored():
    with pytest.raises(DomainError):
        return_stats([outcome(None)] * 150)


def test_return_stats_censoring_note():
    samples = [outcome(2)] * 180 + [outcome(None)] * 20
    summary = return_stats(samples, r_grid=[0.5])
    assert summary.censored_fraction == pytest.approx(0.1)
    assert summary.mean == 2.0
    assert any("censored" in note for note in summary.notes)


def test_return_stats_few_samples_warns(caplog):
    return_stats(np.full(10, 4.0), r_grid=[0.5])
    assert "unreliable" in caplog.text


def test_return_stats_rejects_exponent():
    with pytest.raises(DomainError):
        return_stats(np.full(200, 2.0), r_grid=[1.0])


def test_return_stats_to_dict():
    out = return_stats(np.full(200, 2.0), r_grid=[0.5]).to_dict()
    assert list(out["fractional_moments"]) == ["0.5"]


def test_return_stats_censored_mean_is_lower_bound():
    samples = [outcome(2)] * 180 + [outcome(None)] * 20
    summary = return_stats(samples, r_grid=[0.5])
    assert not summary.mean_stable
    assert summary.mean_lower_bound == pytest.approx((180 * 2 + 20 * 100) / 200)
    assert summary.mean_lower_bound > summary.mean
    assert any("lower bound" in note for note in summary.notes)


def test_return_stats_long_return_taints_mean():
    samples = [outcome(2)] * 199 + [outcome(60)]
    summary = return_stats(samples, r_grid=[0.5])
    assert summary.censored_fraction == 0.0
    assert not summary.mean_stable
    assert summary.mean_lower_bound == pytest.approx(summary.mean)


def test_return_stats_short_returns_keep_mean():
    summary = return_stats([outcome(2)] * 200, r_grid=[0.5])
    assert summary.mean_stable
    assert summary.mean_lower_bound is None
    assert summary.notes == []


def test_mean_growth_constant_sample():
    assert mean_growth(np.full(5000, 3.0), block=1000) == 1.0


def test_mean_growth_heavy_tail(rng):
    samples = (1.0 - rng.random(10**5)) ** -2.0
    assert mean_growth(samples, block=1000) > 1.5


def test_mean_growth_needs_two_blocks():
    with pytest.raises(DomainError):
        mean_growth(np.ones(1500), block=1000)


@pytest.mark.slow
def test_null_recurrent_mean_keeps_growing():
    dist = BitDistribution.geometric(0.3)
    outcomes = simulate_returns("bf", dist, 10**8, 10**5, seed=11, workers=8)
    assert mean_growth(outcomes, block=1000) >= 1.5
    summary = return_stats(outcomes, r_grid=[0.2])
    assert not summary.mean_stable
    assert summary.mean_lower_bound >= summary.mean


@pytest.mark.slow
def test_fractional_moment_settles_below_r_lower():
    dist = BitDistribution.geometric(0.25)
    outcomes = simulate_returns("bf", dist, 10**6, 10**5, seed=12, workers=8)
    summary = return_stats(outcomes, r_grid=[0.3])
    assert summary.moments_stable[0.3]


# tail index

def test_hill_on_pareto(rng):
    samples = (1.0 - rng.random(10**5)) ** -2.0
    estimate = tail_index(samples)
    assert 0.45 <= estimate.theta <= 0.55
    assert estimate.ci_low < estimate.theta < estimate.ci_high
    assert estimate.heavy
    assert estimate.k == 10**4
    assert estimate.survival_theta == pytest.approx(0.5, abs=0.05)


def test_hill_on_exponential(rng):
    samples = rng.exponential(size=10**5)
    estimate = tail_index(samples, k_fraction=0.01)
    assert estimate.theta > 3.0
    assert not estimate.heavy


def test_hill_needs_samples(rng):
    with pytest.raises(DomainError):
        tail_index(rng.random(100))


@pytest.mark.parametrize("k_fraction", [0.0, 0.25])
def test_hill_k_fraction(k_fraction, rng):
    with pytest.raises(DomainError):
        tail_index(rng.random(10**4), k_fraction=k_fraction)


def test_hill_interval_coverage():
    covered = 0
    for i in range(100):
        samples = (1.0 - replica_rng(31, i).random(10**4)) ** -2.0
        estimate = tail_index(samples)
        covered += estimate.ci_low <= 0.5 <= estimate.ci_high
    assert covered >= 90


@pytest.mark.slow
def test_hill_on_bf_return_times():
    dist = BitDistribution.geometric(0.25)
    outcomes = simulate_returns("bf", dist, 10**7, 10**5, seed=6, workers=8)
    estimate = tail_index(outcomes)
    assert 0.40 <= estimate.theta <= 0.70


# conditional moment growth

def test_growth_small():
    dist = BitDistribution.geometric(0.25)
    fit = conditional_moment_growth(dist, 0.3, [2, 3, 4], replicas=200, horizon=10**4, seed=1)
    assert set(fit.moments) == {2, 3, 4}
    assert all(v > 0 for v in fit.moments.values())
    assert fit.bound == pytest.approx(math.log(2.0) + 0.2)
    assert math.isfinite(fit.slope)


@pytest.mark.parametrize("kwargs", [
    {"dist": BitDistribution.geometric(0.25), "r": 0.6, "m_grid": [2, 3]},
    {"dist": BitDistribution.geometric(0.25), "r": 0.3, "m_grid": [2]},
    {"dist": BitDistribution.stretched_exp(1.0, 0.5), "r": 0.3, "m_grid": [2, 3]},
])
def test_growth_domain(kwargs):
    with pytest.raises(DomainError):
        conditional_moment_growth(replicas=10, horizon=100, **kwargs)


def test_growth_uses_one_seed_per_m():
    dist = BitDistribution.geometric(0.25)
    fit = conditional_moment_growth(dist, 0.3, [2, 3], replicas=100, horizon=10**4, seed=1)
    assert derive_seed(1, 2) != derive_seed(1, 3)
    outcomes = simulate_returns("bf", dist, 10**4, 100, derive_seed(1, 3),
                                initial=BitState.single("bf", 3))
    assert fit.moments[3] == return_stats(outcomes, r_grid=[0.3]).fractional_moments[0.3]


def test_growth_db_small():
    dist = BitDistribution.geometric(0.25)
    fit = conditional_moment_growth(dist, 0.3, [0, 2, 4], replicas=200, horizon=10**4,
                                    seed=2, model="db")
    assert set(fit.moments) == {0, 2, 4}
    assert all(v >= 1.0 for v in fit.moments.values())
    assert fit.bound == pytest.approx(math.log(2.0) + 0.2)
    assert math.isfinite(fit.slope)


def test_growth_p_four_tenths_small():
    fit = conditional_moment_growth(BitDistribution.geometric(0.4), 0.1, [2, 3, 4, 5, 6],
                                    replicas=300, horizon=10**4, seed=3)
    assert fit.bound == pytest.approx(math.log(1.25) + 0.2)
    assert math.isfinite(fit.slope)


@pytest.mark.slow
def test_growth_full_scale():
    dist = BitDistribution.geometric(0.25)
    fit = conditional_moment_growth(dist, 0.3, list(range(2, 9)), replicas=10**4,
                                    horizon=10**6, seed=0)
    assert fit.within_bound


@pytest.mark.slow
def test_growth_db_full_scale():
    dist = BitDistribution.geometric(0.25)
    fit = conditional_moment_growth(dist, 0.3, list(range(2, 9)), replicas=10**4,
                                    horizon=10**6, seed=0, model="db", workers=8)
    assert fit.within_bound


@pytest.mark.slow
def test_growth_p_four_tenths_full_scale():
    fit = conditional_moment_growth(BitDistribution.geometric(0.4), 0.1, list(range(2, 7)),
                                    replicas=10**4, horizon=10**6, seed=0, workers=8)
    assert fit.slope <= math.log(1.25) + 0.2


@pytest.mark.slow
def test_null_recurrent_tail_is_heavy():
    dist = BitDistribution.geometric(0.3)
    outcomes = simulate_returns("bf", dist, 10**6, 10**4, seed=8)
    summary = return_stats(outcomes, r_grid=[0.2])
    assert summary.censored_fraction < 0.2
    estimate = tail_index(outcomes, min_samples=1000)
    assert estimate.heavy and estimate.theta < 1.0


# normal approximation

def test_clt_small(geometric_low):
    summary = clt_check(geometric_low, "bf", 1e4, replicas=2000, seed=4)
    assert summary.n_samples == 2000
    assert abs(summary.details["standardized_mean"]) < 0.2
    assert 0.7 < summary.details["standardized_variance"] < 1.3
    assert summary.details["jitter"]
    assert summary.ks_statistic < summary.details["raw_ks_statistic"]


def test_clt_degenerate_variance(geometric_half):
    with pytest.raises(DomainError):
        clt_check(geometric_half, "bf", 1e-9, replicas=10)


@pytest.mark.slow
def test_clt_bf_geometric():
    summary = clt_check(BitDistribution.geometric(0.3), "bf", 1e6, replicas=10**4, seed=0)
    assert summary.ks_statistic < 0.05
    assert abs(summary.skewness) < 0.2
    assert abs(summary.details["standardized_mean"]) < 0.05
    assert 0.9 <= summary.details["standardized_variance"] <= 1.1


@pytest.mark.slow
def test_clt_db_stretched():
    summary = clt_check(BitDistribution.stretched_exp(1.0, 0.5), "db", math.exp(25),
                        replicas=10**4, seed=0)
    assert summary.ks_statistic < 0.1
