# /tests/test_distributions.py

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from bitflip import BitDistribution, ConfigError, DomainError, Family, Verdict, classify_bf, classify_db
from bitflip.distributions import kappa_exponent


FAMILIES = [
    BitDistribution.geometric(0.3),
    BitDistribution.geometric(0.7),
    BitDistribution.stretched_exp(1.0, 0.3),
    BitDistribution.stretched_exp(2.0, 0.7),
    BitDistribution.kappa(),
    BitDistribution.table([0.5, 0.3, 0.2]),
]


# pmf

def test_pmf_geometric(geometric_half):
    assert geometric_half.pmf(3) == 0.125


def test_pmf_table():
    assert BitDistribution.table([0.5, 0.3, 0.2]).pmf(2) == pytest.approx(0.3, abs=1e-15)


def test_pmf_kappa():
    dist = BitDistribution.kappa()
    assert kappa_exponent(2) == 4
    assert dist.pmf(2) == pytest.approx(dist._normalizer * 2.0**-4, rel=1e-15)


@pytest.mark.parametrize("k", [0, -1])
def test_pmf_rejects_non_positive_index(geometric_half, k):
    with pytest.raises(DomainError):
        geometric_half.pmf(k)


def test_kappa_exponent_is_next_square():
    k = np.array([1, 3, 4, 8, 9, 15, 16, 10**12 - 1, 10**12])
    expected = np.array([4, 4, 9, 9, 16, 16, 25, 10**12, (10**6 + 1) ** 2])
    assert np.array_equal(kappa_exponent(k), expected)


@pytest.mark.parametrize("dist", FAMILIES, ids=repr)
def test_pmf_non_increasing(dist):
    if dist.family is Family.TABLE:
        pytest.skip("tables keep the order they are given")
    p = dist.pmf_array(10**4)
    assert np.all(p >= 0.0)
    assert np.all(np.diff(p) <= 0.0)


@pytest.mark.parametrize("dist", FAMILIES, ids=repr)
def test_pmf_array_matches_pmf(dist):
    p = dist.pmf_array(50)
    for k in (1, 2, 7, 50):
        assert p[k - 1] == pytest.approx(dist.pmf(k), rel=1e-12, abs=1e-300)


@pytest.mark.parametrize("dist", FAMILIES, ids=repr)
def test_normalised(dist):
    n = dist.index_beyond(1e-16)
    assert math.fsum(dist.pmf_array(n)) == pytest.approx(1.0, abs=1e-12)


def test_table_normalised_at_construction():
    dist = BitDistribution.table([2.0, 1.0, 1.0, 0.0])
    assert dist.table == (0.5, 0.25, 0.25)
    assert dist.support_size == 3


def test_table_not_non_increasing_warns(caplog):
    dist = BitDistribution.table([0.3, 0.3, 0.4])
    assert dist.pmf(3) == pytest.approx(0.4)
    assert "not non-increasing" in caplog.text


@pytest.mark.parametrize("kwargs", [
    {"family": "geometric", "p": 0.0},
    {"family": "geometric", "p": 1.0},
    {"family": "stretched_exp", "alpha": 0.0, "gamma": 0.5},
    {"family": "stretched_exp", "alpha": 1.0, "gamma": 1.0},
    {"family": "table", "pmf": []},
    {"family": "table", "pmf": [0.5, -0.1]},
    {"family": "table", "pmf": [0.0, 0.0]},
])
def test_invalid_parameters(kwargs):
    with pytest.raises(DomainError):
        BitDistribution(**kwargs)


# tail and prefix sums

def test_tail_examples(geometric_half):
    table = BitDistribution.table([0.5, 0.3, 0.2])
    assert geometric_half.tail(2) == 0.25
    assert geometric_half.tail(0) == 1.0
    assert table.tail(0) == 1.0
    assert table.tail(3) == 0.0
    assert table.tail(10) == 0.0


@pytest.mark.parametrize("dist", FAMILIES, ids=repr)
@pytest.mark.parametrize("k", [1, 2, 5, 17, 100, 1000])
def test_prefix_plus_tail_is_one(dist, k):
    assert abs(dist.prefix(k) + dist.tail(k) - 1.0) < 1e-12


def test_index_beyond(geometric_half):
    assert geometric_half.index_beyond(0.3) == 2
    assert geometric_half.index_beyond(2.0) == 0
    assert geometric_half.tail(geometric_half.index_beyond(1e-9)) < 1e-9
    assert geometric_half.tail(geometric_half.index_beyond(1e-9) - 1) >= 1e-9
    with pytest.raises(DomainError):
        geometric_half.index_beyond(0.0)


def test_kappa_tail_ratio_along_squares():
    dist = BitDistribution.kappa()
    for i in range(1, 31):
        k = i * i
        ratio = dist.tail(k) / dist.tail(k - 1)
        assert ratio >= 1.0 - 1.0 / (2 * i + 1) - 1e-12
    assert dist.tail(900) / dist.tail(899) > 0.98


# quantiles

def test_quantile_examples(geometric_half):
    table = BitDistribution.table([0.5, 0.3, 0.2])
    assert geometric_half.quantile(0.49) == 1
    assert geometric_half.quantile(0.5) == 2
    assert table.quantile(0.85) == 3


@pytest.mark.parametrize("u", [0.0, 1.0, -0.2, 1.5])
def test_quantile_outside_unit_interval(geometric_half, u):
    with pytest.raises(DomainError):
        geometric_half.quantile(u)


@settings(max_examples=200, deadline=None)
@given(u1=st.floats(min_value=1e-12, max_value=1 - 1e-12),
       u2=st.floats(min_value=1e-12, max_value=1 - 1e-12))
def test_quantile_monotone(u1, u2):
    dist = BitDistribution.stretched_exp(1.0, 0.5)
    lo, hi = sorted((u1, u2))
    assert dist.quantile(lo) <= dist.quantile(hi)


@settings(max_examples=200, deadline=None)
@given(u=st.floats(min_value=1e-9, max_value=1 - 1e-9))
def test_quantile_is_generalised_inverse(u):
    dist = BitDistribution.geometric(0.3)
    k = dist.quantile(u)
    assert dist.prefix(k) > u
    assert dist.prefix(k - 1) <= u


def test_quantile_array_matches_scalar(geometric_low, rng):
    u = rng.random(1000)
    values = geometric_low.quantile_array(u)
    assert values.tolist() == [geometric_low.quantile(x) for x in u]


@pytest.mark.parametrize("dist", [BitDistribution.geometric(0.5),
                                  BitDistribution.stretched_exp(1.0, 0.5),
                                  BitDistribution.kappa()], ids=repr)
def test_quantile_frequencies(dist, rng):
    n = 10**6
    indices = dist.quantile_array(rng.random(n))
    counts = np.bincount(indices, minlength=22)[1:21]
    expected = dist.pmf_array(20) * n
    keep = expected >= 5.0
    observed = np.append(counts[keep], n - counts[keep].sum())
    expected = np.append(expected[keep], n - expected[keep].sum())
    assert stats.chisquare(observed, expected).pvalue > 0.001


# JSON description

def test_from_spec_round_trip():
    for dist in FAMILIES:
        assert BitDistribution.from_spec(dist.to_spec()) == dist


@pytest.mark.parametrize("spec, field", [
    ({"family": "geometric", "p": 1.5}, "dist.p"),
    ({"family": "geometric"}, "dist.p"),
    ({"family": "geometric", "p": 0.3, "q": 1}, "dist.q"),
    ({"family": "cauchy"}, "dist.family"),
    ({"family": "stretched_exp", "alpha": 1.0, "gamma": 1.2}, "dist.gamma"),
    ({"family": "table", "pmf": [0.5, "x"]}, "dist.pmf[1]"),
])
def test_from_spec_names_field(spec, field):
    with pytest.raises(ConfigError) as err:
        BitDistribution.from_spec(spec)
    assert err.value.field == field
    assert field in str(err.value)


def test_pickle_keeps_parameters(stretched):
    import pickle
    clone = pickle.loads(pickle.dumps(stretched))
    assert clone == stretched
    assert clone.pmf(10) == stretched.pmf(10)


# classification

@pytest.mark.parametrize("dist, bf, db", [
    (BitDistribution.geometric(0.3), Verdict.RECURRENT, Verdict.RECURRENT),
    (BitDistribution.geometric(0.4), Verdict.RECURRENT, Verdict.RECURRENT),
    (BitDistribution.geometric(0.5), Verdict.RECURRENT, Verdict.RECURRENT),
    (BitDistribution.geometric(0.6), Verdict.TRANSIENT, Verdict.RECURRENT),
    (BitDistribution.stretched_exp(1.0, 0.3), Verdict.RECURRENT, Verdict.TRANSIENT),
    (BitDistribution.stretched_exp(1.0, 0.4), Verdict.RECURRENT, Verdict.TRANSIENT),
    (BitDistribution.stretched_exp(1.0, 0.7), Verdict.RECURRENT, Verdict.UNDETERMINED),
    (BitDistribution.kappa(), Verdict.RECURRENT, Verdict.UNDETERMINED),
    (BitDistribution.table([0.6, 0.4]), Verdict.RECURRENT, Verdict.RECURRENT),
], ids=repr)
def test_classifiers(dist, bf, db):
    assert classify_bf(dist) is bf
    assert classify_db(dist) is db
