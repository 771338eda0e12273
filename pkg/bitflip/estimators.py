# /bitflip/estimators.py
# Monte Carlo post-processing of return times and snapshot counts.
#
#
# Copyright (C) 2024 The bitflip developers
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE. See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program. If not, see <https://www.gnu.org/licenses/>.

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy import stats

from .analytics import expected_active, moment_bounds, variance_active
from .config import config
from .distributions import Family
from .engine import BitState, Model, ReturnOutcome, sample_active_counts, simulate_returns
from .exceptions import DomainError
from .utilities import derive_seed, fit_line, replica_rng

logger = logging.getLogger(__name__)


@dataclass
class TailIndex:
    """
    Hill estimate of theta in P(tau > n) ~ n^-theta.

    ``survival_theta`` is minus the log-log slope of the empirical survival
    function over the same order statistics, a cross-check of ``theta``.
    """
    theta: float
    ci_low: float
    ci_high: float
    k: int
    heavy: bool
    survival_theta: Optional[float] = None

    @property
    def ci(self):
        return self.ci_low, self.ci_high

    def to_dict(self):
        return asdict(self)


@dataclass
class EstimatorSummary:
    n_samples: int
    censored_fraction: float = 0.0
    mean: Optional[float] = None
    mean_stable: Optional[bool] = None
    mean_lower_bound: Optional[float] = None
    fractional_moments: dict = field(default_factory=dict)
    moments_stable: dict = field(default_factory=dict)
    tail_index: Optional[TailIndex] = None
    ks_statistic: Optional[float] = None
    skewness: Optional[float] = None
    excess_kurtosis: Optional[float] = None
    notes: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def to_dict(self):
        """Plain dictionary with string keys, ready for JSON."""
        out = asdict(self)
        out["fractional_moments"] = {repr(float(r)): v for r, v in self.fractional_moments.items()}
        out["moments_stable"] = {repr(float(r)): v for r, v in self.moments_stable.items()}
        return out


def _uncensored_times(samples):
    """Return times of the uncensored runs and the censored fraction."""
    if len(samples) and isinstance(samples[0], ReturnOutcome):
        times = np.array([s.tau for s in samples if not s.censored], dtype=float)
        return times, 1.0 - len(times) / len(samples)
    return np.asarray(samples, dtype=float), 0.0


def _truncated_times(samples):
    """min(tau, horizon) of every run; censored runs count as the horizon."""
    if len(samples) and isinstance(samples[0], ReturnOutcome):
        return np.array([s.time for s in samples], dtype=float)
    return np.asarray(samples, dtype=float)


def _near_horizon(samples, horizon_fraction):
    if not (len(samples) and isinstance(samples[0], ReturnOutcome)):
        return False
    return any(s.censored or s.tau >= horizon_fraction * s.horizon for s in samples)


def _stable(head, full, rtol):
    if full == 0.0:
        return head == 0.0
    return abs(full - head) / abs(full) < rtol


def return_stats(samples, r_grid = config.get("cli.r_grid"),
                 stability_fraction = config.get("estimators.stability_fraction"),
                 stability_rtol = config.get("estimators.stability_rtol"),
                 horizon_fraction = config.get("estimators.horizon_fraction")):
    """
    Mean and fractional moments of return times.

    Moments are computed over the uncensored runs only; a note is added
    when some runs were censored, since the estimates are then biased low.
    Each estimate is recomputed on the first ``stability_fraction`` of the
    samples and flagged unstable when the two differ by ``stability_rtol``
    or more (heavy tails keep drifting as n grows).

    The mean is never reported stable once the horizon bites: when a run
    was censored or returned after ``horizon_fraction`` of its horizon,
    ``mean_stable`` is False and ``mean_lower_bound`` holds the mean of
    min(tau, horizon), which bounds E tau from below.

    Parameters
    ----------
    samples : list of ReturnOutcome or array_like
    r_grid : list of float
        Exponents r in (0, 1).

    Returns
    -------
    EstimatorSummary

    Raises
    ------
    DomainError
        If ``samples`` is empty or every run was censored.

    Examples
    --------
    >>> summary = return_stats(np.full(200, 2.0), r_grid=[0.5])
    >>> summary.mean, summary.fractional_moments[0.5]
    (2.0, 1.4142135623730951)
    """
    if len(samples) == 0:
        raise DomainError("No return times to summarise.")
    n = len(samples)
    if n < config.get("estimators.min_samples"):
        logger.warning("Only %d return times; moment estimates are unreliable.", n)

    times, censored_fraction = _uncensored_times(samples)
    if times.size == 0:
        raise DomainError("Every run was censored; raise the horizon.")
    head = times[:max(1, int(stability_fraction * times.size))]

    summary = EstimatorSummary(n_samples=n, censored_fraction=censored_fraction)
    summary.mean = float(times.mean())
    summary.mean_stable = bool(_stable(float(head.mean()), summary.mean, stability_rtol))
    for r in r_grid:
        if not 0.0 < r < 1.0:
            raise DomainError(f"Moment exponents lie in (0, 1), got {r}.")
        full = float(np.mean(times**r))
        summary.fractional_moments[r] = full
        summary.moments_stable[r] = bool(_stable(float(np.mean(head**r)), full, stability_rtol))

    if censored_fraction > 0.0:
        summary.notes.append(f"{censored_fraction:.3%} of runs censored; "
                             "moments over uncensored runs are biased low.")
        logger.warning("Moments exclude %.3f%% censored runs.", 100 * censored_fraction)
    if _near_horizon(samples, horizon_fraction):
        summary.mean_stable = False
        summary.mean_lower_bound = float(_truncated_times(samples).mean())
        summary.notes.append("mean is a censored lower bound; the horizon truncates the tail")
        logger.warning("Return times reach the horizon; E tau >= %.6g.", summary.mean_lower_bound)
    elif not summary.mean_stable:
        summary.notes.append("mean unstable under subsampling")
    return summary


def mean_growth(samples, block = config.get("estimators.growth_block")):
    """
    Divergent-mean diagnostic: full-sample mean over a typical block mean.

    The samples are cut into disjoint blocks of ``block`` runs and the
    mean of min(tau, horizon) over all runs is divided by the median of
    the block means. The ratio stays near 1 for a finite mean and keeps
    growing with the sample size when E tau is infinite.

    Raises
    ------
    DomainError
        If fewer than two full blocks are available.
    """
    times = _truncated_times(samples)
    n_blocks = times.size // block if block >= 1 else 0
    if n_blocks < 2:
        raise DomainError(f"Mean growth needs at least two blocks of {block} samples, "
                          f"got {times.size} samples.")
    blocks = times[:n_blocks * block].reshape(n_blocks, block).mean(axis=1)
    return float(times.mean() / np.median(blocks))


def tail_index(samples, k_fraction = config.get("estimators.k_fraction"),
               ci_level = config.get("estimators.ci_level"),
               min_samples = config.get("estimators.min_tail_samples")):
    """
    Hill estimator of the tail exponent of the return time.

    Uses the largest k = k_fraction * n uncensored samples. The confidence
    interval comes from the asymptotic normality of the Hill estimator,
    theta * (1 +- z / sqrt(k)).

    Parameters
    ----------
    samples : list of ReturnOutcome or array_like
    k_fraction : float
        Fraction of top order statistics, in (0, 0.2].

    Returns
    -------
    TailIndex

    Raises
    ------
    DomainError
        If fewer than ``min_samples`` uncensored samples are given.
    """
    if not 0.0 < k_fraction <= 0.2:
        raise DomainError(f"k_fraction must lie in (0, 0.2], got {k_fraction}.")
    times, _ = _uncensored_times(samples)
    n = times.size
    if n < min_samples:
        raise DomainError(f"Tail index needs at least {min_samples:g} uncensored samples, got {n}.")

    k = max(2, int(k_fraction * n))
    ordered = np.sort(times)
    top = ordered[n - k:]
    threshold = ordered[n - k - 1]
    if threshold <= 0.0:
        raise DomainError("Tail index needs positive samples.")
    hill = float(np.mean(np.log(top / threshold)))
    theta = math.inf if hill == 0.0 else 1.0 / hill

    z = stats.norm.ppf(0.5 + ci_level / 2.0)
    half = z / math.sqrt(k)

    # Empirical survival (k..1)/n against the top order statistics.
    survival = np.arange(k, 0, -1) / n
    slope, _, _ = fit_line(np.log(top), np.log(survival))

    return TailIndex(theta=theta, ci_low=theta * (1.0 - half), ci_high=theta * (1.0 + half),
                     k=k, heavy=bool(theta < config.get("estimators.heavy_tail_threshold")),
                     survival_theta=float(-slope))


@dataclass
class GrowthFit:
    slope: float
    stderr: Optional[float]
    bound: float
    within_bound: bool
    moments: dict

    def to_dict(self):
        out = asdict(self)
        out["moments"] = {str(m): v for m, v in self.moments.items()}
        return out


def conditional_moment_growth(dist, r, m_grid, replicas,
                              horizon = config.get("cli.horizon"),
                              seed = 0,
                              tolerance = config.get("estimators.growth_tolerance"),
                              model = Model.BF,
                              workers = None):
    """
    Growth rate of E[tau^r | a single active bit at m] in m.

    For every m the chain is started from the state with bit m active
    (the ground state for m = 0), and log E[tau^r] is fitted linearly in
    m. Under Geometric(p) the slope stays below log(1/(2p)) for BF, and
    for DB as well since tau_DB <= tau_BF under the monotone coupling.

    Every m runs its replicas on its own master seed, derived from
    ``seed`` and m, so the moment estimates are independent across m.

    Returns
    -------
    GrowthFit
        Fitted slope, the bound log(1/(2p)) + ``tolerance``, and the
        moment estimate for every m.
    """
    model = Model(model)
    if dist.family is not Family.GEOMETRIC:
        raise DomainError("Conditional moment growth is defined for geometric laws.")
    bounds = moment_bounds(dist.p)
    if not 0.0 < r < bounds.r_lower:
        raise DomainError(f"r must lie in (0, {bounds.r_lower:.4f}) for p = {dist.p}, got {r}.")
    if len(m_grid) < 2:
        raise DomainError("The growth fit needs at least two values of m.")

    moments = {}
    for m in m_grid:
        initial = BitState.single(model, m) if m > 0 else None
        outcomes = simulate_returns(model, dist, horizon, replicas, derive_seed(seed, m),
                                    initial=initial, workers=workers)
        moments[int(m)] = return_stats(outcomes, r_grid=[r]).fractional_moments[r]

    m_values = np.array(list(moments), dtype=float)
    slope, _, stderr = fit_line(m_values, np.log(list(moments.values())))
    bound = math.log(1.0 / (2.0 * dist.p)) + tolerance
    return GrowthFit(slope=float(slope), stderr=stderr, bound=bound,
                     within_bound=bool(slope <= bound), moments=moments)


def clt_check(dist, model, t, replicas, seed = 0,
              method = "per_bit",
              jitter = config.get("estimators.clt_jitter"),
              min_variance = config.get("estimators.min_variance"),
              workers = None):
    """
    Normal approximation of the number of active bits at time t.

    N_t is sampled for every replica and standardised with the analytic
    mean and variance (never the sample moments). With ``jitter`` the
    integer counts are spread by an independent Uniform(-1/2, 1/2) before
    standardising with variance Var N_t + 1/12, which removes the lattice
    from the KS distance; the raw distance is kept in ``details``.

    Returns
    -------
    EstimatorSummary
        ``ks_statistic``, ``skewness`` and ``excess_kurtosis`` of the
        standardised counts; ``details`` holds the analytic moments and the
        standardised sample mean and variance.

    Raises
    ------
    DomainError
        If the analytic variance is below ``min_variance``.
    """
    model = Model(model)
    mean = expected_active(dist, model, t).value
    variance = variance_active(dist, model, t).value
    if variance < min_variance:
        raise DomainError(f"Var N_t = {variance:.3g} is degenerate at t = {t:g}.")
    if replicas < 1000:
        logger.warning("Only %d replicas for the CLT check.", replicas)

    counts = sample_active_counts(model, dist, t, method, replicas, seed, workers=workers)[:, 0]
    counts = counts.astype(float)

    raw = (counts - mean) / math.sqrt(variance)
    if jitter:
        spread = replica_rng(seed, replicas).uniform(-0.5, 0.5, size=counts.size)
        z = (counts + spread - mean) / math.sqrt(variance + 1.0 / 12.0)
    else:
        z = raw

    summary = EstimatorSummary(n_samples=int(counts.size))
    summary.mean = float(counts.mean())
    summary.ks_statistic = float(stats.kstest(z, "norm").statistic)
    summary.skewness = float(stats.skew(z))
    summary.excess_kurtosis = float(stats.kurtosis(z))
    summary.details = {
        "model": model.value,
        "t": float(t),
        "expected_active": mean,
        "variance_active": variance,
        "standardized_mean": float(z.mean()),
        "standardized_variance": float(z.var()),
        "raw_ks_statistic": float(stats.kstest(raw, "norm").statistic),
        "jitter": bool(jitter),
    }
    return summary
