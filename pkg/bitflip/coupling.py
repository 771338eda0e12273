# /bitflip/coupling.py
# Domination coupling of two BF chains and the shared-index BF/DB coupling.
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
from dataclasses import asdict, dataclass
from functools import partial
from typing import Optional

import numpy as np
from scipy import stats

from .config import config
from .engine import BitState, Model, index_batches, scan_return, step_bf
from .exceptions import CouplingError, DomainError
from .utilities import coordinate_bit, replica_rng, run_replicas

logger = logging.getLogger(__name__)


def buffer_index_k(dist):
    """
    Smallest k with Q_{k-1} <= 1/2.

    Bits 1, ..., K - 1 form the buffer; from K on, the lower chain of a
    :class:`CoupledPair` never exceeds the upper one.

    Examples
    --------
    >>> buffer_index_k(BitDistribution.geometric(0.5))
    2
    """
    k = 1
    while dist.tail(k - 1) > 0.5:
        k += 1
    return k


class CoupledPair:
    """
    Two BF chains driven by the same uniforms.

    The lower chain starts from the ground state. The upper chain starts
    from independent fair bits, which are only drawn (from the sub-stream
    ``(seed, *key, k)``) when coordinate k is first read. Bits flipped an
    odd number of times by the upper chain are kept in ``toggled``.

    Parameters
    ----------
    dist : BitDistribution
    seed : int
        Master seed of the upper chain's initial coordinates.
    key : tuple of int, optional
        Spawn key prefix, e.g. ``(replica_index,)``.

    Attributes
    ----------
    lower : BitState
    buffer_k : int
    step : int
    """

    def __init__(self, dist, seed, key=()):
        self.dist = dist
        self.seed = int(seed)
        self.key = tuple(int(k) for k in key)
        self.lower = BitState.ground(Model.BF)
        self.buffer_k = buffer_index_k(dist)
        self.step = 0
        self.toggled = set()
        self._initial = {}
        self._known = set()

    def _initial_bit(self, k):
        bit = self._initial.get(k)
        if bit is None:
            bit = coordinate_bit(self.seed, *self.key, k)
            self._initial[k] = bit
        return bit

    def upper_bit(self, k):
        """State of coordinate k in the upper chain (materialised on first read)."""
        return self._initial_bit(k) ^ (k in self.toggled)

    def lower_bit(self, k):
        return int(k in self.lower.active)

    def is_discrepancy(self, k):
        """k >= K with the lower chain idle and the upper chain active."""
        return k >= self.buffer_k and k not in self.lower.active and self.upper_bit(k) == 1

    def __contains__(self, k):
        return self.is_discrepancy(k)

    @property
    def discrepancies(self):
        """Discrepancies among the coordinates materialised so far."""
        return frozenset(self._known)

    @property
    def upper(self):
        """Active coordinates of the upper chain among those materialised so far."""
        active = {k for k in self._initial if self.upper_bit(k)}
        return BitState(Model.BF, active=active, step=self.step)

    def _refresh(self, k):
        if self.is_discrepancy(k):
            self._known.add(k)
        else:
            self._known.discard(k)

    def _advance(self, low, mirror):
        """One step given F^-1(u) = ``low`` and F^-1(1 - u) = ``mirror``."""
        high = mirror if (self.is_discrepancy(low) or self.is_discrepancy(mirror)) else low

        step_bf(self.lower, low)
        self.toggled.symmetric_difference_update({high})
        self.step += 1

        for k in {low, high}:
            self._refresh(k)
            if k >= self.buffer_k and self.lower_bit(k) > self.upper_bit(k):
                raise CouplingError(f"Step {self.step}: lower chain active and upper chain idle "
                                    f"at coordinate {k} >= K = {self.buffer_k}.")
        return high


def swap_map(u, pair, dist):
    """
    Measure-preserving involution of (0, 1) used by the upper chain.

    Returns 1 - u when F^-1(u) or F^-1(1 - u) is a discrepancy, u otherwise.

    Parameters
    ----------
    u : float
        Uniform in (0, 1).
    pair : CoupledPair or set of int
        Source of the discrepancy set D.
    dist : BitDistribution

    Examples
    --------
    >>> swap_map(0.6, {2}, BitDistribution.geometric(0.5))
    0.4
    """
    if not 0.0 < u < 1.0:
        raise DomainError(f"Swap map is defined on (0, 1), got {u}.")
    mirror = 1.0 - u
    if dist.quantile(u) in pair or dist.quantile(mirror) in pair:
        return mirror
    return u


def _swap_array(u, discrepancies, dist):
    members = np.fromiter(discrepancies, dtype=np.int64)
    mirror = 1.0 - u
    swapped = (np.isin(dist.quantile_array(u), members)
               | np.isin(dist.quantile_array(mirror), members))
    return np.where(swapped, mirror, u)


def coupled_step(pair, u):
    """
    Advance both chains of ``pair`` with the uniform ``u``.

    The lower chain flips F^-1(u), the upper chain F^-1(swap_map(u)).

    Raises
    ------
    CouplingError
        If a coordinate k >= K ends with the lower chain above the upper one.
    """
    if not 0.0 < u < 1.0:
        raise DomainError(f"Coupling uniforms lie in (0, 1), got {u}.")
    pair._advance(pair.dist.quantile(u), pair.dist.quantile(1.0 - u))
    return pair


def couple_bf_db(dist, horizon, rng,
                 batch_size = config.get("engine.batch_size")):
    """
    BF and DB return times along one shared index sequence.

    A bit selected while active is idled by BF and damaged by DB, so the
    DB chain is never above the BF chain and returns no later.

    Returns
    -------
    (ReturnOutcome, ReturnOutcome)
        The DB outcome first, then the BF outcome.

    Examples
    --------
    >>> db, bf = couple_bf_db(BitDistribution.table([1.0]), 10, rng)
    >>> db.tau, bf.tau
    (2, 2)
    """
    if horizon < 1:
        raise DomainError(f"Horizon must be at least 1, got {horizon}.")
    drawn = []

    def recorded():
        for batch in index_batches(dist, rng, horizon, batch_size):
            drawn.append(batch)
            yield batch

    bf = scan_return(Model.BF, BitState.ground(Model.BF), recorded(), horizon)
    db = scan_return(Model.DB, BitState.ground(Model.DB), drawn, horizon)
    if bf.tau is not None and (db.tau is None or db.tau > bf.tau):
        raise CouplingError(f"DB returned at {db.tau}, after BF at {bf.tau}.")
    return db, bf


# Audits

@dataclass
class DominationAudit:
    runs: int
    steps: int
    buffer_k: int
    violations: int
    max_discrepancies: int
    upper_counts: list
    chi_square_p: Optional[float]

    def to_dict(self):
        return asdict(self)


@dataclass
class BFDBAudit:
    runs: int
    horizon: int
    both_finite: int
    ordered: int
    fraction_ordered: float

    def to_dict(self):
        return asdict(self)


def _domination_replica(dist, steps, seed, index, rng):
    pair = CoupledPair(dist, seed, key=(index,))
    u = rng.random(steps)
    lows = dist.quantile_array(u).tolist()
    mirrors = dist.quantile_array(1.0 - u).tolist()

    highs = []
    largest = 0
    violations = 0
    for low, mirror in zip(lows, mirrors):
        try:
            highs.append(pair._advance(low, mirror))
        except CouplingError as error:
            logger.error("Replica %d: %s", index, error)
            violations += 1
            break
        largest = max(largest, len(pair._known))
    return violations, largest, np.bincount(highs)


def _marginal_p_value(counts, dist):
    """Chi-square p-value of the upper flip indices against the pmf."""
    total = counts.sum()
    if total == 0:
        return None
    expected = dist.pmf_array(len(counts) - 1) * total
    # Bins 1..m with at least 5 expected hits; the rest is lumped together.
    m = int(np.count_nonzero(expected >= 5.0))
    if m < 1:
        return None
    observed = np.append(counts[1:m + 1], counts[m + 1:].sum())
    expected = np.append(expected[:m], total - expected[:m].sum())
    if expected[-1] < 5.0:
        observed[-2] += observed[-1]
        expected[-2] += expected[-1]
        observed, expected = observed[:-1], expected[:-1]
    if len(observed) < 2:
        return None
    return float(stats.chisquare(observed, expected).pvalue)


def audit_domination(dist, runs = config.get("coupling.audit_runs"),
                     steps = config.get("coupling.audit_steps"),
                     seed = 0, workers = None):
    """
    Run many coupled pairs and check the domination at every step.

    Returns
    -------
    DominationAudit
        Violations (expected 0), the largest number of materialised
        discrepancies seen, the upper chain's flip-index counts and their
        chi-square p-value against the pmf.
    """
    logger.info("Auditing %d coupled runs of %d steps...", runs, steps)
    function = partial(_domination_replica, dist, steps, seed)
    results = run_replicas(function, runs, seed, workers=workers)

    width = max(len(c) for _, _, c in results)
    counts = np.zeros(width, dtype=np.int64)
    for _, _, c in results:
        counts[:len(c)] += c
    violations = sum(v for v, _, _ in results)
    if violations:
        logger.warning("%d coupled runs broke the domination.", violations)
    logger.info("...done!")
    return DominationAudit(runs=runs, steps=steps, buffer_k=buffer_index_k(dist),
                           violations=violations,
                           max_discrepancies=max(d for _, d, _ in results),
                           upper_counts=counts[1:].tolist(),
                           chi_square_p=_marginal_p_value(counts, dist))


def _bf_db_replica(dist, horizon, index, rng):
    db, bf = couple_bf_db(dist, horizon, rng)
    return db.tau, bf.tau


def audit_bf_db(dist, runs, horizon, seed, workers = None):
    """Fraction of coupled runs with tau_DB <= tau_BF, among runs where both return."""
    logger.info("Coupling %d BF/DB runs...", runs)
    taus = run_replicas(partial(_bf_db_replica, dist, horizon), runs, seed, workers=workers)
    finite = [(db, bf) for db, bf in taus if db is not None and bf is not None]
    ordered = sum(db <= bf for db, bf in finite)
    logger.info("...done!")
    return BFDBAudit(runs=runs, horizon=horizon, both_finite=len(finite), ordered=ordered,
                     fraction_ordered=ordered / len(finite) if finite else float("nan"))


def swap_uniformity(dist, n, seed, n_sets = 10, width = 20):
    """
    KS test of swap_map(U) against Uniform(0, 1).

    ``n_sets`` random discrepancy sets are drawn among {K, ..., K + width - 1}
    and n uniforms are pushed through the swap map of each set.

    Returns
    -------
    list of (float, float)
        (KS statistic, p-value) per discrepancy set.
    """
    K = buffer_index_k(dist)
    results = []
    for i in range(n_sets):
        rng = replica_rng(seed, i)
        candidates = np.arange(K, K + width)
        discrepancies = set(candidates[rng.random(width) < 0.5].tolist())
        u = rng.random(n)
        u = u[u > 0.0]
        test = stats.kstest(_swap_array(u, discrepancies, dist), "uniform")
        results.append((float(test.statistic), float(test.pvalue)))
    return results
