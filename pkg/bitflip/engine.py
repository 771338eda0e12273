# /bitflip/engine.py
# Simulation of the Binary Flipping (BF) and Damaged Bits (DB) chains.
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
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache, partial
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from .analytics import state_probs
from .config import config
from .exceptions import DomainError
from .utilities import run_replicas

logger = logging.getLogger(__name__)


class Model(str, Enum):
    BF = "bf"
    DB = "db"


class SnapshotMethod(str, Enum):
    POISSON_EMBED = "poisson_embed"
    PER_BIT = "per_bit"


IDLE, ACTIVE, DAMAGED = 0, 1, 2


@dataclass
class BitState:
    """
    Sparse configuration of a BF or DB chain.

    Only the active indices (state 1) and, for DB, the damaged indices
    (state 2) are stored. Every other bit is idle.

    Parameters
    ----------
    model : Model or str
        ``"bf"`` or ``"db"``.
    active : set of int
        Active bit indices.
    damaged : set of int
        Damaged bit indices (DB only).
    step : int
        Number of steps taken, n.
    """

    model: Model
    active: set = field(default_factory=set)
    damaged: set = field(default_factory=set)
    step: int = 0

    def __post_init__(self):
        self.model = Model(self.model)
        self.active = set(int(k) for k in self.active)
        self.damaged = set(int(k) for k in self.damaged)
        if any(k < 1 for k in self.active | self.damaged):
            raise DomainError("Bit indices start at 1.")
        if self.active & self.damaged:
            raise DomainError("A bit cannot be both active and damaged.")
        if self.model is Model.BF and self.damaged:
            raise DomainError("BF states have no damaged bits.")
        self._max = max(self.active, default=0)

    @classmethod
    def ground(cls, model):
        return cls(model)

    @classmethod
    def single(cls, model, m):
        """State with the single active bit ``m`` (ground state for m = 0)."""
        return cls(model, active={m} if m > 0 else set())

    @property
    def max_active(self):
        """M_n, the largest active index (0 when no bit is active)."""
        return self._max

    @property
    def n_active(self):
        """N_n, the number of active bits."""
        return len(self.active)

    def is_ground(self):
        return not self.active

    def state_of(self, k):
        if k in self.active:
            return ACTIVE
        if k in self.damaged:
            return DAMAGED
        return IDLE

    def copy(self):
        return BitState(self.model, set(self.active), set(self.damaged), self.step)

    def _activate(self, k):
        self.active.add(k)
        if k > self._max:
            self._max = k

    def _deactivate(self, k):
        self.active.discard(k)
        if k == self._max:
            self._max = max(self.active, default=0)


@dataclass(frozen=True)
class ReturnOutcome:
    """
    Result of one return-time run.

    ``tau`` is None when the run was censored at ``horizon``.
    """

    tau: Optional[int]
    censored: bool
    horizon: int
    m0: int
    peak_m: int

    @property
    def time(self):
        """tau, or the horizon for censored runs."""
        return self.horizon if self.censored else self.tau


def step_bf(state, index):
    """
    Flip bit ``index`` of a BF state.

    The state is updated in place and returned.

    Examples
    --------
    >>> state = BitState("bf", active={1, 3})
    >>> sorted(step_bf(state, 2).active)
    [1, 2, 3]
    """
    if state.model is not Model.BF:
        raise DomainError("step_bf needs a BF state.")
    if index in state.active:
        state._deactivate(index)
    else:
        state._activate(index)
    state.step += 1
    return state


def step_db(state, index):
    """
    Advance bit ``index`` of a DB state: idle -> active -> damaged.

    Damaged bits stay damaged. The state is updated in place and returned.
    """
    if state.model is not Model.DB:
        raise DomainError("step_db needs a DB state.")
    if index in state.active:
        state._deactivate(index)
        state.damaged.add(index)
    elif index not in state.damaged:
        state._activate(index)
    state.step += 1
    return state


def replay(initial, indices):
    """
    Apply an explicit index sequence step by step.

    Returns
    -------
    (BitState, int or None)
        Final state (a copy) and the first step n >= 1 at which no bit was
        active, or None.
    """
    step = step_bf if initial.model is Model.BF else step_db
    state = initial.copy()
    tau = None
    for n, index in enumerate(indices, start=1):
        step(state, int(index))
        if tau is None and state.is_ground():
            tau = n
    return state, tau


# Vectorised trajectories
#
# A bit's state after a flip depends only on how often it was selected
# before. For every draw we look up that prior count, which gives the change
# of N_n (BF: +1 on even counts, -1 on odd; DB: +1, -1, then 0), so that
# N_n is a cumulative sum and the return time is its first zero.

def _initial_counts(state):
    counts = {k: 1 for k in state.active}
    counts.update({k: 2 for k in state.damaged})
    return counts


def _prior_counts(indices, counts):
    """Number of earlier selections of each draw; ``counts`` is updated."""
    uniq, inverse = np.unique(indices, return_inverse=True)
    inverse = inverse.ravel()
    order = np.argsort(inverse, kind="stable")
    grouped = inverse[order]
    first = np.searchsorted(grouped, grouped, side="left")
    rank = np.empty(len(indices), dtype=np.int64)
    rank[order] = np.arange(len(indices)) - first

    base = np.array([counts.get(int(k), 0) for k in uniq], dtype=np.int64)
    sizes = np.bincount(inverse, minlength=len(uniq))
    for k, b, s in zip(uniq.tolist(), base.tolist(), sizes.tolist()):
        counts[k] = b + s
    return base[inverse] + rank


def _deltas(model, prior):
    if model is Model.BF:
        return 1 - 2 * (prior & 1)
    return np.where(prior == 0, 1, np.where(prior == 1, -1, 0))


def index_batches(dist, rng, total, batch_size = config.get("engine.batch_size"),
                  first_batch = config.get("engine.first_batch")):
    """
    Flip indices of one run, ``total`` in all, drawn in growing batches.

    The first batch holds ``first_batch`` indices and every refill doubles
    the size up to ``batch_size``, so short excursions draw few uniforms.
    The uniforms are consumed in order, so the index sequence does not
    depend on the batch sizes.
    """
    if first_batch < 1 or batch_size < 1:
        raise DomainError("Batch sizes must be at least 1.")
    done = 0
    size = min(first_batch, batch_size)
    while done < total:
        n = min(size, total - done)
        yield dist.quantile_array(rng.random(n))
        done += n
        size = min(2 * size, batch_size)


def scan_return(model, initial, batches, horizon, watch=None):
    """
    First n >= 1 at which no watched bit is active.

    ``batches`` is any iterable of index arrays, consumed lazily until the
    return. With ``watch = m`` only bits 1..m are tested (projected BF run).
    """
    counts = _initial_counts(initial)
    if watch is None:
        level = initial.n_active
    else:
        level = sum(1 for k in initial.active if k <= watch)
    m0 = initial.max_active
    peak = m0
    done = 0

    for indices in batches:
        delta = _deltas(model, _prior_counts(indices, counts))
        if watch is not None:
            counted = np.where(indices <= watch, delta, 0)
        else:
            counted = delta
        path = level + np.cumsum(counted)
        hits = np.flatnonzero(path == 0)
        stop = int(hits[0]) + 1 if hits.size else len(indices)

        opened = indices[:stop][delta[:stop] > 0]
        if opened.size:
            peak = max(peak, int(opened.max()))
        if hits.size:
            return ReturnOutcome(tau=done + stop, censored=False, horizon=horizon, m0=m0, peak_m=peak)
        level = int(path[-1])
        done += len(indices)

    return ReturnOutcome(tau=None, censored=True, horizon=horizon, m0=m0, peak_m=peak)


def run_indices(model, initial, indices):
    """Return-time outcome of an explicit index sequence, horizon = its length."""
    indices = np.asarray(indices, dtype=np.int64)
    return scan_return(Model(model), initial, [indices], len(indices))


def run_return_time(model, dist, initial, horizon, rng,
                    batch_size = config.get("engine.batch_size")):
    """
    Simulate one run until the first return to a ground state.

    Parameters
    ----------
    model : Model or str
        ``"bf"`` or ``"db"``.
    dist : BitDistribution
        Flip-index law.
    initial : BitState or None
        Starting configuration, the ground state if None.
    horizon : int
        Maximal number of steps.
    rng : numpy.random.Generator
        Random stream of this run.

    Returns
    -------
    ReturnOutcome
        ``tau`` is the first step n >= 1 with no active bit (damaged bits are
        allowed for DB), or the run is censored at ``horizon``.

    Examples
    --------
    >>> out = run_return_time("bf", BitDistribution.table([1.0]), None, 10, rng)
    >>> out.tau
    2
    """
    model = Model(model)
    if horizon < 1:
        raise DomainError(f"Horizon must be at least 1, got {horizon}.")
    if initial is None:
        initial = BitState.ground(model)
    if initial.model is not model:
        raise DomainError("Initial state belongs to the other model.")
    return scan_return(model, initial, index_batches(dist, rng, horizon, batch_size), horizon)


def run_projected_return(m, dist, horizon, rng, initial=None,
                         batch_size = config.get("engine.batch_size")):
    """
    BF run stopped when the first ``m`` bits are all idle.

    Steps that touch bits beyond ``m`` count towards n but do not affect the
    stopping test. From the ground state the mean is 2^m.
    """
    if m < 1:
        raise DomainError(f"Projection size must be at least 1, got {m}.")
    if horizon < 1:
        raise DomainError(f"Horizon must be at least 1, got {horizon}.")
    if initial is None:
        initial = BitState.ground(Model.BF)
    batches = index_batches(dist, rng, horizon, batch_size)
    return scan_return(Model.BF, initial, batches, horizon, watch=m)


def exact_projected_return(dist, m):
    """
    Exact mean return time of the projected BF chain on {0,1}^m.

    Bits beyond ``m`` are lumped into a self-loop of probability Q_m. The mean
    first passage times h to the all-zero state solve h(0) = 0 and
    h(x) = 1 + sum_y P(x, y) h(y); the mean return time is
    1 + sum_y P(0, y) h(y). For a table supported on m bits this is the
    mean BF return time itself.

    Raises
    ------
    DomainError
        If m is not in 1..20 or one of the first m bits has zero probability.
    """
    if not 1 <= m <= 20:
        raise DomainError(f"Projection size must lie in 1..20, got {m}.")
    p = dist.pmf_array(m)
    if np.any(p <= 0.0):
        raise DomainError("Every projected bit needs a positive flip probability.")
    stay = dist.tail(m)

    n_states = 1 << m
    states = np.arange(n_states)
    rows = [states]
    cols = [states]
    vals = [np.full(n_states, stay)]
    for k in range(m):
        rows.append(states)
        cols.append(states ^ (1 << k))
        vals.append(np.full(n_states, p[k]))
    T = sparse.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(n_states, n_states)).tocsr()

    A = (sparse.eye(n_states, format="csr") - T).tolil()
    A[0, :] = 0.0
    A[0, 0] = 1.0
    b = np.ones(n_states)
    b[0] = 0.0
    h = spsolve(A.tocsr(), b)
    return float(1.0 + T[0, :].dot(h)[0])


@lru_cache(maxsize=64)
def _per_bit_table(model, dist, t, truncation):
    n_bits = dist.index_beyond(truncation / t)
    x = dist.pmf_array(n_bits) * t
    _, active, damaged = state_probs(model.value, x)
    return active, damaged


def sample_snapshot(model, dist, t, method, rng,
                    truncation = config.get("engine.snapshot_truncation")):
    """
    Configuration of the continuous-time chain at time ``t``.

    Parameters
    ----------
    model : Model or str
    dist : BitDistribution
    t : float
        Time, t > 0. The total flip rate is 1.
    method : SnapshotMethod or str
        ``"poisson_embed"`` draws n ~ Poisson(t) and runs n discrete steps
        (exact). ``"per_bit"`` samples the bits independently from their
        marginal laws, stopping at the first K with Q_K * t below
        ``truncation``; ``step`` is then left at 0.
    rng : numpy.random.Generator

    Returns
    -------
    BitState
    """
    model = Model(model)
    method = SnapshotMethod(method)
    if not t > 0.0:
        raise DomainError(f"Snapshot time must be positive, got {t}.")

    if method is SnapshotMethod.POISSON_EMBED:
        n = int(rng.poisson(t))
        indices = dist.quantile_array(rng.random(n))
        uniq, hits = np.unique(indices, return_counts=True)
        if model is Model.BF:
            return BitState(model, active=uniq[hits % 2 == 1].tolist(), step=n)
        return BitState(model, active=uniq[hits == 1].tolist(), damaged=uniq[hits >= 2].tolist(), step=n)

    active, damaged = _per_bit_table(model, dist, float(t), truncation)
    u = rng.random(len(active))
    is_active = u < active
    index = np.arange(1, len(active) + 1)
    if model is Model.BF:
        return BitState(model, active=index[is_active].tolist())
    is_damaged = ~is_active & (u < active + damaged)
    return BitState(model, active=index[is_active].tolist(), damaged=index[is_damaged].tolist())


def ground_time_mc(model, dist, horizon, rng,
                   batch_size = 1 << 16):
    """
    Total continuous time spent in a ground state during ``horizon`` events.

    Starting from the ground state, every visit to a ground state at steps
    0, ..., horizon - 1 contributes one Exp(1) holding time (the total flip
    rate is 1). The sum of v such holding times is drawn as Gamma(v, 1).
    """
    model = Model(model)
    counts = {}
    level = 0
    visits = 1
    for indices in index_batches(dist, rng, horizon - 1, batch_size):
        path = level + np.cumsum(_deltas(model, _prior_counts(indices, counts)))
        visits += int(np.count_nonzero(path == 0))
        level = int(path[-1])
    return float(rng.standard_gamma(visits))


# Replica drivers

def _return_replica(model, dist, horizon, initial, projection_m, index, rng):
    if projection_m:
        return run_projected_return(projection_m, dist, horizon, rng, initial=initial)
    return run_return_time(model, dist, initial, horizon, rng)


def simulate_returns(model, dist, horizon, replicas, seed,
                     initial = None,
                     projection_m = None,
                     workers = None):
    """
    Independent return-time runs, replica i on stream (seed, i).

    Returns
    -------
    list of ReturnOutcome
        In replica order.
    """
    model = Model(model)
    if projection_m and model is not Model.BF:
        raise DomainError("Projected return times are defined for the BF model.")
    logger.info("Simulating %d %s return times...", replicas, model.value.upper())
    function = partial(_return_replica, model, dist, horizon, initial, projection_m)
    outcomes = run_replicas(function, replicas, seed, workers=workers)
    logger.info("...done! %d of %d runs censored.", sum(o.censored for o in outcomes), replicas)
    return outcomes


def _snapshot_replica(model, dist, t, method, index, rng):
    state = sample_snapshot(model, dist, t, method, rng)
    return state.n_active, len(state.damaged), state.max_active


def sample_active_counts(model, dist, t, method, replicas, seed, workers=None):
    """
    Snapshot summaries of independent replicas.

    Returns
    -------
    numpy.ndarray
        Integer array of shape (replicas, 3): N_t, number of damaged bits,
        and the largest active index.
    """
    logger.info("Sampling %d snapshots at t = %g...", replicas, t)
    function = partial(_snapshot_replica, Model(model), dist, float(t), SnapshotMethod(method))
    rows = run_replicas(function, replicas, seed, workers=workers)
    logger.info("...done!")
    return np.array(rows, dtype=np.int64).reshape(-1, 3)


def _ground_time_replica(model, dist, horizon, index, rng):
    return ground_time_mc(model, dist, horizon, rng)


def simulate_ground_time(model, dist, horizon, replicas, seed, workers=None):
    """Monte Carlo ground-state occupancy times, one per replica."""
    function = partial(_ground_time_replica, Model(model), dist, horizon)
    return np.array(run_replicas(function, replicas, seed, workers=workers))
