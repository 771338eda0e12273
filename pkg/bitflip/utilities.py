# /bitflip/utilities.py
# Module for internal utility functions: random streams and replica drivers.
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
from concurrent.futures import ProcessPoolExecutor

import numpy as np
from numpy.random import SeedSequence, default_rng
from lmfit.models import LinearModel
from tqdm import tqdm

from .config import config

logger = logging.getLogger(__name__)


def replica_rng(seed, *key):
    """
    Random generator of one replica (or sub-stream of a replica).

    The stream depends only on the master seed and the key, never on the
    order in which replicas are executed or on the number of workers.

    Parameters
    ----------
    seed : int
        Master seed (unsigned 64-bit).
    *key : int
        Spawn key, usually ``(replica_index,)``.

    Returns
    -------
    numpy.random.Generator

    Examples
    --------
    >>> rng = replica_rng(42, 7)
    >>> rng.random()   # identical on every machine and every run
    """
    return default_rng(SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


def derive_seed(seed, *key):
    """Master seed of an independent experiment labelled ``key`` (unsigned 64-bit)."""
    state = SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)).generate_state(1, np.uint64)
    return int(state[0])


def coordinate_bit(seed, *key):
    """Fair bit drawn from the sub-stream identified by ``key``."""
    state = SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)).generate_state(1)
    return int(state[0] & 1)


def _run_chunk(function, seed, start, stop):
    return [function(i, replica_rng(seed, i)) for i in range(start, stop)]


def _chunk_bounds(n_replicas, n_chunks):
    edges = np.linspace(0, n_replicas, n_chunks + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def run_replicas(function, n_replicas, seed,
                 workers = None,
                 progress = None):
    """
    Evaluate ``function(replica_index, rng)`` for every replica.

    Parameters
    ----------
    function : callable
        Picklable (module level or ``functools.partial``) function taking the
        replica index and its random generator.
    n_replicas : int
        Number of replicas.
    seed : int
        Master seed.
    workers : int, optional
        Number of worker processes. 1 runs inline.
    progress : bool, optional
        Show a tqdm progress bar.

    Returns
    -------
    list
        Results in replica order.

    Notes
    -----
    Replica i always uses ``replica_rng(seed, i)``, so the returned list is
    identical for any number of workers.
    """
    if workers is None:
        workers = config.get("engine.workers")
    if progress is None:
        progress = config.get("engine.progress")

    if n_replicas <= 0:
        return []

    if workers <= 1:
        iterator = range(n_replicas)
        if progress:
            iterator = tqdm(iterator, total=n_replicas, unit="replicas")
        return [function(i, replica_rng(seed, i)) for i in iterator]

    # Several chunks per worker keep the pool busy when run lengths vary.
    bounds = _chunk_bounds(n_replicas, min(n_replicas, 4 * workers))
    logger.debug("Running %d replicas in %d chunks on %d workers", n_replicas, len(bounds), workers)

    results = [None] * len(bounds)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = {pool.submit(_run_chunk, function, seed, a, b): j for j, (a, b) in enumerate(bounds)}
        with tqdm(total=n_replicas, unit="replicas", disable=not progress) as bar:
            for future, j in futures.items():
                results[j] = future.result()
                bar.update(bounds[j][1] - bounds[j][0])

    return [r for chunk in results for r in chunk]


# Straight-line model shared by every fit of the package
line_model = LinearModel()


def fit_line(x, y, weights = None):
    """
    Least-squares straight line through (x, y).

    Parameters
    ----------
    x, y : array_like
        Abscissae and ordinates, same length (at least 2).
    weights : array_like, optional
        Residual weights, as in lmfit.

    Returns
    -------
    tuple
        (slope, intercept, slope_stderr). The standard error is None when
        lmfit cannot estimate it (e.g. two points).

    Examples
    --------
    >>> slope, intercept, _ = fit_line(np.log(t), np.log(phi))
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    params = line_model.guess(y, x=x)
    result = line_model.fit(y, params, x=x, weights=weights)
    return (result.params["slope"].value,
            result.params["intercept"].value,
            result.params["slope"].stderr)
