# /bitflip/distributions.py
# Flip-index distributions, their tails and quantiles, and the
# recurrence / transience classification rules.
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
import threading
from enum import Enum

import numpy as np
from scipy.special import gammaincc, gammaln

from .config import config
from .exceptions import ConfigError, DomainError

logger = logging.getLogger(__name__)

_EPS = np.finfo(float).eps


class Family(str, Enum):
    GEOMETRIC = "geometric"
    STRETCHED_EXP = "stretched_exp"
    KAPPA = "kappa"
    TABLE = "table"


class Verdict(str, Enum):
    RECURRENT = "Recurrent"
    TRANSIENT = "Transient"
    UNDETERMINED = "Undetermined"


def kappa_exponent(k):
    """
    Smallest perfect square strictly larger than ``k``.

    Works element-wise on integer arrays.

    Examples
    --------
    >>> kappa_exponent(np.array([1, 3, 4, 8, 9]))
    array([ 4,  4,  9,  9, 16])
    """
    k = np.asarray(k, dtype=np.int64)
    root = np.floor(np.sqrt(k.astype(float))).astype(np.int64)
    # float sqrt can be off by one for large k
    root -= (root * root > k)
    root += ((root + 1) * (root + 1) <= k)
    return (root + 1) ** 2


def _stretched_integral(alpha, gamma, x):
    """Integral of exp(-alpha * s**gamma) over [x, inf)."""
    a = 1.0 / gamma
    upper = gammaincc(a, alpha * x**gamma)
    if upper <= 0.0:
        return 0.0
    return math.exp(math.log(a) - a * math.log(alpha) + gammaln(a) + math.log(upper))


def _stretched_sum(alpha, gamma, start,
                   rtol = config.get("distributions.normalization_rtol"),
                   max_terms = config.get("distributions.max_terms")):
    """
    Sum of exp(-alpha * k**gamma) over k > start.

    Terms are added directly until the integral bound on the remainder falls
    below ``rtol`` times the partial sum. If ``max_terms`` is reached first,
    the remainder is estimated by the mid-point of its integral bracket.
    """
    total = 0.0
    n = start
    block = 1 << 14
    while True:
        k = np.arange(n + 1, n + block + 1, dtype=float)
        total += float(np.exp(-alpha * k**gamma).sum())
        n += block
        bound = _stretched_integral(alpha, gamma, n)
        if bound <= rtol * total:
            return total
        if n - start >= max_terms:
            estimate = 0.5 * (bound + _stretched_integral(alpha, gamma, n + 1))
            logger.warning("Stretched-exponential sum truncated after %d terms; "
                           "remainder %.3e estimated from its integral bracket.", n - start, estimate)
            return total + estimate
        block = min(2 * block, 1 << 22)


def _kappa_tail_unnormalized(k):
    """Sum of 2**-kappa(j) over j > k, computed block by block exactly."""
    # Block i covers indices i**2 .. (i+1)**2 - 1, all with weight 2**-((i+1)**2).
    total = 0.0
    if k < 1:
        total += 3 * 2.0**-4   # indices 1..3
        k = 3
    i = math.isqrt(k)
    total += ((i + 1) ** 2 - 1 - k) * 2.0 ** -((i + 1) ** 2)
    j = i + 1
    while True:
        term = (2 * j + 1) * 2.0 ** -((j + 1) ** 2)
        if term == 0.0:
            break
        total += term
        j += 1
    return total


class BitDistribution:
    """
    Flip-index law P = (p_1, p_2, ...) on the positive integers.

    Parameters are immutable. The prefix sums S_k are cached lazily and
    extended by doubling under an internal lock, so every query is safe to
    call from several threads.

    Use the constructors :meth:`geometric`, :meth:`stretched_exp`,
    :meth:`kappa`, :meth:`table` or :meth:`from_spec`.

    Examples
    --------
    >>> dist = BitDistribution.geometric(0.5)
    >>> dist.pmf(3), dist.tail(2), dist.quantile(0.49)
    (0.125, 0.25, 1)
    """

    def __init__(self, family, p=None, alpha=None, gamma=None, pmf=None):
        self.family = Family(family)
        self.p = None
        self.alpha = None
        self.gamma = None
        self.table = None
        self._normalizer = 1.0
        self._suffix = None

        if self.family is Family.GEOMETRIC:
            if p is None or not 0.0 < p < 1.0:
                raise DomainError(f"Geometric parameter p must lie in (0, 1), got {p}.")
            self.p = float(p)

        elif self.family is Family.STRETCHED_EXP:
            if alpha is None or not alpha > 0.0:
                raise DomainError(f"Stretched-exponential alpha must be positive, got {alpha}.")
            if gamma is None or not 0.0 < gamma < 1.0:
                raise DomainError(f"Stretched-exponential gamma must lie in (0, 1), got {gamma}.")
            self.alpha = float(alpha)
            self.gamma = float(gamma)
            self._normalizer = 1.0 / _stretched_sum(self.alpha, self.gamma, 0)

        elif self.family is Family.KAPPA:
            self._normalizer = 1.0 / _kappa_tail_unnormalized(0)

        else:
            values = np.asarray(pmf if pmf is not None else [], dtype=float)
            if values.ndim != 1 or values.size == 0:
                raise DomainError("A table distribution needs a non-empty list of probabilities.")
            if np.any(~np.isfinite(values)) or np.any(values < 0.0):
                raise DomainError("Table probabilities must be finite and non-negative.")
            mass = math.fsum(values)
            if mass <= 0.0:
                raise DomainError("Table probabilities must have positive total mass.")
            # Trailing zeros carry no information about the support.
            last = int(np.nonzero(values)[0][-1])
            values = values[:last + 1] / mass
            if np.any(np.diff(values) > 0.0):
                logger.warning("Table pmf %s is not non-increasing; indices are used as given.",
                               values.tolist())
            self.table = tuple(float(v) for v in values)
            self._suffix = np.array([math.fsum(values[k:]) for k in range(len(values))] + [0.0])

        self._lock = threading.Lock()
        self._prefix = np.empty(0)
        if self.family is Family.TABLE:
            self._prefix = np.cumsum(np.asarray(self.table))
        self._tail_cache = {}

    # Constructors

    @classmethod
    def geometric(cls, p):
        """p_k = (1 - p) * p**(k - 1)."""
        return cls(Family.GEOMETRIC, p=p)

    @classmethod
    def stretched_exp(cls, alpha, gamma):
        """p_k = C * exp(-alpha * k**gamma) with the exact normaliser C."""
        return cls(Family.STRETCHED_EXP, alpha=alpha, gamma=gamma)

    @classmethod
    def kappa(cls):
        """p_k = C * 2**-kappa(k), kappa(k) the smallest square above k."""
        return cls(Family.KAPPA)

    @classmethod
    def table(cls, pmf):
        """Finite table, normalised exactly at construction."""
        return cls(Family.TABLE, pmf=pmf)

    @classmethod
    def from_spec(cls, spec, path="dist"):
        """
        Build a distribution from its JSON description.

        Parameters
        ----------
        spec : dict
            One of ``{"family": "geometric", "p": 0.3}``,
            ``{"family": "stretched_exp", "alpha": 1.0, "gamma": 0.4}``,
            ``{"family": "kappa"}`` or ``{"family": "table", "pmf": [...]}``.
        path : str, optional
            Field path used in error messages.

        Raises
        ------
        ConfigError
            Unknown family, unknown or missing fields, or invalid values. The
            error names the offending field.
        """
        if not isinstance(spec, dict):
            raise ConfigError(path, "distribution must be a JSON object.")
        family = spec.get("family")
        allowed = {
            "geometric": {"p"},
            "stretched_exp": {"alpha", "gamma"},
            "kappa": set(),
            "table": {"pmf"},
        }
        if family not in allowed:
            raise ConfigError(f"{path}.family", f"unknown family {family!r}; "
                              f"expected one of {sorted(allowed)}.")
        for key in spec:
            if key != "family" and key not in allowed[family]:
                raise ConfigError(f"{path}.{key}", f"unknown field for family {family!r}.")
        for key in sorted(allowed[family]):
            if key not in spec:
                raise ConfigError(f"{path}.{key}", "missing required field.")

        def number(key, low, high, closed_low=False):
            value = spec[key]
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{path}.{key}", "must be a number.")
            ok_low = value >= low if closed_low else value > low
            if not (ok_low and value < high):
                raise ConfigError(f"{path}.{key}", f"value {value} outside "
                                  f"{'[' if closed_low else '('}{low}, {high}).")
            return float(value)

        if family == "geometric":
            return cls.geometric(number("p", 0.0, 1.0))
        if family == "stretched_exp":
            return cls.stretched_exp(number("alpha", 0.0, math.inf), number("gamma", 0.0, 1.0))
        if family == "kappa":
            return cls.kappa()

        pmf = spec["pmf"]
        if not isinstance(pmf, list) or not pmf:
            raise ConfigError(f"{path}.pmf", "must be a non-empty list of probabilities.")
        for i, value in enumerate(pmf):
            if isinstance(value, bool) or not isinstance(value, (int, float)) or value < 0:
                raise ConfigError(f"{path}.pmf[{i}]", "must be a non-negative number.")
        try:
            return cls.table(pmf)
        except DomainError as err:
            raise ConfigError(f"{path}.pmf", str(err)) from err

    def to_spec(self):
        """JSON description, the inverse of :meth:`from_spec`."""
        if self.family is Family.GEOMETRIC:
            return {"family": "geometric", "p": self.p}
        if self.family is Family.STRETCHED_EXP:
            return {"family": "stretched_exp", "alpha": self.alpha, "gamma": self.gamma}
        if self.family is Family.KAPPA:
            return {"family": "kappa"}
        return {"family": "table", "pmf": list(self.table)}

    # Identity, pickling

    def _key(self):
        return (self.family.value, self.p, self.alpha, self.gamma, self.table)

    def __eq__(self, other):
        return isinstance(other, BitDistribution) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        params = {k: v for k, v in self.to_spec().items() if k != "family"}
        args = ", ".join(f"{k}={v!r}" for k, v in params.items())
        return f"BitDistribution.{self.family.value}({args})"

    def __getstate__(self):
        state = self.__dict__.copy()
        del state["_lock"]
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._lock = threading.Lock()

    # Probabilities

    @property
    def support_size(self):
        """Number of atoms, None for the unbounded families."""
        return len(self.table) if self.family is Family.TABLE else None

    def pmf_array(self, n):
        """Array (p_1, ..., p_n)."""
        k = np.arange(1, n + 1, dtype=np.int64)
        if self.family is Family.GEOMETRIC:
            return (1.0 - self.p) * np.power(self.p, (k - 1).astype(float))
        if self.family is Family.STRETCHED_EXP:
            return self._normalizer * np.exp(-self.alpha * k.astype(float) ** self.gamma)
        if self.family is Family.KAPPA:
            return self._normalizer * np.exp2(-kappa_exponent(k).astype(float))
        values = np.zeros(n)
        m = min(n, len(self.table))
        values[:m] = self.table[:m]
        return values

    def pmf(self, k):
        """
        Probability p_k of selecting bit ``k``.

        Raises
        ------
        DomainError
            If k < 1.
        """
        k = int(k)
        if k < 1:
            raise DomainError(f"Bit indices start at 1, got {k}.")
        if self.family is Family.GEOMETRIC:
            return (1.0 - self.p) * self.p ** (k - 1)
        if self.family is Family.STRETCHED_EXP:
            return self._normalizer * math.exp(-self.alpha * k**self.gamma)
        if self.family is Family.KAPPA:
            j = math.isqrt(k) + 1
            return self._normalizer * 2.0 ** -(j * j)
        return self.table[k - 1] if k <= len(self.table) else 0.0

    def prefix(self, k):
        """Prefix sum S_k = p_1 + ... + p_k (S_0 = 0)."""
        if k <= 0:
            return 0.0
        if self.family is Family.TABLE:
            return float(self._prefix[min(k, len(self._prefix)) - 1])
        prefix = self._extend_to(k)
        return float(prefix[k - 1])

    def tail(self, k):
        """
        Tail Q_k = sum of p_j over j > k, with Q_0 = 1.

        Tails are summed directly rather than taken as 1 - S_k, so they keep
        their relative accuracy when small.
        """
        k = int(k)
        if k < 0:
            raise DomainError(f"Tail index must be non-negative, got {k}.")
        if k == 0:
            return 1.0
        if self.family is Family.GEOMETRIC:
            return self.p**k
        if self.family is Family.TABLE:
            return float(self._suffix[min(k, len(self.table))])
        if self.family is Family.KAPPA:
            return self._normalizer * _kappa_tail_unnormalized(k)

        cached = self._tail_cache.get(k)
        if cached is None:
            cached = self._normalizer * _stretched_sum(self.alpha, self.gamma, k)
            self._tail_cache[k] = cached
        return cached

    def index_beyond(self, mass):
        """
        Smallest K >= 0 with Q_K < ``mass``.

        Every truncation rule of the package (snapshots, series, products)
        goes through this search.
        """
        if not mass > 0.0:
            raise DomainError(f"Truncation mass must be positive, got {mass}.")
        if self.tail(0) < mass:
            return 0
        max_index = config.get("distributions.max_index")
        lo, hi = 0, 1
        while self.tail(hi) >= mass:
            lo, hi = hi, 2 * hi
            if hi > max_index:
                raise DomainError(f"No index below {max_index} has tail mass under {mass}.")
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if self.tail(mid) < mass:
                hi = mid
            else:
                lo = mid
        return hi

    # Quantiles

    def _extend_to(self, n):
        prefix = self._prefix
        if len(prefix) >= n:
            return prefix
        with self._lock:
            prefix = self._prefix
            if len(prefix) < n:
                size = max(len(prefix), config.get("distributions.prefix_block"))
                while size < n:
                    size *= 2
                # Recomputed from scratch so S_k never depends on the extension history.
                prefix = np.cumsum(self.pmf_array(size))
                self._prefix = prefix
        return prefix

    def _prefix_covering(self, u_max):
        """Prefix sums extended until S_n > u_max or the remaining mass is negligible."""
        prefix = self._prefix
        if self.family is Family.TABLE:
            return prefix
        max_index = config.get("distributions.max_index")
        while len(prefix) == 0 or prefix[-1] <= u_max:
            n = len(prefix)
            if n and (self.tail(n) < _EPS or n >= max_index):
                break
            prefix = self._extend_to(max(2 * n, 1))
        return prefix

    def quantile_array(self, u):
        """
        Vectorised quantile, F^-1(u) = min{k: S_k > u}.

        Draws in the region where the remaining mass is below machine
        precision are mapped to the last cached index.
        """
        u = np.asarray(u, dtype=float)
        if u.size == 0:
            return np.empty(u.shape, dtype=np.int64)
        prefix = self._prefix_covering(float(u.max()))
        index = np.searchsorted(prefix, u, side="right") + 1
        return np.minimum(index, len(prefix)).astype(np.int64)

    def quantile(self, u):
        """
        Smallest k with S_k > u.

        Raises
        ------
        DomainError
            If u lies outside (0, 1).

        Examples
        --------
        >>> BitDistribution.geometric(0.5).quantile(0.5)
        2
        """
        if not 0.0 < u < 1.0:
            raise DomainError(f"Quantile level must lie in (0, 1), got {u}.")
        return int(self.quantile_array(np.array([u]))[0])


def classify_bf(dist):
    """
    Recurrence verdict for the Binary Flipping model.

    Geometric families are recurrent exactly when p <= 1/2 (2^k p_k stays
    bounded) and transient otherwise ((2 - eps)^k p_k stays away from zero).
    Stretched-exponential and kappa families decay faster than 2^-k, and a
    finite table gives a finite chain; all three are recurrent.

    Returns
    -------
    Verdict
    """
    if dist.family is Family.GEOMETRIC:
        return Verdict.RECURRENT if dist.p <= 0.5 else Verdict.TRANSIENT
    if dist.family in (Family.STRETCHED_EXP, Family.KAPPA, Family.TABLE):
        return Verdict.RECURRENT
    return Verdict.UNDETERMINED


def classify_db(dist):
    """
    Recurrence verdict for the Damaged Bits model.

    Geometric: Q_{k+1}/Q_k = p < 1, recurrent. Stretched exponential with
    gamma < 1/2: transient; for gamma in [1/2, 1) no verdict is available.
    Kappa: the tail-ratio condition fails along k = i^2, undetermined.
    Finite table: recurrent.

    Returns
    -------
    Verdict
    """
    if dist.family is Family.GEOMETRIC:
        return Verdict.RECURRENT
    if dist.family is Family.STRETCHED_EXP:
        return Verdict.TRANSIENT if dist.gamma < 0.5 else Verdict.UNDETERMINED
    if dist.family is Family.TABLE:
        return Verdict.RECURRENT
    return Verdict.UNDETERMINED
