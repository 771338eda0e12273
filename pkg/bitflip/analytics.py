# /bitflip/analytics.py
# Series, integrals and exponents of the BF and DB models.
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
from typing import NamedTuple, Optional

import numpy as np
from scipy.integrate import quad
from scipy.special import gammainc

from .config import config
from .distributions import Family, Verdict, classify_bf, classify_db
from .exceptions import DomainError
from .utilities import fit_line

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MomentBounds:
    """
    Moment exponents of the BF return time for Geometric(p), p < 1/2.

    E tau^r is finite for r < ``r_lower`` and infinite for r > ``r_upper``.
    """
    p: float
    r_lower: float
    r_upper: float


@dataclass
class AnalyticReport:
    """
    A numerically evaluated series or integral.

    When ``diverged`` is set the quantity is infinite and ``value`` is only
    the partial integral up to ``details["t_max"]``, a lower bound.
    """
    quantity: str
    value: float
    error_estimate: float
    diverged: bool = False
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


class BandCount(NamedTuple):
    exact: int
    asymptotic: Optional[float]


class SlopeFit(NamedTuple):
    slope: float
    stderr: Optional[float]
    window: Optional[tuple]


def _model_name(model):
    name = getattr(model, "value", model)
    if name not in ("bf", "db"):
        raise DomainError(f"Unknown model {model!r}, expected 'bf' or 'db'.")
    return name


def state_probs(model, x):
    """
    Marginal law of a bit after a Poisson number of hits with mean ``x``.

    Parameters
    ----------
    model : Model or str
        ``"bf"`` or ``"db"``.
    x : float or array_like
        p_k * t, non-negative.

    Returns
    -------
    tuple
        (idle, active, damaged) probabilities, floats for scalar ``x`` and
        arrays otherwise. For BF the active probability is
        (1 - e^{-2x})/2 (odd number of hits); DB is idle with no hit,
        active with one and damaged with two or more.

    Raises
    ------
    DomainError
        If any x is negative.

    Examples
    --------
    >>> [round(v, 4) for v in state_probs("db", 1.0)]
    [0.3679, 0.3679, 0.2642]
    """
    name = _model_name(model)
    values = np.asarray(x, dtype=float)
    if np.any(np.isnan(values)) or np.any(values < 0.0):
        raise DomainError("State probabilities need p_k * t >= 0.")

    if name == "bf":
        active = -np.expm1(-2.0 * values) / 2.0
        idle = 1.0 - active
        damaged = np.zeros_like(values)
    else:
        idle = np.exp(-values)
        active = values * idle
        # 1 - (1 + x) e^{-x}, the regularised lower incomplete gamma P(2, x)
        damaged = gammainc(2.0, values)

    if values.ndim == 0:
        return float(idle), float(active), float(damaged)
    return idle, active, damaged


def _active_fraction(name, x):
    return state_probs(name, x)[1]


def _series(quantity, dist, model, t, truncation, summand):
    if not t > 0.0:
        raise DomainError(f"Time must be positive, got {t}.")
    name = _model_name(model)
    n_terms = dist.index_beyond(truncation / t)
    x = dist.pmf_array(n_terms) * t
    f = _active_fraction(name, x)
    value = math.fsum(summand(f))
    # Omitted terms are bounded by their means, sum_{k > K} p_k t.
    error = dist.tail(n_terms) * t
    return AnalyticReport(quantity, value, error,
                          details={"model": name, "t": float(t), "terms": int(n_terms)})


def expected_active(dist, model, t,
                    truncation = config.get("analytics.series_truncation")):
    """
    E N_t = sum_k f(p_k t), the mean number of active bits at time t.

    The series stops at the first K with Q_K * t < ``truncation``;
    ``error_estimate`` is Q_K * t.
    """
    return _series("expected_active", dist, model, t, truncation, lambda f: f)


def variance_active(dist, model, t,
                    truncation = config.get("analytics.series_truncation")):
    """Var N_t = sum_k f(p_k t) (1 - f(p_k t)), truncated as :func:`expected_active`."""
    return _series("variance_active", dist, model, t, truncation, lambda f: f * (1.0 - f))


def _log_occupancy_terms(name, x):
    if name == "bf":
        return np.log1p(np.expm1(-2.0 * x) / 2.0)
    return np.log1p(-x * np.exp(-x))


def _occupancy(name, p):
    def integrand(t):
        if t <= 0.0:
            return 1.0
        return math.exp(math.fsum(_log_occupancy_terms(name, p * t)))
    return integrand


def occupancy_integrand(dist, model, t,
                        truncation = config.get("analytics.product_truncation")):
    """
    Probability that no bit is active at time t.

    BF: prod_k (1 + e^{-2 p_k t}) / 2. DB: prod_k (1 - p_k t e^{-p_k t}).
    The product is accumulated in log space over the bits with
    Q_K * t >= ``truncation``.

    Examples
    --------
    >>> occupancy_integrand(BitDistribution.geometric(0.5), "bf", 0.0)
    1.0
    """
    name = _model_name(model)
    if t < 0.0:
        raise DomainError(f"Time must be non-negative, got {t}.")
    if t == 0.0:
        return 1.0
    p = dist.pmf_array(dist.index_beyond(truncation / t))
    return _occupancy(name, p)(float(t))


def _integrate(function, t_max, tol, epsabs, limit):
    """Quadrature on [0, min(1, t_max)] plus s = log t on [0, log t_max]."""
    head, head_error = quad(function, 0.0, min(1.0, t_max),
                            epsabs=epsabs, epsrel=tol, limit=limit)
    if t_max <= 1.0:
        return head, head_error

    def stretched(s):
        t = math.exp(s)
        return function(t) * t

    tail, tail_error = quad(stretched, 0.0, math.log(t_max),
                            epsabs=epsabs, epsrel=tol, limit=limit)
    return head + tail, head_error + tail_error


def _ground_occupancy(quantity, name, dist, verdict, t_max, tol):
    truncation = config.get("analytics.product_truncation")
    p = dist.pmf_array(dist.index_beyond(truncation / t_max))
    integrand = _occupancy(name, p)

    logger.info("Integrating the %s ground-state occupancy up to t = %g...", name.upper(), t_max)
    value, error = _integrate(integrand, t_max, tol,
                              config.get("analytics.epsabs"),
                              config.get("analytics.quad_limit"))
    # Dropped factors change log(integrand) by at most Q_K * t <= truncation.
    error += value * truncation
    details = {"model": name, "verdict": verdict.value, "t_max": float(t_max), "terms": int(len(p))}

    if verdict is Verdict.RECURRENT:
        logger.info("...done! The integral diverges; %g is a partial value.", value)
        return AnalyticReport(quantity, value, error, diverged=True, details=details)

    at_end = integrand(t_max)
    if name == "bf" and dist.family is Family.GEOMETRIC:
        # The decay exponent exceeds 1 only for eps < 2 - 1/p.
        epsilon = min(config.get("analytics.sandwich_epsilon"), (2.0 - 1.0 / dist.p) / 2.0)
        exponent = math.log(2.0 - epsilon) / math.log(1.0 / dist.p)
        tail = at_end * t_max / (exponent - 1.0)
        details.update(tail_exponent=exponent, sandwich_epsilon=epsilon, tail_bounded=True)
    else:
        tail = at_end * t_max
        details["tail_bounded"] = False
    details["tail"] = tail

    value += tail
    error += tail
    if error > tol * max(value, 1.0):
        logger.warning("%s: error estimate %.3g exceeds the tolerance; raise t_max.", quantity, error)
    logger.info("...done!")
    return AnalyticReport(quantity, value, error, diverged=False, details=details)


def ground_occupancy_bf(dist,
                        t_max = config.get("analytics.t_max"),
                        tol = config.get("analytics.tolerance")):
    """
    Expected total time the continuous-time BF chain spends at the ground
    state, int_0^inf prod_k (1 + e^{-2 p_k t}) / 2 dt.

    The integral is finite exactly when the chain is transient, so a
    recurrent verdict of :func:`classify_bf` marks the report as diverged.
    For transient geometric laws the part beyond ``t_max`` is added from
    the power-law decay t^{-log(2 - eps)/log(1/p)} of the integrand, with
    eps capped at (2 - 1/p) / 2 when p is close to 1/2; for
    other families a crude Phi(t_max) * t_max term is added and flagged
    with ``details["tail_bounded"] = False``.

    Parameters
    ----------
    dist : BitDistribution
    t_max : float
        End of the numerical integration.
    tol : float
        Relative quadrature tolerance.

    Returns
    -------
    AnalyticReport
    """
    return _ground_occupancy("ground_occupancy_bf", "bf", dist, classify_bf(dist), t_max, tol)


def ground_occupancy_db(dist,
                        t_max = config.get("analytics.t_max"),
                        tol = config.get("analytics.tolerance")):
    """
    Expected total time the continuous-time DB chain spends with no active
    bit, int_0^inf prod_k (1 - p_k t e^{-p_k t}) dt.

    Diverged when :func:`classify_db` says recurrent; an undetermined
    verdict is integrated numerically like a transient one.
    """
    return _ground_occupancy("ground_occupancy_db", "db", dist, classify_db(dist), t_max, tol)


def moment_bounds(p):
    """
    Moment exponents of tau_BF under Geometric(p).

    Raises
    ------
    DomainError
        If p is outside (0, 1/2).

    Examples
    --------
    >>> moment_bounds(0.25).r_lower
    0.5
    """
    if not 0.0 < p < 0.5:
        raise DomainError(f"Moment bounds need p in (0, 1/2), got {p}.")
    scale = -math.log(p)
    return MomentBounds(p=float(p),
                        r_lower=1.0 - math.log(2.0) / scale,
                        r_upper=1.0 - math.log(2.0 - p) / scale)


def bk_given_ak(dist, k,
                tol = config.get("analytics.tolerance")):
    """
    Probability that every bit j <= k is hit at least twice before the
    first flip beyond k, given that a flip beyond k happens.

    Evaluates int_0^inf prod_{j <= k} (1 - g(p_j t / Q_k)) e^{-t} dt with
    g(x) = (1 + x) e^{-x}.

    Raises
    ------
    DomainError
        If k < 1 or Q_k = 0.
    """
    if k < 1:
        raise DomainError(f"Bit index must be at least 1, got {k}.")
    tail = dist.tail(k)
    if tail <= 0.0:
        raise DomainError(f"Q_{k} = 0: no flip can land beyond bit {k}.")
    rates = dist.pmf_array(k) / tail

    def integrand(t):
        if t <= 0.0:
            return 0.0
        factors = gammainc(2.0, rates * t)
        if np.any(factors <= 0.0):
            return 0.0
        return math.exp(math.fsum(np.log(factors)) - t)

    value, _ = quad(integrand, 0.0, np.inf,
                    epsabs=config.get("analytics.epsabs"), epsrel=tol,
                    limit=config.get("analytics.quad_limit"))
    return value


def band_count(dist, t, l1, l2):
    """
    Number of bits with l1 <= p_k t <= l2.

    Returns
    -------
    BandCount
        The exact count by enumeration and, for stretched-exponential laws,
        the asymptotic estimate
        (log l2 - log l1) / (gamma alpha^{1/gamma - 1}) (log(tC))^{1/gamma - 1}
        with C the normaliser of the family (None for other families).

    Examples
    --------
    >>> band_count(BitDistribution.geometric(0.5), 16.0, 0.5, 2.0).exact
    3
    """
    if not 0.0 < l1 < l2:
        raise DomainError(f"Band limits need 0 < l1 < l2, got [{l1}, {l2}].")
    if not t > 0.0:
        raise DomainError(f"Time must be positive, got {t}.")

    # p_{n+1} <= Q_n < l1 / t, so no index past n can fall in the band.
    n = dist.support_size or dist.index_beyond(l1 / t)
    x = dist.pmf_array(n) * t
    exact = int(np.count_nonzero((x >= l1) & (x <= l2)))

    asymptotic = None
    if dist.family is Family.STRETCHED_EXP:
        gamma, alpha = dist.gamma, dist.alpha
        scale = math.log(t * dist._normalizer)
        asymptotic = 0.0
        if scale > 0.0:
            asymptotic = ((math.log(l2) - math.log(l1)) / (gamma * alpha**(1.0 / gamma - 1.0))
                          * scale**(1.0 / gamma - 1.0))
    return BandCount(exact, asymptotic)


def integrand_slope(dist, model, t_lo = 1e2, t_hi = 1e6, n_points = 41):
    """
    Log-log slope of the occupancy integrand over [t_lo, t_hi].

    For a BF chain with geometric law the integrand is squeezed between
    t^{-log 2/log(1/p)} and t^{-log(2 - eps)/log(1/p)}; that window is
    returned with the fit, otherwise ``window`` is None.

    Returns
    -------
    SlopeFit
    """
    if not 0.0 < t_lo < t_hi:
        raise DomainError(f"Slope window needs 0 < t_lo < t_hi, got [{t_lo}, {t_hi}].")
    name = _model_name(model)
    truncation = config.get("analytics.product_truncation")
    p = dist.pmf_array(dist.index_beyond(truncation / t_hi))

    t = np.logspace(math.log10(t_lo), math.log10(t_hi), n_points)
    log_phi = np.array([math.fsum(_log_occupancy_terms(name, p * s)) for s in t])
    slope, _, stderr = fit_line(np.log(t), log_phi)

    window = None
    if name == "bf" and dist.family is Family.GEOMETRIC:
        scale = math.log(1.0 / dist.p)
        epsilon = config.get("analytics.sandwich_epsilon")
        window = (-math.log(2.0) / scale, -math.log(2.0 - epsilon) / scale)
    return SlopeFit(slope, stderr, window)
