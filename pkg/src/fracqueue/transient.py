"""Transient and stationary state probabilities of the fractional M/M/1 queue.

The fractional series is evaluated through the fractional Poisson pmf

    q_N(t) = x^N E^{N+1}_{alpha, alpha N + 1}(-x),   x = (lambda + mu) t^alpha,

which is what every generalised Mittag-Leffler term reduces to after pulling
out powers of ``lambda`` and ``mu``. Regrouping by ``N`` turns the weights into
binomial probabilities, so each term is bounded by ``q_N`` times an ``O(1)``
factor and the neglected tail is bounded by ``P(N_frac > N_max)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import special, stats

from .errors import (ConvergenceError, IllConditionedError, NoSteadyStateError, ParameterError,
                     UnsupportedParameterError)
from .sim import ModelParams
from .specfun import prabhakar_ladder, rl_fractional_integral

MAX_TERMS = 4096
_BUCKET = 64


@dataclass(frozen=True)
class TransientQuery:
    params: ModelParams
    k: int
    t: float
    tol: float = 1e-10

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 0:
            raise ParameterError(f"k must be a non-negative integer, got {self.k}")
        if not (self.t >= 0 and math.isfinite(self.t)):
            raise ParameterError(f"t must be finite and non-negative, got {self.t}")
        if not self.tol > 0:
            raise ParameterError("tol must be positive")
        _check_rates(self.params)


@dataclass(frozen=True)
class TransientResult:
    """Probability clamped to [0, 1]; ``raw`` keeps the unclamped series value."""

    probability: float
    terms_used: int
    truncation_bound: float
    raw: float
    diagnostics: dict = field(default_factory=dict)


def _check_rates(params):
    if params.lam == params.mu:
        raise UnsupportedParameterError("closed forms need lambda != mu")


def _frac_poisson_moments(alpha, x):
    m1 = x / special.gamma(1.0 + alpha)
    m2 = 2.0 * x * x / special.gamma(1.0 + 2.0 * alpha) + m1
    return m1, max(m2 - m1 * m1, 0.0)


def _bucket(n):
    return int(_BUCKET * math.ceil((n + 1) / _BUCKET)) - 1


def _series(params: ModelParams, k: int, q: np.ndarray):
    """Fractional series with the ladder ``q`` truncated at ``len(q) - 1``."""
    lam, mu, i = params.lam, params.mu, params.initial_state
    theta = lam + mu
    p_up, p_dn = lam / theta, mu / theta
    rho = lam / mu
    n_max = len(q) - 1

    # double sum, grouped by N = r + m >= 1 with weight q_{N-1}:
    # sum_{r >= a} (2r - N)/N * Bin(r; N, p) = 2p P(Bin(N-1, p) >= a-1) - P(Bin(N, p) >= a)
    N = np.arange(1, n_max + 2)
    a = np.maximum(0, np.ceil((N - k - i) / 2.0))
    inner = 2.0 * p_up * stats.binom.sf(a - 2, N - 1, p_up) - stats.binom.sf(a - 1, N, p_up)
    first = math.fsum(inner * q) * (theta / mu)

    # single sum over r with N = k + 2r - i in [0, n_max]
    r = np.arange(max(0, math.ceil((i - k) / 2.0)), (n_max - k + i) // 2 + 1)
    Nr = k + 2 * r - i
    w1 = stats.binom.pmf(r, Nr, p_dn)
    w2 = np.where(r >= i, np.exp(stats.binom.logpmf(r - i, Nr, p_dn) + i * math.log(mu / lam)), 0.0)
    second = math.fsum((w1 - w2) * q[Nr])

    steady = (1.0 - rho) * rho ** k
    value = math.fsum([steady, rho ** k * first, second])
    factor = rho ** k * theta / mu + 1.0 + (mu / lam) ** i
    return value, factor


def state_probability(query: TransientQuery) -> TransientResult:
    """``P(N(t) = k | N(0) = i)`` for the fractional queue.

    Raises
    ------
    UnsupportedParameterError
        If ``lambda == mu``.
    IllConditionedError
        If rounding alone puts the error bound above ``tol``; this happens for
        large ``k`` when ``lambda > mu`` and for large ``i`` when ``mu >> lambda``.
    ConvergenceError
        If the tail bound is still above ``tol`` at ``MAX_TERMS`` ladder terms.
    """
    params, k, t, tol = query.params, int(query.k), float(query.t), query.tol
    diag = {"unstable_regime": params.lam > params.mu}
    if t == 0.0:
        v = 1.0 if k == params.initial_state else 0.0
        return TransientResult(v, 0, 0.0, v, diag)
    rho = params.lam / params.mu
    factor = rho ** k * params.theta / params.mu + 1.0 + rho ** (-params.initial_state)
    if factor * 4 * np.finfo(float).eps >= tol:
        raise IllConditionedError(
            f"error amplification {factor:.3g} makes tol {tol:.3g} unattainable in double precision")
    alpha = params.alpha
    x = params.theta * t ** alpha
    mean, var = _frac_poisson_moments(alpha, x)
    n_max = _bucket(mean + 12.0 * math.sqrt(var) + k + params.initial_state + 20)
    while True:
        q = prabhakar_ladder(alpha, x, n_max)
        value, factor = _series(params, k, q)
        tail = max(1.0 - math.fsum(q), 0.0) + 4 * np.finfo(float).eps
        bound = factor * tail
        if bound < tol:
            break
        if n_max >= MAX_TERMS - 1:
            raise ConvergenceError(
                f"tail bound {bound:.3g} above tol {tol:.3g} after {n_max + 1} terms",
                partial=value, n_terms=n_max + 1)
        n_max = min(_bucket(2 * n_max + 1), MAX_TERMS - 1)
    diag["raw_below_zero"] = value < 0
    return TransientResult(min(max(value, 0.0), 1.0), n_max + 1, bound, value, diag)


def probability(params: ModelParams, k: int, t: float, tol: float = 1e-10) -> float:
    """Shorthand for ``state_probability(TransientQuery(...)).probability``."""
    return state_probability(TransientQuery(params, k, t, tol)).probability


def state_distribution(params: ModelParams, t: float, *, mass_tol: float = 1e-7,
                       tol: float = 1e-10, k_cap: int = 2000):
    """Probabilities ``p_0..p_K`` with ``K`` grown until the mass reaches ``1 - mass_tol``.

    Returns the list of :class:`TransientResult` so raw values stay visible.
    """
    out = []
    total = 0.0
    for k in range(k_cap + 1):
        res = state_probability(TransientQuery(params, k, t, tol))
        out.append(res)
        total += res.raw
        if k >= params.initial_state and total >= 1.0 - mass_tol:
            return out
    raise ConvergenceError(f"mass {total:.3g} after {k_cap + 1} states", partial=out, n_terms=k_cap + 1)


def _poisson_cut(m):
    # mean + 12 sd + 40 leaves a Poisson tail far below 1e-18
    return int(math.ceil(m + 12.0 * math.sqrt(m) + 40.0))


def state_probability_classical(params: ModelParams, k: int, t: float) -> float:
    """Classical (alpha = 1) transient probability as a double Poisson sum.

    ``params.alpha`` is ignored. Uses

        e^{-theta t} (lambda t)^r / r! = Pois(r; lambda t) e^{-mu t}

    to write every term with Poisson pmfs; sums run out to where the Poisson
    tails fall below 1e-18.
    """
    _check_rates(params)
    if k < 0 or t < 0:
        raise ParameterError("k and t must be non-negative")
    lam, mu, i = params.lam, params.mu, params.initial_state
    if t == 0.0:
        return 1.0 if k == i else 0.0
    rho = lam / mu
    lt, mt = lam * t, mu * t
    R = _poisson_cut(lt)
    M = _poisson_cut(mt)
    pr = stats.poisson.pmf(np.arange(R + 1), lt)
    pm = stats.poisson.pmf(np.arange(M + k + i + R + 2), mt)
    rr, mm = np.meshgrid(np.arange(R + 1), np.arange(M + 1), indexing="ij")
    mask = mm <= k + rr + i
    first = np.where(mask, (rr - mm) * pr[rr] * pm[mm], 0.0)
    first_sum = math.fsum(first.ravel()) / mt

    # second sum: index runs until both Poisson factors vanish
    r = np.arange(0, max(R, M) + i + 2)
    a1 = np.where(k + r - i >= 0, stats.poisson.pmf(k + r - i, lt), 0.0) * stats.poisson.pmf(r, mt)
    a2 = stats.poisson.pmf(k + r, lt) * np.where(r >= i, stats.poisson.pmf(r - i, mt), 0.0)
    second = math.fsum(a1) - rho ** (-i) * math.fsum(a2)
    return math.fsum([(1.0 - rho) * rho ** k, rho ** k * first_sum, second])


def steady_state(params: ModelParams, k: int) -> float:
    """Geometric stationary law ``(1 - rho) rho^k``, valid for ``lambda < mu``."""
    if params.lam >= params.mu:
        raise NoSteadyStateError("stationary law needs lambda < mu")
    if k < 0:
        raise ParameterError("k must be non-negative")
    rho = params.lam / params.mu
    return (1.0 - rho) * rho ** k


def mean_queue_length(params: ModelParams, t: float, tol: float = 1e-10, *, nodes: int = 32) -> float:
    """``E N(t) = i + (lambda - mu) t^alpha / Gamma(alpha + 1) + mu J^alpha[p_0](t)``.

    ``J^alpha`` is the Riemann-Liouville integral with kernel ``(t - y)^(alpha - 1)``;
    ``p_0`` is sampled at the quadrature nodes through :func:`state_probability`.
    """
    _check_rates(params)
    if t < 0:
        raise ParameterError("t must be non-negative")
    i, a = params.initial_state, params.alpha
    if t == 0.0:
        return float(i)

    def p0(y):
        return np.array([state_probability(TransientQuery(params, 0, float(v), tol)).raw
                         for v in np.atleast_1d(y)])

    integral = rl_fractional_integral(p0, a, t, nodes=nodes, grading=a)
    return i + (params.lam - params.mu) * t ** a / special.gamma(a + 1.0) + params.mu * integral


# ---------------------------------------------------------------------------
# Laplace domain
# ---------------------------------------------------------------------------

def queue_roots(params: ModelParams, s):
    """Roots ``(a1, a2)`` of ``z s^alpha - (1 - z)(mu - lambda z)`` with ``|a2| <= |a1|``.

    ``s`` may be any complex number off the branch cut ``(-inf, 0]`` of ``s^alpha``.
    """
    s = complex(s)
    if s.imag == 0.0 and s.real <= 0.0:
        raise ParameterError("Laplace variable must lie off the cut (-inf, 0]")
    lam, mu = params.lam, params.mu
    b = s ** params.alpha + lam + mu
    d = np.sqrt(complex(b * b - 4.0 * lam * mu))
    # pick the sign that avoids cancellation, then use a1 a2 = mu / lam
    big = b + d if abs(b + d) >= abs(b - d) else b - d
    a1 = big / (2.0 * lam)
    a2 = 2.0 * mu / big
    if abs(a2) > abs(a1):
        a1, a2 = a2, a1
    return a1, a2


def laplace_p0(params: ModelParams, s):
    """Laplace transform of ``p_0(t)``; real in, real out for real ``s``."""
    _, a2 = queue_roots(params, s)
    sc = complex(s)
    val = sc ** (params.alpha - 1.0) * a2 ** (params.initial_state + 1) / (params.mu * (1.0 - a2))
    if isinstance(s, complex) or np.iscomplexobj(s):
        return val
    return float(val.real)


def _stehfest_weights(n):
    half = n // 2
    w = []
    for k in range(1, n + 1):
        acc = Fraction(0)
        for j in range((k + 1) // 2, min(k, half) + 1):
            acc += Fraction(j ** half * math.factorial(2 * j),
                            math.factorial(half - j) * math.factorial(j) * math.factorial(j - 1)
                            * math.factorial(k - j) * math.factorial(2 * j - k))
        w.append(float((-1) ** (k + half) * acc))
    return w


_STEHFEST_14 = _stehfest_weights(14)


def _talbot(f, t, m=32):
    # fixed Talbot contour (Abate-Valko)
    r = 2.0 * m / (5.0 * t)
    total = 0.5 * math.exp(r * t) * complex(f(complex(r))).real
    for k in range(1, m):
        th = k * math.pi / m
        cot = math.cos(th) / math.sin(th)
        s = r * th * complex(cot, 1.0)
        sigma = th + (th * cot - 1.0) * cot
        total += (np.exp(t * s) * complex(f(s)) * complex(1.0, sigma)).real
    return r / m * total


def invert_laplace(f, t: float, method: str = "stehfest") -> float:
    """Numerical inverse Laplace transform at ``t > 0``.

    Gaver-Stehfest with 14 terms samples ``f`` on the positive real axis. If
    the weighted terms exceed the result by more than 1e10 (the signature of
    an oscillating or non-smooth target) the fixed Talbot contour is used,
    which needs ``f`` to accept complex arguments.
    """
    if not t > 0:
        raise ParameterError("t must be positive")
    if method == "talbot":
        return float(_talbot(f, t))
    if method != "stehfest":
        raise ParameterError(f"unknown method {method!r}")
    ln2t = math.log(2.0) / t
    terms = [w * float(f((k + 1) * ln2t)) for k, w in enumerate(_STEHFEST_14)]
    value = ln2t * math.fsum(terms)
    scale = ln2t * max(abs(v) for v in terms)
    if not math.isfinite(value) or scale > 1e10 * max(abs(value), 1e-300):
        try:
            return float(_talbot(f, t))
        except (TypeError, ValueError) as exc:
            raise ConvergenceError("Stehfest terms blew up and f rejects complex input",
                                   partial=value, n_terms=14) from exc
    return value
