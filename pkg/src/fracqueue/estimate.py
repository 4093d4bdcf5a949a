"""Closed-form estimators for (alpha, lambda, mu) from Mittag-Leffler sojourns.

If ``S`` is Mittag-Leffler with rate ``r`` then ``ln S = -ln(r)/alpha + e``
where the error ``e = ln(E^{1/alpha} T_alpha) + gamma`` has mean zero and
variance ``pi^2 (1/(3 alpha^2) - 1/6)``; it depends on ``alpha`` only.

* Linear process (rate ``theta k`` in state ``k``): regress ``ln S`` on
  ``ln k``; the residual variance gives ``alpha`` and the intercept gives
  ``theta``.
* Queue (rate ``theta`` in every state ``k >= 1``): the sample variance and
  mean of ``ln S`` give ``alpha`` and ``theta`` directly.

In both cases ``lambda = p theta`` and ``mu = (1 - p) theta`` with ``p`` the
observed fraction of births.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy import special

from .errors import DegenerateDataError, IllConditionedError, InsufficientDataError, ParameterError
from .rng import RngStream, sample_ml_sojourn
from .sim import SojournData
from .specfun import EULER_GAMMA, ZETA3

LINEAR = "linear_bd"
MM1 = "mm1"


@dataclass(frozen=True)
class RegressionFit:
    """Least-squares fit of ``ln S`` on ``ln k``."""

    b0_hat: float
    b1_hat: float
    residuals: np.ndarray = field(repr=False)
    sigma2_eps_hat: float
    ln_k_bar: float
    s_xx: float


@dataclass(frozen=True)
class EstimationResult:
    alpha_hat: float
    theta_hat: float
    lambda_hat: float
    mu_hat: float
    p_hat: float
    se_alpha: float
    se_lambda: float
    se_mu: float
    ci_alpha: tuple
    ci_lambda: tuple
    ci_mu: tuple
    model: str
    n: int
    n_births: int
    level: float
    sigma2_theta: float
    exclude_zero_state: Optional[bool] = None
    regression: Optional[RegressionFit] = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("regression")
        for key in ("ci_alpha", "ci_lambda", "ci_mu"):
            d[key] = list(d[key])
        return d


def normal_quantile(level: float) -> float:
    """Two-sided critical value ``z`` with ``P(|Z| <= z) = level``."""
    if not 0.0 < level <= 1.0:
        raise ParameterError(f"level must lie in (0, 1], got {level}")
    return float(special.ndtri(0.5 + 0.5 * level))


def _interval(center, se, z):
    if math.isinf(z):
        return (-math.inf, math.inf)
    return (center - z * se, center + z * se)


def alpha_from_log_variance(var: float) -> float:
    """Invert ``var = pi^2 (1/(3 a^2) - 1/6)`` for ``a``."""
    return math.pi / math.sqrt(3.0 * (var + math.pi ** 2 / 6.0))


def interval_alpha(alpha_hat: float, n: int, level: float = 0.95):
    """Normal-theory interval for ``alpha``.

    Uses the asymptotic variance ``alpha^2 (32 - 20 alpha^2 - alpha^4) / 40``
    per observation with ``alpha = min(alpha_hat, 1)``. Returns
    ``(interval, standard_error)``.
    """
    if not alpha_hat > 0:
        raise ParameterError("alpha_hat must be positive")
    if n < 2:
        raise InsufficientDataError("need n >= 2")
    # alpha_hat > 1 is reported as is, but the variance is evaluated at the
    # nearest admissible alpha, where it stays positive
    a2 = min(alpha_hat, 1.0) ** 2
    var1 = a2 * (32.0 - 20.0 * a2 - a2 * a2) / 40.0
    se = math.sqrt(var1 / n)
    return _interval(alpha_hat, se, normal_quantile(level)), se


def sigma2_theta_mm1(alpha: float, theta: float) -> float:
    """Asymptotic variance of ``sqrt(n) (theta_hat - theta)`` for IID sojourns."""
    L = math.log(theta)
    a2 = alpha * alpha
    num = (20.0 * math.pi ** 4 * (2.0 - a2)
           - 3.0 * math.pi ** 2 * (a2 * a2 + 20.0 * a2 - 32.0) * L * L
           - 720.0 * alpha ** 3 * L * ZETA3)
    return theta * theta * num / (120.0 * math.pi ** 2)


def sigma2_theta_linear(alpha: float, theta: float, fit: RegressionFit, n: int,
                        form: str = "effective") -> float:
    """Variance term for ``theta_hat`` in the linear-process rate intervals.

    ``form="effective"`` (default) evaluates the IID formula at the effective
    log-rate ``ln theta + mean(ln k)``, which is the rate the average sojourn
    actually sees. ``form="regression"`` is the regression-based expression
    ``e^{-2a(b0+g)} (b0+g)^2 [a^2(32-20a^2-a^4)/40 + n a^2 s2 (1/n + kbar^2/s)]``;
    it is known to over-cover badly at the usual sample sizes.
    """
    if form == "effective":
        return sigma2_theta_mm1(alpha, theta * math.exp(fit.ln_k_bar)) * math.exp(-2.0 * fit.ln_k_bar)
    if form == "regression":
        b = -math.log(theta) / alpha - EULER_GAMMA  # intercept consistent with theta_hat
        c = b + EULER_GAMMA
        a2 = alpha * alpha
        bracket = (a2 * (32.0 - 20.0 * a2 - a2 * a2) / 40.0
                   + n * a2 * fit.sigma2_eps_hat * (1.0 / n + fit.ln_k_bar ** 2 / fit.s_xx))
        return math.exp(-2.0 * alpha * c) * c * c * bracket
    raise ParameterError(f"unknown sigma_theta form {form!r}")


def _split(theta, p):
    """``(lambda, mu)`` with ``lambda + mu == theta`` exactly in floating point.

    ``lambda = p theta`` up to one ulp: when ``p theta`` carries a half-ulp
    bit of ``theta`` every candidate sum is a rounding tie, and ``lambda``
    has to move by one ulp for an exact split to exist.
    """
    lam0 = p * theta
    for dl in (0, 1, -1):
        lam = lam0
        if dl:
            lam = float(np.nextafter(lam0, math.inf if dl > 0 else -math.inf))
        if not 0.0 <= lam <= theta:
            continue
        mu0 = theta - lam
        for dm in (0, 1, -1, 2, -2):
            mu = mu0
            for _ in range(abs(dm)):
                mu = float(np.nextafter(mu, math.inf if dm > 0 else -math.inf))
            if mu >= 0.0 and lam + mu == theta:
                return lam, mu
    return lam0, theta - lam0


def _rate_intervals(theta, p, sigma2_theta, n, level):
    q = 1.0 - p
    se_l = math.sqrt((theta * theta * p * q + p * p * sigma2_theta) / n)
    # q^2 in the binomial part is kept as printed for the mu interval
    se_m = math.sqrt((theta * theta * p * q * q + q * q * sigma2_theta) / n)
    z = normal_quantile(level)
    lam, mu = _split(theta, p)
    return _interval(lam, se_l, z), _interval(mu, se_m, z), se_l, se_m


def regress(data: SojournData) -> RegressionFit:
    """Least squares of ``ln S`` on ``ln k`` with residual variance over ``n - 2``."""
    n = data.n
    if n < 3:
        raise InsufficientDataError(f"need at least 3 sojourns, got {n}")
    if np.any(data.states < 1):
        raise ParameterError("linear-process sojourns must start in a state k >= 1")
    x = np.log(data.states.astype(float))
    y = np.log(data.durations)
    xbar = float(x.mean())
    dx = x - xbar
    s_xx = float(dx @ dx)
    if s_xx == 0.0:
        raise IllConditionedError("all sojourns start in the same state; slope not identified")
    b1 = float(dx @ y) / s_xx
    b0 = float(y.mean()) - b1 * xbar
    res = y - b0 - b1 * x
    s2 = float(res @ res) / (n - 2)
    res.setflags(write=False)
    return RegressionFit(b0, b1, res, s2, xbar, s_xx)


def fit_linear_bd(data: SojournData, level: float = 0.95, *, sigma_theta: str = "effective") -> EstimationResult:
    """Estimate ``(alpha, lambda, mu)`` from linear birth-death sojourns.

    The least-squares intercept is replaced by ``mean(ln S + ln k / alpha_hat)``,
    the intercept implied by the known slope ``-1/alpha``, which is less
    variable in small samples.

    Parameters
    ----------
    data : SojournData
        Sojourns with ``states >= 1``.
    level : float
        Confidence level of the intervals.
    sigma_theta : {"effective", "regression"}
        Variance term used in the rate intervals, see :func:`sigma2_theta_linear`.
    """
    fit = regress(data)
    n = data.n
    alpha = alpha_from_log_variance(fit.sigma2_eps_hat)
    x = np.log(data.states.astype(float))
    y = np.log(data.durations)
    b0 = float(np.mean(y + x / alpha))
    theta = math.exp(-alpha * (b0 + EULER_GAMMA))
    p = data.n_births / n
    lam, mu = _split(theta, p)
    ci_a, se_a = interval_alpha(alpha, n, level)
    s2t = sigma2_theta_linear(min(alpha, 1.0), theta, fit, n, sigma_theta)
    ci_l, ci_m, se_l, se_m = _rate_intervals(theta, p, s2t, n, level)
    return EstimationResult(alpha, theta, lam, mu, p, se_a, se_l, se_m,
                            ci_a, ci_l, ci_m, LINEAR, n, data.n_births, level, s2t,
                            None, fit)


def fit_mm1(data: SojournData, level: float = 0.95, exclude_zero_state: bool = True) -> EstimationResult:
    """Method-of-moments estimates for the queue from the log-sojourn mean and variance.

    Sojourns in state 0 have rate ``lambda`` rather than ``theta``; with
    ``exclude_zero_state`` (default) they are dropped before estimation.
    """
    if exclude_zero_state:
        data = data.without_state(0)
    n = data.n
    if n < 2:
        raise InsufficientDataError(f"need at least 2 sojourns, got {n}")
    y = np.log(data.durations)
    var = float(np.var(y, ddof=1))
    if var == 0.0:
        raise DegenerateDataError("log-durations have zero variance")
    alpha = alpha_from_log_variance(var)
    theta = math.exp(-alpha * (float(y.mean()) + EULER_GAMMA))
    p = data.n_births / n
    lam, mu = _split(theta, p)
    ci_a, se_a = interval_alpha(alpha, n, level)
    s2t = sigma2_theta_mm1(min(alpha, 1.0), theta)
    ci_l, ci_m, se_l, se_m = _rate_intervals(theta, p, s2t, n, level)
    return EstimationResult(alpha, theta, lam, mu, p, se_a, se_l, se_m,
                            ci_a, ci_l, ci_m, MM1, n, data.n_births, level, s2t,
                            exclude_zero_state)


def interval_rates_linear(fit: RegressionFit, est: EstimationResult, n: int, level: float = 0.95,
                          form: str = "effective"):
    """``(ci_lambda, ci_mu)`` for the linear process at the given level."""
    s2t = sigma2_theta_linear(min(est.alpha_hat, 1.0), est.theta_hat, fit, n, form)
    ci_l, ci_m, _, _ = _rate_intervals(est.theta_hat, est.p_hat, s2t, n, level)
    return ci_l, ci_m


def interval_rates_mm1(est: EstimationResult, n: int, level: float = 0.95):
    """``(ci_lambda, ci_mu)`` for the queue at the given level."""
    s2t = sigma2_theta_mm1(min(est.alpha_hat, 1.0), est.theta_hat)
    ci_l, ci_m, _, _ = _rate_intervals(est.theta_hat, est.p_hat, s2t, n, level)
    return ci_l, ci_m


# ---------------------------------------------------------------------------
# goodness of fit
# ---------------------------------------------------------------------------

def ks_two_sample(x, y):
    """Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value."""
    x = np.sort(np.asarray(x, dtype=float))
    y = np.sort(np.asarray(y, dtype=float))
    n, m = len(x), len(y)
    if n == 0 or m == 0:
        raise InsufficientDataError("both samples must be non-empty")
    grid = np.concatenate([x, y])
    fx = np.searchsorted(x, grid, side="right") / n
    fy = np.searchsorted(y, grid, side="right") / m
    d = float(np.max(np.abs(fx - fy)))
    en = n * m / (n + m)
    return d, float(special.kolmogorov(math.sqrt(en) * d))


def log_error_sample(stream: RngStream, alpha: float, size: int) -> np.ndarray:
    """Draws of ``ln(E^{1/alpha} T_alpha) + gamma``, the centred log-sojourn error."""
    return np.log(sample_ml_sojourn(stream, min(alpha, 1.0), 1.0, size)) + EULER_GAMMA


def residuals(data: SojournData, est: EstimationResult) -> np.ndarray:
    """Observed errors: regression residuals (linear) or centred log-durations (queue)."""
    if est.model == LINEAR:
        return regress(data).residuals
    if est.exclude_zero_state:
        data = data.without_state(0)
    y = np.log(data.durations)
    return y - y.mean()


def rate_fit_test(data: SojournData, est: EstimationResult, m: int = 1000, level: float = 0.95,
                  seed: int = 0) -> float:
    """Share of ``m`` simulated error samples the KS test does not reject.

    Each simulated sample has the size of the observed residual vector and
    uses its own substream ``RngStream(seed, j)``. A sample is accepted when
    its p-value exceeds ``1 - level``.
    """
    if m < 1:
        raise ParameterError("m must be at least 1")
    res = residuals(data, est)
    accepted = 0
    for j in range(m):
        sim = log_error_sample(RngStream(seed, j), est.alpha_hat, len(res))
        _, pval = ks_two_sample(res, sim)
        accepted += pval > 1.0 - level
    return accepted / m
