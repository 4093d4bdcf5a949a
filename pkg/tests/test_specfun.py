import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from conftest import mp_prabhakar
from fracqueue.errors import ParameterError
from fracqueue.rng import RngStream, sample_ml_sojourn
from fracqueue.specfun import (EULER_GAMMA, ZETA3, MLParams, log_ml_moments, ml, ml_cdf,
                               ml_neg, ml_survival, prabhakar_ladder, rl_fractional_integral)


def test_constants():
    assert EULER_GAMMA == pytest.approx(float(mpmath.euler), abs=1e-15)
    assert ZETA3 == pytest.approx(float(mpmath.zeta(3)), abs=1e-15)


def test_ml_exponential_identity_prabhakar():
    # E^2_{1,2}(w) = e^w / Gamma(2)
    assert ml(MLParams(1.0, 2.0, 2.0), 0.7) == pytest.approx(math.exp(0.7), rel=1e-13)


def test_ml_zero_argument():
    assert ml(MLParams(1.0, 1.0, 1.0), 0.0) == 1.0
    assert ml(MLParams(0.5, 3.0, 2.0), 0.0) == pytest.approx(1 / math.gamma(3.0), rel=1e-15)


def test_ml_half_half_against_500_term_series():
    with mpmath.workdps(50):
        ref = mpmath.fsum((-1) ** r * mpmath.rgamma(mpmath.mpf(r) / 2 + mpmath.mpf(1) / 2)
                          for r in range(500))
    assert ml(MLParams(0.5, 0.5, 1.0), -1.0) == pytest.approx(float(ref), rel=1e-12)


def test_ml_rejects_bad_params():
    with pytest.raises(ParameterError):
        MLParams(0.0, 1.0, 1.0)
    with pytest.raises(ParameterError):
        MLParams(0.5, 1.0, -1.0)
    with pytest.raises(ParameterError):
        ml(MLParams(0.5), float("inf"))


@pytest.mark.parametrize("w", np.linspace(-30, 30, 25))
def test_ml_reduces_to_exp(w):
    assert ml(MLParams(1.0, 1.0, 1.0), w) == pytest.approx(math.exp(w), rel=1e-12)


@pytest.mark.parametrize("beta,gamma,delta,w", [
    (0.9, 0.9, 1.0, -55.0),
    (0.6, 4.0, 5.0, -4.0),
    (0.3, 1.3, 3.0, -2.0),
    (0.6, 0.6, 1.0, -10.0),
    (0.75, 1.0, 1.0, 12.0),
    (1.5, 2.0, 1.0, -20.0),
])
def test_ml_against_mpmath_reference(beta, gamma, delta, w):
    ref = float(mp_prabhakar(beta, gamma, delta, w))
    assert ml(MLParams(beta, gamma, delta), w) == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("w", [-0.3, -3.0, -9.5, -20.0, -35.0, -49.0, -49.9, -80.0])
def test_ml_half_against_erfc_closed_form(w):
    # E_{1/2,1}(w) = exp(w^2) erfc(-w); covers the band just inside the asymptotic switch
    ref = float(mpmath.exp(mpmath.mpf(w) ** 2) * mpmath.erfc(-mpmath.mpf(w)))
    assert ml(MLParams(0.5, 1.0, 1.0), w) == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("alpha", [0.3, 0.6, 0.8, 0.9, 0.99])
def test_ml_neg_against_mpmath_reference(alpha):
    xs = [x for x in (0.5, 2.0, 5.0, 12.0, 20.0, 49.0, 60.0, 100.0) if x ** (1 / alpha) < 1500]
    got = ml_neg(alpha, np.array(xs))
    for x, v in zip(xs, got):
        ref = float(mp_prabhakar(alpha, 1.0, 1.0, -x))
        assert v == pytest.approx(ref, rel=1e-12), x


@pytest.mark.parametrize("alpha", [0.3, 0.6, 0.9])
def test_ml_neg_completely_monotone_on_grid(alpha):
    x = np.linspace(0, 200, 2001)
    v = ml_neg(alpha, x)
    assert np.all(v >= 0)
    assert np.all(np.diff(v) <= 0)


def test_ml_survival_examples():
    assert ml_survival(1.0, 2.0, 1.0) == pytest.approx(math.exp(-2.0), rel=1e-13)
    assert ml_survival(0.6, 1.0, 0.0) == 1.0
    assert ml_survival(0.6, 1.0, 3.0) == pytest.approx(ml(MLParams(0.6), -(3.0 ** 0.6)), rel=1e-13)


@settings(max_examples=30, deadline=None)
@given(alpha=st.floats(0.05, 1.0), rate=st.floats(1e-3, 1e3))
def test_ml_survival_maps_into_unit_interval_and_decreases(alpha, rate):
    t = np.geomspace(1e-6, 1e6, 60)
    v = ml_survival(alpha, rate, t)
    assert np.all((v >= 0) & (v <= 1))
    assert np.all(np.diff(v) <= 1e-15)


def test_ml_survival_parameter_errors():
    with pytest.raises(ParameterError):
        ml_survival(1.2, 1.0, 1.0)
    with pytest.raises(ParameterError):
        ml_survival(0.0, 1.0, 1.0)


def test_ml_cdf_is_complement():
    t = np.array([0.1, 1.0, 10.0])
    assert np.allclose(ml_cdf(0.7, 2.0, t) + ml_survival(0.7, 2.0, t), 1.0, atol=1e-15)


def test_rl_integral_examples():
    assert rl_fractional_integral(lambda y: np.ones_like(y), 0.5, 1.0) == pytest.approx(2 / math.sqrt(math.pi), abs=1e-12)
    assert rl_fractional_integral(lambda y: np.zeros_like(y), 0.3, 2.5) == 0.0
    assert rl_fractional_integral(lambda y: y, 0.5, 1.0) == pytest.approx(1 / math.gamma(2.5), abs=1e-12)


def test_rl_integral_against_adaptive_quadrature():
    f = lambda y: np.cos(3 * y) + y ** 2
    alpha, t = 0.35, 2.0
    ref, _ = integrate.quad(lambda y: f(y), 0, t, weight="alg", wvar=(0, alpha - 1))
    assert rl_fractional_integral(f, alpha, t) == pytest.approx(ref / math.gamma(alpha), abs=1e-8)


def test_rl_integral_of_ml_type_function_with_grading():
    # J^a[E_a(-y^a)] = t^a E_{a, a+1}(-t^a)
    a, t = 0.6, 1.7
    f = lambda y: ml_neg(a, np.asarray(y) ** a)
    expected = t ** a * ml(MLParams(a, a + 1.0), -(t ** a))
    assert rl_fractional_integral(f, a, t, grading=a) == pytest.approx(expected, abs=1e-8)


@settings(max_examples=25, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3), alpha=st.floats(0.1, 1.0), t=st.floats(0.1, 5.0))
def test_rl_integral_is_linear(a, b, alpha, t):
    f = lambda y: np.sin(y)
    g = lambda y: np.exp(-y)
    lhs = rl_fractional_integral(lambda y: a * f(y) + b * g(y), alpha, t)
    rhs = a * rl_fractional_integral(f, alpha, t) + b * rl_fractional_integral(g, alpha, t)
    assert lhs == pytest.approx(rhs, abs=1e-10)


def test_rl_integral_rejects_nonpositive_alpha():
    with pytest.raises(ParameterError):
        rl_fractional_integral(np.ones_like, 0.0, 1.0)


def test_log_ml_moments_examples():
    m, v = log_ml_moments(1.0, 1.0)
    assert m == pytest.approx(-EULER_GAMMA, abs=1e-15)
    assert v == pytest.approx(math.pi ** 2 / 6, rel=1e-15)
    assert log_ml_moments(0.5, 1.0)[1] == pytest.approx(11.5145378, abs=1e-6)
    assert log_ml_moments(0.25, 7.0)[0] == pytest.approx(-4 * math.log(7) - EULER_GAMMA, abs=1e-12)


def test_log_ml_moments_against_monte_carlo():
    alpha, rate = 0.25, 7.0
    y = np.log(sample_ml_sojourn(RngStream(11, 0), alpha, rate, 10 ** 6))
    mean, var = log_ml_moments(alpha, rate)
    se = math.sqrt(var / y.size)
    assert abs(y.mean() - mean) < 4 * se
    assert y.var() == pytest.approx(var, rel=0.02)


@pytest.mark.parametrize("alpha,x,n", [(0.5, 2.0, 40), (0.6, 3.94, 60), (0.9, 100.0, 300), (0.6, 23.77, 250)])
def test_prabhakar_ladder_is_a_pmf_and_matches_reference(alpha, x, n):
    q = prabhakar_ladder(alpha, x, n)
    assert np.all(q >= 0)
    assert q.sum() <= 1 + 1e-13
    for N in (0, 1, n // 3, n // 2):
        ref = float(mpmath.mpf(x) ** N * mp_prabhakar(alpha, alpha * N + 1, N + 1, -x))
        assert q[N] == pytest.approx(ref, rel=1e-10, abs=1e-300)


def test_prabhakar_ladder_alpha_one_is_poisson():
    from scipy import stats
    assert np.allclose(prabhakar_ladder(1.0, 3.3, 30), stats.poisson.pmf(np.arange(31), 3.3), rtol=1e-14)


def test_prabhakar_ladder_mass_for_small_x():
    assert prabhakar_ladder(0.6, 1.0, 200).sum() == pytest.approx(1.0, abs=1e-14)
