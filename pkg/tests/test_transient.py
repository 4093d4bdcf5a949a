import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from scipy import integrate, sparse

from fracqueue.errors import (IllConditionedError, NoSteadyStateError, ParameterError,
                             UnsupportedParameterError)
from fracqueue.rng import RngStream
from fracqueue.sim import ModelParams, simulate_mm1_subordinated
from fracqueue.transient import (TransientQuery, invert_laplace, laplace_p0, mean_queue_length,
                                 probability, queue_roots, state_distribution, state_probability,
                                 state_probability_classical, steady_state)


def ode_transient(lam, mu, i, times, n_states=500):
    """Classical queue probabilities from the truncated forward equations."""
    up = np.full(n_states - 1, lam)
    down = np.full(n_states - 1, mu)
    out_rate = np.full(n_states, lam + mu)
    out_rate[0] = lam
    out_rate[-1] = mu
    gen_t = sparse.diags([up, -out_rate, down], [-1, 0, 1], format="csr")
    p0 = np.zeros(n_states)
    p0[i] = 1.0
    sol = integrate.solve_ivp(lambda _t, p: gen_t @ p, (0.0, max(times)), p0, method="Radau",
                              t_eval=sorted(times), rtol=1e-10, atol=1e-13,
                              jac=gen_t)
    return {t: sol.y[:, j] for j, t in enumerate(sorted(times))}


def test_ode_oracle_conserves_mass():
    res = ode_transient(0.5, 1.0, 2, [1.0, 5.0])
    assert res[5.0].sum() == pytest.approx(1.0, abs=1e-9)


# (mu/lambda)^i = 15^5 amplifies rounding in the last case, so it asks for 1e-8
@pytest.mark.parametrize("lam,mu,i,tol", [(0.5, 1.0, 2, 1e-10), (1.5, 1.0, 0, 1e-10), (0.2, 3.0, 5, 1e-8)])
def test_alpha_one_forms_match_ode(lam, mu, i, tol):
    times = [0.3, 1.0, 2.5, 5.0]
    ref = ode_transient(lam, mu, i, times)
    params = ModelParams(1.0, lam, mu, i)
    for t in times:
        for k in range(11):
            a = state_probability(TransientQuery(params, k, t, tol)).raw
            b = state_probability_classical(params, k, t)
            assert a == pytest.approx(b, abs=max(tol, 1e-8))
            assert a == pytest.approx(ref[t][k], abs=1e-6)


def test_time_zero_is_point_mass():
    params = ModelParams(0.6, 0.5, 1.0, 2)
    assert [probability(params, k, 0.0) for k in range(4)] == [0.0, 0.0, 1.0, 0.0]
    assert state_probability_classical(params, 2, 0.0) == 1.0


def test_initial_value_limit():
    params = ModelParams(0.6, 0.5, 1.0, 2)
    assert probability(params, 2, 1e-10) == pytest.approx(1.0, abs=1e-5)


@pytest.mark.parametrize("t", [0.5, 1.0, 2.0, 5.0])
def test_distribution_normalises(t):
    res = state_distribution(ModelParams(0.6, 0.5, 1.0, 2), t, mass_tol=1e-7)
    raw = np.array([r.raw for r in res])
    assert raw.min() >= -1e-10
    assert math.fsum(raw) >= 1 - 1e-7
    assert math.fsum(raw) <= 1 + 1e-8


@settings(max_examples=12, deadline=None)
@given(alpha=st.floats(0.3, 1.0), lam=st.floats(0.2, 3.0), ratio=st.floats(0.1, 0.95),
       i=st.integers(0, 4), t=st.floats(0.05, 4.0))
def test_probabilities_are_a_distribution(alpha, lam, ratio, i, t):
    params = ModelParams(alpha, lam, lam / ratio, i)
    # the exact ladder gets expensive for small alpha at large theta t^alpha
    assume(params.theta * t ** alpha <= 8.0)
    res = state_distribution(params, t, mass_tol=1e-6, tol=1e-10)
    raw = np.array([r.raw for r in res])
    assert raw.min() >= -1e-9
    assert math.fsum(raw) == pytest.approx(1.0, abs=1e-6)
    assert all(0.0 <= r.probability <= 1.0 for r in res)


@pytest.mark.parametrize("alpha", [0.5, 0.8])
def test_p0_matches_laplace_inversion(alpha):
    params = ModelParams(alpha, 0.5, 1.0, 2)
    for t in (0.5, 2.0, 5.0):
        inv = invert_laplace(lambda s: laplace_p0(params, s), t, method="talbot")
        assert probability(params, 0, t) == pytest.approx(inv, abs=1e-7)


def test_stehfest_on_classical_p0():
    # 14-term Gaver-Stehfest in double precision carries about 5 digits
    params = ModelParams(1.0, 0.5, 1.0, 2)
    for t in (0.5, 2.0):
        inv = invert_laplace(lambda s: laplace_p0(params, s), t)
        assert inv == pytest.approx(state_probability_classical(params, 0, t), abs=5e-5)


def test_invert_laplace_known_pairs():
    assert invert_laplace(lambda s: 1 / (s + 1), 1.3) == pytest.approx(math.exp(-1.3), rel=1e-5)
    assert invert_laplace(lambda s: 1 / (s * s + 1), 2.0, method="talbot") == pytest.approx(
        math.sin(2.0), abs=1e-8)
    with pytest.raises(ParameterError):
        invert_laplace(lambda s: 1 / s, 0.0)
    with pytest.raises(ParameterError):
        invert_laplace(lambda s: 1 / s, 1.0, method="euler")


def test_queue_roots_solve_the_quadratic():
    params = ModelParams(0.7, 0.5, 1.0)
    for s in (0.1, 1.0, 3 + 2j):
        a1, a2 = queue_roots(params, s)
        for z in (a1, a2):
            assert abs(z * s ** 0.7 - (1 - z) * (1.0 - 0.5 * z)) < 1e-12
        assert abs(a2) <= abs(a1)
        assert a1 * a2 == pytest.approx(1.0 / 0.5)
    assert abs(queue_roots(params, -1 + 0.5j)[1]) < 1
    with pytest.raises(ParameterError):
        queue_roots(params, -1.0)


@pytest.mark.parametrize("alpha,lam,mu,i,t", [(0.6, 0.5, 1.0, 2, 2.0), (0.7, 1.5, 1.0, 1, 1.0)])
def test_subordinated_monte_carlo(alpha, lam, mu, i, t):
    # second case is the unstable regime lambda > mu
    params = ModelParams(alpha, lam, mu, i)
    n = 40_000
    x = simulate_mm1_subordinated(params, RngStream(21, 0), t, size=n)
    for k in range(8):
        p = probability(params, k, t)
        se = math.sqrt(max(p * (1 - p), 1e-12) / n)
        assert abs(np.mean(x == k) - p) < 4 * se, k


def test_unstable_regime_is_flagged():
    res = state_probability(TransientQuery(ModelParams(0.7, 1.5, 1.0, 1), 0, 1.0))
    assert res.diagnostics["unstable_regime"] is True
    assert "raw_below_zero" in res.diagnostics


def test_long_time_limit_is_geometric():
    params = ModelParams(1.0, 0.5, 1.0, 2)
    # relaxation time 1/(sqrt(mu) - sqrt(lambda))^2 is about 12
    for k in range(5):
        assert probability(params, k, 300.0) == pytest.approx(steady_state(params, k), abs=1e-9)


def test_unattainable_tolerance_fails_fast():
    # lambda > mu amplifies rounding by rho^k, so large k cannot reach 1e-10
    query = TransientQuery(ModelParams(0.5, 3.0, 0.5, 4), 25, 4.0)
    with pytest.raises(IllConditionedError):
        state_probability(query)


def test_steady_state_requires_stability():
    assert steady_state(ModelParams(0.5, 1.0, 4.0), 2) == pytest.approx(0.75 * 0.25 ** 2)
    with pytest.raises(NoSteadyStateError):
        steady_state(ModelParams(0.5, 2.0, 1.0), 0)


def test_equal_rates_are_rejected():
    params = ModelParams(0.5, 1.0, 1.0)
    with pytest.raises(UnsupportedParameterError):
        TransientQuery(params, 0, 1.0)
    with pytest.raises(UnsupportedParameterError):
        state_probability_classical(params, 0, 1.0)


@pytest.mark.parametrize("kw", [dict(k=-1, t=1.0), dict(k=1.5, t=1.0), dict(k=0, t=-1.0),
                                dict(k=0, t=math.inf), dict(k=0, t=1.0, tol=0.0)])
def test_query_validation(kw):
    with pytest.raises(ParameterError):
        TransientQuery(ModelParams(0.5, 1.0, 2.0), **kw)


def test_truncation_bound_respects_tol():
    res = state_probability(TransientQuery(ModelParams(0.4, 2.0, 3.0, 1), 3, 4.0, tol=1e-12))
    assert res.truncation_bound < 1e-12
    assert res.terms_used % 64 == 0


def test_mean_queue_length_alpha_one_matches_distribution():
    params = ModelParams(1.0, 0.5, 1.0, 2)
    for t in (0.5, 2.0):
        res = state_distribution(params, t, mass_tol=1e-12)
        direct = math.fsum(k * r.raw for k, r in enumerate(res))
        assert mean_queue_length(params, t) == pytest.approx(direct, abs=1e-5)


def test_mean_queue_length_fractional_matches_distribution():
    params = ModelParams(0.6, 0.5, 1.0, 2)
    res = state_distribution(params, 2.0, mass_tol=1e-12)
    direct = math.fsum(k * r.raw for k, r in enumerate(res))
    assert mean_queue_length(params, 2.0) == pytest.approx(direct, abs=1e-5)
    assert mean_queue_length(params, 0.0) == 2.0
