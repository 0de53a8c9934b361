import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from discrete_asian.analytic import (
    build_cascade,
    call_values,
    cascade_price,
    gbm_call,
    gbm_put,
    normal_cdf,
    shifted_price,
    u_reduced,
    v_reduced,
)
from discrete_asian.exceptions.base_exceptions import DomainError, ExtrapolationError
from discrete_asian.market_model import compute_b, constant_drift, uniform_sampling, zero_drift
from discrete_asian.schema.configs import CascadeConfig
from discrete_asian.schema.market import DividendMeasure, MarketParams, StepDrift

spots = st.floats(min_value=0.01, max_value=10.0)
strikes = st.floats(min_value=0.01, max_value=10.0)
vols = st.floats(min_value=0.01, max_value=1.0)
horizons = st.floats(min_value=0.0, max_value=5.0)


@pytest.fixture
def params() -> MarketParams:
    return MarketParams(sigma=0.2, r=0.0, T=1.0, K=1.0)


@pytest.fixture
def two_step() -> StepDrift:
    return StepDrift(breakpoints=(0.5, 1.0), values=(1.0, 0.5, 0.0), maturity=1.0)


# ------------------------------
# normal_cdf
# ------------------------------
@pytest.mark.parametrize(
    "z, expected",
    [
        (0.0, 0.5),
        (40.0, 1.0),
        (-40.0, 0.0),
        (1.959963985, 0.975),
    ],
)
def test_normal_cdf_values(z, expected):
    assert normal_cdf(z) == pytest.approx(expected, abs=1e-9)


def test_normal_cdf_vectorized():
    out = normal_cdf(np.array([-1.0, 0.0, 1.0]))
    assert isinstance(out, np.ndarray)
    assert out[0] + out[2] == pytest.approx(1.0, abs=1e-15)


# ------------------------------
# gbm_call / gbm_put
# ------------------------------
def test_gbm_call_at_maturity_is_payoff():
    assert gbm_call(2.0, 1.0, 0.3, 0.0) == 1.0


def test_gbm_call_zero_spot_is_worthless():
    assert gbm_call(0.0, 1.0, 0.3, 1.0) == 0.0


def test_gbm_call_at_the_money():
    # d1 = 0.1, d2 = -0.1
    expected = 2.0 * normal_cdf(0.1) - 1.0
    assert gbm_call(1.0, 1.0, 0.2, 1.0) == pytest.approx(expected, rel=1e-14)


def test_gbm_call_nonpositive_strike_is_forward():
    assert gbm_call(2.0, -1.0, 0.3, 1.0) == pytest.approx(3.0)
    assert gbm_call(2.0, 0.0, 0.3, 1.0) == pytest.approx(2.0)


@pytest.mark.parametrize("K", [0.0, -1.0])
def test_call_values_scalar_spot_with_nonpositive_strike(K):
    out = call_values(2.0, K, 0.3)
    assert np.ndim(out) == 0
    assert float(out) == pytest.approx(2.0 - K, rel=1e-15)


def test_call_values_mixed_sign_spots_with_negative_strike():
    expected = gbm_put(1.0, 2.0, 0.2, 1.0)
    out = call_values(np.array([-1.0, 0.5]), -2.0, 0.2)
    assert out[0] == pytest.approx(expected, rel=1e-12)
    assert out[1] == pytest.approx(2.5, rel=1e-15)


def test_call_values_zero_strike_negative_spot_is_worthless():
    assert float(call_values(-1.0, 0.0, 0.2)) == 0.0


def test_gbm_call_rejects_negative_horizon():
    with pytest.raises(DomainError):
        gbm_call(1.0, 1.0, 0.2, -0.1)
    with pytest.raises(DomainError):
        gbm_put(1.0, 1.0, 0.2, -0.1)


def test_gbm_put_examples():
    assert gbm_put(2.0, 1.0, 0.3, 0.0) == 0.0
    assert gbm_put(1.0, 1.0, 0.2, 1.0) == pytest.approx(gbm_call(1.0, 1.0, 0.2, 1.0))
    assert gbm_put(0.5, 1.0, 0.2, 1.0) == pytest.approx(gbm_call(0.5, 1.0, 0.2, 1.0) + 0.5)


@settings(max_examples=300)
@given(x=spots, K=st.floats(min_value=-5.0, max_value=10.0), sigma=vols, tau=horizons)
def test_put_call_parity(x, K, sigma, tau):
    difference = gbm_call(x, K, sigma, tau) - gbm_put(x, K, sigma, tau)
    assert difference == pytest.approx(x - K, abs=1e-12)


@settings(max_examples=200)
@given(x=spots, K=strikes, sigma=vols, tau=horizons)
def test_gbm_call_no_arbitrage_bracket(x, K, sigma, tau):
    value = gbm_call(x, K, sigma, tau)
    assert value >= max(x - K, 0.0) - 1e-12
    assert value <= x + 1e-12
    assert gbm_put(x, K, sigma, tau) >= -1e-12


@settings(max_examples=200)
@given(x1=spots, x2=spots, K=strikes, sigma=vols, tau=horizons)
def test_gbm_call_nondecreasing_in_spot(x1, x2, K, sigma, tau):
    lo, hi = sorted((x1, x2))
    assert gbm_call(lo, K, sigma, tau) <= gbm_call(hi, K, sigma, tau) + 1e-12


@settings(max_examples=200)
@given(x=spots, K1=strikes, K2=strikes, sigma=vols, tau=horizons)
def test_gbm_call_nonincreasing_in_strike(x, K1, K2, sigma, tau):
    lo, hi = sorted((K1, K2))
    assert gbm_call(x, lo, sigma, tau) >= gbm_call(x, hi, sigma, tau) - 1e-12


@settings(max_examples=200)
@given(x=spots, K=strikes, sigma=vols, t1=horizons, t2=horizons)
def test_gbm_call_nondecreasing_in_horizon(x, K, sigma, t1, t2):
    lo, hi = sorted((t1, t2))
    assert gbm_call(x, K, sigma, lo) <= gbm_call(x, K, sigma, hi) + 1e-12


def test_call_values_negative_spot_and_strike_is_mirrored_put():
    s = 0.2
    expected = gbm_put(1.0, 2.0, 0.2, 1.0)
    assert float(call_values(-1.0, -2.0, s)) == pytest.approx(expected, rel=1e-13)


def test_call_values_zero_deviation_is_payoff():
    out = call_values(np.array([-1.0, 0.5, 2.0]), 1.0, 0.0)
    np.testing.assert_array_equal(out, [0.0, 0.0, 1.0])


# ------------------------------
# v_reduced / u_reduced / shifted_price
# ------------------------------
def test_v_reduced_terminal_condition():
    params = MarketParams(sigma=0.2, T=1.0, K=2.0)
    assert v_reduced(1.0, 3.0, params) == pytest.approx(1.0)


def test_v_reduced_vanishes_for_negative_spot_with_positive_strike():
    params = MarketParams(sigma=0.7, T=3.0, K=2.0)
    assert v_reduced(0.0, -1.0, params) == 0.0


def test_v_reduced_negative_strike_by_sign_flip():
    params = MarketParams(sigma=0.2, T=1.0, K=-2.0)
    assert v_reduced(0.0, -1.0, params) == pytest.approx(gbm_call(1.0, 2.0, 0.2, 1.0))


def test_v_reduced_negative_strike_vanishes_for_positive_spot():
    params = MarketParams(sigma=0.2, T=1.0, K=-2.0)
    assert v_reduced(0.0, 0.5, params) == 0.0


def test_reduced_values_reject_zero_strike():
    params = MarketParams(sigma=0.2, T=1.0, K=0.0)
    with pytest.raises(DomainError):
        v_reduced(0.0, 1.0, params)
    with pytest.raises(DomainError):
        u_reduced(0.0, 1.0, params)


def test_v_reduced_rejects_time_outside_horizon(params):
    with pytest.raises(DomainError):
        v_reduced(1.5, 1.0, params)


@settings(max_examples=200)
@given(
    t=st.floats(0.0, 1.0),
    x=st.floats(-5.0, 5.0),
    K=st.one_of(st.floats(0.05, 3.0), st.floats(-3.0, -0.05)),
)
def test_v_reduced_is_nonnegative_and_vanishes_across_zero(t, x, K):
    params = MarketParams(sigma=0.4, T=1.0, K=K)
    v = v_reduced(t, x, params)
    assert v >= 0.0
    if (K > 0 and x <= 0) or (K < 0 and x >= 0):
        assert v == 0.0


def test_u_reduced_examples(params):
    assert u_reduced(1.0, 0.5, params) == 0.0
    negative = params.with_strike(-1.0)
    assert u_reduced(0.0, 2.0, negative) == pytest.approx(3.0 + v_reduced(0.0, 2.0, negative))
    assert u_reduced(0.0, 1.0, params) == pytest.approx(gbm_call(1.0, 1.0, 0.2, 1.0))


@pytest.mark.parametrize("x", [-1.0, 0.5, 2.0])
@pytest.mark.parametrize("K", [1.0, -1.0])
def test_u_reduced_terminal_payoff(x, K):
    params = MarketParams(sigma=0.3, T=2.0, K=K)
    assert u_reduced(2.0, x, params) == max(x - K, 0.0)


def test_shifted_price_maps_to_reduced_problem(params):
    beta = 0.3
    expected = gbm_call(1.2 - beta, 1.0 - beta, 0.2, 1.0)
    assert shifted_price(0.0, 1.2, beta, params) == pytest.approx(expected, rel=1e-14)


def test_shifted_price_degenerate_strike_is_payoff(params):
    assert shifted_price(0.0, 1.4, 1.0, params) == pytest.approx(0.4)
    assert shifted_price(0.0, 0.6, 1.0, params) == 0.0


def test_shifted_price_strike_below_drift_level(params):
    beta = 1.5
    expected = 1.2 - 1.0  # K - beta < 0: x - K + put part
    value = shifted_price(0.0, 1.2, beta, params)
    assert value == pytest.approx(expected + v_reduced(0.0, 1.2 - beta, params.with_strike(-0.5)))


# ------------------------------
# Cascade
# ------------------------------
@pytest.mark.parametrize("K", [1.0, -0.5])
def test_cascade_without_sampling_dates_equals_closed_form(K):
    params = MarketParams(sigma=0.2, T=1.0, K=K)
    drift = zero_drift(1.0)
    for t in np.linspace(0.0, 1.0, 20):
        for x in np.linspace(0.1, 3.0, 20):
            value = cascade_price(float(t), float(x), drift, params)
            assert value == pytest.approx(u_reduced(float(t), float(x), params), abs=1e-8)


def test_cascade_constant_drift_is_shifted_closed_form(params):
    beta = 0.3
    drift = constant_drift(beta, 1.0)
    for x in (0.5, 1.0, 1.7):
        expected = gbm_call(x - beta, 1.0 - beta, 0.2, 1.0)
        assert cascade_price(0.0, x, drift, params) == pytest.approx(expected, abs=1e-12)


def test_cascade_two_atom_benchmark_at_first_level(two_step):
    # X stays at beta_1 = 1 until t = 1/2, then X - 1/2 is geometric
    params = MarketParams(sigma=0.2, T=1.0, K=0.8)
    expected = gbm_call(0.5, 0.3, 0.2, 0.5)
    assert cascade_price(0.0, 1.0, two_step, params) == pytest.approx(expected, rel=1e-12)


def test_cascade_stable_under_quadrature_order():
    params = MarketParams(sigma=0.3, T=1.0, K=0.8)
    drift = compute_b(params, DividendMeasure(), uniform_sampling(4, 1.0))
    coarse = cascade_price(0.0, 1.1, drift, params, CascadeConfig(quad_order=32))
    fine = cascade_price(0.0, 1.1, drift, params, CascadeConfig(quad_order=64))
    assert coarse == pytest.approx(fine, abs=1e-6)


def test_cascade_vectorized_prices_match_single_queries(two_step):
    params = MarketParams(sigma=0.2, T=1.0, K=0.8)
    pricer = build_cascade(0.0, two_step, params, x_range=(0.6, 1.4))
    xs = np.array([0.6, 0.9, 1.2, 1.4])
    values = pricer.price(xs)
    for x, value in zip(xs, values, strict=True):
        assert value == pytest.approx(cascade_price(0.0, float(x), two_step, params), rel=1e-9)


def test_cascade_at_maturity_is_payoff(two_step):
    params = MarketParams(sigma=0.2, T=1.0, K=0.8)
    assert cascade_price(1.0, 1.3, two_step, params) == pytest.approx(0.5)


def test_cascade_tables_cover_intermediate_levels():
    params = MarketParams(sigma=0.2, T=1.0, K=0.8)
    drift = compute_b(params, DividendMeasure(), uniform_sampling(4, 1.0))
    pricer = build_cascade(0.0, drift, params, x_range=(1.0, 1.0))
    # steps (0, .25], (.25, .5], (.5, .75], (.75, 1]; levels 1 and 2 are tabulated
    assert len(pricer.steps) == 4
    assert len(pricer.tables) == 2
    assert all(table.lo < table.hi for table in pricer.tables)


def test_cascade_table_nodes_are_log_spaced_around_drift_level():
    params = MarketParams(sigma=0.2, T=1.0, K=0.8)
    drift = StepDrift(
        breakpoints=(1 / 3, 2 / 3, 1.0), values=(1.5, 1.0, 0.5, 0.0), maturity=1.0
    )
    pricer = build_cascade(0.0, drift, params, x_range=(1.0, 1.0))
    (table,) = pricer.tables
    beta = pricer.steps[0].beta
    assert beta == 1.5
    log_gaps = np.diff(np.log(beta - table.nodes))
    np.testing.assert_allclose(log_gaps, log_gaps[0], rtol=1e-6)
    assert np.all(np.diff(table.nodes) > 0)


def test_cascade_table_nodes_straddling_drift_level_are_uniform():
    params = MarketParams(sigma=0.2, T=1.0, K=0.8)
    drift = StepDrift(
        breakpoints=(1 / 3, 2 / 3, 1.0), values=(1.5, 1.0, 0.5, 0.0), maturity=1.0
    )
    pricer = build_cascade(0.0, drift, params, x_range=(1.0, 2.0))
    (table,) = pricer.tables
    np.testing.assert_allclose(np.diff(table.nodes), np.diff(table.nodes)[0], rtol=1e-6)


def test_cascade_rejects_queries_outside_table(two_step):
    params = MarketParams(sigma=0.2, T=1.0, K=0.8)
    pricer = build_cascade(0.0, two_step, params, x_range=(0.9, 1.1))
    with pytest.raises(ExtrapolationError):
        pricer.price(2.0)


def test_cascade_rejects_zero_strike(two_step):
    with pytest.raises(DomainError):
        cascade_price(0.0, 1.0, two_step, MarketParams(sigma=0.2, T=1.0, K=0.0))


def test_cascade_rejects_mismatched_horizon(two_step):
    with pytest.raises(DomainError):
        cascade_price(0.0, 1.0, two_step, MarketParams(sigma=0.2, T=2.0, K=0.8))


def test_cascade_value_exceeds_payoff_of_mean(two_step):
    params = MarketParams(sigma=0.2, T=1.0, K=0.8)
    value = cascade_price(0.0, 1.2, two_step, params)
    # X is a martingale, so Jensen gives u(0, x) >= (x - K)_+
    assert value >= 0.4 - 1e-12
    assert math.isfinite(value)
