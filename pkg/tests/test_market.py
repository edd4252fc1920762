import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from algocollusion.errors import DomainError, NumericalError, ParameterError, UnsupportedConfigError
from algocollusion.market import (MarketParams, benchmark_profits, build_grid, demand, grid_for,
                                  monopoly_price, nash_price, payoff_table)

DUO = MarketParams.symmetric(2)


def fixed_point(k: int, monopoly: bool, mu=0.25, a=2.0, c=1.0) -> float:
    """Independent check: symmetric first-order conditions as heavily damped fixed points.

    Nash:      p = c + mu / (1 - q(p))
    monopoly:  p = c + mu / (1 - K q(p))
    with q(p) the share of each firm when all charge p.
    """
    p = 1.5
    for _ in range(100_000):
        e = math.exp((a - p) / mu)
        q = e / (k * e + 1.0)
        new = c + mu / (1 - (k if monopoly else 1) * q)
        if abs(new - p) < 1e-12:
            return new
        p = 0.9 * p + 0.1 * new
    raise AssertionError("oracle did not converge")


def test_duopoly_prices():
    assert nash_price(DUO) == pytest.approx(1.472927, abs=1e-5)
    assert monopoly_price(DUO) == pytest.approx(1.924981, abs=1e-5)


def test_five_firm_prices():
    five = MarketParams.symmetric(5)
    assert nash_price(five) == pytest.approx(1.311521, abs=1e-5)
    # golden frozen from fixed_point(5, monopoly=True)
    assert monopoly_price(five) == pytest.approx(2.097231279, abs=1e-8)


@pytest.mark.parametrize("k", [1, 2, 3, 5])
def test_prices_match_fixed_point_oracle(k):
    params = MarketParams.symmetric(k)
    assert monopoly_price(params) == pytest.approx(fixed_point(k, True), abs=1e-9)
    if k > 1:
        assert nash_price(params) == pytest.approx(fixed_point(k, False), abs=1e-9)


def test_single_firm_nash_is_monopoly():
    solo = MarketParams.symmetric(1)
    assert nash_price(solo) == pytest.approx(monopoly_price(solo), abs=1e-8)


def test_demand_at_nash():
    p = 1.472927
    out = demand(DUO, [p, p])
    assert out.shares == pytest.approx([0.47138, 0.47138], abs=1e-5)
    assert out.profits == pytest.approx([0.22293, 0.22293], abs=1e-5)
    # by hand: e = exp((2 - p) / 0.25), q = e / (2e + 1)
    e = math.exp((2 - p) / 0.25)
    assert out.shares[0] == pytest.approx(e / (2 * e + 1), rel=1e-14)


def test_benchmarks():
    pi_n, pi_m = benchmark_profits(DUO)
    assert pi_n == pytest.approx(0.22293, abs=1e-5)
    assert pi_m > pi_n


def test_symmetric_prices_give_equal_shares():
    params = MarketParams.symmetric(4, mu=0.7, a0=0.3)
    out = demand(params, [1.8] * 4)
    assert len(set(out.shares.tolist())) == 1


def test_huge_price_has_no_demand():
    out = demand(DUO, [1e6, 1.5])
    assert out.shares[0] < 1e-12
    assert np.isfinite(out.shares).all()


def test_exponent_shift_invariance():
    # adding the same constant to quality and outside option leaves shares unchanged;
    # exponents near 800 would overflow without the max-shift
    far = MarketParams.symmetric(2, a0=200.0, quality=202.0)
    assert monopoly_price(far) == pytest.approx(monopoly_price(DUO), abs=1e-9)
    assert nash_price(far) == pytest.approx(nash_price(DUO), abs=1e-9)
    out = demand(far, [1.6, 1.7])
    assert np.allclose(out.shares, demand(DUO, [1.6, 1.7]).shares, atol=1e-12)


finite_prices = st.lists(st.floats(0.01, 50, allow_nan=False), min_size=1, max_size=6)


@settings(max_examples=300, deadline=None)
@given(finite_prices, st.floats(0.01, 3), st.floats(-5, 5))
def test_normalization(prices, mu, a0):
    k = len(prices)
    params = MarketParams(k, mu, a0, tuple(np.linspace(1, 3, k)), (1.0,) * k)
    out = demand(params, prices)
    assert abs(out.shares.sum() + out.outside_share - 1) <= 1e-12


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(1, 3), min_size=2, max_size=4), st.integers(0, 3))
def test_monotonicity(prices, i):
    i %= len(prices)
    k = len(prices)
    params = MarketParams.symmetric(k)
    base = demand(params, prices).shares
    bumped = np.array(prices)
    bumped[i] += 1e-4
    after = demand(params, bumped).shares
    assert after[i] < base[i]
    others = [j for j in range(k) if j != i]
    assert np.all(after[others] > base[others])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(1, 3), min_size=1, max_size=5))
def test_shifted_matches_direct(prices):
    params = MarketParams.symmetric(len(prices))
    a = demand(params, prices, shift=True)
    b = demand(params, prices, shift=False)
    assert np.allclose(a.shares, b.shares, atol=1e-12, rtol=0)


@pytest.mark.parametrize("k", [2, 3, 5])
def test_no_profitable_unilateral_deviation(k):
    params = MarketParams.symmetric(k)
    p = nash_price(params)
    base = demand(params, [p] * k).profits[0]
    for dev in np.linspace(p - 0.5, p + 0.5, 2001):
        prices = [dev] + [p] * (k - 1)
        assert demand(params, prices).profits[0] <= base + 1e-12


def test_grid_example():
    grid = build_grid(1.472927, 1.924981, 0.1, 15)
    assert grid.low == pytest.approx(1.427722, abs=1e-6)
    assert grid.high == pytest.approx(1.970186, abs=1e-6)
    assert grid.step == pytest.approx(0.038747, abs=1e-6)
    assert grid.m == 15


def test_degenerate_grid():
    grid = build_grid(1.4, 1.9, 0.0, 2)
    assert grid.points.tolist() == [1.4, 1.9]


@settings(max_examples=100, deadline=None)
@given(st.floats(0.5, 2), st.floats(0.01, 2), st.floats(0, 1), st.integers(2, 40))
def test_grid_increasing(p_n, gap, xi, m):
    grid = build_grid(p_n, p_n + gap, xi, m)
    assert np.all(np.diff(grid.points) > 0)


def test_grid_above_nash():
    grid = grid_for(DUO)
    assert grid.index_above(grid.p_nash) == 2
    assert grid.price(2) > grid.p_nash > grid.price(1)


def test_payoff_table_layout():
    grid = grid_for(DUO)
    table = payoff_table(DUO, grid)
    assert table.shape == (225, 2)
    a0, a1 = 3, 11
    expect = demand(DUO, [grid.points[a0], grid.points[a1]]).profits
    assert np.array_equal(table[a0 + 15 * a1], expect)


@pytest.mark.parametrize("kwargs", [dict(mu=0.0), dict(mu=-1.0), dict(marginal_cost=0.0)])
def test_invalid_params(kwargs):
    with pytest.raises(ParameterError):
        MarketParams.symmetric(2, **kwargs)


def test_length_mismatch():
    with pytest.raises(ParameterError):
        MarketParams(2, 0.25, 0.0, (2.0,), (1.0, 1.0))
    with pytest.raises(ParameterError):
        demand(DUO, [1.5])


def test_non_finite_price():
    with pytest.raises(DomainError):
        demand(DUO, [math.nan, 1.5])
    with pytest.raises(DomainError):
        demand(DUO, [math.inf, 1.5])


def test_asymmetric_solver_rejected():
    params = MarketParams(2, 0.25, 0.0, (2.0, 2.5), (1.0, 1.0))
    with pytest.raises(UnsupportedConfigError):
        nash_price(params)
    with pytest.raises(UnsupportedConfigError):
        monopoly_price(params)


def test_fixed_point_budget():
    with pytest.raises(NumericalError):
        nash_price(DUO, max_iter=2)


def test_grid_ordering():
    with pytest.raises(ParameterError):
        build_grid(1.9, 1.4)
