import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sparsesharpe.backtest import (BacktestConfig, cumulative_wealth, evolve_weights,
                                   period_returns, run_backtest, sparsity_stats,
                                   wealth_with_costs)
from sparsesharpe.errors import AlignmentError, DimensionError, InputError, RuinError
from sparsesharpe.moments import ReturnsMatrix
from sparsesharpe.solver import SolverConfig


def random_returns(rng, T=40, N=6, drift=0.01):
    return ReturnsMatrix(rng.normal(drift, 0.05, size=(T, N)))


def config(window=12, m=2, **kw):
    return BacktestConfig(window=window, solver=SolverConfig(m=m), **kw)


class TestWealth:
    def test_two_periods(self):
        assert cumulative_wealth([0.1, -0.1]) == pytest.approx(0.99, abs=1e-15)

    def test_empty(self):
        assert cumulative_wealth([], 2.5) == 2.5

    def test_constant_growth(self):
        assert cumulative_wealth([0.01] * 12) == pytest.approx(1.126825, abs=1e-6)

    def test_ruin(self):
        with pytest.raises(RuinError):
            cumulative_wealth([0.1, -1.0])

    def test_zero_portfolio_earns_nothing(self):
        np.testing.assert_array_equal(period_returns([np.zeros(2)], [np.array([1.3, 0.7])]), [0.0])


class TestEvolve:
    def test_drift(self):
        np.testing.assert_allclose(evolve_weights([0.5, 0.5], np.array([1.1, 0.9])), [0.55, 0.45],
                                   atol=1e-15)

    def test_single_asset(self):
        np.testing.assert_array_equal(evolve_weights([1.0, 0.0], np.array([1.7, 0.2])), [1.0, 0.0])

    def test_zero(self):
        np.testing.assert_array_equal(evolve_weights(np.zeros(3), np.ones(3)), np.zeros(3))

    def test_conservation(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            w = rng.dirichlet(np.ones(5))
            x = rng.uniform(0.5, 1.5, size=5)
            assert abs(evolve_weights(w, x).sum() - 1.0) <= 1e-12


class TestCosts:
    def test_single_period(self):
        assert wealth_with_costs([np.array([1.0, 0.0])], [np.array([1.1, 1.0])], 0.01) \
            == pytest.approx(1.0945, abs=1e-15)

    def test_no_drift_no_trade(self):
        w = np.array([0.25, 0.75])
        x = np.ones(2)
        one = wealth_with_costs([w], [x], 0.01)
        many = wealth_with_costs([w] * 10, [x] * 10, 0.01)
        assert many == pytest.approx(one, rel=1e-15)

    def test_initial_holdings(self):
        w = np.array([1.0, 0.0])
        assert wealth_with_costs([w], [np.array([1.1, 1.0])], 0.01, initial_holdings=w) == \
            pytest.approx(1.1, abs=1e-15)

    def test_liquidation_charged(self):
        ws = [np.array([1.0, 0.0]), np.zeros(2)]
        xs = [np.ones(2), np.ones(2)]
        assert wealth_with_costs(ws, xs, 0.01) == pytest.approx(0.995 * 0.995, abs=1e-15)

    def test_alignment(self):
        with pytest.raises(AlignmentError):
            wealth_with_costs([np.ones(2)], [np.ones(2), np.ones(2)], 0.0)

    def test_rate_range(self):
        with pytest.raises(InputError):
            wealth_with_costs([np.ones(2)], [np.ones(2)], 1.0)

    @given(st.integers(0, 10_000))
    @settings(max_examples=60, deadline=None)
    def test_zero_rate_matches_product_and_monotone(self, seed):
        rng = np.random.default_rng(seed)
        n, T = int(rng.integers(1, 6)), int(rng.integers(1, 15))
        ws = [rng.dirichlet(np.ones(n)) * (rng.random() > 0.2) for _ in range(T)]
        xs = [rng.uniform(0.8, 1.2, size=n) for _ in range(T)]
        assert wealth_with_costs(ws, xs, 0.0) == cumulative_wealth(period_returns(ws, xs))
        values = [wealth_with_costs(ws, xs, nu) for nu in (0.0, 0.001, 0.005, 0.05)]
        assert all(a >= b for a, b in zip(values, values[1:]))


class TestSparsity:
    def test_example(self):
        mean, std = sparsity_stats([np.array([1.0, 0.0]), np.array([0.5, 0.5])])
        assert mean == 1.5
        assert std == pytest.approx(math.sqrt(0.5), abs=1e-15)

    def test_identical(self):
        assert sparsity_stats([np.array([0.0, 1.0])] * 4) == (1.0, 0.0)

    def test_single(self):
        mean, std = sparsity_stats([np.array([0.2, 0.8])])
        assert mean == 2.0 and math.isnan(std)

    def test_empty(self):
        with pytest.raises(InputError):
            sparsity_stats([])


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(window=1), dict(window=2.5), dict(cost_rates=(-0.1,)),
                                    dict(cost_rates=(1.0,)), dict(initial_wealth=0.0)])
    def test_invalid(self, kw):
        args = dict(window=5, solver=SolverConfig(m=1))
        args.update(kw)
        with pytest.raises(InputError):
            BacktestConfig(**args)

    def test_zero_rate_added(self):
        assert config(cost_rates=(0.005,)).cost_rates == (0.0, 0.005)


class TestRunBacktest:
    def test_lengths_and_invariants(self):
        rng = np.random.default_rng(1)
        R = random_returns(rng)
        res = run_backtest(R, config(cost_rates=(0.001, 0.005)))
        assert len(res.portfolio_returns) == 40 - 12
        assert len(res.weights_by_period) == 28
        assert res.wealth_by_cost_rate[0.0] == res.cumulative_wealth
        assert all(s <= 2 for s in res.support_sizes)
        assert sum(res.certificates.values()) == 28
        w = list(res.wealth_by_cost_rate.values())
        assert w[0] >= w[1] >= w[2]

    def test_returns_match_weights(self):
        rng = np.random.default_rng(2)
        R = random_returns(rng, T=20, N=4)
        res = run_backtest(R, config(window=8, m=3))
        for k, t in enumerate(range(8, 20)):
            w = res.weights_by_period[k].weights
            expected = float((R.values[t] + 1.0) @ w) - 1.0 if np.any(w) else 0.0
            assert res.portfolio_returns[k] == expected

    def test_single_out_of_sample_period(self):
        rng = np.random.default_rng(3)
        R = random_returns(rng, T=13, N=3)
        res = run_backtest(R, config(window=12))
        assert len(res.portfolio_returns) == 1
        assert res.test_sharpe is None
        assert "test_sharpe" in res.metric_errors
        assert res.cumulative_wealth == 1.0 + res.portfolio_returns[0]

    def test_negative_means_hold_cash(self):
        rng = np.random.default_rng(4)
        R = ReturnsMatrix(-np.abs(rng.normal(0.02, 0.01, size=(20, 3))))
        res = run_backtest(R, config(window=6))
        assert all(pf.is_zero for pf in res.weights_by_period)
        np.testing.assert_array_equal(res.portfolio_returns, 0.0)
        assert res.cumulative_wealth == 1.0
        assert res.test_sharpe is None

    def test_window_too_long(self):
        rng = np.random.default_rng(5)
        with pytest.raises(DimensionError):
            run_backtest(random_returns(rng, T=12, N=3), config(window=12))

    def test_budget_too_large(self):
        rng = np.random.default_rng(6)
        with pytest.raises(InputError):
            run_backtest(random_returns(rng, T=20, N=3), config(m=4))

    def test_window_independence(self):
        rng = np.random.default_rng(7)
        R = rng.normal(0.01, 0.05, size=(30, 5))
        base = run_backtest(ReturnsMatrix(R), config(window=10))
        t = 18  # period fitted on rows 8..17
        R2 = R.copy()
        R2[:8] += rng.normal(0, 0.1, size=(8, 5))
        R2[18:] += rng.normal(0, 0.1, size=(12, 5))
        other = run_backtest(ReturnsMatrix(R2), config(window=10))
        k = t - 10
        np.testing.assert_array_equal(base.weights_by_period[k].weights,
                                      other.weights_by_period[k].weights)

    def test_dates_carried(self):
        rng = np.random.default_rng(8)
        dates = [f"2000{m:02d}" for m in range(1, 13)] + [f"2001{m:02d}" for m in range(1, 5)]
        R = ReturnsMatrix(rng.normal(0.01, 0.05, size=(16, 3)), dates=dates)
        res = run_backtest(R, config(window=10))
        assert res.dates == tuple(dates[10:])

    def test_max_iter_warns_without_abort(self):
        rng = np.random.default_rng(9)
        R = random_returns(rng, T=20, N=5)
        cfg = BacktestConfig(window=10, solver=SolverConfig(m=2, max_iter=1, tol=0.0))
        res = run_backtest(R, cfg)
        assert len(res.warnings) == 10
        assert len(res.portfolio_returns) == 10
