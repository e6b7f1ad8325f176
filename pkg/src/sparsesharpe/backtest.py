"""Moving-window backtest and performance metrics.

At each period ``t`` after the first ``window`` rows the optimizer is refit
on the preceding ``window`` rows and the new portfolio is held for period
``t``. Returns are excess of the risk-free rate, so the all-zero portfolio
(wealth parked in the risk-free asset) earns exactly zero.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import AlignmentError, DimensionError, InputError, RuinError, SparseSharpeError
from .moments import ReturnsMatrix, compute_moments, sample_sharpe
from .solver import SolverConfig, SparsePortfolio, solve

logger = logging.getLogger(__name__)

__all__ = [
    "BacktestConfig",
    "BacktestResult",
    "run_backtest",
    "period_returns",
    "cumulative_wealth",
    "evolve_weights",
    "wealth_with_costs",
    "sparsity_stats",
]


@dataclass(frozen=True)
class BacktestConfig:
    window: int
    solver: SolverConfig
    cost_rates: tuple = (0.0,)
    initial_wealth: float = 1.0
    # Holdings before the first rebalance; None means start from cash.
    initial_holdings: Optional[np.ndarray] = None

    def __post_init__(self):
        if int(self.window) != self.window or self.window < 2:
            raise InputError(f"window must be an integer >= 2, got {self.window!r}")
        rates = tuple(float(nu) for nu in self.cost_rates)
        if any(not 0.0 <= nu < 1.0 for nu in rates):
            raise InputError(f"cost rates must lie in [0, 1), got {rates}")
        if 0.0 not in rates:
            rates = (0.0,) + rates
        object.__setattr__(self, "cost_rates", rates)
        if not self.initial_wealth > 0:
            raise InputError("initial_wealth must be positive")


@dataclass
class BacktestResult:
    weights_by_period: list
    portfolio_returns: np.ndarray
    test_sharpe: Optional[float]
    cumulative_wealth: float
    wealth_by_cost_rate: dict
    sparsity_mean: float
    sparsity_std: float
    certificates: dict
    dates: Optional[tuple] = None
    window: int = 0
    metric_errors: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    support_sizes: list = field(default_factory=list)


def period_returns(weights: Sequence, price_relatives: Sequence) -> np.ndarray:
    """``x'w - 1`` each period; an all-zero portfolio earns 0 (risk-free)."""
    out = np.empty(len(weights))
    for t, (w, x) in enumerate(zip(weights, price_relatives)):
        w = np.asarray(w, dtype=float)
        out[t] = float(np.asarray(x, dtype=float) @ w) - 1.0 if np.any(w) else 0.0
    return out


def cumulative_wealth(portfolio_returns, initial: float = 1.0) -> float:
    wealth = float(initial)
    for r in np.asarray(portfolio_returns, dtype=float):
        if r <= -1.0:
            raise RuinError(f"period return {r!r} wipes out the portfolio")
        wealth *= 1.0 + r
    return wealth


def evolve_weights(w_prev, x_prev) -> np.ndarray:
    """Weights after one period of price drift, renormalized."""
    w_prev = np.asarray(w_prev, dtype=float)
    growth = float(w_prev @ np.asarray(x_prev, dtype=float))
    if growth == 0.0:
        return w_prev.copy()
    return w_prev * x_prev / growth


def wealth_with_costs(weights: Sequence, price_relatives: Sequence, nu: float,
                      initial: float = 1.0, initial_holdings=None) -> float:
    """Final wealth under proportional transaction costs at rate ``nu``.

    Each rebalance from the drifted holdings to the new weights is charged
    ``nu/2 * sum|w_t - w~_(t-1)|``. Periods with the zero portfolio grow by
    the risk-free factor 1 but still pay for liquidating the prior holdings.
    """
    if len(weights) != len(price_relatives):
        raise AlignmentError(f"{len(weights)} weight vectors for {len(price_relatives)} periods")
    if not 0.0 <= nu < 1.0:
        raise InputError(f"cost rate must lie in [0, 1), got {nu}")
    wealth = float(initial)
    if not weights:
        return wealth
    n = np.asarray(weights[0]).size
    drifted = np.zeros(n) if initial_holdings is None else np.asarray(initial_holdings, dtype=float)
    gross = 1.0 + period_returns(weights, price_relatives)
    for t, (w, x) in enumerate(zip(weights, price_relatives)):
        w = np.asarray(w, dtype=float)
        x = np.asarray(x, dtype=float)
        if w.size != n or x.size != n:
            raise AlignmentError(f"period {t}: vector lengths differ from {n}")
        cost = 1.0 - 0.5 * nu * float(np.sum(np.abs(w - drifted)))
        factor = gross[t] * cost
        if factor <= 0.0:
            raise RuinError(f"period {t}: wealth factor {factor!r} is not positive")
        wealth *= factor
        drifted = evolve_weights(w, x)
    return wealth


def sparsity_stats(weights: Sequence):
    """Mean and sample std of the support sizes (exact nonzeros)."""
    if len(weights) == 0:
        raise InputError("sparsity statistics need at least one portfolio")
    sizes = np.array([np.count_nonzero(np.asarray(w)) for w in weights], dtype=float)
    std = float(np.std(sizes, ddof=1)) if sizes.size > 1 else float("nan")
    return float(np.mean(sizes)), std


def run_backtest(returns: ReturnsMatrix, config: BacktestConfig) -> BacktestResult:
    R = returns.values
    n_periods, n_assets = R.shape
    T = int(config.window)
    if n_periods <= T:
        raise DimensionError(f"window {T} leaves no out-of-sample periods in {n_periods} rows")
    if config.solver.m > n_assets:
        raise InputError(f"m = {config.solver.m} exceeds the number of assets {n_assets}")

    portfolios: list[SparsePortfolio] = []
    certs: Counter = Counter()
    warnings = []
    for t in range(T, n_periods):
        model = compute_moments(ReturnsMatrix(R[t - T:t]), config.solver.eps)
        res = solve(model, config.solver)
        portfolios.append(res.portfolio)
        certs[res.certificate.kind.value] += 1
        if not res.converged:
            label = returns.dates[t] if returns.dates else str(t)
            warnings.append(f"period {label}: solver hit max_iter={config.solver.max_iter}")

    weights = [pf.weights for pf in portfolios]
    relatives = [R[t] + 1.0 for t in range(T, n_periods)]
    rets = period_returns(weights, relatives)

    metric_errors = {}
    try:
        test_sr = sample_sharpe(rets)
    except (SparseSharpeError, ValueError) as exc:
        test_sr = None
        metric_errors["test_sharpe"] = str(exc)

    cw = cumulative_wealth(rets, config.initial_wealth)
    by_rate = {}
    for nu in config.cost_rates:
        by_rate[nu] = wealth_with_costs(weights, relatives, nu, config.initial_wealth,
                                        config.initial_holdings)
    mean, std = sparsity_stats(weights)
    for w in warnings:
        logger.warning(w)
    return BacktestResult(
        weights_by_period=portfolios,
        portfolio_returns=rets,
        test_sharpe=test_sr,
        cumulative_wealth=cw,
        wealth_by_cost_rate=dict(sorted(by_rate.items())),
        sparsity_mean=mean,
        sparsity_std=std,
        certificates=dict(sorted(certs.items())),
        dates=None if returns.dates is None else tuple(returns.dates[T:]),
        window=T,
        metric_errors=metric_errors,
        warnings=warnings,
        support_sizes=[pf.support_size for pf in portfolios],
    )
