"""Exit criteria. Run alone with ``pytest -m acceptance -rA``.

Each test records its criterion number and a short measurement; the terminal
summary lists one PASS/FAIL/SKIP line per criterion.
"""

import math
import os
import time

import numpy as np
import pytest

from sparsesharpe.backtest import BacktestConfig, cumulative_wealth, run_backtest, wealth_with_costs
from sparsesharpe.data_io import LoadOptions, load_returns_csv
from sparsesharpe.moments import MomentModel, ReturnsMatrix, compute_moments, gradient_f, objective_f
from sparsesharpe.oracle import SimConfig, run_simulation
from sparsesharpe.prox import prox_m_sparse_nonneg
from sparsesharpe.solver import SolverConfig, check_fixed_point, solve

from _oracles import brute_force_prox_distance, central_difference_gradient

pytestmark = pytest.mark.acceptance

SIM_SEED = 2026


@pytest.fixture(scope="module")
def sim_study():
    config = SimConfig(n_assets=10, n_samples=50, m=3, eps=1e-3, trials=1000, seed=SIM_SEED,
                       pga_iters=500, step_rule="a9")
    start = time.perf_counter()
    report = run_simulation(config)
    return report, time.perf_counter() - start


def tag(record_property, n, title):
    record_property("criterion", n)
    record_property("title", title)


def test_criterion_1_prox_matches_enumeration(record_property):
    tag(record_property, 1, "prox equals exhaustive minimum distance")
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(10_000):
        v = rng.uniform(-5, 5, size=int(rng.integers(1, 13)))
        m = int(rng.integers(1, 5))
        h = prox_m_sparse_nonneg(v, m)
        worst = max(worst, abs(float(np.linalg.norm(h - v)) - brute_force_prox_distance(v, m)))
    elapsed = time.perf_counter() - start
    record_property("detail", f"max |diff| {worst:.2e}, {elapsed:.1f} s")
    assert worst <= 1e-12
    # The independent brute force dominates the runtime; time the prox alone.
    start = time.perf_counter()
    for _ in range(10_000):
        prox_m_sparse_nonneg(rng.uniform(-5, 5, size=12), 4)
    assert time.perf_counter() - start < 10.0


def test_criterion_2_global_success_rate(record_property, sim_study):
    tag(record_property, 2, "random-instance study: all-init success fraction >= 0.65 over 1000 trials")
    report, elapsed = sim_study
    any_ok = sum(any(r["success"] for r in rec["inits"]) for rec in report.records)
    per_init = ", ".join(f"{k} {v / report.trials:.3f}" for k, v in report.per_init_success.items())
    record_property("detail", f"all inits {report.success_fraction:.3f}; per init {per_init}; "
                              f"any init {any_ok / report.trials:.3f}; {elapsed:.0f} s")
    fraction = report.success_fraction
    assert elapsed < 300
    assert fraction >= 0.65


def test_criterion_3_sufficient_decrease(record_property, sim_study):
    tag(record_property, 3, "sufficient decrease on every iteration")
    report, _ = sim_study
    record_property("detail", f"{report.decrease_violations} violations, "
                              f"max excess {report.max_decrease_excess:.2e}")
    assert report.decrease_violations == 0


def test_criterion_4_fixed_point_residual(record_property):
    tag(record_property, 4, "converged runs are fixed points")
    rng = np.random.default_rng(4)
    worst, converged = 0.0, 0
    for _ in range(100):
        n = int(rng.integers(1, 21))
        T = int(rng.integers(2, 80))
        model = compute_moments(ReturnsMatrix(rng.normal(0.005, 0.05, size=(T, n))))
        m = int(rng.integers(1, n + 1))
        res = solve(model, SolverConfig(m=m, tol=1e-8))
        if not res.converged:
            continue
        converged += 1
        r = check_fixed_point(model, res.v_star, res.alpha, m)
        worst = max(worst, r / (1.0 + float(np.linalg.norm(res.v_star))))
    record_property("detail", f"{converged}/100 converged, max scaled residual {worst:.2e}")
    assert converged > 0
    assert worst <= 1e-6


def test_criterion_5_certificate_soundness(record_property, sim_study):
    tag(record_property, 5, "no false global certificates")
    report, _ = sim_study
    worst = -math.inf
    issued = 0
    for rec in report.records:
        f_star = rec["oracle_objective"]
        for r in rec["inits"]:
            if r["certificate"].startswith("global") or r["certificate"] == "zero_portfolio":
                issued += 1
                worst = max(worst, (r["objective"] - f_star) / (1.0 + abs(f_star)))
    record_property("detail", f"{issued} certificates, {report.false_certifications} false, "
                              f"max relative gap {worst:.2e}")
    assert report.false_certifications == 0
    assert worst <= 1e-8


def test_criterion_6_gradient_finite_differences(record_property):
    tag(record_property, 6, "gradient matches central differences")
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(100):
        n, T = int(rng.integers(1, 15)), int(rng.integers(2, 40))
        model = MomentModel(p=rng.normal(size=n), Q=rng.normal(size=(T, n)) / math.sqrt(T),
                            eps=10 ** rng.uniform(-4, 0))
        v = rng.normal(size=n)
        g = gradient_f(model, v)
        fd = central_difference_gradient(lambda x: objective_f(model, x), v)
        worst = max(worst, float(np.linalg.norm(g - fd)) / (1.0 + float(np.linalg.norm(g))))
    record_property("detail", f"max relative error {worst:.2e}")
    assert worst <= 1e-5


def test_criterion_7_cost_model(record_property):
    tag(record_property, 7, "cost-free wealth exact, wealth non-increasing in cost rate")
    rng = np.random.default_rng(7)
    rates = (0.0, 0.001, 0.005)
    for _ in range(50):
        n = int(rng.integers(2, 8))
        window = int(rng.integers(6, 20))
        R = ReturnsMatrix(rng.normal(0.01, 0.05, size=(window + int(rng.integers(2, 20)), n)))
        res = run_backtest(R, BacktestConfig(window=window, solver=SolverConfig(m=int(rng.integers(1, n + 1))),
                                             cost_rates=rates))
        weights = [pf.weights for pf in res.weights_by_period]
        relatives = [R.values[t] + 1.0 for t in range(window, R.n_periods)]
        assert wealth_with_costs(weights, relatives, 0.0) == cumulative_wealth(res.portfolio_returns)
        assert res.wealth_by_cost_rate[0.0] == res.cumulative_wealth
        w = [res.wealth_by_cost_rate[nu] for nu in rates]
        assert w[0] >= w[1] >= w[2]
    record_property("detail", "50 backtests")


def test_criterion_8_ff25_numbers(record_property):
    tag(record_property, 8, "FF25 T=60 m=10 backtest numbers (contingent on data)")
    path = os.environ.get("SPARSESHARPE_FF25")
    if not path:
        pytest.skip("set SPARSESHARPE_FF25 to a trimmed FF25 monthly CSV (percent) to run")
    opts = LoadOptions(unit="percent", riskfree=os.environ.get("SPARSESHARPE_FF25_RF"))
    R = load_returns_csv(path, opts)
    res = run_backtest(R, BacktestConfig(window=60, solver=SolverConfig(m=10, eps=1e-3)))
    record_property("detail", f"SR {res.test_sharpe:.4f}, CW {res.cumulative_wealth:.2f}, "
                              f"sparsity {res.sparsity_mean:.4f} +/- {res.sparsity_std:.4f}")
    assert abs(res.test_sharpe - 0.2481) <= 0.002
    assert abs(res.cumulative_wealth - 615.34) <= 0.02 * 615.34
    assert abs(res.sparsity_mean - 6.3511) <= 0.05
    assert abs(res.sparsity_std - 2.4164) <= 0.05


def test_criterion_9_iterate_bound(record_property, sim_study):
    tag(record_property, 9, "iterates obey the geometric norm bound")
    report, _ = sim_study
    record_property("detail", f"{report.bound_violations} violations, "
                              f"max excess {report.max_bound_excess:.2e}")
    assert report.bound_violations == 0
