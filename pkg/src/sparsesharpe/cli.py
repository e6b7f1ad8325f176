"""Command-line interface: ``sparsesharpe {solve,backtest,oracle,simulate}``.

Exit status is 0 on success, 1 for bad flags or input, 2 for a numerical
failure. Results go to ``--output`` (or stdout for JSON); diagnostics go to
stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .backtest import BacktestConfig, run_backtest
from .data_io import LoadOptions, load_returns_csv, report_to_dict, write_report
from .errors import InputError, NumericalError, SparseSharpeError
from .moments import compute_moments, objective_f
from .oracle import SimConfig, run_simulation, solve_global_exhaustive
from .solver import Init, SolverConfig, solve

log = logging.getLogger("sparsesharpe")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def _float_list(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _init_list(text):
    try:
        return [Init(x.strip().lower()) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"inits must be among zero,uniform,ones,mean; got {text!r}")


def _shared(p, need_input=True, need_m=True):
    if need_input:
        p.add_argument("--input", required=True, help="returns CSV")
        p.add_argument("--unit", choices=["percent", "fraction"], default="percent")
        p.add_argument("--riskfree", help="risk-free column name or CSV path to subtract")
        p.add_argument("--date-column", help="name of the date column (default: auto)")
    p.add_argument("--m", type=int, required=need_m, default=None if need_m else 3,
                   help="maximum number of assets held")
    p.add_argument("--eps", type=float, default=1e-3)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--max-iter", type=int, default=10_000)
    p.add_argument("--seed", type=int)
    p.add_argument("--output", help="report path (default: JSON on stdout)")
    p.add_argument("--format", choices=["json", "csv"], default="json")


def build_parser():
    parser = _Parser(prog="sparsesharpe", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="fit one portfolio on the whole input")
    _shared(p)
    p.add_argument("--init", type=Init, default=Init.MEAN, choices=list(Init)[:4])

    p = sub.add_parser("backtest", help="moving-window out-of-sample evaluation")
    _shared(p)
    p.add_argument("--window", type=int, required=True)
    p.add_argument("--cost-rates", type=_float_list, default=[0.0],
                   help="comma-separated proportional cost rates, e.g. 0,0.001,0.005")

    p = sub.add_parser("oracle", help="compare PGA with exhaustive enumeration")
    _shared(p)

    p = sub.add_parser("simulate", help="random-instance global optimality study")
    _shared(p, need_input=False, need_m=False)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--n-assets", type=int, default=10)
    p.add_argument("--n-samples", type=int, default=50)
    p.add_argument("--pga-iters", type=int, default=500)
    p.add_argument("--inits", type=_init_list, default=[Init.ZERO, Init.UNIFORM, Init.ONES])
    p.add_argument("--step-rule", choices=["a9", "default"], default="a9")
    p.add_argument("--records", action="store_true", help="include per-trial records")
    return parser


def _load(args):
    opts = LoadOptions(unit=args.unit, riskfree=args.riskfree, date_column=args.date_column)
    return load_returns_csv(args.input, opts)


def _solver_config(args, **kw):
    return SolverConfig(m=args.m, eps=args.eps, tol=args.tol, max_iter=args.max_iter, **kw)


def _check_m(args, n_assets):
    if args.m < 1 or args.m > n_assets:
        raise InputError(f"--m must lie in [1, {n_assets}], got {args.m}")


def _emit(args, result, **kw):
    if args.output:
        write_report(result, args.format, args.output, **kw)
    elif args.format == "json":
        d = report_to_dict(result, kw.get("include_records", True), kw.get("asset_names"))
        sys.stdout.write(json.dumps(d, indent=2, allow_nan=False) + "\n")
    else:
        raise InputError("--format csv requires --output")


def cmd_solve(args):
    returns = _load(args)
    _check_m(args, returns.n_assets)
    model = compute_moments(returns, args.eps)
    res = solve(model, _solver_config(args, init=args.init))
    log.info("certificate %s, support %s, sharpe %s", res.certificate.kind.value,
             res.portfolio.support.tolist(), res.sharpe)
    _emit(args, res, asset_names=returns.asset_names)
    return EXIT_OK


def cmd_backtest(args):
    returns = _load(args)
    _check_m(args, returns.n_assets)
    if args.window >= returns.n_periods:
        raise InputError(f"--window {args.window} must be smaller than the {returns.n_periods} periods")
    config = BacktestConfig(window=args.window, solver=_solver_config(args),
                            cost_rates=tuple(args.cost_rates))
    res = run_backtest(returns, config)
    sr = "n/a" if res.test_sharpe is None else f"{res.test_sharpe:.4f}"
    print(f"test SR {sr}  CW {res.cumulative_wealth:.6g}  sparsity {res.sparsity_mean:.4f} "
          f"+/- {res.sparsity_std:.4f}", file=sys.stderr)
    for nu, w in res.wealth_by_cost_rate.items():
        print(f"  nu={nu:g}: wealth {w:.6g}", file=sys.stderr)
    _emit(args, res)
    return EXIT_OK


def cmd_oracle(args):
    returns = _load(args)
    _check_m(args, returns.n_assets)
    model = compute_moments(returns, args.eps)
    glob = solve_global_exhaustive(model, args.m)
    res = solve(model, _solver_config(args))
    f_pga = objective_f(model, res.v_star)
    gap = f_pga - glob.objective
    rel_gap = gap / max(1.0, abs(glob.objective))
    is_global = rel_gap <= 1e-8
    report = {
        "schema_version": 1,
        "kind": "oracle_comparison",
        "n_assets": model.n_assets,
        "m": args.m,
        "supports_enumerated": glob.n_supports,
        "pga_objective": f_pga,
        "oracle_objective": glob.objective,
        "gap": gap,
        "relative_gap": rel_gap,
        "pga_reached_global": bool(is_global),
        "certificate": res.certificate.kind.value,
        "certificate_margin": res.certificate.margin,
        "certificate_agrees": bool(not res.certificate.is_global or is_global),
        "pga_support": res.portfolio.support.tolist(),
        "oracle_support": np.flatnonzero(glob.v).tolist(),
        "pga_v": res.v_star.tolist(),
        "oracle_v": glob.v.tolist(),
    }
    print(f"PGA f={f_pga:.12g}  oracle f={glob.objective:.12g}  gap={gap:.3g}  "
          f"certificate={res.certificate.kind.value}", file=sys.stderr)
    if args.format == "csv":
        raise InputError("oracle reports are JSON only")
    _emit(args, report)
    return EXIT_OK


def cmd_simulate(args):
    if args.seed is None:
        raise InputError("simulate requires --seed")
    config = SimConfig(n_assets=args.n_assets, n_samples=args.n_samples, m=args.m, eps=args.eps,
                       trials=args.trials, seed=args.seed, inits=tuple(args.inits),
                       pga_iters=args.pga_iters, step_rule=args.step_rule,
                       keep_records=args.records)
    report = run_simulation(config)
    per_init = ", ".join(f"{k} {v / max(report.trials, 1):.3f}" for k, v in report.per_init_success.items())
    print(f"success {report.success_count}/{report.trials} = {report.success_fraction:.4f} "
          f"(all inits); per init: {per_init}", file=sys.stderr)
    _emit(args, report, include_records=args.records)
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "backtest": cmd_backtest, "oracle": cmd_oracle,
            "simulate": cmd_simulate}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INPUT
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (SparseSharpeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
