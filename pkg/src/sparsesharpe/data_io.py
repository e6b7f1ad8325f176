"""CSV ingestion of monthly returns and JSON/CSV report serialization.

Kenneth French library files mix prose headers, several tables and footers
in one download. The loader expects one rectangular table: a header row,
an optional date column, then one numeric column per asset. To cut the
monthly value-weighted block out of a raw download, keep its header line and
the rows up to the first blank line, e.g.::

    awk 'NR>=H && NF==0 {exit} NR>=H' 25_Portfolios_5x5.CSV > ff25.csv

with ``H`` the line number of the block's header.
"""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .errors import AlignmentError, InputError, MissingDataError, ParseError
from .moments import ReturnsMatrix
from .solver import Certificate, CertificateKind, SolveResult, normalize_to_portfolio

__all__ = [
    "SCHEMA_VERSION",
    "SENTINELS",
    "Unit",
    "MissingPolicy",
    "LoadOptions",
    "load_returns_csv",
    "write_report",
    "report_to_dict",
    "read_json",
    "solve_result_from_dict",
    "write_cost_curve",
]

SCHEMA_VERSION = 1
SENTINELS = (-99.99, -999.0)
_DATE_HEADERS = {"", "date", "dates", "month", "period", "time", "yyyymm"}


class Unit(str, enum.Enum):
    PERCENT = "percent"
    FRACTION = "fraction"


class MissingPolicy(str, enum.Enum):
    REJECT = "reject"
    DROP_ROW = "drop_row"


@dataclass(frozen=True)
class LoadOptions:
    """How to read a returns table.

    ``riskfree`` names a column of the same file or, failing that, a path to
    a second CSV holding one risk-free series in the same units. It is
    subtracted from every asset. ``date_column`` is a header name or a
    0-based index; by default the first column is taken as dates when its
    header is blank or date-like (``Date``, ``Month``, ...).
    """

    unit: Unit = Unit.PERCENT
    riskfree: Optional[Union[str, Path]] = None
    date_column: Optional[Union[str, int]] = None
    missing_policy: MissingPolicy = MissingPolicy.REJECT

    def __post_init__(self):
        object.__setattr__(self, "unit", Unit(self.unit))
        object.__setattr__(self, "missing_policy", MissingPolicy(self.missing_policy))


def _read_table(path):
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8-sig") as fh:
            rows = [row for row in csv.reader(fh)]
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    # Keep 1-based file line numbers for messages; drop blank lines.
    numbered = [(i + 1, [c.strip() for c in row]) for i, row in enumerate(rows)
                if any(c.strip() for c in row)]
    if not numbered:
        raise ParseError(f"{path}: file is empty")
    (_, header), body = numbered[0], numbered[1:]
    for line, row in body:
        if len(row) != len(header):
            raise ParseError(f"{path}: expected {len(header)} fields, found {len(row)}", row=line)
    return header, body


def _date_index(header, date_column):
    if date_column is None:
        return 0 if header[0].strip().lower() in _DATE_HEADERS else None
    if isinstance(date_column, int):
        if not 0 <= date_column < len(header):
            raise InputError(f"date column index {date_column} out of range")
        return date_column
    if date_column not in header:
        raise InputError(f"date column {date_column!r} not in header {header}")
    return header.index(date_column)


def _parse_float(text, path, line, column):
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"{path}: non-numeric value {text!r}", row=line, column=column) from None


def _is_sentinel(x):
    return any(abs(x - s) < 1e-9 for s in SENTINELS)


def _load_riskfree(path):
    header, body = _read_table(path)
    di = _date_index(header, None)
    cols = [j for j in range(len(header)) if j != di]
    if "RF" in header:
        cols = [header.index("RF")]
    if len(cols) != 1:
        raise InputError(f"{path}: risk-free file must hold exactly one series (or an 'RF' column)")
    j = cols[0]
    dates = [row[di] for _, row in body] if di is not None else None
    values = [_parse_float(row[j], path, line, header[j]) for line, row in body]
    return dates, np.array(values)


def load_returns_csv(path, opts: LoadOptions = LoadOptions()) -> ReturnsMatrix:
    """Read a rectangular returns CSV into excess returns as fractions."""
    header, body = _read_table(path)
    di = _date_index(header, opts.date_column)
    rf_col = None
    rf_external = None
    if opts.riskfree is not None:
        if str(opts.riskfree) in header:
            rf_col = header.index(str(opts.riskfree))
        else:
            rf_external = _load_riskfree(opts.riskfree)
    asset_cols = [j for j in range(len(header)) if j not in (di, rf_col)]
    if not asset_cols:
        raise ParseError(f"{path}: no asset columns")

    dates = [row[di] for _, row in body] if di is not None else None
    values = np.empty((len(body), len(asset_cols)))
    rf = np.zeros(len(body))
    keep = np.ones(len(body), dtype=bool)
    for i, (line, row) in enumerate(body):
        for k, j in enumerate(asset_cols):
            x = _parse_float(row[j], path, line, header[j])
            if _is_sentinel(x):
                if opts.missing_policy is MissingPolicy.REJECT:
                    raise MissingDataError(f"{path}: missing-data marker {row[j]}", row=line, column=header[j])
                keep[i] = False
            values[i, k] = x
        if rf_col is not None:
            rf[i] = _parse_float(row[rf_col], path, line, header[rf_col])

    if rf_external is not None:
        rf_dates, rf_values = rf_external
        if rf_values.size != len(body):
            raise AlignmentError(f"risk-free series has {rf_values.size} rows, returns have {len(body)}")
        if dates is not None and rf_dates is not None and list(rf_dates) != list(dates):
            bad = next(i for i, (a, b) in enumerate(zip(dates, rf_dates)) if a != b)
            raise AlignmentError(f"risk-free date {rf_dates[bad]!r} does not match return date {dates[bad]!r}")
        rf = rf_values

    excess = values - rf[:, None]
    if opts.unit is Unit.PERCENT:
        excess = excess / 100.0
    excess = excess[keep]
    if dates is not None:
        dates = [d for d, k in zip(dates, keep) if k]
    return ReturnsMatrix(excess, dates=dates, asset_names=[header[j] for j in asset_cols])


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

def _num(x):
    if x is None:
        return None
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return x


def _unnum(x):
    if x is None:
        return None
    if isinstance(x, str):
        return float(x.replace("Infinity", "inf"))
    return float(x)


def _vec(a):
    return [_num(x) for x in np.asarray(a, dtype=float)]


def _solve_dict(res: SolveResult, asset_names=None):
    d = {
        "schema_version": SCHEMA_VERSION,
        "kind": "solve_result",
        "iterations": int(res.iterations),
        "converged": bool(res.converged),
        "alpha": _num(res.alpha),
        "objective": _num(res.objective),
        "sharpe": _num(res.sharpe),
        "fixed_point_residual": _num(res.fixed_point_residual),
        "certificate": {
            "kind": res.certificate.kind.value,
            "margin": _num(res.certificate.margin),
            "ambiguous": bool(res.certificate.ambiguous),
        },
        "support": [int(i) for i in res.portfolio.support],
        "v_star": _vec(res.v_star),
        "weights": _vec(res.portfolio.weights),
    }
    if asset_names is not None:
        d["asset_names"] = list(asset_names)
    if res.objective_trace is not None:
        d["objective_trace"] = _vec(res.objective_trace)
    return d


def _backtest_dict(res):
    periods = []
    dates = res.dates or [None] * len(res.portfolio_returns)
    for t, (date, r, pf) in enumerate(zip(dates, res.portfolio_returns, res.weights_by_period)):
        periods.append({
            "period": t,
            "date": date,
            "return": _num(r),
            "support_size": pf.support_size,
            "weights": _vec(pf.weights),
        })
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "backtest_result",
        "window": res.window,
        "n_periods": len(res.portfolio_returns),
        "test_sharpe": _num(res.test_sharpe),
        "cumulative_wealth": _num(res.cumulative_wealth),
        "wealth_by_cost_rate": [{"nu": _num(nu), "wealth": _num(w)}
                                for nu, w in res.wealth_by_cost_rate.items()],
        "sparsity_mean": _num(res.sparsity_mean),
        "sparsity_std": _num(res.sparsity_std),
        "certificates": dict(res.certificates),
        "metric_errors": dict(res.metric_errors),
        "warnings": list(res.warnings),
        "periods": periods,
    }


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, bool) or obj is None or isinstance(obj, (str, int)):
        return obj
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, enum.Enum):
        return obj.value
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _sim_dict(rep, include_records):
    cfg = rep.config
    d = {
        "schema_version": SCHEMA_VERSION,
        "kind": "sim_report",
        "config": {
            "n_assets": cfg.n_assets,
            "n_samples": cfg.n_samples,
            "m": cfg.m,
            "eps": cfg.eps,
            "p_range": list(cfg.p_range),
            "trials": cfg.trials,
            "seed": cfg.seed,
            "inits": [i.value for i in cfg.inits],
            "success_threshold": cfg.success_threshold,
            "pga_iters": cfg.pga_iters,
            "step_rule": cfg.step_rule,
        },
        "trials": rep.trials,
        "success_count": rep.success_count,
        "success_fraction": rep.success_fraction,
        "per_init_success": dict(rep.per_init_success),
        "certificate_counts": dict(rep.certificate_counts),
        "false_certifications": rep.false_certifications,
        "oracle_beaten": rep.oracle_beaten,
        "decrease_violations": rep.decrease_violations,
        "bound_violations": rep.bound_violations,
        "max_decrease_excess": rep.max_decrease_excess,
        "max_bound_excess": rep.max_bound_excess,
    }
    if include_records and rep.records is not None:
        d["records"] = rep.records
    return _clean(d)


def report_to_dict(result, include_records: bool = True, asset_names=None) -> dict:
    from .backtest import BacktestResult
    from .oracle import SimReport

    if isinstance(result, SolveResult):
        return _solve_dict(result, asset_names)
    if isinstance(result, BacktestResult):
        return _backtest_dict(result)
    if isinstance(result, SimReport):
        return _sim_dict(result, include_records)
    if isinstance(result, dict):
        return _clean(result)
    raise TypeError(f"unsupported report type {type(result).__name__}")


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _write_csv(path, header, rows):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(c) for c in row])


def _sibling(path, suffix):
    path = Path(path)
    return path.with_name(f"{path.stem}_{suffix}{path.suffix or '.csv'}")


def write_cost_curve(result, path):
    """Plot-ready ``(nu, final_wealth)`` table."""
    _write_csv(path, ["nu", "final_wealth"],
               [(float(nu), float(w)) for nu, w in result.wealth_by_cost_rate.items()])


def _write_csv_report(result, path, include_records, asset_names):
    from .backtest import BacktestResult
    from .oracle import SimReport

    if isinstance(result, SolveResult):
        names = asset_names or [""] * result.v_star.size
        _write_csv(path, ["index", "asset", "v_star", "weight"],
                   [(i, names[i], float(v), float(w))
                    for i, (v, w) in enumerate(zip(result.v_star, result.portfolio.weights))])
    elif isinstance(result, BacktestResult):
        dates = result.dates or [""] * len(result.portfolio_returns)
        _write_csv(path, ["period", "date", "return", "support_size"],
                   [(t, d, float(r), pf.support_size) for t, (d, r, pf)
                    in enumerate(zip(dates, result.portfolio_returns, result.weights_by_period))])
        summary = [
            ("window", result.window),
            ("n_periods", len(result.portfolio_returns)),
            ("test_sharpe", result.test_sharpe),
            ("cumulative_wealth", float(result.cumulative_wealth)),
            ("sparsity_mean", result.sparsity_mean),
            ("sparsity_std", result.sparsity_std),
        ] + [(f"wealth_nu_{nu!r}", float(w)) for nu, w in result.wealth_by_cost_rate.items()]
        _write_csv(_sibling(path, "summary"), ["metric", "value"], summary)
        write_cost_curve(result, _sibling(path, "costs"))
    elif isinstance(result, SimReport):
        if include_records and result.records is not None:
            rows = []
            for rec in result.records:
                for r in rec["inits"]:
                    rows.append((rec["trial"], r["init"], rec["success"], r["success"],
                                 r["vector_error"], r["value_error"], r["objective"],
                                 rec["oracle_objective"], r["certificate"]))
            _write_csv(path, ["trial", "init", "trial_success", "init_success", "vector_error",
                              "value_error", "objective", "oracle_objective", "certificate"], rows)
        else:
            d = _sim_dict(result, False)
            flat = [(k, v) for k, v in d.items() if not isinstance(v, (dict, list))]
            flat += [(f"per_init_success_{k}", v) for k, v in d["per_init_success"].items()]
            _write_csv(path, ["metric", "value"], flat)
    else:
        raise TypeError(f"unsupported report type {type(result).__name__}")


def write_report(result, fmt: str, path, include_records: bool = True, asset_names=None):
    """Serialize a solve, backtest or simulation result.

    JSON carries a top-level ``schema_version``; floats are written in
    shortest round-trip form and non-finite values as the strings
    ``"Infinity"``, ``"-Infinity"``, ``"NaN"``. CSV reports for a backtest
    also write ``<stem>_summary.csv`` and ``<stem>_costs.csv`` beside
    ``path``.
    """
    fmt = fmt.lower()
    try:
        if fmt == "json":
            text = json.dumps(report_to_dict(result, include_records, asset_names), indent=2,
                              allow_nan=False)
            Path(path).write_text(text + "\n", encoding="utf-8")
        elif fmt == "csv":
            _write_csv_report(result, path, include_records, asset_names)
        else:
            raise InputError(f"unknown report format {fmt!r}")
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc


def read_json(path) -> dict:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise OSError(f"cannot read report {path}: {exc}") from exc
    if d.get("schema_version") != SCHEMA_VERSION:
        raise InputError(f"{path}: unsupported schema_version {d.get('schema_version')!r}")
    return d


def solve_result_from_dict(d: dict) -> SolveResult:
    if d.get("kind") != "solve_result":
        raise InputError(f"not a solve result: kind={d.get('kind')!r}")
    v = np.array([_unnum(x) for x in d["v_star"]])
    cert = d["certificate"]
    res = SolveResult(
        v_star=v,
        portfolio=normalize_to_portfolio(v),
        iterations=d["iterations"],
        converged=d["converged"],
        fixed_point_residual=_unnum(d["fixed_point_residual"]),
        certificate=Certificate(CertificateKind(cert["kind"]), _unnum(cert["margin"])),
        alpha=_unnum(d["alpha"]),
        sharpe=_unnum(d["sharpe"]),
        objective=_unnum(d["objective"]),
    )
    if "objective_trace" in d:
        res.objective_trace = [_unnum(x) for x in d["objective_trace"]]
    return res
