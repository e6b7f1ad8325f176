"""Exhaustive global solver and the random-instance global-optimality study.

The exhaustive solver enumerates every support of size ``m``, solves the
convex nonnegative QP restricted to it, and keeps the best. It is only meant
for instances small enough to enumerate, where it serves as ground truth for
the proximal gradient solver.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import EnumerationLimitError, InputError
from .moments import MomentModel, objective_f
from .solver import Init, certify_global, initial_point, pga_iterate

__all__ = [
    "MAX_SUPPORTS",
    "GlobalSolution",
    "SimConfig",
    "SimReport",
    "solve_nnqp_on_support",
    "solve_global_exhaustive",
    "kmsz_covariance",
    "trial_rng",
    "gen_random_instance",
    "run_simulation",
]

MAX_SUPPORTS = 10**6
_ENUM_MAX = 12  # largest support solved by sub-support enumeration
_PG_RTOL = 1e-12
_PG_MAX_ITER = 1_000_000


class GlobalSolution(NamedTuple):
    v: np.ndarray
    objective: float
    support: tuple
    n_supports: int


def _kkt_tol(p_s):
    return 1e-11 * (1.0 + float(np.max(np.abs(p_s), initial=0.0)))


def _enumerate_positive_sets(Qeps, p, support, cache):
    """Unique minimizer of f over ``{v >= 0, v = 0 off support}`` by KKT enumeration.

    Candidate positive sets are tried in order of increasing size; the first
    whose stationary point is positive and whose excluded gradients are
    nonnegative is optimal by convexity. ``cache`` maps a tuple of indices
    to its stationary point so overlapping supports share solves. Returns
    None if rounding defeats every candidate.
    """
    p_s = p[list(support)]
    if np.all(p_s <= 0.0):
        return np.zeros(p.size)
    tol = _kkt_tol(p_s)
    for r in range(1, len(support) + 1):
        for sub in itertools.combinations(support, r):
            x = cache.get(sub)
            if x is None:
                sl = list(sub)
                x = np.linalg.solve(Qeps[np.ix_(sl, sl)], p[sl])
                cache[sub] = x
            if not np.all(x > 0.0):
                continue
            rest = [j for j in support if j not in sub]
            if rest and np.any(Qeps[np.ix_(rest, list(sub))] @ x - p[rest] < -tol):
                continue
            v = np.zeros(p.size)
            v[list(sub)] = x
            return v
    return None


def _projected_gradient(A, b):
    n = b.size
    L = float(np.linalg.eigvalsh(A)[-1])
    step = 1.0 / L
    x = np.zeros(n)
    for _ in range(_PG_MAX_ITER):
        x_new = np.maximum(x - step * (A @ x - b), 0.0)
        resid = float(np.linalg.norm(x_new - x))
        x = x_new
        if resid <= _PG_RTOL * (1.0 + float(np.linalg.norm(x))):
            break
    return x


def solve_nnqp_on_support(model: MomentModel, support: Sequence[int], method: str = "auto") -> np.ndarray:
    """Global minimizer of f over ``{v >= 0, v_j = 0 off support}``.

    ``method`` is ``"enumerate"`` (exact KKT enumeration of positive sets),
    ``"projected_gradient"`` (clamped gradient descent with step
    ``1/lambda_max``), or ``"auto"``, which enumerates supports of at most
    12 indices and falls back to projected gradient otherwise.
    """
    idx = sorted(set(int(i) for i in support))
    if not idx:
        raise InputError("support must be nonempty")
    if idx[0] < 0 or idx[-1] >= model.n_assets:
        raise InputError(f"support indices out of range for {model.n_assets} assets")
    if method not in ("auto", "enumerate", "projected_gradient"):
        raise ValueError(f"unknown method {method!r}")
    return _solve_support(model.qeps_matrix(), np.asarray(model.p), tuple(idx), method, {})


def _solve_support(Qeps, p, support, method, cache):
    if method == "enumerate" or (method == "auto" and len(support) <= _ENUM_MAX):
        v = _enumerate_positive_sets(Qeps, p, support, cache)
        if v is not None:
            return v
    sl = list(support)
    v = np.zeros(p.size)
    v[sl] = _projected_gradient(Qeps[np.ix_(sl, sl)], p[sl])
    return v


def solve_global_exhaustive(model: MomentModel, m: int, max_supports: int = MAX_SUPPORTS,
                            method: str = "auto") -> GlobalSolution:
    """Best m-sparse nonnegative point by enumerating all size-m supports.

    Supports of size below ``m`` are covered because each embeds in a
    size-``m`` one. Ties keep the lexicographically first support.
    """
    n = model.n_assets
    m = int(m)
    if not 1 <= m <= n:
        raise InputError(f"need 1 <= m <= N, got m = {m}, N = {n}")
    n_supports = math.comb(n, m)
    if n_supports > max_supports:
        raise EnumerationLimitError(
            f"C({n}, {m}) = {n_supports} supports exceeds the budget of {max_supports}"
        )
    Qeps = model.qeps_matrix()
    p = np.asarray(model.p)
    # Positive-set solves are shared among supports: key is a tuple of global indices.
    cache: dict = {}
    best_v, best_f, best_s = None, math.inf, None
    for support in itertools.combinations(range(n), m):
        v = _solve_support(Qeps, p, support, method, cache)
        f = objective_f(model, v)
        if f < best_f:
            best_v, best_f, best_s = v, f, support
    return GlobalSolution(best_v, best_f, best_s, n_supports)


def kmsz_covariance(n: int, rho: float = 0.5) -> np.ndarray:
    """Toeplitz covariance with entries ``rho ** |i - j|``."""
    i = np.arange(n)
    return rho ** np.abs(i[:, None] - i[None, :]).astype(float)


@dataclass(frozen=True)
class SimConfig:
    n_assets: int = 10
    n_samples: int = 50
    m: int = 3
    eps: float = 1e-3
    p_range: tuple = (-10.0, 10.0)
    trials: int = 1000
    seed: int = 0
    inits: tuple = (Init.ZERO, Init.UNIFORM, Init.ONES)
    success_threshold: float = 1e-10
    pga_iters: int = 500
    step_rule: str = "a9"
    keep_records: bool = True
    max_supports: int = MAX_SUPPORTS

    def __post_init__(self):
        if self.trials < 0:
            raise InputError("trials must be nonnegative")
        if not 1 <= self.m <= self.n_assets:
            raise InputError(f"need 1 <= m <= n_assets, got m = {self.m}")
        if self.n_samples < 1:
            raise InputError("n_samples must be positive")
        if self.step_rule not in ("a9", "default"):
            raise InputError(f"step_rule must be 'a9' or 'default', got {self.step_rule!r}")
        lo, hi = self.p_range
        if not lo < hi:
            raise InputError(f"empty p_range {self.p_range}")
        inits = tuple(Init(i) for i in self.inits)
        if not inits or Init.CUSTOM in inits:
            raise InputError("inits must be a nonempty subset of mean/zero/uniform/ones")
        object.__setattr__(self, "inits", inits)
        object.__setattr__(self, "p_range", (float(lo), float(hi)))
        if math.comb(self.n_assets, self.m) > self.max_supports:
            raise EnumerationLimitError(
                f"C({self.n_assets}, {self.m}) supports exceeds the budget of {self.max_supports}"
            )

    @property
    def step_safety(self) -> float:
        return 0.99 if self.step_rule == "a9" else 0.999


@dataclass
class SimReport:
    config: SimConfig
    trials: int = 0
    success_count: int = 0
    per_init_success: dict = field(default_factory=dict)
    certificate_counts: dict = field(default_factory=dict)
    false_certifications: int = 0
    oracle_beaten: int = 0
    decrease_violations: int = 0
    bound_violations: int = 0
    max_decrease_excess: float = -math.inf
    max_bound_excess: float = -math.inf
    records: Optional[list] = None

    @property
    def success_fraction(self) -> float:
        return self.success_count / self.trials if self.trials else 0.0


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """PCG64 stream for one trial, derived from ``(seed, trial)``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(trial),))))


def gen_random_instance(rng: np.random.Generator, config: SimConfig) -> MomentModel:
    """Draw ``Q`` with i.i.d. N(0, Sigma) rows and ``p`` uniform on ``p_range``."""
    chol = np.linalg.cholesky(kmsz_covariance(config.n_assets))
    Z = rng.standard_normal((config.n_samples, config.n_assets))
    Q = Z @ chol.T
    lo, hi = config.p_range
    p = rng.uniform(lo, hi, size=config.n_assets)
    return MomentModel(p=p, Q=Q, eps=config.eps)


def _normalized(err, scale):
    return err / scale if scale > 1e-300 else err


def _trace_checks(model, trace, alpha, v0):
    """Violation counts and worst excesses of the descent and norm bounds."""
    a = 0.5 * (1.0 / alpha - model.lambda1)
    F = np.asarray(trace.objective)
    steps = np.asarray(trace.step_norms)
    lhs = F[1:] + a * steps**2
    with np.errstate(invalid="ignore"):
        excess = np.where(np.isinf(F[:-1]), -np.inf, lhs - F[:-1])
    dec_viol = int(np.count_nonzero(excess > 1e-12))
    gamma = 1.0 - alpha * model.eps
    k = np.arange(F.size)
    gk = gamma**k
    bound = gk * float(np.linalg.norm(v0)) + alpha * float(np.linalg.norm(model.p)) * (1.0 - gk) / (1.0 - gamma)
    b_excess = np.asarray(trace.iterate_norms) - bound
    bnd_viol = int(np.count_nonzero(b_excess > 1e-9))
    return dec_viol, float(np.max(excess, initial=-np.inf)), bnd_viol, float(np.max(b_excess))


def _run_trial(config, trial):
    model = gen_random_instance(trial_rng(config.seed, trial), config)
    glob = solve_global_exhaustive(model, config.m, max_supports=config.max_supports)
    v_star, f_star = glob.v, glob.objective
    v_norm = float(np.linalg.norm(v_star))
    alpha = config.step_safety / model.lambda1
    record = {"trial": trial, "oracle_objective": f_star, "oracle_support": list(glob.support),
              "inits": []}
    all_ok = True
    for init in config.inits:
        v0 = initial_point(model, init)
        v, _, _, trace = pga_iterate(model, v0, alpha, config.m, tol=0.0,
                                     max_iter=config.pga_iters, record=True)
        f = objective_f(model, v)
        verr = _normalized(float(np.linalg.norm(v - v_star)), v_norm)
        ferr = _normalized(abs(f - f_star), abs(f_star))
        ok = verr < config.success_threshold and ferr < config.success_threshold
        all_ok &= ok
        cert = certify_global(model, v, config.m)
        false_cert = cert.is_global and (f - f_star) > 1e-8 * (1.0 + abs(f_star))
        dv, dmax, bv, bmax = _trace_checks(model, trace, alpha, v0)
        record["inits"].append({
            "init": init.value,
            "vector_error": verr,
            "value_error": ferr,
            "objective": f,
            "success": ok,
            "certificate": cert.kind.value,
            "certificate_margin": cert.margin,
            "false_certification": bool(false_cert),
            "oracle_beaten": bool(f_star > f + 1e-10),
            "decrease_violations": dv,
            "max_decrease_excess": dmax,
            "bound_violations": bv,
            "max_bound_excess": bmax,
        })
    record["success"] = bool(all_ok)
    return record


def run_simulation(config: SimConfig, progress=None) -> SimReport:
    """Compare fixed-length PGA runs against the exhaustive optimum.

    A trial succeeds when every configured initialization ends with both
    the normalized iterate error and the normalized objective error below
    ``success_threshold``. ``progress``, if given, is called with the
    trial index after each trial.
    """
    report = SimReport(config=config, trials=config.trials)
    per_init = Counter({init.value: 0 for init in config.inits})
    certs: Counter = Counter()
    records = []
    for trial in range(config.trials):
        rec = _run_trial(config, trial)
        report.success_count += rec["success"]
        for r in rec["inits"]:
            per_init[r["init"]] += r["success"]
            certs[r["certificate"]] += 1
            report.false_certifications += r["false_certification"]
            report.oracle_beaten += r["oracle_beaten"]
            report.decrease_violations += r["decrease_violations"]
            report.bound_violations += r["bound_violations"]
            report.max_decrease_excess = max(report.max_decrease_excess, r["max_decrease_excess"])
            report.max_bound_excess = max(report.max_bound_excess, r["max_bound_excess"])
        if config.keep_records:
            records.append(rec)
        if progress is not None:
            progress(trial)
    report.per_init_success = dict(per_init)
    report.certificate_counts = dict(sorted(certs.items()))
    report.records = records if config.keep_records else None
    return report
