"""Proximal gradient solver for the m-sparse Sharpe ratio problem.

Maximizing ``p'w / sqrt(w' Q_eps w)`` over long-only, fully invested,
m-sparse weights is solved through the equivalent subtraction-form program

    min  1/2 v' Q_eps v - p' v   s.t.  v >= 0, ||v||_0 <= m

by the fixed-step iteration ``v <- prox(v - alpha * grad f(v))``; the
portfolio is the solution rescaled onto the simplex.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DimensionError, InputError, NonFiniteError, NumericalError
from .moments import MomentModel, gradient_f, objective_f, sharpe_s
from .prox import prox_m_sparse_nonneg

logger = logging.getLogger(__name__)

__all__ = [
    "Init",
    "SolverConfig",
    "SparsePortfolio",
    "CertificateKind",
    "Certificate",
    "SolveResult",
    "PGATrace",
    "solve",
    "pga_iterate",
    "step_size",
    "initial_point",
    "check_fixed_point",
    "certify_global",
    "check_eper",
    "normalize_to_portfolio",
    "scale_to_subtraction",
    "AMBIGUOUS_MARGIN",
]

# Gradient-condition margins below this are not trustworthy in floating point.
AMBIGUOUS_MARGIN = 1e-10


class Init(str, enum.Enum):
    MEAN = "mean"
    ZERO = "zero"
    UNIFORM = "uniform"
    ONES = "ones"
    CUSTOM = "custom"


@dataclass(frozen=True)
class SolverConfig:
    m: int
    eps: float = 1e-3
    step_safety: float = 0.999
    tol: float = 1e-5
    max_iter: int = 10_000
    init: Init = Init.MEAN
    init_vector: Optional[np.ndarray] = None
    record_trace: bool = False

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise InputError(f"m must be a positive integer, got {self.m!r}")
        if not 0.0 < self.step_safety < 1.0:
            raise InputError(f"step_safety must lie in (0, 1), got {self.step_safety}")
        if not self.eps > 0:
            raise InputError(f"eps must be positive, got {self.eps}")
        # tol == 0 runs exactly max_iter iterations (or until an exact fixed point).
        if self.tol < 0:
            raise InputError(f"tol must be nonnegative, got {self.tol}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise InputError(f"max_iter must be a positive integer, got {self.max_iter!r}")
        init = Init(self.init)
        object.__setattr__(self, "init", init)
        if init is Init.CUSTOM and self.init_vector is None:
            raise InputError("custom init requires init_vector")


@dataclass(frozen=True)
class SparsePortfolio:
    """Long-only weights summing to one, or the all-zero (risk-free) fallback."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if np.any(w < 0):
            raise InputError("portfolio weights must be nonnegative")
        s = w.sum()
        if np.any(w) and abs(s - 1.0) > 1e-12:
            raise InputError(f"portfolio weights sum to {s!r}, not 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.weights)

    @property
    def support_size(self) -> int:
        return int(np.count_nonzero(self.weights))

    @property
    def is_zero(self) -> bool:
        return not np.any(self.weights)


class CertificateKind(str, enum.Enum):
    GLOBAL_BY_CARDINALITY = "global_by_cardinality"
    GLOBAL_BY_GRADIENT = "global_by_gradient"
    LOCAL_ONLY = "local_only"
    ZERO_PORTFOLIO = "zero_portfolio"


@dataclass(frozen=True)
class Certificate:
    kind: CertificateKind
    # min over inactive i of grad_i f(v*) + eps * min(v* on support);
    # None when v* = 0, +inf when every index is active.
    margin: Optional[float] = None

    @property
    def is_global(self) -> bool:
        return self.kind in (
            CertificateKind.GLOBAL_BY_CARDINALITY,
            CertificateKind.GLOBAL_BY_GRADIENT,
        )

    @property
    def ambiguous(self) -> bool:
        return (
            self.kind in (CertificateKind.GLOBAL_BY_GRADIENT, CertificateKind.LOCAL_ONLY)
            and self.margin is not None
            and abs(self.margin) < AMBIGUOUS_MARGIN
        )


@dataclass
class PGATrace:
    """Per-iteration diagnostics; index k refers to iterate v^(k)."""

    objective: list = field(default_factory=list)  # F(v^k), inf when v^k is outside the feasible set
    step_norms: list = field(default_factory=list)  # ||v^(k+1) - v^k||
    iterate_norms: list = field(default_factory=list)  # ||v^k||


@dataclass
class SolveResult:
    v_star: np.ndarray
    portfolio: SparsePortfolio
    iterations: int
    converged: bool
    fixed_point_residual: float
    certificate: Certificate
    alpha: float
    sharpe: Optional[float] = None
    objective: float = 0.0
    objective_trace: Optional[list] = None
    step_norms: Optional[list] = None
    iterate_norms: Optional[list] = None


def check_eper(model: MomentModel) -> bool:
    """True iff some feasible portfolio has positive expected excess return."""
    return bool(np.max(model.p) > 0.0)


def step_size(model: MomentModel, safety: float = 0.999) -> float:
    return safety / model.lambda1


def initial_point(model: MomentModel, init, init_vector=None) -> np.ndarray:
    n = model.n_assets
    init = Init(init)
    if init is Init.MEAN:
        return np.array(model.p)
    if init is Init.ZERO:
        return np.zeros(n)
    if init is Init.UNIFORM:
        return np.full(n, 1.0 / n)
    if init is Init.ONES:
        return np.ones(n)
    v0 = np.asarray(init_vector, dtype=float)
    if v0.shape != (n,):
        raise DimensionError(f"init_vector must have length {n}, got shape {v0.shape}")
    if not np.all(np.isfinite(v0)):
        raise NonFiniteError("init_vector must be finite")
    return v0.copy()


def _feasible_objective(model, v, m):
    if np.any(v < 0) or np.count_nonzero(v) > m:
        return math.inf
    return objective_f(model, v)


def pga_iterate(model: MomentModel, v0, alpha: float, m: int, tol: float, max_iter: int,
                record: bool = False):
    """Run the proximal gradient recursion.

    Returns ``(v, iterations, converged, trace)`` where ``trace`` is a
    :class:`PGATrace` if ``record`` else ``None``. Stops after an iteration
    whose relative step ``||v^k - v^(k-1)|| / ||v^(k-1)||`` is at most
    ``tol`` (absolute ``||v^k|| <= tol`` when ``v^(k-1) = 0``), or after
    ``max_iter`` iterations.
    """
    p = model.p
    v = np.array(v0, dtype=float)
    trace = PGATrace() if record else None
    if record:
        trace.objective.append(_feasible_objective(model, v, m))
        trace.iterate_norms.append(float(np.linalg.norm(v)))
    converged = False
    k = 0
    while k < max_iter:
        u = v - alpha * (model.apply_qeps(v) - p)
        k += 1
        # prox would silently zero NaNs, so test before projecting.
        if not np.all(np.isfinite(u)):
            raise NumericalError(f"non-finite iterate at iteration {k}")
        v_new = prox_m_sparse_nonneg(u, m)
        step = float(np.linalg.norm(v_new - v))
        prev = float(np.linalg.norm(v))
        if record:
            trace.step_norms.append(step)
            trace.objective.append(objective_f(model, v_new))
            trace.iterate_norms.append(float(np.linalg.norm(v_new)))
        v = v_new
        if (prev > 0.0 and step <= tol * prev) or (prev == 0.0 and float(np.linalg.norm(v)) <= tol):
            converged = True
            break
    return v, k, converged, trace


def check_fixed_point(model: MomentModel, v, alpha: float, m: int) -> float:
    """``||v - prox(v - alpha grad f(v))||``; zero exactly at PGA fixed points."""
    v = np.asarray(v, dtype=float)
    if not alpha > 0:
        raise InputError("alpha must be positive")
    return float(np.linalg.norm(v - prox_m_sparse_nonneg(v - alpha * gradient_f(model, v), m)))


def certify_global(model: MomentModel, v_star, m: int) -> Certificate:
    """Sufficient global-optimality test for a converged PGA limit."""
    v = np.asarray(v_star, dtype=float)
    support = v > 0
    n_pos = int(np.count_nonzero(support))
    if n_pos == 0:
        return Certificate(CertificateKind.ZERO_PORTFOLIO)
    grad = gradient_f(model, v)
    inactive = ~support
    threshold = model.eps * float(np.min(v[support]))
    margin = float(np.min(grad[inactive]) + threshold) if np.any(inactive) else math.inf
    if not check_eper(model):
        return Certificate(CertificateKind.LOCAL_ONLY, margin)
    if n_pos < m:
        return Certificate(CertificateKind.GLOBAL_BY_CARDINALITY, margin)
    if n_pos == m and (not np.any(inactive) or bool(np.all(grad[inactive] > -threshold))):
        return Certificate(CertificateKind.GLOBAL_BY_GRADIENT, margin)
    return Certificate(CertificateKind.LOCAL_ONLY, margin)


def normalize_to_portfolio(v) -> SparsePortfolio:
    """Rescale a nonnegative vector onto the simplex; zero maps to zero."""
    v = np.asarray(v, dtype=float)
    if np.any(v < -1e-12):
        raise InputError("cannot normalize a vector with negative components")
    v = np.where(v > 0.0, v, 0.0)
    total = v.sum()
    if total > 0.0:
        return SparsePortfolio(v / total)
    return SparsePortfolio(np.zeros_like(v))


def scale_to_subtraction(model: MomentModel, w) -> np.ndarray:
    """Map a Sharpe-optimal direction to the matching subtraction-form point."""
    w = np.asarray(w, dtype=float)
    ret = float(model.p @ w)
    if not ret > 0:
        raise InputError(f"scaling needs p'w > 0, got {ret!r}")
    return (ret / float(w @ model.apply_qeps(w))) * w


def solve(model: MomentModel, config: SolverConfig) -> SolveResult:
    m = int(config.m)
    if m > model.n_assets:
        raise InputError(f"m = {m} exceeds the number of assets {model.n_assets}")
    alpha = step_size(model, config.step_safety)
    v0 = initial_point(model, config.init, config.init_vector)
    v, k, converged, trace = pga_iterate(
        model, v0, alpha, m, config.tol, config.max_iter, record=config.record_trace
    )
    if not converged:
        logger.warning("PGA stopped at max_iter=%d without meeting tol=%g", config.max_iter, config.tol)
    portfolio = normalize_to_portfolio(v)
    sharpe = None if portfolio.is_zero else sharpe_s(model, portfolio.weights)
    result = SolveResult(
        v_star=v,
        portfolio=portfolio,
        iterations=k,
        converged=converged,
        fixed_point_residual=check_fixed_point(model, v, alpha, m),
        certificate=certify_global(model, v, m),
        alpha=alpha,
        sharpe=sharpe,
        objective=objective_f(model, v),
    )
    if trace is not None:
        result.objective_trace = trace.objective
        result.step_norms = trace.step_norms
        result.iterate_norms = trace.iterate_norms
    return result
