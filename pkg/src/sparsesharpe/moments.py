"""Sample moments of a return matrix and the quadratic model built on them.

The optimization instance is

    f(v) = 1/2 v' Q_eps v - p' v,    Q_eps = Q'Q + eps I,

where ``p`` is the sample mean of the excess returns and ``Q`` the centered
return matrix scaled by ``1/sqrt(T-1)``, so that ``Q'Q`` is the sample
covariance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionError, NonFiniteError, ZeroVarianceError, ZeroVectorError

__all__ = [
    "ReturnsMatrix",
    "MomentModel",
    "compute_moments",
    "spectral_norm_upper",
    "objective_f",
    "gradient_f",
    "sharpe_s",
    "sample_sharpe",
]

POWER_RTOL = 1e-10
POWER_MAX_ITER = 10_000
UPPER_INFLATION = 1e-6


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ReturnsMatrix:
    """T x N per-period excess returns, as fractions (0.01 is 1%)."""

    values: np.ndarray
    dates: Optional[Sequence[str]] = None
    asset_names: Optional[Sequence[str]] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise DimensionError(f"returns must be 2-D, got shape {values.shape}")
        n_periods, n_assets = values.shape
        if n_periods < 2 or n_assets < 1:
            raise DimensionError(
                f"need at least 2 periods and 1 asset, got {n_periods}x{n_assets}"
            )
        if not np.all(np.isfinite(values)):
            bad = np.argwhere(~np.isfinite(values))[0]
            raise NonFiniteError(f"non-finite return at row {bad[0]}, column {bad[1]}")
        if self.dates is not None and len(self.dates) != n_periods:
            raise DimensionError(f"{len(self.dates)} dates for {n_periods} periods")
        if self.asset_names is not None and len(self.asset_names) != n_assets:
            raise DimensionError(f"{len(self.asset_names)} names for {n_assets} assets")
        object.__setattr__(self, "values", _readonly(values))
        if self.dates is not None:
            object.__setattr__(self, "dates", tuple(str(d) for d in self.dates))
        if self.asset_names is not None:
            object.__setattr__(self, "asset_names", tuple(str(a) for a in self.asset_names))

    @property
    def n_periods(self) -> int:
        return self.values.shape[0]

    @property
    def n_assets(self) -> int:
        return self.values.shape[1]

    def rows(self, start: int, stop: int) -> "ReturnsMatrix":
        dates = None if self.dates is None else self.dates[start:stop]
        return ReturnsMatrix(self.values[start:stop], dates, self.asset_names)


@dataclass(frozen=True)
class MomentModel:
    """Immutable quadratic instance ``(p, Q, eps)`` with a cached spectral bound.

    ``Q`` may be any real matrix with N columns; it need not come from
    :func:`compute_moments` (the simulation study draws it directly).
    ``Q_eps`` is materialized only when ``N <= rows(Q)``; otherwise products
    are taken in factored form ``Q'(Qv) + eps v``.
    """

    p: np.ndarray
    Q: np.ndarray
    eps: float
    lambda1: float = field(init=False)
    _qeps: Optional[np.ndarray] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float).ravel()
        Q = np.asarray(self.Q, dtype=float)
        if Q.ndim != 2 or Q.shape[1] != p.size:
            raise DimensionError(f"Q shape {Q.shape} incompatible with {p.size} assets")
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(Q))):
            raise NonFiniteError("p and Q must be finite")
        eps = float(self.eps)
        if not eps > 0 or not math.isfinite(eps):
            raise ValueError(f"eps must be positive and finite, got {self.eps!r}")
        object.__setattr__(self, "p", _readonly(p))
        object.__setattr__(self, "Q", _readonly(Q))
        object.__setattr__(self, "eps", eps)
        qeps = None
        if p.size <= Q.shape[0]:
            qeps = Q.T @ Q + eps * np.eye(p.size)
            qeps.setflags(write=False)
        object.__setattr__(self, "_qeps", qeps)
        object.__setattr__(self, "lambda1", _power_upper(self))

    @property
    def n_assets(self) -> int:
        return self.p.size

    def apply_qeps(self, v: np.ndarray) -> np.ndarray:
        """Return ``Q_eps @ v``."""
        if self._qeps is not None:
            return self._qeps @ v
        return self.Q.T @ (self.Q @ v) + self.eps * v

    def qeps_matrix(self) -> np.ndarray:
        if self._qeps is not None:
            return self._qeps
        return self.Q.T @ self.Q + self.eps * np.eye(self.n_assets)


def compute_moments(returns: ReturnsMatrix, eps: float = 1e-3) -> MomentModel:
    """Sample mean ``p`` and scaled centered factor ``Q`` of ``returns``."""
    if not isinstance(returns, ReturnsMatrix):
        returns = ReturnsMatrix(returns)
    R = returns.values
    n_periods = R.shape[0]
    p = R.mean(axis=0)
    Q = (R - p) / math.sqrt(n_periods - 1)
    return MomentModel(p=p, Q=Q, eps=eps)


def _rayleigh_power(model: MomentModel, x: np.ndarray):
    x = x / np.linalg.norm(x)
    rho = float(x @ model.apply_qeps(x))
    for _ in range(POWER_MAX_ITER):
        y = model.apply_qeps(x)
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return rho, True
        x = y / ny
        rho_new = float(x @ model.apply_qeps(x))
        if abs(rho_new - rho) <= POWER_RTOL * abs(rho_new):
            return rho_new, True
        rho = rho_new
    return rho, False


def _power_upper(model: MomentModel) -> float:
    n = model.n_assets
    # Second deterministic start guards against 1_N being orthogonal to the
    # dominant eigenvector (e.g. Q'Q = [[1,-1],[-1,1]]).
    idx = np.arange(n, dtype=float)
    starts = [np.ones(n)]
    if n > 1:
        starts.append((-1.0) ** idx * (1.0 + idx / n))
    estimates = []
    for x0 in starts:
        rho, ok = _rayleigh_power(model, x0)
        if not ok:
            QtQ = model.Q.T @ model.Q
            return float(np.linalg.norm(QtQ, "fro") + model.eps)
        estimates.append(rho)
    return max(estimates) * (1.0 + UPPER_INFLATION)


def spectral_norm_upper(model: MomentModel) -> float:
    """Upper estimate of the largest eigenvalue of ``Q_eps``.

    Power iteration from ``1_N/sqrt(N)`` (plus one fixed auxiliary start),
    inflated by a factor ``1 + 1e-6``. Falls back to ``||Q'Q||_F + eps`` if
    the iteration stagnates.
    """
    return model.lambda1


def _check_vec(model, v):
    v = np.asarray(v, dtype=float)
    if v.shape != (model.n_assets,):
        raise DimensionError(f"expected vector of length {model.n_assets}, got shape {v.shape}")
    return v


def objective_f(model: MomentModel, v) -> float:
    v = _check_vec(model, v)
    return 0.5 * float(v @ model.apply_qeps(v)) - float(model.p @ v)


def gradient_f(model: MomentModel, v) -> np.ndarray:
    v = _check_vec(model, v)
    return model.apply_qeps(v) - model.p


def sharpe_s(model: MomentModel, w) -> float:
    """Regularized in-sample Sharpe ratio ``p'w / sqrt(w' Q_eps w)``."""
    w = _check_vec(model, w)
    if not np.any(w):
        raise ZeroVectorError("Sharpe ratio undefined for the zero portfolio")
    return float(model.p @ w) / math.sqrt(float(w @ model.apply_qeps(w)))


def sample_sharpe(returns) -> float:
    """Mean over sample standard deviation (``n - 1`` divisor)."""
    r = np.asarray(returns, dtype=float).ravel()
    if r.size < 2:
        raise DimensionError(f"test Sharpe ratio needs at least 2 returns, got {r.size}")
    sd = float(np.std(r, ddof=1))
    if sd == 0.0 or np.all(r == r[0]):
        raise ZeroVarianceError("returns have zero sample variance")
    return float(np.mean(r)) / sd
