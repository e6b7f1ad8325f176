"""m-sparse Sharpe ratio maximization by proximal gradient iteration."""

from .backtest import (BacktestConfig, BacktestResult, cumulative_wealth, evolve_weights,
                       run_backtest, sparsity_stats, wealth_with_costs)
from .data_io import LoadOptions, load_returns_csv, write_report
from .errors import SparseSharpeError
from .moments import (MomentModel, ReturnsMatrix, compute_moments, gradient_f, objective_f,
                      sample_sharpe, sharpe_s, spectral_norm_upper)
from .oracle import (SimConfig, SimReport, gen_random_instance, run_simulation,
                     solve_global_exhaustive, solve_nnqp_on_support)
from .prox import prox_m_sparse_nonneg
from .solver import (Certificate, CertificateKind, Init, SolveResult, SolverConfig,
                     SparsePortfolio, certify_global, check_eper, check_fixed_point,
                     normalize_to_portfolio, scale_to_subtraction, solve)

__version__ = "0.1.0"
