"""Tail-risk network portfolios.

Builds a positive-oriented tail-risk matrix from quantile-regression
forecasts, reads the implied network (adjacency, eigenvector centrality,
transformed adjacency), and optimizes minimum-risk portfolios with
node-removal diagnostics, pruning, rolling backtests, and Sharpe-ratio
inference.
"""

from .backtest import (
    BacktestConfig,
    BacktestReport,
    SharpeTestResult,
    rolling_backtest,
    sharpe,
    sharpe_test,
    summarize_returns,
)
from .dataio import (
    ReturnPanel,
    default_asset_ids,
    default_timestamps,
    read_matrix_csv,
    read_panel_csv,
    read_series_csv,
    write_matrix_csv,
    write_panel_csv,
    write_series_csv,
)
from .errors import (
    ConfigError,
    DataError,
    DefinitenessError,
    DegenerateConfigurationError,
    DimensionError,
    DomainError,
    InsufficientDataError,
    RangeError,
    SingularMatrixError,
    SolverError,
    SpectralBoundError,
    TailportError,
    ZeroVarianceError,
)
from .netgraph import (
    AdjacencyMatrix,
    CentralityVector,
    TransformedAdjacency,
    adjacency,
    eigen_centrality,
    shift_invariance_check,
    transform,
)
from .portfolio import (
    ExclusionStep,
    NodeRemovalParts,
    PositiveWeightReport,
    PruneStep,
    PruneTrace,
    RiskDecomposition,
    WeightVector,
    centrality_risk_gradient,
    delta_decomposition,
    delta_function,
    eigen_diff_decomposition,
    exclusion_sweep,
    gmvp,
    gmvp_centrality_form,
    gmvp_long_only,
    gmvp_uniform_diag_form,
    markowitz_baseline,
    min_risk_centrality,
    portfolio_risk,
    positive_weight_conditions,
    prune,
    reduce_matrix,
    sample_moments,
)
from .quantreg import QuantileModel, check_loss, fit_quantile, predict
from .riskmatrix import (
    RiskMatrix,
    TailForecastSet,
    build_gamma,
    eigen_decompose_identity_check,
    forecast_tails,
    from_matrix,
    symmetrize,
    validate_pd,
)
from .simulate import SimulationSpec, generate

__version__ = "0.1.0"

__all__ = [
    "AdjacencyMatrix",
    "BacktestConfig",
    "BacktestReport",
    "CentralityVector",
    "ConfigError",
    "DataError",
    "DefinitenessError",
    "DegenerateConfigurationError",
    "DimensionError",
    "DomainError",
    "ExclusionStep",
    "InsufficientDataError",
    "NodeRemovalParts",
    "PositiveWeightReport",
    "PruneStep",
    "PruneTrace",
    "QuantileModel",
    "RangeError",
    "ReturnPanel",
    "RiskDecomposition",
    "RiskMatrix",
    "SharpeTestResult",
    "SimulationSpec",
    "SingularMatrixError",
    "SolverError",
    "SpectralBoundError",
    "TailForecastSet",
    "TailportError",
    "TransformedAdjacency",
    "WeightVector",
    "ZeroVarianceError",
    "adjacency",
    "build_gamma",
    "centrality_risk_gradient",
    "check_loss",
    "default_asset_ids",
    "default_timestamps",
    "delta_decomposition",
    "delta_function",
    "eigen_centrality",
    "eigen_decompose_identity_check",
    "eigen_diff_decomposition",
    "exclusion_sweep",
    "fit_quantile",
    "forecast_tails",
    "from_matrix",
    "generate",
    "gmvp",
    "gmvp_centrality_form",
    "gmvp_long_only",
    "gmvp_uniform_diag_form",
    "markowitz_baseline",
    "min_risk_centrality",
    "portfolio_risk",
    "positive_weight_conditions",
    "predict",
    "prune",
    "read_matrix_csv",
    "read_panel_csv",
    "read_series_csv",
    "reduce_matrix",
    "rolling_backtest",
    "sample_moments",
    "sharpe",
    "sharpe_test",
    "shift_invariance_check",
    "summarize_returns",
    "symmetrize",
    "transform",
    "validate_pd",
    "write_matrix_csv",
    "write_panel_csv",
    "write_series_csv",
]
