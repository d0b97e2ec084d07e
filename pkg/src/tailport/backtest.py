"""Rolling out-of-sample evaluation and Sharpe-ratio inference.

The backtest refits the whole tail pipeline on each rolling window: quantile
regressions for the tail forecasts, matrix assembly and validation, then the
chosen allocation strategy.  Weights decided at the window end are held for
one period and scored against the next return row, so every portfolio return
is out of sample.

Sharpe-ratio differences are tested with a delta-method standard error on the
joint first and second uncentered moments of the two return series, either
with an i.i.d. plug-in covariance, a Bartlett-kernel long-run covariance, or
by studentized bootstrap (i.i.d. or circular block) with paired resampling.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .dataio import ReturnPanel
from .errors import (
    DataError,
    DimensionError,
    DomainError,
    InsufficientDataError,
    TailportError,
    ZeroVarianceError,
)
from .netgraph import adjacency, eigen_centrality
from .portfolio import gmvp, gmvp_long_only, portfolio_risk, prune, reduce_matrix
from .riskmatrix import build_gamma, forecast_tails, symmetrize, validate_pd

__all__ = [
    "BacktestConfig",
    "BacktestReport",
    "SharpeTestResult",
    "rolling_backtest",
    "sharpe",
    "sharpe_test",
    "summarize_returns",
]

_STRATEGIES = ("full", "remove_most_central", "remove_least_central", "prune")
_METHODS = ("asymptotic", "hac", "iid_bootstrap", "circular_bootstrap")


@dataclass(frozen=True)
class BacktestConfig:
    """Settings for one rolling run.

    ``removal_count`` only matters for the two fixed-count removal
    strategies.  ``risk_free`` is an optional per-period series, aligned with
    the panel rows, subtracted from realized portfolio returns.  Permissive
    mode clamps out-of-range tail forecasts and floors non-positive-definite
    matrices instead of aborting.
    """

    window_length: int = 250
    tau: float = 0.05
    strategy: str = "full"
    removal_count: int = 0
    long_only: bool = False
    mode: str = "strict"
    min_assets: int = 2
    max_removals: int | None = None
    risk_free: np.ndarray | None = None
    n_jobs: int = 1

    def __post_init__(self):
        if self.strategy not in _STRATEGIES:
            raise DomainError(
                f"strategy must be one of {_STRATEGIES}, got {self.strategy!r}"
            )
        if self.mode not in ("strict", "permissive"):
            raise DomainError(f"mode must be 'strict' or 'permissive', got {self.mode!r}")
        if self.window_length < 3:
            raise DomainError("window_length must be at least 3")
        if self.removal_count < 0:
            raise DomainError("removal_count must be nonnegative")


@dataclass(frozen=True)
class BacktestReport:
    """Out-of-sample record of a rolling run.

    ``weights`` holds one full-width row per decision; assets removed by the
    strategy carry exact zeros.  ``oos_returns[r]`` is the return realized by
    ``weights[r]`` one period after its decision timestamp.
    """

    config: BacktestConfig
    asset_ids: tuple[str, ...]
    timestamps: tuple[str, ...]
    oos_returns: np.ndarray
    weights: np.ndarray
    n_clamped: int
    n_floored: int

    @property
    def n_periods(self) -> int:
        return self.oos_returns.shape[0]


@dataclass(frozen=True)
class SharpeTestResult:
    """Two-sided test of equal Sharpe ratios for two return series."""

    sr_x: float
    sr_y: float
    difference: float
    t_stat: float
    p_value: float
    method: str
    n_obs: int
    n_boot: int | None = None
    block_length: int | None = None


def sharpe(returns) -> float:
    """Sample Sharpe ratio: mean over the unbiased standard deviation."""
    r = np.asarray(returns, dtype=float)
    if r.ndim != 1 or r.shape[0] < 2:
        raise InsufficientDataError("need a 1-D series of at least 2 returns")
    if not np.all(np.isfinite(r)):
        raise DataError("returns contain NaN or infinite entries")
    sd = float(r.std(ddof=1))
    if sd == 0.0:
        raise ZeroVarianceError("constant return series has no Sharpe ratio")
    return float(r.mean()) / sd


def sharpe_test(
    x,
    y,
    method: str = "asymptotic",
    n_boot: int = 1000,
    block_length: int | None = None,
    seed: int | None = None,
) -> SharpeTestResult:
    """Test whether two return series share one Sharpe ratio.

    Parameters
    ----------
    x, y : array_like
        Paired return series of equal length (at least 10 observations).
    method : {"asymptotic", "hac", "iid_bootstrap", "circular_bootstrap"}
        Asymptotic normal test with i.i.d. plug-in covariance, the same with
        a Bartlett long-run covariance, or studentized bootstrap with paired
        index resampling.
    n_boot : int
        Bootstrap replications (bootstrap methods only).
    block_length : int, optional
        Circular bootstrap block length; defaults to ``ceil(n ** (1/3))``.
        With block length 1 the circular scheme draws exactly the i.i.d.
        resample.
    seed : int, optional
        Seed for the bootstrap resampling stream.

    Notes
    -----
    The statistic studentizes the Sharpe difference by a delta-method
    standard error built on the first two uncentered moments of each series.
    Bootstrap p-values use the recentered studentized distribution with the
    finite-sample ``(1 + exceedances) / (n_boot + 1)`` rule.
    """
    if method not in _METHODS:
        raise DomainError(f"method must be one of {_METHODS}, got {method!r}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or y.ndim != 1 or x.shape != y.shape:
        raise DimensionError("x and y must be 1-D series of equal length")
    n = x.shape[0]
    if n < 10:
        raise InsufficientDataError("need at least 10 paired observations")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DataError("returns contain NaN or infinite entries")
    if float(x.std(ddof=1)) == 0.0 or float(y.std(ddof=1)) == 0.0:
        raise ZeroVarianceError("a constant series has no Sharpe ratio to compare")

    sr_x = sharpe(x)
    sr_y = sharpe(y)
    diff = sr_x - sr_y

    if np.array_equal(x, y):
        # identical inputs: the difference is exactly zero with zero spread
        return SharpeTestResult(
            sr_x=sr_x, sr_y=sr_y, difference=0.0, t_stat=0.0, p_value=1.0,
            method=method, n_obs=n,
            n_boot=n_boot if method.endswith("bootstrap") else None,
            block_length=_default_block(n, block_length)
            if method == "circular_bootstrap" else None,
        )

    data = np.column_stack([x, y, x * x, y * y])
    if method == "hac":
        psi = _bartlett_covariance(data)
    else:
        psi = _plugin_covariance(data)
    se = _delta_se(data.mean(axis=0), psi, n)
    if se == 0.0:
        raise ZeroVarianceError("degenerate joint moments: zero standard error")
    t_stat = diff / se

    if method in ("asymptotic", "hac"):
        p = 2.0 * float(stats.norm.sf(abs(t_stat)))
        return SharpeTestResult(sr_x=sr_x, sr_y=sr_y, difference=diff,
                                t_stat=t_stat, p_value=p, method=method, n_obs=n)

    if n_boot < 100:
        raise DomainError("bootstrap needs at least 100 replications")
    rng = np.random.default_rng(seed)
    block = _default_block(n, block_length) if method == "circular_bootstrap" else None
    idx = _bootstrap_indices(rng, n, n_boot, block)
    t_boot = _studentized_boot(data, idx, diff)
    exceed = int(np.count_nonzero(np.abs(t_boot) >= abs(t_stat)))
    p = (1.0 + exceed) / (n_boot + 1.0)
    return SharpeTestResult(
        sr_x=sr_x, sr_y=sr_y, difference=diff, t_stat=t_stat, p_value=p,
        method=method, n_obs=n, n_boot=n_boot, block_length=block,
    )


def _default_block(n: int, block_length: int | None) -> int:
    if block_length is None:
        return int(np.ceil(n ** (1.0 / 3.0)))
    block_length = int(block_length)
    if not 1 <= block_length <= n:
        raise DomainError(f"block length {block_length} outside [1, {n}]")
    return block_length


def _plugin_covariance(data: np.ndarray) -> np.ndarray:
    resid = data - data.mean(axis=0)
    return resid.T @ resid / data.shape[0]


def _bartlett_covariance(data: np.ndarray) -> np.ndarray:
    """Long-run covariance with Bartlett weights and the common lag rule."""
    n = data.shape[0]
    resid = data - data.mean(axis=0)
    n_lags = int(np.floor(4.0 * (n / 100.0) ** (2.0 / 9.0)))
    psi = resid.T @ resid / n
    for lag in range(1, min(n_lags, n - 1) + 1):
        gamma = resid[lag:].T @ resid[:-lag] / n
        weight = 1.0 - lag / (n_lags + 1.0)
        psi = psi + weight * (gamma + gamma.T)
    return psi


def _delta_se(theta: np.ndarray, psi: np.ndarray, n: int) -> float:
    grad = _sr_gradient(theta)
    var = float(grad @ psi @ grad) / n
    return float(np.sqrt(max(var, 0.0)))


def _sr_gradient(theta: np.ndarray) -> np.ndarray:
    mu1, mu2, g1, g2 = theta
    s1 = g1 - mu1 * mu1
    s2 = g2 - mu2 * mu2
    if s1 <= 0.0 or s2 <= 0.0:
        raise ZeroVarianceError("nonpositive variance in moment vector")
    d1 = s1 ** 1.5
    d2 = s2 ** 1.5
    return np.array([g1 / d1, -g2 / d2, -mu1 / (2.0 * d1), mu2 / (2.0 * d2)])


def _bootstrap_indices(rng, n: int, n_boot: int, block: int | None) -> np.ndarray:
    if block is None or block == 1:
        return rng.integers(0, n, size=(n_boot, n))
    n_blocks = int(np.ceil(n / block))
    starts = rng.integers(0, n, size=(n_boot, n_blocks))
    offsets = np.arange(block)
    idx = (starts[:, :, None] + offsets[None, None, :]) % n
    return idx.reshape(n_boot, n_blocks * block)[:, :n]


def _studentized_boot(data: np.ndarray, idx: np.ndarray, diff_hat: float) -> np.ndarray:
    """Recentred studentized statistics for each paired resample."""
    n = data.shape[0]
    draws = data[idx]                       # (B, n, 4)
    theta = draws.mean(axis=1)              # (B, 4)
    mu1, mu2 = theta[:, 0], theta[:, 1]
    # unbiased sample variances from uncentered moments
    s1 = (theta[:, 2] - mu1 * mu1) * n / (n - 1)
    s2 = (theta[:, 3] - mu2 * mu2) * n / (n - 1)
    second = np.einsum("bti,btj->bij", draws, draws) / n
    psi = second - np.einsum("bi,bj->bij", theta, theta)
    with np.errstate(divide="ignore", invalid="ignore"):
        diff = mu1 / np.sqrt(s1) - mu2 / np.sqrt(s2)
        g1c = theta[:, 2] - mu1 * mu1
        g2c = theta[:, 3] - mu2 * mu2
        d1 = g1c ** 1.5
        d2 = g2c ** 1.5
        grad = np.stack(
            [theta[:, 2] / d1, -theta[:, 3] / d2, -mu1 / (2.0 * d1),
             mu2 / (2.0 * d2)],
            axis=1,
        )                                   # (B, 4)
        var = np.einsum("bi,bij,bj->b", grad, psi, grad) / n
        t = (diff - diff_hat) / np.sqrt(var)
    # degenerate resamples (zero spread) count as extreme, never as support
    t[~np.isfinite(t)] = np.inf
    return t


def rolling_backtest(panel, macros, config: BacktestConfig) -> BacktestReport:
    """Refit the tail pipeline on each rolling window and hold for one period.

    Windows are ``config.window_length`` rows long; the first decision is
    made at the end of the first full window and the realized return uses the
    following row.  In strict mode any invalid tail forecast or
    non-positive-definite matrix aborts with the decision timestamp in the
    message; permissive mode repairs and counts these events.
    """
    if isinstance(panel, ReturnPanel):
        panel_obj = panel
    else:
        panel_obj = ReturnPanel.from_array(np.asarray(panel, dtype=float))
    values = panel_obj.values
    macros = np.asarray(macros, dtype=float)
    if macros.ndim == 1:
        macros = macros[:, None]
    t_total, n_assets = values.shape
    if macros.shape[0] != t_total:
        raise DimensionError("macros and panel have different row counts")
    kappa = config.window_length
    if t_total < kappa + 1:
        raise InsufficientDataError(
            f"panel has {t_total} rows; need at least {kappa + 1} "
            f"for one out-of-sample period"
        )
    if config.risk_free is not None:
        risk_free = np.asarray(config.risk_free, dtype=float)
        if risk_free.shape != (t_total,):
            raise DimensionError("risk_free series must align with panel rows")
    else:
        risk_free = None
    if config.strategy in ("remove_most_central", "remove_least_central"):
        if config.removal_count >= n_assets - 1:
            raise DomainError(
                f"removal_count={config.removal_count} leaves fewer than "
                "two of the available assets"
            )

    pd_mode = "strict" if config.mode == "strict" else "floor"
    out_timestamps: list[str] = []
    out_returns: list[float] = []
    out_weights: list[np.ndarray] = []
    n_clamped = 0
    n_floored = 0

    for t0 in range(kappa - 1, t_total - 1):
        lo = t0 - kappa + 1
        window_values = values[lo : t0 + 1]
        window_macros = macros[lo : t0 + 1]
        stamp = panel_obj.timestamps[t0]
        try:
            forecasts = forecast_tails(
                window_values, window_macros, config.tau,
                mode=config.mode, n_jobs=config.n_jobs,
            )
            rm = validate_pd(symmetrize(build_gamma(forecasts)), mode=pd_mode)
        except TailportError as exc:
            exc.args = (f"window ending {stamp}: {exc}",)
            raise
        n_clamped += forecasts.clamped
        n_floored += int(rm.floored)

        weights_full = _apply_strategy(rm, config, n_assets)
        realized = float(weights_full @ values[t0 + 1])
        if risk_free is not None:
            realized -= float(risk_free[t0 + 1])
        out_timestamps.append(panel_obj.timestamps[t0 + 1])
        out_returns.append(realized)
        out_weights.append(weights_full)

    return BacktestReport(
        config=config,
        asset_ids=panel_obj.asset_ids,
        timestamps=tuple(out_timestamps),
        oos_returns=np.asarray(out_returns),
        weights=np.vstack(out_weights),
        n_clamped=n_clamped,
        n_floored=n_floored,
    )


def _apply_strategy(rm, config: BacktestConfig, n_assets: int) -> np.ndarray:
    solve = gmvp_long_only if config.long_only else gmvp
    pd_mode = "strict" if config.mode == "strict" else "floor"
    if config.strategy == "full":
        kept = rm
    elif config.strategy in ("remove_most_central", "remove_least_central"):
        pick_max = config.strategy == "remove_most_central"
        kept = rm
        for _ in range(config.removal_count):
            cent = eigen_centrality(adjacency(kept))
            k = int(np.argmax(cent.values) if pick_max else np.argmin(cent.values))
            kept = reduce_matrix(kept, k, mode=pd_mode)
    else:
        trace = prune(
            rm,
            min_assets=config.min_assets,
            max_removals=config.max_removals,
            long_only=config.long_only,
            mode=pd_mode,
        )
        kept = None
        w = np.zeros(n_assets)
        keep_ids = set(trace.final_assets)
        positions = [i for i, aid in enumerate(rm.asset_ids) if aid in keep_ids]
        w[positions] = trace.final_weights
        return w
    sub_w = solve(kept).weights
    w = np.zeros(n_assets)
    keep_ids = {aid: i for i, aid in enumerate(rm.asset_ids)}
    for aid, wi in zip(kept.asset_ids, sub_w):
        w[keep_ids[aid]] = wi
    return w


def summarize_returns(returns) -> dict[str, float]:
    """Distribution summary used by reports: moments, Sharpe, and quartiles."""
    r = np.asarray(returns, dtype=float)
    if r.size == 0:
        raise InsufficientDataError("empty return series")
    sd = float(r.std(ddof=1)) if r.size > 1 else 0.0
    out = {
        "n": float(r.size),
        "mean": float(r.mean()),
        "stdev": sd,
        "sharpe": float(r.mean()) / sd if sd > 0.0 else float("nan"),
        "min": float(r.min()),
        "q1": float(np.quantile(r, 0.25)),
        "median": float(np.quantile(r, 0.5)),
        "q3": float(np.quantile(r, 0.75)),
        "max": float(r.max()),
    }
    return out
