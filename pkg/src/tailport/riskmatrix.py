"""Tail-risk forecasting and the pairwise tail-risk matrix.

One-step-ahead value-at-risk forecasts come from quantile regressions of each
asset's return on lagged state variables.  Pairwise co-movement terms come
from quantile regressions that add the partner's contemporaneous return and
are evaluated at the partner's forecasted value-at-risk; the difference to the
asset's own forecast measures the tail spillover.  Both quantities are stored
positively oriented: ``var_plus`` is the negated return quantile, and
``delta_covar[i][j]`` is the negated spillover of a distress event in ``j``
onto ``i``, so larger values always mean more tail risk.

The matrix assembled from them has the forecasted value-at-risk on the
diagonal and geometric-mean-scaled spillovers off the diagonal.  Its
symmetrized version is the object every downstream network and portfolio
computation consumes, and it is validated (or repaired) to be positive
definite before use.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .dataio import ReturnPanel, default_asset_ids
from .errors import (
    DataError,
    DimensionError,
    DefinitenessError,
    DomainError,
    InsufficientDataError,
    RangeError,
)
from .quantreg import fit_quantile, predict

__all__ = [
    "RiskMatrix",
    "TailForecastSet",
    "build_gamma",
    "eigen_decompose_identity_check",
    "forecast_tails",
    "from_matrix",
    "symmetrize",
    "validate_pd",
]

_CLAMP_LO = 1e-4
_CLAMP_HI = 1.0 - 1e-4


@dataclass(frozen=True)
class TailForecastSet:
    """One-step-ahead tail forecasts for every asset and ordered pair.

    ``delta_covar`` has a zero diagonal; entry ``[i, j]`` is the extra tail
    risk of asset ``i`` when asset ``j`` sits at its forecasted value-at-risk.
    ``clamped`` counts forecasts pulled back into range in permissive mode.
    """

    tau: float
    var_plus: np.ndarray
    delta_covar: np.ndarray
    asset_ids: tuple[str, ...]
    clamped: int = 0


@dataclass(frozen=True)
class RiskMatrix:
    """Pairwise tail-risk matrix in its staged forms.

    ``gamma`` is the raw (generally asymmetric) matrix.  ``symmetrize`` fills
    ``gamma_sym``; ``validate_pd`` fills the spectral fields.  Instances are
    immutable: each stage returns a new object.
    """

    gamma: np.ndarray
    asset_ids: tuple[str, ...]
    gamma_sym: np.ndarray | None = None
    eigenvalues: np.ndarray | None = None
    eigenvectors: np.ndarray | None = None
    floored: bool = False
    n_floored: int = 0

    @property
    def n_assets(self) -> int:
        return self.gamma.shape[0]

    @property
    def condition_number(self) -> float:
        if self.eigenvalues is None:
            raise DomainError("run validate_pd before asking for a condition number")
        return float(self.eigenvalues[0] / self.eigenvalues[-1])


def forecast_tails(
    panel,
    macros,
    tau: float = 0.05,
    window_end: int | None = None,
    mode: str = "strict",
    n_jobs: int = 1,
) -> TailForecastSet:
    """Fit the tail regressions and forecast one step past ``window_end``.

    Parameters
    ----------
    panel : ReturnPanel or array_like, shape (T, N)
        Asset returns.
    macros : array_like, shape (T, m)
        State variables observed alongside the returns; the regressions use
        their first lag, the forecasts use their value at ``window_end``.
    tau : float
        Tail probability.
    window_end : int, optional
        Last row used for fitting (default: last row of the panel).
    mode : {"strict", "permissive"}
        Strict mode raises when a value-at-risk forecast leaves (0, 1);
        permissive mode clamps it into [1e-4, 1 - 1e-4] and counts the event.
    n_jobs : int
        Worker threads for the pairwise regressions.  Results are assembled
        by index, so the output does not depend on the thread count.
    """
    if mode not in ("strict", "permissive"):
        raise DomainError(f"mode must be 'strict' or 'permissive', got {mode!r}")
    if isinstance(panel, ReturnPanel):
        returns = panel.values
        ids = panel.asset_ids
    else:
        returns = np.asarray(panel, dtype=float)
        if returns.ndim != 2:
            raise DimensionError("panel must be a 2-D array of returns")
        ids = default_asset_ids(returns.shape[1])
    macros = np.asarray(macros, dtype=float)
    if macros.ndim == 1:
        macros = macros[:, None]
    t_total, n_assets = returns.shape
    if macros.shape[0] != t_total:
        raise DimensionError(
            f"macros have {macros.shape[0]} rows, panel has {t_total}"
        )
    if not np.all(np.isfinite(macros)):
        raise DataError("macro series contain NaN or infinite entries")
    n_macro = macros.shape[1]
    if window_end is None:
        window_end = t_total - 1
    window_end = int(window_end)
    if not 1 <= window_end < t_total:
        raise DimensionError(f"window_end {window_end} outside [1, {t_total - 1}]")
    n_fit = window_end  # rows 1..window_end regress on macro rows 0..window_end-1
    if n_fit < n_macro + 3:
        raise InsufficientDataError(
            f"window supplies {n_fit} usable observations, "
            f"need at least {n_macro + 3} for {n_macro} state variables"
        )

    y_rows = returns[1 : window_end + 1]
    lagged = macros[:window_end]
    x_var = np.column_stack([np.ones(n_fit), lagged])
    x_next = np.concatenate([[1.0], macros[window_end]])

    var_forecast = np.empty(n_assets)
    for i in range(n_assets):
        model = fit_quantile(x_var, y_rows[:, i], tau)
        var_forecast[i] = predict(model, x_next)
    var_plus = -var_forecast

    clamped = 0
    out_of_range = (var_plus <= 0.0) | (var_plus >= 1.0)
    if np.any(out_of_range):
        if mode == "strict":
            bad = [f"{ids[i]}={var_plus[i]:.6g}" for i in np.flatnonzero(out_of_range)]
            raise RangeError(
                "value-at-risk forecasts outside (0, 1): " + ", ".join(bad)
            )
        clamped = int(np.count_nonzero(out_of_range))
        var_plus = np.clip(var_plus, _CLAMP_LO, _CLAMP_HI)

    delta_covar = np.zeros((n_assets, n_assets))
    if n_assets > 1:
        var_at_distress = -var_plus  # forecasted return quantile to plug in

        def pair_column(j: int) -> np.ndarray:
            x_cov = np.column_stack([np.ones(n_fit), lagged, y_rows[:, j]])
            x_cov_next = np.concatenate([[1.0], macros[window_end], [var_at_distress[j]]])
            col = np.zeros(n_assets)
            for i in range(n_assets):
                if i == j:
                    continue
                model = fit_quantile(x_cov, y_rows[:, i], tau)
                covar_forecast = predict(model, x_cov_next)
                col[i] = -covar_forecast - var_plus[i]
            return col

        if n_jobs > 1:
            with ThreadPoolExecutor(max_workers=n_jobs) as pool:
                columns = list(pool.map(pair_column, range(n_assets)))
        else:
            columns = [pair_column(j) for j in range(n_assets)]
        for j, col in enumerate(columns):
            delta_covar[:, j] = col

    return TailForecastSet(
        tau=float(tau),
        var_plus=var_plus,
        delta_covar=delta_covar,
        asset_ids=tuple(ids),
        clamped=clamped,
    )


def build_gamma(forecasts: TailForecastSet) -> RiskMatrix:
    """Assemble the raw tail-risk matrix from a forecast set.

    Diagonal entries are the value-at-risk forecasts; entry ``[i, j]`` off the
    diagonal scales the spillover by the geometric mean of the two assets'
    value-at-risk levels.  Spillover signs are preserved.
    """
    var_plus = np.asarray(forecasts.var_plus, dtype=float)
    delta_covar = np.asarray(forecasts.delta_covar, dtype=float)
    n = var_plus.shape[0]
    if delta_covar.shape != (n, n):
        raise DimensionError("delta_covar shape does not match var_plus")
    if np.any(var_plus <= 0.0):
        raise DomainError("var_plus entries must be strictly positive")
    root = np.sqrt(var_plus)
    gamma = np.outer(root, root) * delta_covar
    np.fill_diagonal(gamma, var_plus)
    return RiskMatrix(gamma=gamma, asset_ids=forecasts.asset_ids)


def symmetrize(rm: RiskMatrix) -> RiskMatrix:
    """Average the matrix with its transpose.

    The quadratic form of a portfolio is unchanged by this step, so the
    symmetric version prices every portfolio identically to the raw one.
    """
    gamma_sym = 0.5 * (rm.gamma + rm.gamma.T)
    return replace(rm, gamma_sym=gamma_sym)


def validate_pd(rm: RiskMatrix, mode: str = "strict") -> RiskMatrix:
    """Check positive definiteness, or repair it by eigenvalue flooring.

    Parameters
    ----------
    rm : RiskMatrix
        Must already be symmetrized.
    mode : {"strict", "floor"}
        Strict mode raises :class:`DefinitenessError` when the smallest
        eigenvalue is at or below 1e-10.  Floor mode lifts eigenvalues below
        ``1e-8 * trace/N`` up to that threshold, reassembles the matrix, and
        flags the repair.

    Returns
    -------
    RiskMatrix
        With eigenvalues (descending) and sign-fixed eigenvectors populated.
    """
    if mode not in ("strict", "floor"):
        raise DomainError(f"mode must be 'strict' or 'floor', got {mode!r}")
    if rm.gamma_sym is None:
        raise DomainError("symmetrize the matrix before validating definiteness")
    lam, vec = np.linalg.eigh(rm.gamma_sym)
    lam = lam[::-1].copy()
    vec = vec[:, ::-1].copy()
    vec = _orient_columns(vec)
    if mode == "strict":
        if lam[-1] <= 1e-10:
            raise DefinitenessError(
                f"matrix is not positive definite: smallest eigenvalue {lam[-1]:.6g}",
                lambda_min=lam[-1],
                eigenvector=vec[:, -1],
            )
        return replace(rm, eigenvalues=lam, eigenvectors=vec)
    floor = 1e-8 * float(np.trace(rm.gamma_sym)) / rm.n_assets
    floor = max(floor, 1e-12)
    below = lam < floor
    if not np.any(below):
        return replace(rm, eigenvalues=lam, eigenvectors=vec)
    lam = np.maximum(lam, floor)
    rebuilt = (vec * lam) @ vec.T
    rebuilt = 0.5 * (rebuilt + rebuilt.T)
    return replace(
        rm,
        gamma_sym=rebuilt,
        eigenvalues=lam,
        eigenvectors=vec,
        floored=True,
        n_floored=int(np.count_nonzero(below)),
    )


def from_matrix(matrix, asset_ids=None, mode: str = "strict") -> RiskMatrix:
    """Stage a ready-made tail-risk matrix through symmetrize + validate."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DimensionError("matrix must be square")
    if not np.all(np.isfinite(matrix)):
        raise DataError("matrix contains NaN or infinite entries")
    ids = tuple(asset_ids) if asset_ids is not None else default_asset_ids(matrix.shape[0])
    if len(ids) != matrix.shape[0]:
        raise DimensionError("asset id count does not match matrix order")
    return validate_pd(symmetrize(RiskMatrix(gamma=matrix, asset_ids=ids)), mode=mode)


def eigen_decompose_identity_check(rm: RiskMatrix) -> float:
    """Residual of the spectral split into own-risk and cross terms.

    Each eigenvalue is rebuilt as the eigenvector-weighted sum of diagonal
    entries plus the double sum of off-diagonal entries,

        lambda_k = sum_i u_ik^2 gamma_ii + sum_i sum_{j != i} u_ik u_jk gamma_ij,

    and the largest absolute mismatch over k is returned.  For a clean
    decomposition this is at numerical noise level.
    """
    if rm.eigenvalues is None or rm.eigenvectors is None:
        raise DomainError("run validate_pd before the decomposition check")
    gamma_sym = rm.gamma_sym
    diag = np.diag(gamma_sym)
    hollow = gamma_sym - np.diag(diag)
    worst = 0.0
    for k in range(rm.n_assets):
        u = rm.eigenvectors[:, k]
        own_term = float(np.sum(u * u * diag))
        cross_term = float(u @ hollow @ u)
        worst = max(worst, abs(float(rm.eigenvalues[k]) - (own_term + cross_term)))
    return worst


def _orient_columns(vec: np.ndarray) -> np.ndarray:
    """Fix each eigenvector's sign: first nonzero component positive."""
    vec = vec.copy()
    for k in range(vec.shape[1]):
        col = vec[:, k]
        nz = np.flatnonzero(np.abs(col) > 1e-12 * max(1.0, np.abs(col).max()))
        if nz.size and col[nz[0]] < 0.0:
            vec[:, k] = -col
    return vec
