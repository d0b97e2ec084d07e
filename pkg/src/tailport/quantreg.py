"""Quantile regression solved as an exact linear program.

The estimator minimises the asymmetric check loss

    rho_tau(u) = u * (tau - 1{u < 0})

over the coefficient vector.  Splitting each residual into positive and
negative parts turns the problem into the linear program

    min  tau * sum(u) + (1 - tau) * sum(v)
    s.t. X theta + u - v = y,   u >= 0,  v >= 0,

solved through its bounded dual with the HiGHS backend (the coefficients are
the equality-block multipliers).  No smoothed or iteratively reweighted
approximation is involved, so the fitted coefficients are an exact LP vertex
(up to solver tolerance).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .errors import (
    DataError,
    DimensionError,
    DomainError,
    InsufficientDataError,
    SingularMatrixError,
    SolverError,
)

__all__ = ["QuantileModel", "check_loss", "fit_quantile", "predict"]


def _validate_tau(tau: float) -> float:
    tau = float(tau)
    if not 0.0 < tau < 1.0:
        raise DomainError(f"tau must lie strictly between 0 and 1, got {tau}")
    return tau


def check_loss(u, tau):
    """Asymmetric absolute loss ``rho_tau(u) = u * (tau - 1{u < 0})``.

    Positive residuals are charged ``tau`` per unit, negative residuals
    ``1 - tau`` per unit, so the loss is nonnegative and zero only at zero.

    Parameters
    ----------
    u : array_like
        Residual or array of residuals.
    tau : float
        Quantile level in (0, 1).

    Returns
    -------
    float or ndarray
        Elementwise loss, scalar when ``u`` is scalar.
    """
    tau = _validate_tau(tau)
    u = np.asarray(u, dtype=float)
    out = u * (tau - (u < 0.0))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class QuantileModel:
    """Fitted conditional-quantile model for one quantile level."""

    tau: float
    coefficients: np.ndarray
    n_obs: int
    objective: float


def fit_quantile(X, y, tau) -> QuantileModel:
    """Fit a linear model for the ``tau``-quantile of ``y`` given ``X``.

    Parameters
    ----------
    X : array_like, shape (n, p + 1)
        Design matrix including its intercept column.
    y : array_like, shape (n,)
        Response vector.
    tau : float
        Quantile level in (0, 1).

    Returns
    -------
    QuantileModel
        Coefficients minimising the total check loss.

    Notes
    -----
    Regressors are standardized internally (columns with positive spread are
    centered and scaled) purely to condition the LP; coefficients are mapped
    back to the original scale, which leaves the optimum unchanged.  When the
    LP has multiple optimal vertices (flat faces occur e.g. for even-length
    median fits) a second LP selects the minimum-L1-norm coefficient vector on
    the optimal face, so repeated fits are deterministic.
    """
    tau = _validate_tau(tau)
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2:
        raise DimensionError("X must be a 2-D design matrix")
    n, k = X.shape
    if y.shape != (n,):
        raise DimensionError(f"y has shape {y.shape}, expected ({n},)")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise DataError("design or response contains NaN or infinite entries")
    if n <= k:
        raise InsufficientDataError(
            f"need more than {k} observations to fit {k} coefficients, got {n}"
        )
    if np.linalg.matrix_rank(X) < k:
        raise SingularMatrixError("design matrix is rank deficient")

    # Standardize columns with spread; constant columns (the intercept) absorb
    # the centering shift on back-transform.
    col_mean = X.mean(axis=0)
    col_sd = X.std(axis=0)
    scaled = col_sd > 0.0
    has_const = bool(np.any(~scaled))
    center = np.where(scaled & has_const, col_mean, 0.0)
    scale = np.where(scaled, col_sd, 1.0)
    Z = (X - center) / scale

    theta_std, objective = _solve_lp(Z, y, tau)

    beta = theta_std / scale
    if has_const:
        const_idx = int(np.flatnonzero(~scaled)[0])
        shift = float(np.dot(theta_std[scaled], center[scaled] / col_sd[scaled]))
        beta[const_idx] -= shift / X[0, const_idx]

    resid = y - X @ beta
    _check_optimality(resid, tau, k, n)
    objective = float(np.sum(check_loss(resid, tau)))
    return QuantileModel(tau=tau, coefficients=beta, n_obs=n, objective=objective)


def predict(model: QuantileModel, x):
    """Evaluate the fitted quantile at one regressor vector or a stack of them.

    ``x`` must include the intercept entry, matching the design the model was
    fitted on.  Returns a float for a single vector, an array for a matrix.
    """
    x = np.asarray(x, dtype=float)
    k = model.coefficients.shape[0]
    if x.shape[-1] != k:
        raise DimensionError(
            f"regressor vector has length {x.shape[-1]}, model expects {k}"
        )
    out = x @ model.coefficients
    return float(out) if out.ndim == 0 else out


def _solve_lp(Z, y, tau):
    """Solve the bounded dual LP; polish ties to the min-L1 vertex.

    The dual of the split-residual program is

        max  y'a   s.t.  Z'a = 0,  tau - 1 <= a_i <= tau,

    which has only ``k`` equality constraints and is several times faster to
    solve than the primal.  The fitted coefficients are the multipliers of
    the equality block; complementary slackness makes them an exact primal
    vertex.
    """
    n, k = Z.shape
    res = linprog(
        -y, A_eq=Z.T, b_eq=np.zeros(k),
        bounds=[(tau - 1.0, tau)] * n, method="highs",
    )
    if res.status != 0:
        raise SolverError(f"quantile LP failed: {res.message}")
    marginals = getattr(res.eqlin, "marginals", None)
    if marginals is None:
        raise SolverError("quantile LP solver returned no equality multipliers")
    theta = -np.asarray(marginals, dtype=float)
    objective = -float(res.fun)

    if _has_alternate_optima(Z, y, theta, res.x, tau, k):
        polished = _min_l1_vertex(Z, y, tau, objective)
        if polished is not None:
            theta = polished
    return theta, objective


def _has_alternate_optima(Z, y, theta, a, tau, k) -> bool:
    """Degeneracy screen: more interpolated observations than coefficients,
    or an interpolated observation whose dual weight sits on the boundary of
    [tau - 1, tau], signal a flat optimal face.  Generic continuous data
    never trips this."""
    resid = y - Z @ theta
    scale = 1.0 + np.max(np.abs(y))
    on_fit = np.abs(resid) <= 1e-9 * scale
    if int(np.count_nonzero(on_fit)) > k:
        return True
    a = np.asarray(a, dtype=float)
    at_bound = (np.abs(a - tau) <= 1e-7) | (np.abs(a - (tau - 1.0)) <= 1e-7)
    return bool(np.any(on_fit & at_bound))


def _min_l1_vertex(Z, y, tau, objective):
    """Among solutions with the optimal check loss, pick the coefficient
    vector of smallest L1 norm (unique on a generic flat face)."""
    n, k = Z.shape
    # Variables: [theta, u, v, t] with |theta_j| <= t_j and the original
    # objective capped at its optimum.
    cost = np.concatenate([np.zeros(k), np.full(n, tau), np.full(n, 1.0 - tau)])
    eye = sparse.eye(n, format="csc")
    a_eq = sparse.hstack(
        [sparse.csc_matrix(Z), eye, -eye, sparse.csc_matrix((n, k))],
        format="csc",
    )
    cost2 = np.concatenate([np.zeros(k + 2 * n), np.ones(k)])
    sel = sparse.hstack(
        [sparse.eye(k), sparse.csc_matrix((k, 2 * n))], format="csc"
    )
    tsel = sparse.eye(k, format="csc")
    cap = sparse.hstack([sparse.csc_matrix(cost[None, :]), sparse.csc_matrix((1, k))])
    a_ub = sparse.vstack(
        [cap, sparse.hstack([sel, -tsel]), sparse.hstack([-sel, -tsel])],
        format="csc",
    )
    b_ub = np.concatenate(
        [[objective + 1e-10 * (1.0 + abs(objective))], np.zeros(2 * k)]
    )
    bounds = [(None, None)] * k + [(0.0, None)] * (2 * n) + [(0.0, None)] * k
    res = linprog(
        cost2, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=y, bounds=bounds,
        method="highs",
    )
    if res.status != 0:
        return None
    return np.asarray(res.x[:k], dtype=float)


def _check_optimality(resid, tau, k, n):
    """Subgradient sign conditions every optimum must satisfy."""
    scale = 1.0 + float(np.max(np.abs(resid), initial=0.0))
    tol = 1e-8 * scale
    n_neg = int(np.count_nonzero(resid < -tol))
    n_nonpos = int(np.count_nonzero(resid <= tol))
    if n_neg > n * tau + 1e-9 or n_nonpos < n * tau - k - 1e-9:
        raise SolverError(
            "quantile LP solution violates optimality sign conditions "
            f"({n_neg} negative, {n_nonpos} nonpositive residuals at tau={tau})"
        )
