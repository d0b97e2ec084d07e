"""Minimum-risk portfolios on the tail-risk matrix and node-removal analysis.

The minimum-risk allocation solves ``min w' G w`` subject to full investment,
where ``G`` is the symmetrized tail-risk matrix.  Its closed form
``w = G^{-1} 1 / (1' G^{-1} 1)`` is evaluated through the cached spectral
decomposition, which keeps the inverse on the same numerical path as the
spectral identities used elsewhere.  Two further representations of the same
weights, written in terms of network eigenvectors, are provided for
cross-checking and for interpreting weights through centrality.

The node-removal half of the module quantifies how the network component of
portfolio risk changes when one asset is deleted, splits that change into an
eigenvalue-gap part and a weight-shift part, and drives the greedy pruning
loop that removes assets while removal keeps lowering network risk.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataio import ReturnPanel
from .errors import (
    DegenerateConfigurationError,
    DimensionError,
    DomainError,
    InsufficientDataError,
    SingularMatrixError,
    SolverError,
    SpectralBoundError,
)
from .netgraph import (
    AdjacencyMatrix,
    TransformedAdjacency,
    adjacency,
    eigen_centrality,
)
from .riskmatrix import RiskMatrix, from_matrix

__all__ = [
    "ExclusionStep",
    "NodeRemovalParts",
    "PositiveWeightReport",
    "PruneStep",
    "PruneTrace",
    "RiskDecomposition",
    "WeightVector",
    "centrality_risk_gradient",
    "delta_decomposition",
    "delta_function",
    "eigen_diff_decomposition",
    "exclusion_sweep",
    "gmvp",
    "gmvp_centrality_form",
    "gmvp_long_only",
    "gmvp_uniform_diag_form",
    "markowitz_baseline",
    "min_risk_centrality",
    "positive_weight_conditions",
    "portfolio_risk",
    "prune",
    "sample_moments",
]


@dataclass(frozen=True)
class WeightVector:
    """Fully invested portfolio weights."""

    weights: np.ndarray
    asset_ids: tuple[str, ...]
    long_only: bool = False

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "asset_ids", tuple(self.asset_ids))
        if w.ndim != 1 or w.shape[0] != len(self.asset_ids):
            raise DimensionError("weights and asset ids disagree in length")
        if not np.all(np.isfinite(w)):
            raise DomainError("weights contain NaN or infinite entries")
        if abs(float(w.sum()) - 1.0) > 1e-12:
            raise DomainError(f"weights sum to {w.sum()!r}, expected 1")
        if self.long_only and np.any(w < 0.0):
            raise DomainError("long-only weight vector has negative entries")


@dataclass(frozen=True)
class RiskDecomposition:
    """Portfolio tail risk split into own-asset and cross-asset parts."""

    total: float
    network: float
    idiosyncratic: float


@dataclass(frozen=True)
class NodeRemovalParts:
    """Change in network risk from deleting one asset, in two groupings.

    ``delta`` = ``eigen_gap_term`` + ``weight_shift_term`` is the exact
    change; ``factored_form`` regroups the weight-shift part into products of
    weight sums and must match it to high precision.
    """

    delta: float
    eigen_gap_term: float
    weight_shift_term: float
    factored_form: float


@dataclass(frozen=True)
class PositiveWeightReport:
    """Sufficient conditions for strictly positive minimum-risk weights.

    Margins are the worst-case slack of each inequality; a condition holds
    exactly when its margin is positive.  Witnesses name the (asset, eigen)
    index pair attaining the worst margin.  Sign-ambiguous non-leading
    eigenvectors are oriented to make their entry sum nonnegative before the
    inequalities are evaluated.
    """

    applicable: bool
    spread_holds: bool
    mass_holds: bool
    alignment_holds: bool
    spread_margin: float
    mass_margin: float
    alignment_margin: float
    spread_witness: tuple[int, int] | None
    alignment_witness: tuple[int, int] | None

    @property
    def all_hold(self) -> bool:
        return self.applicable and self.spread_holds and self.mass_holds \
            and self.alignment_holds


@dataclass(frozen=True)
class PruneStep:
    """One evaluation of the pruning rule.

    ``removed_id`` is None when the candidate was evaluated but kept (the
    stopping step, or an exhausted removal budget).  ``weights_after`` and
    ``risk_after`` always describe the candidate portfolio without the
    evaluated asset, whether or not the removal went through.
    """

    candidate_id: str
    removed_id: str | None
    centrality_max: float
    delta_value: float
    weights_before: np.ndarray
    weights_after: np.ndarray
    risk_before: float
    risk_after: float
    remaining_ids: tuple[str, ...]


@dataclass(frozen=True)
class PruneTrace:
    """Full record of a pruning run."""

    steps: tuple[PruneStep, ...]
    final_assets: tuple[str, ...]
    final_weights: np.ndarray
    final_risk: float


@dataclass(frozen=True)
class ExclusionStep:
    """One forced removal in a most-central exclusion sweep."""

    n_excluded: int
    removed_id: str
    delta_value: float
    risk_after: float
    weights_after: np.ndarray
    remaining_ids: tuple[str, ...]


def gmvp(rm: RiskMatrix) -> WeightVector:
    """Closed-form minimum-risk weights ``G^{-1} 1 / (1' G^{-1} 1)``.

    The inverse acts through the cached eigen-decomposition, so the weights
    share a numerical path with the spectral representations below.
    """
    _require_spectrum(rm)
    x = _precision_times_ones(rm.eigenvalues, rm.eigenvectors)
    total = float(x.sum())
    if total <= 0.0:
        raise DegenerateConfigurationError(
            "precision row sums are not positive; matrix is not usable"
        )
    return WeightVector(x / total, rm.asset_ids)


def gmvp_long_only(rm: RiskMatrix) -> WeightVector:
    """Minimum-risk weights under a no-short-sale constraint.

    Active-set iteration: solve the unconstrained problem on the current
    support, clamp negative weights out of the support, and repeat.  A final
    stationarity check re-admits any excluded asset whose marginal risk falls
    below the support level, so the returned point satisfies the first-order
    conditions of the constrained problem.
    """
    _require_spectrum(rm)
    g = rm.gamma_sym
    n = rm.n_assets
    support = np.ones(n, dtype=bool)
    for _ in range(4 * n + 8):
        sub = g[np.ix_(support, support)]
        w_sub = _solve_min_risk(sub)
        if np.any(w_sub < -1e-12):
            idx = np.flatnonzero(support)
            support[idx[w_sub < -1e-12]] = False
            if not support.any():
                raise SolverError("long-only active set emptied every asset")
            continue
        w = np.zeros(n)
        w[support] = np.clip(w_sub, 0.0, None)
        w /= w.sum()
        grad = 2.0 * (g @ w)
        level = float(grad[support].mean())
        slack = grad - level
        violated = (~support) & (slack < -1e-8)
        if not np.any(violated):
            return WeightVector(w, rm.asset_ids, long_only=True)
        support[int(np.argmin(np.where(violated, slack, np.inf)))] = True
    raise SolverError("long-only active-set iteration did not converge")


def gmvp_centrality_form(ta: TransformedAdjacency) -> WeightVector:
    """Minimum-risk weights written in the transformed-adjacency eigenbasis.

    Valid only under the unit-interval spectrum condition; each eigen
    direction contributes its entry sum scaled by the reciprocal eigenvalue
    map, splitting the weights into a leading-centrality part and corrections
    from the remaining directions.  Must agree with :func:`gmvp` on the same
    matrix to high precision.
    """
    if not ta.in_unit_interval:
        raise SpectralBoundError(
            "transformed-adjacency eigenvalues leave (0, 1); the eigenbasis "
            "weight representation is invalid"
        )
    s = ta.eigenvectors
    rec = 1.0 / (1.0 - ta.eigenvalues)
    colsums = s.sum(axis=0)
    numer = s @ (rec * colsums)
    denom = float(rec @ colsums**2)
    if denom <= 0.0:
        raise DegenerateConfigurationError("eigenbasis weight denominator is zero")
    return WeightVector(numer / numer.sum(), ta.asset_ids)


def gmvp_uniform_diag_form(adj: AdjacencyMatrix, var_level: float) -> WeightVector:
    """Minimum-risk weights when every asset has the same own tail risk.

    For a matrix ``var_level * I + omega`` the weights depend only on the
    adjacency spectrum, with each eigen direction damped by
    ``1 / (var_level + eigenvalue)``.
    """
    var_level = float(var_level)
    lam = adj.eigenvalues
    if var_level + float(lam[-1]) <= 0.0:
        raise DomainError(
            "var_level + smallest adjacency eigenvalue must be positive "
            "for a positive definite matrix"
        )
    z = adj.eigenvectors
    rec = 1.0 / (var_level + lam)
    colsums = z.sum(axis=0)
    numer = z @ (rec * colsums)
    denom = float(rec @ colsums**2)
    if denom <= 0.0:
        raise DegenerateConfigurationError("eigenbasis weight denominator is zero")
    return WeightVector(numer / numer.sum(), adj.asset_ids)


def positive_weight_conditions(ta: TransformedAdjacency) -> PositiveWeightReport:
    """Evaluate the sufficient conditions for all-positive minimum-risk weights.

    Three inequalities on the transformed-adjacency eigenvectors: every
    eigenvector's entry sum must exceed twice each of its entries (spread),
    the leading vector's entries must sum above one (mass), and the leading
    vector must dominate each scaled eigenvector entry (alignment).
    """
    n = ta.n_assets
    if n == 1:
        return PositiveWeightReport(
            applicable=False,
            spread_holds=True, mass_holds=True, alignment_holds=True,
            spread_margin=float("nan"), mass_margin=float("nan"),
            alignment_margin=float("nan"),
            spread_witness=None, alignment_witness=None,
        )
    lam1 = float(ta.eigenvalues[0])
    if lam1 >= 1.0:
        raise SpectralBoundError(
            "leading transformed-adjacency eigenvalue is not below one"
        )
    s = ta.eigenvectors.copy()
    s[:, 0] = ta.centrality
    for k in range(1, n):
        if float(s[:, k].sum()) < 0.0:
            s[:, k] = -s[:, k]
    v = ta.centrality
    colsums = s.sum(axis=0)

    spread = colsums[None, :] - 2.0 * s
    spread_margin = float(spread.min())
    spread_witness = tuple(int(t) for t in np.unravel_index(spread.argmin(), spread.shape))

    mass_margin = float(v.sum() - 1.0)

    alignment = v[:, None] * colsums[None, :] - s / (1.0 - lam1)
    alignment_margin = float(alignment.min())
    alignment_witness = tuple(
        int(t) for t in np.unravel_index(alignment.argmin(), alignment.shape)
    )

    return PositiveWeightReport(
        applicable=True,
        spread_holds=spread_margin > 0.0,
        mass_holds=mass_margin > 0.0,
        alignment_holds=alignment_margin > 0.0,
        spread_margin=spread_margin,
        mass_margin=mass_margin,
        alignment_margin=alignment_margin,
        spread_witness=spread_witness,
        alignment_witness=alignment_witness,
    )


def portfolio_risk(rm: RiskMatrix, weights) -> RiskDecomposition:
    """Split ``w' G w`` into cross-asset (network) and own-asset parts."""
    if rm.gamma_sym is None:
        raise DomainError("symmetrize the risk matrix before computing risk")
    w = weights.weights if isinstance(weights, WeightVector) else np.asarray(weights, float)
    if w.shape != (rm.n_assets,):
        raise DimensionError("weight vector length does not match the matrix")
    g = rm.gamma_sym
    diag = np.diag(g)
    idio = float(np.sum(w * w * diag))
    total = float(w @ g @ w)
    network = float(w @ (g - np.diag(diag)) @ w)
    return RiskDecomposition(total=total, network=network, idiosyncratic=idio)


def delta_function(rm: RiskMatrix, k: int, long_only: bool = False,
                   mode: str = "strict") -> float:
    """Change in network risk when asset ``k`` is removed (negative = better)."""
    return delta_decomposition(rm, k, long_only=long_only, mode=mode).delta


def delta_decomposition(rm: RiskMatrix, k: int, long_only: bool = False,
                        mode: str = "strict") -> NodeRemovalParts:
    """Split the removal effect into eigenvalue-gap and weight-shift parts.

    The reduced network's eigenpairs are aligned with the largest full-matrix
    eigenpairs rank by rank; interlacing guarantees each gap is nonnegative.
    The factored regrouping of the weight-shift part is evaluated as well and
    checked against it.
    """
    _require_spectrum(rm)
    n = rm.n_assets
    if n < 3:
        raise DomainError("node-removal analysis needs at least 3 assets")
    k = _check_index(k, n)
    reduced = reduce_matrix(rm, k, mode=mode)
    w_full = (gmvp_long_only(rm) if long_only else gmvp(rm)).weights
    w_red = (gmvp_long_only(reduced) if long_only else gmvp(reduced)).weights
    adj_full = adjacency(rm)
    adj_red = adjacency(reduced)
    mask = np.arange(n) != k

    lam_f = adj_full.eigenvalues[: n - 1]
    z_f = adj_full.eigenvectors[:, : n - 1]
    lam_r = adj_red.eigenvalues
    z_r = adj_red.eigenvectors

    a = w_full[mask] @ z_f[mask, :]
    b = w_red @ z_r
    b_cross = w_red @ z_f[mask, :]

    gap_term = float(np.sum((lam_f - lam_r) * a * a))
    shift_term = float(np.sum(lam_r * (a * a - b * b)))
    factored = float(
        np.sum(lam_r * (a + b_cross) * (a - b_cross))
        + np.sum(lam_r * (b_cross + b) * (b_cross - b))
    )
    scale = 1.0 + abs(shift_term) + abs(gap_term)
    if abs(factored - shift_term) > 1e-10 * scale:
        raise SolverError(
            "factored removal expression disagrees with the direct one "
            f"({factored:.3e} vs {shift_term:.3e})"
        )
    return NodeRemovalParts(
        delta=gap_term + shift_term,
        eigen_gap_term=gap_term,
        weight_shift_term=shift_term,
        factored_form=factored,
    )


def eigen_diff_decomposition(adj_full: AdjacencyMatrix, adj_reduced: AdjacencyMatrix,
                             k: int, s: int) -> float:
    """Eigenvalue gap from deleting node ``k``, rebuilt entry by entry.

    The gap between the rank-``s`` eigenvalues of the full and reduced
    adjacency is decomposed into the change of the restricted double sum plus
    the two cross strips through node ``k``.  The reduced eigenvector is
    zero-padded at position ``k`` to keep original asset indexing.  Raises
    when the rebuilt gap disagrees with the spectral one.
    """
    n = adj_full.n_assets
    k = _check_index(k, n)
    s = int(s)
    if not 0 <= s < n - 1:
        raise DimensionError(f"eigen index {s} outside [0, {n - 2}]")
    mask = np.arange(n) != k
    sub = adj_full.omega[np.ix_(mask, mask)]
    if adj_reduced.omega.shape != (n - 1, n - 1) or \
            float(np.max(np.abs(adj_reduced.omega - sub))) > 1e-12:
        raise DomainError("reduced adjacency is not the full one minus node k")

    z_full = adj_full.eigenvectors[:, s]
    z_pad = np.zeros(n)
    z_pad[mask] = adj_reduced.eigenvectors[:, s]

    restricted = float(z_full[mask] @ sub @ z_full[mask] - z_pad[mask] @ sub @ z_pad[mask])
    strip_row = float(z_full[k] * (adj_full.omega[k, :] @ z_full))
    strip_col = float((z_full @ adj_full.omega[:, k]) * z_full[k])
    rebuilt = restricted + strip_row + strip_col

    direct = float(adj_full.eigenvalues[s] - adj_reduced.eigenvalues[s])
    if abs(rebuilt - direct) > 1e-8 * (1.0 + abs(direct)):
        raise SolverError(
            f"eigenvalue-gap decomposition mismatch: {rebuilt:.3e} vs {direct:.3e}"
        )
    return rebuilt


def min_risk_centrality(weights, centrality) -> np.ndarray:
    """Centrality implied by treating the given weights as minimum-risk ones.

    Inverts the first-order condition of the network-risk problem:
    ``v_i = -2 w_i / sum_j w_j v_j``.  Errors when the weighted centrality
    sum in the denominator vanishes.
    """
    w = weights.weights if isinstance(weights, WeightVector) else np.asarray(weights, float)
    v = centrality.values if hasattr(centrality, "values") else np.asarray(centrality, float)
    if w.shape != v.shape:
        raise DimensionError("weights and centrality have different lengths")
    den = float(w @ v)
    scale = float(np.linalg.norm(w) * np.linalg.norm(v))
    if abs(den) <= 1e-12 * max(scale, 1e-30):
        raise DegenerateConfigurationError(
            "weighted centrality sum is zero; implied centrality is undefined"
        )
    return -2.0 * w / den


def centrality_risk_gradient(weights, centrality, leading_eigenvalue: float) -> np.ndarray:
    """Sensitivity of network risk to each centrality entry.

    Component ``i`` is ``lam1 * v_i * (sum_j w_j v_j)^2 +
    2 * lam1 * w_i * sum_j w_j v_j``.  With nonnegative weights, nonnegative
    centralities, and a positive leading eigenvalue every component is
    nonnegative; with short positions the sign can flip either way.
    """
    w = weights.weights if isinstance(weights, WeightVector) else np.asarray(weights, float)
    v = centrality.values if hasattr(centrality, "values") else np.asarray(centrality, float)
    if w.shape != v.shape:
        raise DimensionError("weights and centrality have different lengths")
    lam1 = float(leading_eigenvalue)
    s = float(w @ v)
    return lam1 * v * s * s + 2.0 * lam1 * w * s


def reduce_matrix(rm: RiskMatrix, k: int, mode: str = "strict") -> RiskMatrix:
    """Risk matrix with asset ``k`` (and its row/column) removed."""
    if rm.gamma_sym is None:
        raise DomainError("symmetrize the risk matrix before reducing it")
    n = rm.n_assets
    k = _check_index(k, n)
    if n < 2:
        raise DomainError("cannot remove the only asset")
    mask = np.arange(n) != k
    sub = rm.gamma_sym[np.ix_(mask, mask)]
    ids = tuple(aid for i, aid in enumerate(rm.asset_ids) if i != k)
    return from_matrix(sub, ids, mode=mode)


def prune(rm: RiskMatrix, min_assets: int = 2, max_removals: int | None = None,
          long_only: bool = False, mode: str = "strict") -> PruneTrace:
    """Greedy removal of the most central asset while removal lowers risk.

    Each round solves the minimum-risk portfolio, scores centrality on the
    current network, evaluates the removal effect of the most central asset
    (ties broken toward the smallest index), and removes it only when the
    effect is strictly negative.  Stops on a nonnegative effect, on an
    exhausted removal budget, or when another removal would drop the universe
    below ``min_assets``.
    """
    _require_spectrum(rm)
    n0 = rm.n_assets
    if min_assets < 2:
        raise DomainError("min_assets must be at least 2")
    if n0 < min_assets:
        raise DomainError(f"matrix has {n0} assets, fewer than min_assets={min_assets}")
    budget = n0 - 2 if max_removals is None else int(max_removals)
    if budget < 0:
        raise DomainError("max_removals must be nonnegative")

    current = rm
    steps: list[PruneStep] = []
    removals = 0
    while current.n_assets > max(min_assets, 2) and current.n_assets >= 3:
        solve = gmvp_long_only if long_only else gmvp
        w_before = solve(current).weights
        risk_before = portfolio_risk(current, w_before).total
        cent = eigen_centrality(adjacency(current))
        k = int(np.argmax(cent.values))
        reduced = reduce_matrix(current, k, mode=mode)
        w_after = solve(reduced).weights
        risk_after = portfolio_risk(reduced, w_after).total
        delta = delta_function(current, k, long_only=long_only, mode=mode)
        removable = delta < 0.0 and removals < budget
        steps.append(
            PruneStep(
                candidate_id=current.asset_ids[k],
                removed_id=current.asset_ids[k] if removable else None,
                centrality_max=float(cent.values[k]),
                delta_value=float(delta),
                weights_before=w_before,
                weights_after=w_after,
                risk_before=risk_before,
                risk_after=risk_after,
                remaining_ids=current.asset_ids,
            )
        )
        if not removable:
            break
        current = reduced
        removals += 1

    solve = gmvp_long_only if long_only else gmvp
    final_w = solve(current).weights
    final_risk = portfolio_risk(current, final_w).total
    return PruneTrace(
        steps=tuple(steps),
        final_assets=current.asset_ids,
        final_weights=final_w,
        final_risk=final_risk,
    )


def exclusion_sweep(rm: RiskMatrix, n_steps: int, long_only: bool = False,
                    mode: str = "strict") -> list[ExclusionStep]:
    """Force-remove the most central asset ``n_steps`` times, recording risk.

    Unlike :func:`prune` this never stops early: every round records the
    removal effect as a diagnostic and removes the asset regardless of its
    sign, mirroring sensitivity exercises over a fixed exclusion schedule.
    """
    _require_spectrum(rm)
    n_steps = int(n_steps)
    if n_steps < 1:
        raise DomainError("n_steps must be at least 1")
    if rm.n_assets - n_steps < 2:
        raise DomainError(
            f"cannot exclude {n_steps} of {rm.n_assets} assets and keep two"
        )
    solve = gmvp_long_only if long_only else gmvp
    current = rm
    out: list[ExclusionStep] = []
    for step in range(1, n_steps + 1):
        cent = eigen_centrality(adjacency(current))
        k = int(np.argmax(cent.values))
        delta = delta_function(current, k, long_only=long_only, mode=mode)
        removed = current.asset_ids[k]
        current = reduce_matrix(current, k, mode=mode)
        w = solve(current).weights
        out.append(
            ExclusionStep(
                n_excluded=step,
                removed_id=removed,
                delta_value=float(delta),
                risk_after=portfolio_risk(current, w).total,
                weights_after=w,
                remaining_ids=current.asset_ids,
            )
        )
    return out


def markowitz_baseline(panel, window=None) -> WeightVector:
    """Sample-covariance minimum-variance weights for comparison runs."""
    mean, cov, ids = _window_moments(panel, window)
    lam = np.linalg.eigvalsh(cov)
    if lam[0] <= 1e-12 * max(float(lam[-1]), 1e-30):
        raise SingularMatrixError(
            "sample covariance is singular: extend the window or drop assets"
        )
    x = np.linalg.solve(cov, np.ones(cov.shape[0]))
    return WeightVector(x / x.sum(), ids)


def sample_moments(panel, window=None) -> tuple[np.ndarray, np.ndarray]:
    """Window mean vector and (population-normalized) covariance matrix."""
    mean, cov, _ = _window_moments(panel, window)
    return mean, cov


def _window_moments(panel, window):
    if isinstance(panel, ReturnPanel):
        values = panel.values
        ids = panel.asset_ids
    else:
        values = np.asarray(panel, dtype=float)
        if values.ndim != 2:
            raise DimensionError("panel must be a 2-D array of returns")
        from .dataio import default_asset_ids

        ids = default_asset_ids(values.shape[1])
    if window is not None:
        if isinstance(window, slice):
            values = values[window]
        else:
            start, stop = window
            values = values[int(start):int(stop)]
    t = values.shape[0]
    if t < 2:
        raise InsufficientDataError("need at least 2 observations in the window")
    mean = values.mean(axis=0)
    centered = values - mean
    cov = centered.T @ centered / t
    return mean, cov, ids


def _require_spectrum(rm: RiskMatrix) -> None:
    if rm.gamma_sym is None or rm.eigenvalues is None or rm.eigenvectors is None:
        raise DomainError(
            "risk matrix is not fully staged: run symmetrize and validate_pd first"
        )


def _check_index(k: int, n: int) -> int:
    k = int(k)
    if not 0 <= k < n:
        raise DimensionError(f"asset index {k} outside [0, {n - 1}]")
    return k


def _precision_times_ones(lam: np.ndarray, vec: np.ndarray) -> np.ndarray:
    proj = vec.T @ np.ones(vec.shape[0])
    return vec @ (proj / lam)


def _solve_min_risk(sub: np.ndarray) -> np.ndarray:
    """Unconstrained minimum-risk weights on a principal submatrix."""
    if sub.shape == (1, 1):
        return np.ones(1)
    lam, vec = np.linalg.eigh(sub)
    if lam[0] <= 0.0:
        raise SolverError("submatrix lost positive definiteness")
    lam = lam[::-1]
    vec = vec[:, ::-1]
    x = _precision_times_ones(lam, vec)
    return x / x.sum()
