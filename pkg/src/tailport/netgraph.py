"""Network view of the tail-risk matrix.

Stripping the diagonal of the symmetrized tail-risk matrix leaves a weighted
adjacency matrix whose entries are pairwise tail spillovers.  Its leading
eigenvector ranks assets by how strongly they sit inside tail-risk chains
(eigenvector centrality), and a complementary transform ``I - gamma_sym``
links the same spectrum to the precision matrix used by minimum-risk weights:
whenever its eigenvalues all lie strictly inside the unit interval,

    eigenvalue_k of inverse(gamma_sym) = 1 / (1 - eigenvalue_k of transform),

which is checked numerically on construction.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .riskmatrix import RiskMatrix, _orient_columns

__all__ = [
    "AdjacencyMatrix",
    "CentralityVector",
    "TransformedAdjacency",
    "adjacency",
    "eigen_centrality",
    "shift_invariance_check",
    "transform",
]


@dataclass(frozen=True)
class AdjacencyMatrix:
    """Hollow symmetric spillover matrix with its eigen-decomposition."""

    omega: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    asset_ids: tuple[str, ...]

    @property
    def n_assets(self) -> int:
        return self.omega.shape[0]


@dataclass(frozen=True)
class CentralityVector:
    """Leading-eigenvector centrality scores.

    ``values`` has unit Euclidean norm.  When the graph carries negative
    weights the leading eigenvector can mix signs; ``non_perron`` flags that
    case and the entries are then reported as computed (only then may they be
    negative).  ``degenerate`` flags a repeated leading eigenvalue, in which
    case the deterministic direct-decomposition vector is used.
    """

    values: np.ndarray
    leading_eigenvalue: float
    iterations: int
    non_perron: bool = False
    degenerate: bool = False
    used_direct: bool = False


@dataclass(frozen=True)
class TransformedAdjacency:
    """Complement transform ``I - gamma_sym`` with its spectrum.

    ``in_unit_interval`` is True when every eigenvalue lies strictly in
    (0, 1); only then does the geometric-series identity for the precision
    matrix hold, and ``neumann_residual`` records how well the reciprocal
    eigenvalue map matches an explicit matrix inversion.
    """

    omega_tilde: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    centrality: np.ndarray
    in_unit_interval: bool
    neumann_residual: float | None
    asset_ids: tuple[str, ...]

    @property
    def n_assets(self) -> int:
        return self.omega_tilde.shape[0]


def adjacency(rm: RiskMatrix) -> AdjacencyMatrix:
    """Drop the diagonal of the symmetrized matrix and eigen-decompose."""
    if rm.gamma_sym is None:
        raise DomainError("symmetrize the risk matrix before building the network")
    omega = rm.gamma_sym - np.diag(np.diag(rm.gamma_sym))
    lam, vec = _eigh_desc(omega)
    return AdjacencyMatrix(
        omega=omega, eigenvalues=lam, eigenvectors=vec, asset_ids=rm.asset_ids
    )


def eigen_centrality(
    adj: AdjacencyMatrix, tol: float = 1e-12, max_iter: int = 10000
) -> CentralityVector:
    """Centrality scores from the leading eigenvector of the adjacency.

    Power iteration runs on a diagonally shifted copy of the matrix (the
    shift leaves eigenvectors untouched and makes the spectrum nonnegative,
    so the iteration cannot oscillate between extreme eigenvalues).  The
    result is cross-checked against the direct eigen-decomposition and falls
    back to it deterministically when the iteration stalls or the leading
    eigenvalue is repeated.
    """
    n = adj.n_assets
    if n == 0:
        raise DomainError("empty adjacency matrix")
    if n == 1:
        return CentralityVector(
            values=np.array([1.0]),
            leading_eigenvalue=float(adj.omega[0, 0]),
            iterations=0,
        )
    omega = adj.omega
    lam1 = float(adj.eigenvalues[0])
    gap = lam1 - float(adj.eigenvalues[1])
    degenerate = gap <= 1e-12 * (1.0 + abs(lam1))

    # Gershgorin bound: every eigenvalue of omega + shift*I is nonnegative,
    # so the algebraically largest eigenvalue dominates in magnitude.  Keeping
    # the shift at the scale of the entries preserves the relative gap.
    shift = float(np.abs(omega).sum(axis=1).max())
    shifted = omega + shift * np.eye(n)
    x = np.full(n, 1.0 / np.sqrt(n))
    iterations = 0
    converged = False
    for iterations in range(1, max_iter + 1):
        nxt = shifted @ x
        norm = float(np.linalg.norm(nxt))
        if norm == 0.0:
            break
        nxt /= norm
        if float(np.max(np.abs(nxt - x))) < tol:
            x = nxt
            converged = True
            break
        x = nxt

    used_direct = False
    value = float(x @ omega @ x)
    residual = float(np.max(np.abs(omega @ x - lam1 * x)))
    if degenerate or not converged or abs(value - lam1) > 1e-8 * (1.0 + abs(lam1)) \
            or residual > 1e-8 * (1.0 + abs(lam1)):
        x = adj.eigenvectors[:, 0].copy()
        used_direct = True

    x = _perron_orient(x)
    non_perron = bool(np.min(x) < -1e-8)
    if not non_perron:
        # entries are nonnegative up to rounding noise; clip the noise
        x = np.abs(x)
    x /= float(np.linalg.norm(x))
    return CentralityVector(
        values=x,
        leading_eigenvalue=lam1,
        iterations=iterations,
        non_perron=non_perron,
        degenerate=degenerate,
        used_direct=used_direct,
    )


def shift_invariance_check(adj: AdjacencyMatrix, eta: float) -> float:
    """Max centrality deviation after adding ``eta`` to every diagonal entry.

    Uniform diagonal shifts move all eigenvalues by ``eta`` and leave
    eigenvectors alone, so the returned deviation measures pure numerical
    error in the centrality pipeline.
    """
    eta = float(eta)
    if eta <= 0.0:
        raise DomainError(f"eta must be a positive real, got {eta}")
    base = eigen_centrality(adj)
    n = adj.n_assets
    shifted = adj.omega + eta * np.eye(n)
    lam, vec = _eigh_desc(shifted)
    shifted_adj = AdjacencyMatrix(
        omega=shifted, eigenvalues=lam, eigenvectors=vec, asset_ids=adj.asset_ids
    )
    moved = eigen_centrality(shifted_adj)
    return float(np.max(np.abs(moved.values - base.values)))


def transform(rm: RiskMatrix) -> TransformedAdjacency:
    """Build ``I - gamma_sym`` and check the reciprocal-eigenvalue identity."""
    if rm.gamma_sym is None:
        raise DomainError("symmetrize the risk matrix before transforming")
    n = rm.n_assets
    omega_tilde = np.eye(n) - rm.gamma_sym
    lam, vec = _eigh_desc(omega_tilde)
    in_unit = bool(np.all(lam > 0.0) and np.all(lam < 1.0))
    neumann = None
    if in_unit:
        inverse = np.linalg.inv(rm.gamma_sym)
        inv_eigs = np.sort(np.linalg.eigvalsh(inverse))[::-1]
        mapped = np.sort(1.0 / (1.0 - lam))[::-1]
        neumann = float(np.max(np.abs(inv_eigs - mapped)))
    centrality = _perron_orient(vec[:, 0].copy())
    return TransformedAdjacency(
        omega_tilde=omega_tilde,
        eigenvalues=lam,
        eigenvectors=vec,
        centrality=centrality,
        in_unit_interval=in_unit,
        neumann_residual=neumann,
        asset_ids=rm.asset_ids,
    )


def _eigh_desc(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric eigen-decomposition, eigenvalues descending, signs fixed."""
    lam, vec = np.linalg.eigh(matrix)
    return lam[::-1].copy(), _orient_columns(vec[:, ::-1].copy())


def _perron_orient(v: np.ndarray) -> np.ndarray:
    """Choose the global sign that maximizes the entry sum (positive mass)."""
    s = float(np.sum(v))
    if s < 0.0:
        return -v
    if s == 0.0:
        nz = np.flatnonzero(np.abs(v) > 1e-12 * max(1.0, np.abs(v).max()))
        if nz.size and v[nz[0]] < 0.0:
            return -v
    return v
