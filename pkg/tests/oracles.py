"""Independent reference implementations used to pin expected test values.

Everything here is written directly against the mathematical definitions,
with scalar loops and generic iterative solvers, so that library results are
never compared against their own code paths.
"""
import itertools

import numpy as np


def check_loss_scalar(u, tau):
    if u >= 0.0:
        return tau * u
    return (tau - 1.0) * u


def quantile_objective(X, y, tau, theta):
    """Total check loss of one coefficient vector, summed row by row."""
    total = 0.0
    for t in range(X.shape[0]):
        total += check_loss_scalar(y[t] - float(X[t] @ theta), tau)
    return total


def quantile_fit_enumerate(X, y, tau):
    """Exact fit by enumerating interpolating vertex candidates.

    Some optimal coefficient vector interpolates k = X.shape[1] of the
    observations, so trying every size-k subset and keeping the best
    objective finds an exact optimum.  Exponential, only for small n.
    """
    n, k = X.shape
    best_theta = None
    best_obj = np.inf
    for rows in itertools.combinations(range(n), k):
        sub = X[list(rows)]
        if abs(np.linalg.det(sub)) < 1e-12:
            continue
        theta = np.linalg.solve(sub, y[list(rows)])
        obj = quantile_objective(X, y, tau, theta)
        if obj < best_obj - 1e-12:
            best_obj = obj
            best_theta = theta
    return best_theta, best_obj


def gamma_entries(var_plus, delta_covar):
    """Elementwise risk-matrix assembly with explicit scalar loops."""
    n = len(var_plus)
    out = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            if i == j:
                out[i, j] = var_plus[i]
            else:
                out[i, j] = np.sqrt(var_plus[i] * var_plus[j]) * delta_covar[i][j]
    return out


def quad_form(matrix, w):
    total = 0.0
    n = len(w)
    for i in range(n):
        for j in range(n):
            total += w[i] * w[j] * matrix[i][j]
    return total


def gmvp_projected_gradient(gamma_sym, tol=1e-12, max_iter=200_000):
    """Equality-constrained quadratic minimizer by projected gradient.

    Steepest descent on the sum-one affine set with exact line search;
    independent of any closed-form inverse.
    """
    g = np.asarray(gamma_sym, dtype=float)
    n = g.shape[0]
    w = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        grad = 2.0 * g @ w
        d = -(grad - grad.mean())  # keep the sum of w fixed
        if np.max(np.abs(d)) < tol:
            break
        curv = float(d @ g @ d)
        if curv <= 0.0:
            break
        alpha = -float(d @ g @ w) / curv
        w = w + alpha * d
    return w


def long_only_pairwise(gamma_sym, step0=0.25, min_step=1e-9):
    """Nonnegative simplex minimizer by pairwise mass exchange.

    Moves weight between coordinate pairs while that lowers the quadratic,
    halving the step until it is negligible.  For a convex objective on the
    simplex this converges to the constrained optimum.
    """
    g = np.asarray(gamma_sym, dtype=float)
    n = g.shape[0]
    w = np.full(n, 1.0 / n)
    obj = float(w @ g @ w)
    step = step0
    while step > min_step:
        for _ in range(10 * n * n):
            improved = False
            for i in range(n):
                if w[i] < step:
                    continue
                for j in range(n):
                    if i == j:
                        continue
                    cand = w.copy()
                    cand[i] -= step
                    cand[j] += step
                    cand_obj = float(cand @ g @ cand)
                    if cand_obj < obj:
                        w, obj = cand, cand_obj
                        improved = True
            if not improved:
                break
        step *= 0.5
    return w


def _eigh_descending(matrix):
    lam, vec = np.linalg.eigh(matrix)
    order = np.argsort(lam)[::-1]
    return lam[order], vec[:, order]


def _solve_weights(gamma_sym):
    x = np.linalg.solve(gamma_sym, np.ones(gamma_sym.shape[0]))
    return x / x.sum()


def node_removal_delta(gamma_sym, k):
    """Scalar evaluation of the node-removal risk difference.

    Builds both portfolios from scratch (linear solves, dense eigensolver)
    and accumulates the two sums with explicit loops.
    """
    g = np.asarray(gamma_sym, dtype=float)
    n = g.shape[0]
    omega = g - np.diag(np.diag(g))
    keep = [j for j in range(n) if j != k]
    g_red = g[np.ix_(keep, keep)]
    omega_red = omega[np.ix_(keep, keep)]

    lam_full, z_full = _eigh_descending(omega)
    lam_red, z_red = _eigh_descending(omega_red)
    w_full = _solve_weights(g)
    w_red = _solve_weights(g_red)

    delta = 0.0
    for i in range(n - 1):
        a_i = 0.0
        for j in keep:
            a_i += w_full[j] * z_full[j, i]
        b_i = 0.0
        for pos in range(n - 1):
            b_i += w_red[pos] * z_red[pos, i]
        delta += (lam_full[i] - lam_red[i]) * a_i * a_i
        delta += lam_red[i] * (a_i * a_i - b_i * b_i)
    return delta


def network_risk_difference(gamma_sym, k):
    """Direct w'Ωw difference between the full and reduced portfolios."""
    g = np.asarray(gamma_sym, dtype=float)
    n = g.shape[0]
    omega = g - np.diag(np.diag(g))
    keep = [j for j in range(n) if j != k]
    w_full = _solve_weights(g)
    w_red = _solve_weights(g[np.ix_(keep, keep)])
    return quad_form(omega, w_full) - quad_form(omega[np.ix_(keep, keep)], w_red)


def sharpe_scalar(returns):
    r = np.asarray(returns, dtype=float)
    n = r.shape[0]
    mean = float(r.sum()) / n
    var = float(((r - mean) ** 2).sum()) / (n - 1)
    return mean / np.sqrt(var)


def leading_eigenvector(omega):
    """Dense leading eigenpair with the sum-positive orientation."""
    lam, vec = _eigh_descending(np.asarray(omega, dtype=float))
    v = vec[:, 0]
    if v.sum() < 0.0:
        v = -v
    return float(lam[0]), v


def random_pd_matrix(rng, n, lo=0.3, hi=3.0):
    """Random symmetric positive-definite matrix via spectral synthesis."""
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    lam = rng.uniform(lo, hi, size=n)
    return q @ np.diag(lam) @ q.T


def random_tail_matrix(rng, n, coupling=0.5):
    """Random PD matrix shaped like a tail-risk matrix.

    Diagonal entries in (0, 1), off-diagonals scaled down until the matrix
    is comfortably positive definite.
    """
    var = rng.uniform(0.02, 0.3, size=n)
    base = np.sqrt(np.outer(var, var))
    couple = rng.uniform(-coupling, coupling, size=(n, n))
    couple = 0.5 * (couple + couple.T)
    g = base * couple
    np.fill_diagonal(g, var)
    # shrink couplings until the smallest eigenvalue clears a safe margin
    for _ in range(60):
        lam = np.linalg.eigvalsh(g)
        if lam[0] > 0.05 * var.min():
            break
        off = g - np.diag(var)
        g = np.diag(var) + 0.7 * off
    return g
