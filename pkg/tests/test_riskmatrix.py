"""Tail forecasts, risk-matrix assembly, and spectral validation."""
import numpy as np
import pytest

from tailport.dataio import ReturnPanel
from tailport.errors import (
    DefinitenessError,
    DimensionError,
    DomainError,
    InsufficientDataError,
    RangeError,
)
from tailport.riskmatrix import (
    RiskMatrix,
    TailForecastSet,
    build_gamma,
    eigen_decompose_identity_check,
    forecast_tails,
    from_matrix,
    symmetrize,
)

from oracles import gamma_entries, quad_form, random_pd_matrix


def _sim_panel(rng, t, n, m, beta_scale=0.5, noise=0.02):
    """Returns driven by lagged macros, as the forecasting step assumes."""
    macros = rng.normal(size=(t, m))
    beta = rng.normal(scale=beta_scale * noise, size=(n, m))
    returns = np.empty((t, n))
    returns[0] = noise * rng.normal(size=n)
    for s in range(1, t):
        returns[s] = macros[s - 1] @ beta.T + noise * rng.normal(size=n)
    return returns, macros


def test_forecast_recovers_iid_quantile():
    # i.i.d. normal returns with zero macro loadings: the value-at-risk
    # forecast estimates the unconditional 5% quantile
    rng = np.random.default_rng(0)
    t, n = 1200, 3
    sd = 0.02
    returns = sd * rng.normal(size=(t, n))
    macros = rng.normal(size=(t, 1))
    fc = forecast_tails(returns, macros, tau=0.05)
    true_q = sd * 1.6448536269514722  # norm.ppf(0.95)
    # asymptotic se of the sample quantile, normal density at the quantile
    dens = np.exp(-0.5 * 1.6448536269514722**2) / np.sqrt(2 * np.pi) / sd
    se = np.sqrt(0.05 * 0.95 / t) / dens
    for i in range(n):
        assert abs(fc.var_plus[i] - true_q) < 4.0 * se


def test_forecast_independent_assets_have_small_spillover():
    rng = np.random.default_rng(1)
    reps = 40
    vals = []
    for _ in range(reps):
        returns, macros = _sim_panel(rng, 260, 2, 2)
        fc = forecast_tails(returns, macros, tau=0.05)
        vals.append(fc.delta_covar[0, 1])
    vals = np.asarray(vals)
    se = vals.std(ddof=1) / np.sqrt(reps)
    assert abs(vals.mean()) < 4.0 * se


def test_forecast_single_asset():
    rng = np.random.default_rng(2)
    returns, macros = _sim_panel(rng, 60, 1, 1)
    fc = forecast_tails(returns, macros, tau=0.05)
    assert fc.var_plus.shape == (1,)
    assert fc.delta_covar.shape == (1, 1)
    assert fc.delta_covar[0, 0] == 0.0


def test_forecast_uses_stated_window_end():
    rng = np.random.default_rng(3)
    returns, macros = _sim_panel(rng, 300, 2, 2)
    full = forecast_tails(returns, macros, tau=0.05, window_end=199)
    trimmed = forecast_tails(returns[:200], macros[:200], tau=0.05)
    np.testing.assert_allclose(full.var_plus, trimmed.var_plus, atol=1e-12)
    np.testing.assert_allclose(full.delta_covar, trimmed.delta_covar, atol=1e-12)


def test_forecast_thread_count_does_not_change_results():
    rng = np.random.default_rng(4)
    returns, macros = _sim_panel(rng, 150, 4, 2)
    one = forecast_tails(returns, macros, tau=0.05, n_jobs=1)
    four = forecast_tails(returns, macros, tau=0.05, n_jobs=4)
    assert np.array_equal(one.var_plus, four.var_plus)
    assert np.array_equal(one.delta_covar, four.delta_covar)


def test_forecast_strict_range_error_and_permissive_clamp():
    rng = np.random.default_rng(5)
    t = 80
    macros = rng.normal(size=(t, 1))
    # returns centered far above zero: the 5% quantile is positive, so the
    # negated forecast falls below zero
    returns = 0.5 + 0.01 * rng.normal(size=(t, 2))
    with pytest.raises(RangeError):
        forecast_tails(returns, macros, tau=0.05)
    fc = forecast_tails(returns, macros, tau=0.05, mode="permissive")
    assert fc.clamped == 2
    assert np.all(fc.var_plus >= 1e-4)
    assert np.all(fc.var_plus <= 1.0 - 1e-4)


def test_forecast_input_validation():
    rng = np.random.default_rng(6)
    returns, macros = _sim_panel(rng, 50, 2, 2)
    with pytest.raises(DomainError):
        forecast_tails(returns, macros, tau=0.05, mode="verbose")
    with pytest.raises(DimensionError):
        forecast_tails(returns, macros[:30], tau=0.05)
    with pytest.raises(DimensionError):
        forecast_tails(returns, macros, tau=0.05, window_end=0)
    with pytest.raises(InsufficientDataError):
        forecast_tails(returns[:4], macros[:4], tau=0.05)


def test_forecast_accepts_return_panel():
    rng = np.random.default_rng(7)
    values, macros = _sim_panel(rng, 60, 2, 1)
    panel = ReturnPanel.from_array(values)
    fc = forecast_tails(panel, macros, tau=0.05)
    assert fc.asset_ids == panel.asset_ids


def test_build_gamma_diagonal_case():
    fc = TailForecastSet(
        tau=0.05,
        var_plus=np.array([0.04, 0.09]),
        delta_covar=np.zeros((2, 2)),
        asset_ids=("a", "b"),
    )
    rm = build_gamma(fc)
    np.testing.assert_allclose(rm.gamma, np.diag([0.04, 0.09]), atol=0.0)


def test_build_gamma_geometric_scaling():
    delta = np.zeros((2, 2))
    delta[0, 1] = 0.5
    fc = TailForecastSet(
        tau=0.05,
        var_plus=np.array([0.04, 0.09]),
        delta_covar=delta,
        asset_ids=("a", "b"),
    )
    rm = build_gamma(fc)
    assert rm.gamma[0, 1] == pytest.approx(np.sqrt(0.0036) * 0.5)
    assert rm.gamma[0, 1] == pytest.approx(0.03)
    assert rm.gamma[1, 0] == 0.0


def test_build_gamma_matches_scalar_oracle():
    rng = np.random.default_rng(8)
    n = 6
    var_plus = rng.uniform(0.01, 0.2, size=n)
    delta = rng.normal(scale=0.3, size=(n, n))
    np.fill_diagonal(delta, 0.0)
    fc = TailForecastSet(
        tau=0.05, var_plus=var_plus, delta_covar=delta,
        asset_ids=tuple(f"a{i}" for i in range(n)),
    )
    rm = build_gamma(fc)
    np.testing.assert_allclose(rm.gamma, gamma_entries(var_plus, delta), atol=0.0)


def test_build_gamma_rejects_nonpositive_var():
    fc = TailForecastSet(
        tau=0.05, var_plus=np.array([0.04, -0.01]),
        delta_covar=np.zeros((2, 2)), asset_ids=("a", "b"),
    )
    with pytest.raises(DomainError):
        build_gamma(fc)


def test_symmetrize_fixed_point_and_average():
    sym = np.array([[0.04, 0.02], [0.02, 0.09]])
    rm = symmetrize(RiskMatrix(gamma=sym, asset_ids=("a", "b")))
    np.testing.assert_allclose(rm.gamma_sym, sym, atol=0.0)

    raw = np.array([[0.04, 0.03], [0.01, 0.09]])
    rm = symmetrize(RiskMatrix(gamma=raw, asset_ids=("a", "b")))
    assert rm.gamma_sym[0, 1] == pytest.approx(0.02)
    assert rm.gamma_sym[1, 0] == pytest.approx(0.02)
    np.testing.assert_allclose(np.diag(rm.gamma_sym), np.diag(raw), atol=0.0)


def test_quadratic_form_unchanged_by_symmetrization():
    """Portfolio risk is identical under the raw and symmetrized matrices."""
    rng = np.random.default_rng(9)
    for _ in range(50):
        n = 8
        gamma = rng.normal(size=(n, n))
        w = rng.normal(size=n)
        w[0] -= w.sum() - 1.0  # full investment
        gamma_sym = 0.5 * (gamma + gamma.T)
        assert abs(quad_form(gamma, w) - quad_form(gamma_sym, w)) < 1e-12


def test_validate_pd_identity_and_diagonal():
    rm = from_matrix(np.eye(4))
    np.testing.assert_allclose(rm.eigenvalues, np.ones(4), atol=0.0)
    assert rm.condition_number == pytest.approx(1.0)

    rm = from_matrix(np.diag([0.04, 0.09]))
    np.testing.assert_allclose(rm.eigenvalues, [0.09, 0.04], atol=0.0)
    assert rm.condition_number == pytest.approx(2.25)


def test_validate_pd_reconstruction_and_orthonormality():
    rng = np.random.default_rng(10)
    for _ in range(10):
        rm = from_matrix(random_pd_matrix(rng, 7))
        u = rm.eigenvectors
        np.testing.assert_allclose(u.T @ u, np.eye(7), atol=1e-10)
        rebuilt = (u * rm.eigenvalues) @ u.T
        assert np.max(np.abs(rebuilt - rm.gamma_sym)) < 1e-10


def test_validate_pd_strict_raises_with_context():
    rng = np.random.default_rng(11)
    q, _ = np.linalg.qr(rng.normal(size=(5, 5)))
    lam = np.array([1.0, 0.8, 0.5, 0.2, -0.1])
    bad = q @ np.diag(lam) @ q.T
    with pytest.raises(DefinitenessError) as err:
        from_matrix(bad)
    assert err.value.lambda_min == pytest.approx(-0.1, abs=1e-10)
    assert err.value.eigenvector.shape == (5,)


def test_validate_pd_floor_repairs():
    rng = np.random.default_rng(12)
    q, _ = np.linalg.qr(rng.normal(size=(5, 5)))
    lam = np.array([1.0, 0.8, 0.5, 0.2, -0.1])
    bad = q @ np.diag(lam) @ q.T
    rm = from_matrix(bad, mode="floor")
    assert rm.floored
    assert rm.n_floored == 1
    floor = 1e-8 * np.trace(0.5 * (bad + bad.T)) / 5
    assert rm.eigenvalues[-1] == pytest.approx(floor)
    assert np.linalg.eigvalsh(rm.gamma_sym)[0] > 0.0


def test_precision_row_sum_identity():
    """The inverse's action on ones equals its vector of row sums."""
    rng = np.random.default_rng(13)
    rm = from_matrix(random_pd_matrix(rng, 6))
    inv = np.linalg.inv(rm.gamma_sym)
    np.testing.assert_allclose(inv @ np.ones(6), inv.sum(axis=1), atol=1e-10)


def test_eigen_identity_diagonal_matrix():
    rm = from_matrix(np.diag([0.3, 0.2, 0.1]))
    assert eigen_decompose_identity_check(rm) == pytest.approx(0.0, abs=1e-15)


def test_eigen_identity_two_by_two():
    # hand-solved eigenpairs for [[a, c], [c, b]]
    a, b, c = 0.05, 0.02, 0.01
    rm = from_matrix(np.array([[a, c], [c, b]]))
    disc = np.sqrt(0.25 * (a - b) ** 2 + c * c)
    expected = np.array([0.5 * (a + b) + disc, 0.5 * (a + b) - disc])
    np.testing.assert_allclose(rm.eigenvalues, expected, atol=1e-14)
    assert eigen_decompose_identity_check(rm) < 1e-12


def test_eigen_identity_random():
    rng = np.random.default_rng(14)
    for _ in range(10):
        rm = from_matrix(random_pd_matrix(rng, 10))
        assert eigen_decompose_identity_check(rm) < 1e-8


def test_eigenvector_sign_convention():
    rng = np.random.default_rng(15)
    rm = from_matrix(random_pd_matrix(rng, 6))
    for k in range(6):
        col = rm.eigenvectors[:, k]
        nz = np.flatnonzero(np.abs(col) > 1e-12)
        assert col[nz[0]] > 0.0
