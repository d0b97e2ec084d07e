"""Quantile regression: check loss, LP fits, predictions."""
import numpy as np
import pytest

from tailport.errors import (
    DataError,
    DimensionError,
    DomainError,
    InsufficientDataError,
    SingularMatrixError,
)
from tailport.quantreg import QuantileModel, check_loss, fit_quantile, predict

from oracles import quantile_fit_enumerate, quantile_objective


def test_check_loss_values():
    assert check_loss(0.0, 0.05) == 0.0
    assert check_loss(1.0, 0.5) == 0.5
    assert check_loss(-1.0, 0.05) == pytest.approx(0.95)


def test_check_loss_piecewise_linear():
    u = np.linspace(-3.0, 3.0, 61)
    out = check_loss(u, 0.25)
    expected = np.where(u >= 0.0, 0.25 * u, -0.75 * u)
    np.testing.assert_allclose(out, expected, atol=0.0)
    assert np.all(out >= 0.0)


def test_check_loss_rejects_bad_tau():
    for tau in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(DomainError):
            check_loss(1.0, tau)


def test_median_of_three():
    model = fit_quantile(np.ones((3, 1)), np.array([1.0, 2.0, 3.0]), 0.5)
    assert model.coefficients == pytest.approx([2.0])
    assert model.n_obs == 3


def test_median_robust_to_outlier():
    model = fit_quantile(np.ones((3, 1)), np.array([1.0, 2.0, 100.0]), 0.5)
    assert model.coefficients == pytest.approx([2.0])


def test_even_length_median_is_deterministic():
    # flat optimal face: every value in [2, 3] is a median of 1..4
    y = np.array([1.0, 2.0, 3.0, 4.0])
    fits = [fit_quantile(np.ones((4, 1)), y, 0.5).coefficients[0]
            for _ in range(5)]
    assert len(set(fits)) == 1
    assert 2.0 - 1e-9 <= fits[0] <= 3.0 + 1e-9


def test_fit_matches_enumeration_oracle():
    """Seeded instances against exhaustive interpolation-vertex search."""
    rng = np.random.default_rng(42)
    for _ in range(8):
        n, k = 24, 3
        X = np.column_stack([np.ones(n), rng.normal(size=(n, k - 1))])
        y = X @ rng.normal(size=k) + rng.standard_t(df=5, size=n)
        for tau in (0.1, 0.5, 0.8):
            model = fit_quantile(X, y, tau)
            theta_ref, obj_ref = quantile_fit_enumerate(X, y, tau)
            assert model.objective == pytest.approx(obj_ref, abs=1e-8)
            np.testing.assert_allclose(
                model.coefficients, theta_ref, atol=1e-6
            )


def test_objective_recorded_consistently():
    rng = np.random.default_rng(3)
    X = np.column_stack([np.ones(40), rng.normal(size=(40, 2))])
    y = rng.normal(size=40)
    model = fit_quantile(X, y, 0.3)
    assert model.objective == pytest.approx(
        quantile_objective(X, y, 0.3, model.coefficients), abs=1e-10
    )
    # never worse than the trivial all-zero coefficient vector
    assert model.objective <= quantile_objective(X, y, 0.3, np.zeros(3)) + 1e-12


def test_scale_and_shift_equivariance():
    rng = np.random.default_rng(11)
    X = np.column_stack([np.ones(80), rng.normal(size=(80, 3))])
    y = X @ np.array([0.5, -1.0, 0.3, 2.0]) + rng.normal(size=80)
    base = fit_quantile(X, y, 0.2).coefficients
    scaled = fit_quantile(X, 2.5 * y, 0.2).coefficients
    np.testing.assert_allclose(scaled, 2.5 * base, atol=1e-8)
    shifted = fit_quantile(X, y + 7.0, 0.2).coefficients
    np.testing.assert_allclose(shifted[1:], base[1:], atol=1e-8)
    assert shifted[0] == pytest.approx(base[0] + 7.0, abs=1e-8)


def test_in_sample_coverage():
    rng = np.random.default_rng(19)
    n = 1000
    X = np.column_stack([np.ones(n), rng.normal(size=(n, 2))])
    y = X @ np.array([0.1, 1.0, -0.5]) + rng.normal(size=n)
    for tau in (0.05, 0.5):
        model = fit_quantile(X, y, tau)
        below = float(np.mean(y < X @ model.coefficients))
        band = 2.0 * np.sqrt(tau * (1.0 - tau) / n)
        assert abs(below - tau) <= band


def test_optimality_sign_conditions():
    rng = np.random.default_rng(23)
    n, k = 200, 4
    X = np.column_stack([np.ones(n), rng.normal(size=(n, k - 1))])
    y = rng.normal(size=n)
    for tau in (0.05, 0.25, 0.75):
        model = fit_quantile(X, y, tau)
        resid = y - X @ model.coefficients
        assert np.count_nonzero(resid < -1e-9) <= n * tau + 1e-9
        assert np.count_nonzero(resid <= 1e-9) >= n * tau - k - 1e-9


def test_fit_validation_errors():
    X = np.column_stack([np.ones(10), np.arange(10.0)])
    y = np.arange(10.0)
    with pytest.raises(DomainError):
        fit_quantile(X, y, 1.2)
    with pytest.raises(DimensionError):
        fit_quantile(X[:, 0], y, 0.5)
    with pytest.raises(DimensionError):
        fit_quantile(X, y[:4], 0.5)
    with pytest.raises(DataError):
        fit_quantile(X, np.where(np.arange(10) == 3, np.nan, y), 0.5)
    with pytest.raises(InsufficientDataError):
        fit_quantile(X[:2], y[:2], 0.5)
    with pytest.raises(SingularMatrixError):
        fit_quantile(np.column_stack([X, X[:, 1]]), y, 0.5)


def test_predict_paths():
    model = QuantileModel(tau=0.5, coefficients=np.array([2.0, 0.0]),
                          n_obs=3, objective=0.0)
    assert predict(model, np.array([1.0, 5.0])) == pytest.approx(2.0)
    model = QuantileModel(tau=0.5, coefficients=np.array([1.0, 1.0]),
                          n_obs=3, objective=0.0)
    assert predict(model, np.array([1.0, 1.0])) == pytest.approx(2.0)
    batch = predict(model, np.array([[1.0, 1.0], [1.0, 2.0]]))
    np.testing.assert_allclose(batch, [2.0, 3.0])
    with pytest.raises(DimensionError):
        predict(model, np.array([1.0, 1.0, 1.0]))


def test_predict_matches_oracle_fit_out_of_sample():
    rng = np.random.default_rng(7)
    n, k = 30, 3
    X = np.column_stack([np.ones(n), rng.normal(size=(n, k - 1))])
    y = X @ np.array([0.2, 0.9, -0.4]) + rng.standard_t(df=4, size=n)
    model = fit_quantile(X, y, 0.25)
    theta_ref, _ = quantile_fit_enumerate(X, y, 0.25)
    x_new = np.array([1.0, 0.4, -1.1])
    assert predict(model, x_new) == pytest.approx(float(x_new @ theta_ref), abs=1e-6)
