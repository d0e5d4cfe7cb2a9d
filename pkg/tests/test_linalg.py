import numpy as np
import pytest

from ivlate import linalg
from ivlate.errors import NonFiniteError, RankDeficientError


def test_self_regression_recovers_identity():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((20, 4))
    fit = linalg.least_squares(x, x)
    assert np.allclose(fit.coef, np.eye(4), atol=1e-12)
    assert np.allclose(fit.residuals, 0.0, atol=1e-12)
    assert fit.rank_ok


def test_intercept_only_fit_is_the_mean():
    fit = linalg.least_squares(np.array([1.0, 2.0, 3.0]), np.ones(3))
    assert fit.coef[0, 0] == pytest.approx(2.0, abs=1e-14)


def test_two_regressor_fit_matches_hand_solved_normal_equations():
    # X'X = [[3, 3], [3, 5]], X'y = [5, 6]  ->  coef = (7/6, 1/2)
    y = np.array([1.0, 2.0, 2.0])
    x = np.array([[1.0, 0.0], [1.0, 1.0], [1.0, 2.0]])
    fit = linalg.least_squares(y, x)
    assert np.allclose(fit.coef[:, 0], [7.0 / 6.0, 0.5], atol=1e-12)


def test_fitted_plus_residuals_reconstruct_responses():
    rng = np.random.default_rng(1)
    y = rng.standard_normal((30, 3))
    x = rng.standard_normal((30, 5))
    fit = linalg.least_squares(y, x)
    assert np.allclose(fit.fitted + fit.residuals, y, atol=1e-12)


def test_residualize_against_self_is_zero():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((15, 3))
    assert np.allclose(linalg.residualize(x, x), 0.0, atol=1e-12)


def test_residualize_on_constant_demeans():
    y = np.array([1.0, 4.0, 7.0, 8.0])
    out = linalg.residualize(y, np.ones(4))
    assert np.allclose(out[:, 0], y - y.mean(), atol=1e-14)


def test_residualize_matches_hand_computation():
    # Residuals of the (7/6, 1/2) fit above: (-1/6, 1/3, -1/6).
    y = np.array([1.0, 2.0, 2.0])
    x = np.array([[1.0, 0.0], [1.0, 1.0], [1.0, 2.0]])
    out = linalg.residualize(y, x)
    assert np.allclose(out[:, 0], [-1.0 / 6.0, 1.0 / 3.0, -1.0 / 6.0], atol=1e-12)


@pytest.mark.parametrize("seed", range(8))
def test_residuals_orthogonal_to_design(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(10, 120))
    q = int(rng.integers(1, min(8, n)))
    x = rng.standard_normal((n, q))
    y = rng.standard_normal((n, 2)) * 10.0
    fit = linalg.least_squares(y, x)
    bound = 1e-8 * np.linalg.norm(x) * np.linalg.norm(y)
    assert np.abs(x.T @ fit.residuals).max() <= bound


@pytest.mark.parametrize("seed", range(4))
def test_residualize_is_idempotent(seed):
    rng = np.random.default_rng(100 + seed)
    x = rng.standard_normal((40, 4))
    a = rng.standard_normal((40, 3))
    once = linalg.residualize(a, x)
    twice = linalg.residualize(once, x)
    scale = max(np.abs(once).max(), 1.0)
    assert np.abs(twice - once).max() <= 1e-10 * scale


def test_joint_row_permutation_leaves_coefficients_unchanged():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((25, 3))
    y = rng.standard_normal((25, 2))
    perm = rng.permutation(25)
    base = linalg.least_squares(y, x)
    permuted = linalg.least_squares(y[perm], x[perm])
    assert np.abs(base.coef - permuted.coef).max() <= 1e-12
    assert np.allclose(base.fitted[perm], permuted.fitted, atol=1e-12)
    assert np.allclose(base.residuals[perm], permuted.residuals, atol=1e-12)


def test_duplicate_column_raises_rank_deficient():
    rng = np.random.default_rng(4)
    col = rng.standard_normal(20)
    x = np.column_stack([col, col])
    with pytest.raises(RankDeficientError):
        linalg.least_squares(rng.standard_normal(20), x)


def test_near_duplicate_column_below_tolerance_raises():
    rng = np.random.default_rng(5)
    col = rng.standard_normal(50)
    x = np.column_stack([col, col * (1.0 + 1e-13)])
    with pytest.raises(RankDeficientError):
        linalg.least_squares(rng.standard_normal(50), x)


def test_nonfinite_input_raises():
    y = np.array([1.0, np.nan, 2.0])
    with pytest.raises(NonFiniteError):
        linalg.least_squares(y, np.ones(3))
    with pytest.raises(NonFiniteError):
        linalg.least_squares(np.ones(3), np.array([1.0, np.inf, 2.0]))


def test_more_regressors_than_rows_rejected():
    rng = np.random.default_rng(6)
    with pytest.raises(ValueError):
        linalg.least_squares(rng.standard_normal(3), rng.standard_normal((3, 5)))


def test_condition_estimate_reflects_scaling():
    rng = np.random.default_rng(7)
    x = rng.standard_normal((30, 2))
    x_bad = x.copy()
    x_bad[:, 1] *= 1e-6
    y = rng.standard_normal(30)
    assert linalg.least_squares(y, x_bad).condition_estimate > linalg.least_squares(y, x).condition_estimate
