"""Curve assembly: grid, integration anchoring, weight semantics."""

import numpy as np
import pytest

from robust_adrf import dgp
from robust_adrf.adrf import (
    METHODS,
    UNIFORM_METHODS,
    ADRFEstimate,
    curve_residuals,
    derivative_on_grid,
    fit_adrf,
    fit_adrf_multid,
    integrate_and_anchor,
    make_grid,
    raw_residualized,
)
from robust_adrf.nuisance import Ridge, crossfit_residualize


def _residualized(n=400, p=0.0, seed=0, kind=dgp.SINUSOIDAL):
    ds = dgp.generate(kind, n=n, p_contam=p, seed=seed)
    return ds, crossfit_residualize(ds, Ridge(), K=3, seed=seed)


def test_make_grid_percentile_range():
    t = np.random.default_rng(0).uniform(-2, 2, 1000)
    grid = make_grid(t, 40)
    assert grid.shape == (40,)
    assert np.all(np.diff(grid) > 0)
    lo, hi = np.percentile(t, [5, 95])
    assert np.isclose(grid[0], lo) and np.isclose(grid[-1], hi)
    with pytest.raises(ValueError):
        make_grid(t, 1)


def test_derivative_on_grid_quadratic_oracle():
    grid = np.linspace(0, 1, 21)
    curve = grid**2
    d = derivative_on_grid(curve, grid)
    # central differences are exact for quadratics in the interior
    assert np.allclose(d[1:-1], 2 * grid[1:-1], atol=1e-12)


def test_integrate_and_anchor_constant_slope():
    grid = np.linspace(-1, 1, 11)
    theta = np.full(11, 2.0)
    intercepts = np.full(11, 5.0)
    curve = integrate_and_anchor(theta, intercepts, grid)
    assert np.allclose(np.diff(curve), 2.0 * np.diff(grid), atol=1e-12)
    assert np.isclose(curve.mean(), 5.0, atol=1e-12)


@pytest.mark.parametrize("method", METHODS)
def test_anchoring_identity_every_method(method):
    _, res = _residualized(p=0.15)
    est = fit_adrf(res, method, grid_points=25)
    assert abs(float(est.g_curve.mean()) - float(est.intercepts.mean())) < 1e-9


@pytest.mark.parametrize("method", METHODS)
def test_uniform_weight_flag(method):
    _, res = _residualized(p=0.15)
    est = fit_adrf(res, method, grid_points=20)
    assert est.uniform_weights == (method in UNIFORM_METHODS)
    if method in UNIFORM_METHODS:
        assert np.allclose(est.sample_scores, 1.0)
    assert est.weight_matrix.shape == (20, 400)
    assert np.all(est.weight_matrix >= 0) and np.all(est.weight_matrix <= 1)


def test_shift_scores_rank_planted_outliers():
    ds, res = _residualized(n=800, p=0.25, seed=1)
    est = fit_adrf(res, "shift")
    out_scores = est.sample_scores[ds.outlier_mask]
    in_scores = est.sample_scores[~ds.outlier_mask]
    assert out_scores.mean() < in_scores.mean() - 0.3


def test_curve_close_to_truth_clean():
    ds, res = _residualized(n=800)
    est = fit_adrf(res, "standard_dml")
    truth = ds.true_curve(est.grid)
    diff = (est.g_curve - est.g_curve.mean()) - (truth - truth.mean())
    assert float(np.sqrt(np.mean(diff**2))) < 0.15


def test_naive_vs_standard_use_same_machinery():
    ds, res = _residualized(n=400)
    raw = raw_residualized(ds)
    assert np.array_equal(raw.y_tilde, ds.y)
    est = fit_adrf(raw, "naive_ll")
    assert est.method == "naive_ll"


def test_interp_fills_undefined_grid_points():
    # tight bandwidth creates empty windows away from the data clumps
    rng = np.random.default_rng(0)
    t = np.concatenate([rng.normal(-1.5, 0.05, 100), rng.normal(1.5, 0.05, 100)])
    y = 0.5 * t + rng.normal(size=200) * 0.1

    class _Ds:
        pass

    ds = _Ds()
    ds.t, ds.y = t, y
    ds.outlier_mask = np.zeros(200, dtype=bool)
    raw = raw_residualized(ds)
    est = fit_adrf(raw, "standard_dml", h_scale=0.05, grid_points=30)
    assert est.n_undefined > 0
    assert np.all(np.isfinite(est.g_curve))


def test_fit_validation():
    _, res = _residualized()
    with pytest.raises(ValueError):
        fit_adrf(res, "not_a_method")
    ds_small = dgp.generate(dgp.SINUSOIDAL, n=30, seed=0)
    with pytest.raises(ValueError):
        fit_adrf(raw_residualized(ds_small), "standard_dml")


def test_curve_residuals_interpolates_and_clamps():
    grid = np.linspace(-1, 1, 5)
    est = ADRFEstimate(grid=grid, theta=np.zeros(5), g_curve=grid.copy(),
                       intercepts=np.zeros(5), weight_matrix=np.ones((5, 3)),
                       sample_scores=np.ones(3), uniform_weights=True,
                       method="standard_dml", h=0.3)
    r = curve_residuals(est, np.array([-2.0, 0.5, 2.0]), np.array([0.0, 0.5, 1.0]))
    # beyond-grid treatments clamp to the end values -1 and 1
    assert np.allclose(r, [1.0, 0.0, 0.0])


def test_multid_surface_runs_and_validates():
    ds = dgp.generate_multi(2, n=500, p_contam=0.0, seed=0)
    res = crossfit_residualize(ds, Ridge(), K=3, seed=0)
    est = fit_adrf_multid(res, "standard_dml")
    assert est.alpha.shape == (15, 15)
    assert np.all(np.isfinite(est.alpha))
    with pytest.raises(ValueError):
        fit_adrf_multid(res, "huber_dml")


def test_sample_anchor_changes_annealed_fit_only():
    ds, res = _residualized(n=400, p=0.15)
    anchor = np.full(400, 0.5)
    est_a = fit_adrf(res, "shift", sample_anchor=anchor, grid_points=15)
    est_b = fit_adrf(res, "standard_dml", sample_anchor=anchor, grid_points=15)
    est_b2 = fit_adrf(res, "standard_dml", grid_points=15)
    assert np.array_equal(est_b.g_curve, est_b2.g_curve)
    assert np.all(np.isfinite(est_a.g_curve))
