"""Kernel-window estimator oracles and robustness invariants."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robust_adrf import dgp
from robust_adrf.smoothers import (
    GncConfig,
    KernelWindow,
    LocalFit,
    build_window,
    defensive_refit,
    gaussian_kernel,
    gnc_fit,
    mad,
    second_stage_huber,
    second_stage_quantile,
    silverman_bandwidth,
    weighted_local_linear,
    welsch_weight,
    winsorize,
)


def _window(t, y, wk=None):
    t = np.asarray(t, float)
    y = np.asarray(y, float)
    wk = np.ones_like(y) if wk is None else np.asarray(wk, float)
    return KernelWindow(indices=np.arange(y.shape[0]), k_weights=wk,
                        t_local=t, y_local=y)


def test_gaussian_kernel_values():
    assert gaussian_kernel(0.0, 1.0) == 1.0
    assert np.isclose(gaussian_kernel(1.0, 1.0), np.exp(-0.5))
    assert np.allclose(gaussian_kernel(np.array([0.0, 2.0]), 2.0),
                       [1.0, np.exp(-0.5)])
    with pytest.raises(ValueError):
        gaussian_kernel(1.0, 0.0)
    with pytest.raises(ValueError):
        gaussian_kernel(np.zeros(2), np.array([1.0, -1.0]))


def test_mad_oracle():
    assert mad(np.array([1.0, 2.0, 3.0, 4.0, 100.0])) == 1.0
    assert mad(np.array([5.0, 5.0, 5.0])) == 0.0
    with pytest.raises(ValueError):
        mad(np.array([]))


def test_silverman_formula():
    t = np.linspace(-2, 2, 800)
    assert np.isclose(silverman_bandwidth(t),
                      1.06 * np.std(t) * 800 ** (-0.2))
    with pytest.raises(ValueError):
        silverman_bandwidth(np.ones(10))


def test_welsch_weight_formula_and_bounds():
    r = np.array([0.0, 1.0, -3.0, 10.0])
    w = welsch_weight(r, sigma_eff=2.0, gamma=0.2)
    assert np.allclose(w, np.exp(-0.1 * (r / 2.0) ** 2))
    assert np.all(w > 0) and np.all(w <= 1)
    assert w[0] == 1.0
    with pytest.raises(ValueError):
        welsch_weight(r, 0.0, 0.2)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e4, 1e4), min_size=1, max_size=40),
       st.floats(0.01, 10.0), st.floats(0.01, 5.0))
def test_combined_weights_in_unit_interval(resids, sigma, gamma):
    r = np.asarray(resids)
    wk = np.exp(-np.linspace(0, 4, r.shape[0]))  # kernel weights in (0, 1]
    combined = wk * welsch_weight(r, sigma, gamma)
    # exp underflow can round extreme-residual weights to exactly 0.0
    assert np.all(combined >= 0)
    assert np.all(combined <= 1.0)
    moderate = np.abs(r) <= 10.0 * sigma
    assert np.all(combined[moderate] > 0)


def test_wls_matches_dense_lstsq_oracle():
    rng = np.random.default_rng(0)
    t = rng.uniform(-1, 1, 60)
    y = 1.5 + 2.0 * t + rng.normal(size=60) * 0.3
    w = rng.uniform(0.1, 1.0, 60)
    alpha, theta = weighted_local_linear(_window(t, y, w), w)
    a = np.column_stack([np.ones(60), t]) * np.sqrt(w)[:, None]
    b_oracle = np.linalg.lstsq(a, y * np.sqrt(w), rcond=None)[0]
    assert abs(alpha - b_oracle[0]) < 1e-9
    assert abs(theta[0] - b_oracle[1]) < 1e-9


def test_wls_exact_on_line():
    t = np.linspace(-1, 1, 20)
    y = 3.0 - 0.7 * t
    alpha, theta = weighted_local_linear(_window(t, y), np.ones(20))
    assert np.isclose(alpha, 3.0, atol=1e-10)
    assert np.isclose(theta[0], -0.7, atol=1e-10)


def test_gnc_clean_window_matches_wls():
    rng = np.random.default_rng(1)
    t = rng.uniform(-1, 1, 120)
    y = 0.5 + 1.2 * t + rng.normal(size=120) * 0.3
    win = _window(t, y)
    fit = gnc_fit(win, GncConfig())
    alpha, theta = weighted_local_linear(win, win.k_weights)
    assert abs(float(fit.theta[0]) - float(theta[0])) <= 1e-3


def test_gnc_rejects_gross_outliers():
    rng = np.random.default_rng(2)
    t = rng.uniform(-1, 1, 200)
    y = 1.0 * t + rng.normal(size=200) * 0.3
    y[:30] += 12.0 * rng.choice([-1, 1], 30)
    win = _window(t, y)
    fit = defensive_refit(gnc_fit(win, GncConfig()), win, GncConfig())
    assert abs(float(fit.theta[0]) - 1.0) < 0.15
    # redescending weights separate the planted outliers
    assert fit.robust_weights[:30].mean() < fit.robust_weights[30:].mean()


def test_gnc_zero_mad_degenerate_window():
    win = _window(np.linspace(-1, 1, 10), np.full(10, 4.0))
    fit = gnc_fit(win, GncConfig())
    assert fit.alpha == 4.0
    assert np.allclose(fit.theta, 0.0)


def test_gnc_contraction_ratios_below_one():
    """Median per-step slope-update contraction stays below 1 on real windows."""
    cfg = GncConfig()
    by_mu = {}
    for kind in dgp.MAIN_KINDS:
        ds = dgp.generate(kind, n=800, p_contam=0.25, seed=0)
        h = silverman_bandwidth(ds.t)
        for t0 in (-1.0, 0.0, 1.0):
            win = build_window(ds.t, ds.t, ds.y, t0, h)
            fit = gnc_fit(win, cfg)
            for mu, ratio in fit.contraction_ratios:
                by_mu.setdefault(mu, []).append(ratio)
    assert by_mu
    for mu, ratios in by_mu.items():
        assert float(np.median(ratios)) < 1.0


def test_defensive_refit_variant_identity():
    """Both cutoff sources coincide when the two MADs are equal."""
    rng = np.random.default_rng(3)
    y = rng.normal(size=80)
    y -= np.median(y)
    t = rng.uniform(-1, 1, 80)
    win = _window(t, y)
    # alpha = 0, theta = 0 makes post-residuals equal y, so the two MADs match
    fit = LocalFit(alpha=0.0, theta=np.zeros(1), robust_weights=np.ones(80),
                   post_residuals=y.copy(), inlier_mask=np.ones(80, bool))
    out_pre = defensive_refit(fit, win, GncConfig(scale_source="prefit_mad"))
    out_post = defensive_refit(fit, win, GncConfig(scale_source="postgnc_mad"))
    assert out_pre.alpha == out_post.alpha
    assert np.array_equal(out_pre.theta, out_post.theta)
    assert np.array_equal(out_pre.inlier_mask, out_post.inlier_mask)


def test_defensive_refit_keeps_clean_points():
    rng = np.random.default_rng(4)
    t = rng.uniform(-1, 1, 100)
    y = 2.0 * t + rng.normal(size=100) * 0.3
    win = _window(t, y)
    fit = gnc_fit(win, GncConfig())
    out = defensive_refit(fit, win, GncConfig())
    # 3x raw-MAD cutoff sits near 2 sigma on Gaussian noise (~95% retained)
    assert out.inlier_mask.mean() >= 0.90


def test_huber_objective_not_worse_than_ols():
    def huber_loss(r, s, eps):
        a = np.abs(r)
        cut = eps * s
        return np.where(a <= cut, 0.5 * r**2, cut * a - 0.5 * cut**2)

    rng = np.random.default_rng(5)
    t = rng.uniform(-1, 1, 150)
    y = 1.0 + 0.5 * t + rng.normal(size=150) * 0.3
    y[:25] += 10.0
    win = _window(t, y)
    fit = second_stage_huber(win)
    alpha0, theta0 = weighted_local_linear(win, win.k_weights)
    r_h = y - fit.alpha - t * fit.theta[0]
    r_o = y - alpha0 - t * theta0[0]
    s = mad(r_h)
    assert huber_loss(r_h, s, 1.35).sum() <= huber_loss(r_o, s, 1.35).sum()


def test_quantile_sign_equivariance():
    rng = np.random.default_rng(6)
    t = rng.uniform(-1, 1, 120)
    y = 0.3 + 0.8 * t + rng.standard_t(3, 120)
    win = _window(t, y)
    neg = _window(t, -y)
    f = second_stage_quantile(win, tau=0.5)
    g = second_stage_quantile(neg, tau=0.5)
    assert np.isclose(f.alpha, -g.alpha, atol=1e-8)
    assert np.allclose(f.theta, -g.theta, atol=1e-8)


def test_quantile_against_grid_oracle():
    rng = np.random.default_rng(7)
    t = rng.uniform(-1, 1, 200)
    y = 1.0 + 2.0 * t + rng.standard_t(3, 200)
    win = _window(t, y)
    fit = second_stage_quantile(win, tau=0.5)

    def pinball(alpha, theta):
        r = y - alpha - theta * t
        return np.where(r > 0, 0.5 * r, -0.5 * r).sum()

    best = min(
        (pinball(a, b), a, b)
        for a in np.linspace(0.0, 2.0, 41)
        for b in np.linspace(1.0, 3.0, 41)
    )
    assert pinball(fit.alpha, float(fit.theta[0])) <= best[0] + 1e-2
    assert abs(fit.alpha - best[1]) < 0.2
    assert abs(float(fit.theta[0]) - best[2]) < 0.2


def test_quantile_tau_validation():
    win = _window(np.linspace(-1, 1, 30), np.linspace(-1, 1, 30))
    with pytest.raises(ValueError):
        second_stage_quantile(win, tau=1.5)


def test_winsorize_oracle():
    y = np.array([0.0, 1.0, 2.0, 3.0, 4.0, 100.0])
    clamped, kept = winsorize(y, mult=3.0)
    med = 2.5
    half = 3.0 * mad(y)
    assert np.allclose(clamped, np.clip(y, med - half, med + half))
    assert kept.tolist() == [True] * 5 + [False]


def test_build_window_drops_far_samples():
    t = np.array([0.0, 0.1, 5.0])
    win = build_window(t, t, np.zeros(3), 0.0, h=0.5)
    assert win.indices.tolist() == [0, 1]
    assert np.isclose(win.k_weights[0], 1.0)


def test_build_window_product_kernel_reduces_to_1d():
    rng = np.random.default_rng(8)
    t1 = rng.uniform(-1, 1, 50)
    y = rng.normal(size=50)
    win1 = build_window(t1, t1, y, 0.2, h=0.4)
    win2 = build_window(t1[:, None], t1[:, None], y, np.array([0.2]),
                        h=np.array([0.4]))
    assert np.array_equal(win1.indices, win2.indices)
    assert np.allclose(win1.k_weights, win2.k_weights)


def test_gnc_config_validation():
    with pytest.raises(ValueError):
        GncConfig(gamma=0.0)
    with pytest.raises(ValueError):
        GncConfig(schedule=(5.0, 5.0, 1.0))
    with pytest.raises(ValueError):
        GncConfig(schedule=(5.0, 2.0))
    with pytest.raises(ValueError):
        GncConfig(scale_source="bogus")
