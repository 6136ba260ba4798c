"""Dose-response curve assembly from kernel-local fits.

Builds the evaluation grid, dispatches each grid point to a second-stage
estimator, integrates the slope curve by trapezoidal quadrature anchored
to the mean local intercept, and assembles the grid-by-sample robust
weight matrix whose row averages are the per-sample outlier scores.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .nuisance import Residualized
from .smoothers import (
    GncConfig,
    KernelWindow,
    LocalFit,
    RankError,
    build_window,
    defensive_refit,
    gnc_fit,
    second_stage_huber,
    second_stage_quantile,
    silverman_bandwidth,
    weighted_local_linear,
    winsorize,
)

METHODS = (
    "naive_ll",
    "standard_dml",
    "winsor_dml",
    "huber_dml",
    "quantile_dml",
    "gnc_fixed",
    "shift",
)

# methods whose per-sample scores carry no outlier information
UNIFORM_METHODS = frozenset({"naive_ll", "standard_dml", "huber_dml", "quantile_dml"})

MIN_WINDOW = 8


@dataclass
class ADRFEstimate:
    grid: np.ndarray
    theta: np.ndarray
    g_curve: np.ndarray
    intercepts: np.ndarray
    weight_matrix: np.ndarray  # (G, n)
    sample_scores: np.ndarray
    uniform_weights: bool
    method: str
    h: float
    n_undefined: int = 0
    contraction: list = None  # (schedule_step, ratio) pooled over grid
    a5_flags: np.ndarray = None


@dataclass
class SurfaceEstimate:
    axes: list
    alpha: np.ndarray  # centered surface estimate source (level up to a constant)
    method: str
    n_undefined: int = 0


def make_grid(t: np.ndarray, G: int = 40) -> np.ndarray:
    """G equally spaced points between the 5th and 95th treatment percentiles."""
    if G < 2:
        raise ValueError("G must be >= 2")
    lo, hi = np.percentile(np.asarray(t, float), [5, 95])
    if hi <= lo:
        raise ValueError("degenerate percentile range")
    return np.linspace(lo, hi, G)


def derivative_on_grid(curve: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Central differences in the interior, one-sided at the ends."""
    curve = np.asarray(curve, float)
    grid = np.asarray(grid, float)
    if curve.shape[0] < 2:
        raise ValueError("need at least 2 points")
    out = np.empty_like(curve)
    out[1:-1] = (curve[2:] - curve[:-2]) / (grid[2:] - grid[:-2])
    out[0] = (curve[1] - curve[0]) / (grid[1] - grid[0])
    out[-1] = (curve[-1] - curve[-2]) / (grid[-1] - grid[-2])
    return out


def integrate_and_anchor(theta: np.ndarray, intercepts: np.ndarray,
                         grid: np.ndarray) -> np.ndarray:
    """Trapezoidal cumulative integral of the slope, re-levelled so the
    curve mean equals the mean local intercept."""
    theta = np.asarray(theta, float)
    grid = np.asarray(grid, float)
    if theta.shape != grid.shape or theta.shape[0] < 2:
        raise ValueError("theta and grid must be equal length >= 2")
    panels = 0.5 * (theta[1:] + theta[:-1]) * np.diff(grid)
    s = np.concatenate([[0.0], np.cumsum(panels)])
    return s - s.mean() + np.mean(intercepts)


def raw_residualized(ds) -> Residualized:
    """Wrap raw (T, Y) so the naive estimator shares the fitting path."""
    return Residualized(y_tilde=np.asarray(ds.y, float),
                        t_tilde=np.asarray(ds.t, float),
                        fold_id=np.zeros(ds.y.shape[0], dtype=int),
                        t_raw=np.asarray(ds.t, float),
                        outlier_mask=ds.outlier_mask)


def _dispatch(method: str, window: KernelWindow, cfg: GncConfig,
              huber_eps: float, quantile_tau: float,
              sigma_anchor: float | None) -> LocalFit:
    if method in ("naive_ll", "standard_dml", "winsor_dml"):
        alpha, theta = weighted_local_linear(window, window.k_weights)
        tl = window.t_local.reshape(window.m, -1)
        r = window.y_local - alpha - tl @ theta
        return LocalFit(alpha=alpha, theta=theta, robust_weights=np.ones(window.m),
                        post_residuals=r, inlier_mask=np.ones(window.m, dtype=bool))
    if method == "huber_dml":
        return second_stage_huber(window, eps=huber_eps)
    if method == "quantile_dml":
        return second_stage_quantile(window, tau=quantile_tau)
    if method in ("gnc_fixed", "shift"):
        source = "prefit_mad" if method == "gnc_fixed" else "postgnc_mad"
        cfg_m = cfg if cfg.scale_source == source else \
            GncConfig(gamma=cfg.gamma, schedule=cfg.schedule, irls_tol=cfg.irls_tol,
                      irls_max_iter=cfg.irls_max_iter, cutoff_mult=cfg.cutoff_mult,
                      scale_source=source, mad_scale_factor=cfg.mad_scale_factor)
        fit = gnc_fit(window, cfg_m, sigma_anchor=sigma_anchor)
        return defensive_refit(fit, window, cfg_m)
    raise ValueError(f"unknown method: {method}")


def _interp_undefined(values: np.ndarray, grid: np.ndarray,
                      defined: np.ndarray) -> np.ndarray:
    """Linear interpolation over undefined grid points; ends clamp."""
    out = values.copy()
    und = ~defined
    if und.any():
        out[und] = np.interp(grid[und], grid[defined], values[defined])
    return out


def fit_adrf(res: Residualized, method: str, cfg: GncConfig = GncConfig(),
             h_scale: float = 1.0, grid_points: int = 40,
             winsor_mult: float = 3.0, huber_eps: float = 1.35,
             quantile_tau: float = 0.5, score_visited_only: bool = False,
             sample_anchor: np.ndarray | None = None) -> ADRFEstimate:
    """Fit the full dose-response curve with one second-stage method.

    sample_anchor optionally carries a per-sample robust scale (e.g. a
    rolling MAD for time series); the annealed methods then anchor each
    window at the median of its members' values instead of the window MAD.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method: {method}")
    t_raw = np.asarray(res.t_raw, float)
    n = t_raw.shape[0]
    if n < 50:
        raise ValueError("need n >= 50")
    h = h_scale * silverman_bandwidth(t_raw)
    grid = make_grid(t_raw, grid_points)
    G = grid.shape[0]

    y_use = np.asarray(res.y_tilde, float)
    winsor_kept = None
    if method == "winsor_dml":
        y_use, winsor_kept = winsorize(y_use, winsor_mult)

    theta = np.zeros(G)
    intercepts = np.zeros(G)
    defined = np.zeros(G, dtype=bool)
    a5_flags = np.zeros(G, dtype=bool)
    weight_matrix = np.ones((G, n))
    visited = np.zeros((G, n), dtype=bool)
    contraction: list = []

    annealed = method in ("gnc_fixed", "shift")
    for gi, t0 in enumerate(grid):
        # kernel and local design both use the raw treatment distance; the
        # residualized treatment would leak first-stage noise into the
        # regressor and attenuate the slope
        window = build_window(t_raw, t_raw, y_use, t0, h,
                              outlier_mask=res.outlier_mask)
        if window.m < MIN_WINDOW:
            continue
        anchor = None
        if annealed and sample_anchor is not None:
            anchor = float(np.median(np.asarray(sample_anchor)[window.indices]))
        try:
            fit = _dispatch(method, window, cfg, huber_eps, quantile_tau, anchor)
        except (RankError, ValueError):
            continue
        theta[gi] = float(np.atleast_1d(fit.theta)[0])
        intercepts[gi] = fit.alpha
        defined[gi] = True
        a5_flags[gi] = fit.a5_violation
        contraction.extend(fit.contraction_ratios)
        visited[gi, window.indices] = True
        if annealed:
            weight_matrix[gi, window.indices] = fit.robust_weights

    if not defined.any():
        raise RuntimeError("every grid point undefined")
    theta = _interp_undefined(theta, grid, defined)
    intercepts = _interp_undefined(intercepts, grid, defined)
    g_curve = integrate_and_anchor(theta, intercepts, grid)

    if method == "winsor_dml":
        # winsorization is global pre-processing: score = kept indicator
        sample_scores = winsor_kept.astype(float)
        weight_matrix = np.broadcast_to(sample_scores, (G, n)).copy()
    elif score_visited_only:
        cnt = visited.sum(axis=0)
        tot = np.where(visited, weight_matrix, 0.0).sum(axis=0)
        sample_scores = np.where(cnt > 0, tot / np.maximum(cnt, 1), 1.0)
    else:
        sample_scores = weight_matrix.mean(axis=0)

    return ADRFEstimate(grid=grid, theta=theta, g_curve=g_curve,
                        intercepts=intercepts, weight_matrix=weight_matrix,
                        sample_scores=sample_scores,
                        uniform_weights=method in UNIFORM_METHODS,
                        method=method, h=h,
                        n_undefined=int((~defined).sum()),
                        contraction=contraction, a5_flags=a5_flags)


def curve_residuals(est: ADRFEstimate, t_raw: np.ndarray,
                    y_tilde: np.ndarray) -> np.ndarray:
    """Per-sample residual against the anchored curve (clamped beyond grid)."""
    fitted = np.interp(np.asarray(t_raw, float), est.grid, est.g_curve)
    return np.asarray(y_tilde, float) - fitted


def fit_adrf_multid(res: Residualized, method: str, cfg: GncConfig = GncConfig(),
                    h_scale: float = 1.0, grid_points: int | None = None) -> SurfaceEstimate:
    """Product-kernel surface estimation for d-dimensional treatments.

    The local intercept at each grid node estimates the surface level (up
    to the constant removed by centering in the metric), so no integration
    step is needed.
    """
    t_raw = np.asarray(res.t_raw, float)
    if t_raw.ndim != 2 or t_raw.shape[1] not in (2, 3):
        raise ValueError("multi-treatment requires t of shape (n, 2) or (n, 3)")
    if method not in ("standard_dml", "shift"):
        raise ValueError("multi-treatment supports standard_dml and shift")
    d = t_raw.shape[1]
    if grid_points is None:
        grid_points = 15 if d == 2 else 9
    axes = [make_grid(t_raw[:, j], grid_points) for j in range(d)]
    h = h_scale * np.array([silverman_bandwidth(t_raw[:, j]) for j in range(d)])

    shape = tuple(len(a) for a in axes)
    alpha = np.full(shape, np.nan)
    for node in product(*(range(s) for s in shape)):
        t0 = np.array([axes[j][node[j]] for j in range(d)])
        window = build_window(t_raw, t_raw, res.y_tilde, t0, h)
        if window.m < MIN_WINDOW:
            continue
        try:
            if method == "shift":
                fit = defensive_refit(gnc_fit(window, cfg), window, cfg)
            else:
                a, th = weighted_local_linear(window, window.k_weights)
                fit = LocalFit(alpha=a, theta=th, robust_weights=np.ones(window.m),
                               post_residuals=np.zeros(window.m),
                               inlier_mask=np.ones(window.m, dtype=bool))
        except (RankError, ValueError):
            continue
        alpha[node] = fit.alpha

    nan = np.isnan(alpha)
    n_undefined = int(nan.sum())
    if n_undefined == alpha.size:
        raise RuntimeError("every grid node undefined")
    if n_undefined:
        # nearest-defined fill in grid-index space
        defined_idx = np.argwhere(~nan)
        for node in np.argwhere(nan):
            j = np.argmin(((defined_idx - node) ** 2).sum(axis=1))
            alpha[tuple(node)] = alpha[tuple(defined_idx[j])]
    return SurfaceEstimate(axes=axes, alpha=alpha, method=method,
                           n_undefined=n_undefined)
