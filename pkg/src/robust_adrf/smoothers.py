"""Kernel machinery and the kernel-local second-stage estimators.

Each estimator fits an intercept and slope(s) inside one kernel window by
weighted least squares variants: plain WLS, Huber IRLS, smoothed pinball
IRLS, or the graduated non-convexity (GNC) annealing loop over a Welsch
loss followed by a defensive inlier refit.  The defensive refit's cutoff
scale is selectable: the MAD of the post-GNC residuals, or the pre-fit
MAD of the window outcomes, the single architectural difference between
the two annealed variants benchmarked by the harness.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

DEFAULT_SCHEDULE = (10.0, 5.0, 3.0, 2.0, 1.5, 1.2, 1.0)


@dataclass(frozen=True)
class GncConfig:
    gamma: float = 0.2
    schedule: tuple = DEFAULT_SCHEDULE
    irls_tol: float = 1e-6
    irls_max_iter: int = 50
    cutoff_mult: float = 3.0
    scale_source: str = "postgnc_mad"  # or "prefit_mad"
    # 1.0 = raw MAD; 1.4826 would rescale to the Gaussian-consistent sigma
    mad_scale_factor: float = 1.0

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be > 0")
        s = self.schedule
        if any(s[i] <= s[i + 1] for i in range(len(s) - 1)) or s[-1] != 1.0:
            raise ValueError("schedule must be strictly descending, ending at 1.0")
        if self.scale_source not in ("postgnc_mad", "prefit_mad"):
            raise ValueError("scale_source must be postgnc_mad or prefit_mad")


@dataclass
class KernelWindow:
    indices: np.ndarray  # sample indices with kernel weight > 1e-4
    k_weights: np.ndarray
    t_local: np.ndarray  # (m,) or (m, d): residualized treatment minus t0
    y_local: np.ndarray
    outlier_local: np.ndarray | None = None  # truth mask, diagnostics only

    @property
    def m(self) -> int:
        return self.y_local.shape[0]


@dataclass
class LocalFit:
    alpha: float
    theta: np.ndarray  # (d,)
    robust_weights: np.ndarray
    post_residuals: np.ndarray
    inlier_mask: np.ndarray
    a5_violation: bool = False
    contraction_ratios: list = field(default_factory=list)  # (schedule_step, ratio)
    converged: bool = True
    sigma_anchor: float = 0.0


def silverman_bandwidth(t: np.ndarray) -> float:
    """h = 1.06 * sd(t) * n^(-1/5)."""
    t = np.asarray(t, float)
    n = t.shape[0]
    if n < 2:
        raise ValueError("need at least 2 points")
    sd = float(np.std(t))
    if sd == 0:
        raise ValueError("constant treatment vector")
    return 1.06 * sd * n ** (-0.2)


def gaussian_kernel(u, h):
    """exp(-u^2 / (2 h^2)); equals 1 at u = 0.  h may be per-column."""
    h = np.asarray(h, float)
    if np.any(h <= 0):
        raise ValueError("bandwidth must be > 0")
    u = np.asarray(u, float)
    return np.exp(-(u**2) / (2.0 * h**2))


def mad(v: np.ndarray) -> float:
    """median(|v - median(v)|), no consistency factor."""
    v = np.asarray(v, float)
    if v.size == 0:
        raise ValueError("mad of empty vector")
    return float(np.median(np.abs(v - np.median(v))))


def welsch_weight(r, sigma_eff: float, gamma: float):
    """exp(-(gamma/2) (r / sigma_eff)^2)."""
    if sigma_eff <= 0 or gamma <= 0:
        raise ValueError("sigma_eff and gamma must be > 0")
    r = np.asarray(r, float)
    return np.exp(-0.5 * gamma * (r / sigma_eff) ** 2)


COND_LIMIT = 1e10


class RankError(ValueError):
    """Weighted design is numerically rank-deficient."""


def _design(t_local: np.ndarray) -> np.ndarray:
    tl = np.asarray(t_local, float)
    if tl.ndim == 1:
        tl = tl[:, None]
    return np.hstack([np.ones((tl.shape[0], 1)), tl])


def _wls(a: np.ndarray, y: np.ndarray, w: np.ndarray):
    """Solve min sum w (y - a b)^2; raises RankError on bad conditioning."""
    m = (a * w[:, None]).T @ a
    if not np.all(np.isfinite(m)) or np.linalg.cond(m) > COND_LIMIT:
        raise RankError("singular weighted design")
    b = np.linalg.solve(m, (a * w[:, None]).T @ y)
    return float(b[0]), b[1:]


def weighted_local_linear(window: KernelWindow, weights: np.ndarray):
    """Local-linear WLS inside one window; returns (alpha, theta)."""
    w = np.asarray(weights, float)
    if window.m < 2 or w.sum() <= 0:
        raise ValueError("degenerate window")
    return _wls(_design(window.t_local), window.y_local, w)


def _kernel_mass_violation(window: KernelWindow) -> bool:
    if window.outlier_local is None:
        return False
    wk = window.k_weights
    return float(wk @ window.outlier_local) / float(wk.sum()) > 0.5


def gnc_fit(window: KernelWindow, cfg: GncConfig,
            sigma_anchor: float | None = None) -> LocalFit:
    """Welsch-loss IRLS annealed over the schedule (graduated non-convexity).

    The effective scale at each schedule step is mu * sigma_anchor, where
    the anchor is the window-local outcome MAD unless a caller-supplied
    anchor (e.g. a rolling time-series scale) is given.  Records per-step
    contraction ratios of successive slope updates.
    """
    y = window.y_local
    tl = _design(window.t_local)
    d = tl.shape[1] - 1
    wk = window.k_weights
    a5 = _kernel_mass_violation(window)
    anchor = (cfg.mad_scale_factor * mad(y)) if sigma_anchor is None else float(sigma_anchor)
    if anchor == 0.0:
        common = float(np.median(y))
        r = y - common
        return LocalFit(alpha=common, theta=np.zeros(d), robust_weights=np.ones_like(y),
                        post_residuals=r, inlier_mask=np.ones_like(y, dtype=bool),
                        a5_violation=a5, sigma_anchor=0.0)

    alpha = float(np.median(y))
    theta = np.zeros(d)
    ratios: list[tuple[float, float]] = []
    for mu in cfg.schedule:
        sig = mu * anchor
        steps: list[np.ndarray] = [theta.copy()]
        for _ in range(cfg.irls_max_iter):
            r = y - alpha - tl[:, 1:] @ theta
            w = wk * welsch_weight(r, sig, cfg.gamma)
            try:
                alpha_new, theta_new = _wls(tl, y, w)
            except RankError:
                break
            delta = float(np.max(np.abs(theta_new - theta)))
            alpha, theta = alpha_new, theta_new
            steps.append(theta.copy())
            if delta < cfg.irls_tol:
                break
        for k in range(2, len(steps)):
            den = float(np.linalg.norm(steps[k - 1] - steps[k - 2]))
            if den > 1e-15:
                num = float(np.linalg.norm(steps[k] - steps[k - 1]))
                ratios.append((mu, num / den))

    r_star = y - alpha - tl[:, 1:] @ theta
    w_final = welsch_weight(r_star, cfg.schedule[-1] * anchor, cfg.gamma)
    scut = cfg.mad_scale_factor * mad(r_star)
    inlier = np.abs(r_star) <= cfg.cutoff_mult * scut if scut > 0 else np.ones_like(y, dtype=bool)
    return LocalFit(alpha=alpha, theta=theta, robust_weights=w_final,
                    post_residuals=r_star, inlier_mask=inlier, a5_violation=a5,
                    contraction_ratios=ratios, sigma_anchor=anchor)


def defensive_refit(fit: LocalFit, window: KernelWindow, cfg: GncConfig) -> LocalFit:
    """Kernel-weighted OLS on the residual-cutoff inlier set.

    scale_source selects the cutoff scale: the MAD of the post-GNC
    residuals, or the pre-fit MAD of the raw window outcomes.
    """
    r = fit.post_residuals
    if cfg.scale_source == "prefit_mad":
        scut = cfg.mad_scale_factor * mad(window.y_local)
    else:
        scut = cfg.mad_scale_factor * mad(r)
    if scut == 0.0:
        return fit
    inlier = np.abs(r) <= cfg.cutoff_mult * scut
    if inlier.sum() < 2:
        return fit
    tl = _design(window.t_local)
    try:
        alpha, theta = _wls(tl[inlier], window.y_local[inlier],
                            window.k_weights[inlier])
    except RankError:
        return fit
    post = window.y_local - alpha - tl[:, 1:] @ theta
    return replace(fit, alpha=alpha, theta=theta, post_residuals=post,
                   inlier_mask=inlier)


def second_stage_huber(window: KernelWindow, eps: float = 1.35,
                       tol: float = 1e-6, max_iter: int = 50) -> LocalFit:
    """Huber IRLS with the scale re-estimated by MAD each iteration."""
    tl = _design(window.t_local)
    y = window.y_local
    wk = window.k_weights
    alpha, theta = _wls(tl, y, wk)
    for _ in range(max_iter):
        r = y - alpha - tl[:, 1:] @ theta
        s = mad(r)
        if s == 0.0:
            break
        absr = np.maximum(np.abs(r), 1e-12)
        wh = np.minimum(1.0, eps * s / absr)
        try:
            alpha_new, theta_new = _wls(tl, y, wk * wh)
        except RankError:
            break
        delta = float(np.max(np.abs(theta_new - theta)))
        alpha, theta = alpha_new, theta_new
        if delta < tol:
            break
    r = y - alpha - tl[:, 1:] @ theta
    return LocalFit(alpha=alpha, theta=theta, robust_weights=np.ones_like(y),
                    post_residuals=r, inlier_mask=np.ones_like(y, dtype=bool))


def second_stage_quantile(window: KernelWindow, tau: float = 0.5,
                          delta: float = 1e-6, tol: float = 1e-6,
                          max_iter: int = 200) -> LocalFit:
    """Kernel-weighted pinball loss minimized by smoothed IRLS."""
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must be in (0, 1)")
    tl = _design(window.t_local)
    y = window.y_local
    wk = window.k_weights
    alpha, theta = _wls(tl, y, wk)
    converged = False
    for _ in range(max_iter):
        r = y - alpha - tl[:, 1:] @ theta
        q = np.where(r > 0, tau, 1.0 - tau)
        w = wk * q / (np.abs(r) + delta)
        try:
            alpha_new, theta_new = _wls(tl, y, w)
        except RankError:
            break
        step = float(np.max(np.abs(theta_new - theta)))
        alpha, theta = alpha_new, theta_new
        if step < tol:
            converged = True
            break
    r = y - alpha - tl[:, 1:] @ theta
    return LocalFit(alpha=alpha, theta=theta, robust_weights=np.ones_like(y),
                    post_residuals=r, inlier_mask=np.ones_like(y, dtype=bool),
                    converged=converged)


def winsorize(y: np.ndarray, mult: float = 3.0):
    """Clamp y to median +- mult * MAD; returns (clamped, kept_indicator)."""
    y = np.asarray(y, float)
    if y.size == 0:
        raise ValueError("empty vector")
    med = float(np.median(y))
    half = mult * mad(y)
    lo, hi = med - half, med + half
    clamped = np.clip(y, lo, hi)
    kept = (y >= lo) & (y <= hi)
    return clamped, kept


def build_window(t_raw: np.ndarray, t_tilde: np.ndarray, y: np.ndarray,
                 t0, h: float, outlier_mask: np.ndarray | None = None) -> KernelWindow:
    """Assemble the kernel window at grid point t0.

    Kernel weights are computed on the raw treatment distance; the local
    design uses the residualized treatment relative to t0.  Samples with
    kernel weight <= 1e-4 are dropped.  Handles d-dimensional treatments
    via the product kernel.
    """
    t_raw = np.asarray(t_raw, float)
    if t_raw.ndim == 1:
        w = gaussian_kernel(t_raw - t0, h)
    else:
        w = np.prod(gaussian_kernel(t_raw - np.asarray(t0, float), h), axis=1)
    keep = np.flatnonzero(w > 1e-4)
    return KernelWindow(
        indices=keep,
        k_weights=w[keep],
        t_local=np.asarray(t_tilde, float)[keep] - t0,
        y_local=np.asarray(y, float)[keep],
        outlier_local=None if outlier_mask is None else np.asarray(outlier_mask)[keep].astype(float),
    )
