"""Shape, derivative, and outlier-detection metrics.

Level metrics compare grid-mean-centered curves, so they measure shape
recovery rather than the unidentified absolute level.  Detection metrics
flag the floor(p * n) lowest-score samples against the ground-truth mask;
rank metrics treat lower scores as more anomalous.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .adrf import derivative_on_grid
from .smoothers import build_window


@dataclass
class ShapeMetrics:
    rmse_level: float
    mae_level: float
    sup_err: float
    mase_deriv: float


@dataclass
class DetectionMetrics:
    precision: float
    recall: float
    f1: float
    defined: bool = True


def shape_metrics(est_curve: np.ndarray, true_curve: np.ndarray,
                  grid: np.ndarray) -> ShapeMetrics:
    est = np.asarray(est_curve, float)
    tru = np.asarray(true_curve, float)
    grid = np.asarray(grid, float)
    if est.shape != tru.shape or est.shape[0] < 3:
        raise ValueError("curves must be equal length >= 3")
    diff = (est - est.mean()) - (tru - tru.mean())
    rmse = float(np.sqrt(np.mean(diff**2)))
    mae = float(np.mean(np.abs(diff)))
    sup = float(np.max(np.abs(diff)))
    d_est = derivative_on_grid(est, grid)
    d_tru = derivative_on_grid(tru, grid)
    denom = float(np.mean(np.abs(np.diff(d_tru))))
    if denom == 0.0:
        raise ValueError("degenerate truth: zero derivative variation")
    mase = float(np.mean(np.abs(d_est - d_tru))) / denom
    return ShapeMetrics(rmse_level=rmse, mae_level=mae, sup_err=sup,
                        mase_deriv=mase)


def detection_at_matched_k(scores: np.ndarray, mask: np.ndarray,
                           p: float) -> DetectionMetrics:
    """Flag the k = floor(p*n) lowest-score samples, ties by ascending index."""
    scores = np.asarray(scores, float)
    mask = np.asarray(mask, bool)
    if scores.shape != mask.shape:
        raise ValueError("scores/mask length mismatch")
    n = scores.shape[0]
    k = int(np.floor(p * n))
    if k == 0:
        return DetectionMetrics(0.0, 0.0, 0.0, defined=False)
    flagged = np.zeros(n, dtype=bool)
    flagged[np.argsort(scores, kind="stable")[:k]] = True
    tp = int((flagged & mask).sum())
    fp = int((flagged & ~mask).sum())
    fn = int((~flagged & mask).sum())
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = (2 * precision * recall / (precision + recall)
          if precision + recall else 0.0)
    return DetectionMetrics(precision, recall, f1)


def rank_curves(scores: np.ndarray, mask: np.ndarray):
    """(roc_auc, pr_auc) with lower scores ranking more anomalous."""
    scores = np.asarray(scores, float)
    mask = np.asarray(mask, bool)
    n_pos = int(mask.sum())
    n_neg = int((~mask).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("need both classes present")
    # Mann-Whitney on anomaly score (-scores); midranks handle ties
    from scipy.stats import rankdata

    ranks = rankdata(-scores)
    roc = (ranks[mask].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)

    # step-wise PR integration in ascending-score (most anomalous first) order,
    # ties resolved pessimistically by putting negatives first
    order = np.lexsort((mask, scores))
    hits = mask[order]
    tp = np.cumsum(hits)
    prec = tp / np.arange(1, scores.shape[0] + 1)
    pr = float(prec[hits].sum() / n_pos)
    return float(roc), pr


def a5_failure_rate(ds, grid: np.ndarray, h: float) -> float:
    """Fraction of grid points whose kernel window holds > 0.5 outlier mass."""
    mask = np.asarray(ds.outlier_mask, float)
    bad = 0
    for t0 in np.asarray(grid, float):
        w = build_window(ds.t, ds.t, ds.y, t0, h, outlier_mask=ds.outlier_mask)
        if w.m == 0:
            continue
        if float(w.k_weights @ w.outlier_local) / float(w.k_weights.sum()) > 0.5:
            bad += 1
    return bad / len(grid)


def surface_rmse(est_surface: np.ndarray, true_surface: np.ndarray) -> float:
    """Grid-mean-centered RMSE between two surfaces of equal shape."""
    a = np.asarray(est_surface, float)
    b = np.asarray(true_surface, float)
    if a.shape != b.shape:
        raise ValueError("shape mismatch")
    diff = (a - a.mean()) - (b - b.mean())
    return float(np.sqrt(np.mean(diff**2)))
