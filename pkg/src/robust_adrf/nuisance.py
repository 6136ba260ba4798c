"""Cross-fitted nuisance estimation with pluggable learners.

Learners are implemented directly on numpy: ridge by the closed-form
normal equations, lasso by cyclic coordinate descent, and gradient-boosted
regression trees with histogram-binned split search (squared or absolute
loss).  Features are standardized inside each learner so penalties are
comparable across DGPs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .seeding import child_rng


@dataclass(frozen=True)
class Ridge:
    lam: float = 1.0


@dataclass(frozen=True)
class Lasso:
    lam: float = 0.1
    tol: float = 1e-7
    max_iter: int = 10_000


@dataclass(frozen=True)
class Gbt:
    loss: str = "squared"  # or "absolute"
    trees: int = 100
    depth: int = 3
    rate: float = 0.1
    bins: int = 32
    min_leaf: int = 20


@dataclass(frozen=True)
class Zero:
    """Predicts 0 everywhere; residualization becomes the identity."""


LearnerKind = Ridge | Lasso | Gbt | Zero


@dataclass
class Residualized:
    y_tilde: np.ndarray
    t_tilde: np.ndarray  # (n,) or (n, d)
    fold_id: np.ndarray
    t_raw: np.ndarray  # (n,) or (n, d)
    outlier_mask: np.ndarray


def _standardize(x: np.ndarray):
    mu = x.mean(axis=0)
    sd = x.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    return (x - mu) / sd, mu, sd


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise ValueError("non-finite values in learner input")


def _ridge_fit_predict(lr: Ridge, x_train, y_train, x_test):
    z, mu, sd = _standardize(x_train)
    ym = y_train.mean()
    yc = y_train - ym
    p = z.shape[1]
    beta = np.linalg.solve(z.T @ z + lr.lam * np.eye(p), z.T @ yc)
    return ((x_test - mu) / sd) @ beta + ym


def lasso_coefficients(lr: Lasso, z: np.ndarray, yc: np.ndarray) -> np.ndarray:
    """Cyclic coordinate descent for (1/2n)||y - Z b||^2 + lam ||b||_1.

    z is assumed standardized and yc centered.
    """
    n, p = z.shape
    beta = np.zeros(p)
    col_sq = (z**2).sum(axis=0) / n
    r = yc.copy()
    for _ in range(lr.max_iter):
        max_delta = 0.0
        for j in range(p):
            if col_sq[j] == 0:
                continue
            rho = (z[:, j] @ r) / n + col_sq[j] * beta[j]
            new = np.sign(rho) * max(abs(rho) - lr.lam, 0.0) / col_sq[j]
            delta = new - beta[j]
            if delta != 0.0:
                r -= delta * z[:, j]
                beta[j] = new
                max_delta = max(max_delta, abs(delta))
        if max_delta < lr.tol:
            break
    return beta


def _lasso_fit_predict(lr: Lasso, x_train, y_train, x_test):
    z, mu, sd = _standardize(x_train)
    ym = y_train.mean()
    beta = lasso_coefficients(lr, z, y_train - ym)
    return ((x_test - mu) / sd) @ beta + ym


class _HistGbt:
    """Stage-wise regression trees on quantile-binned features."""

    def __init__(self, cfg: Gbt):
        self.cfg = cfg

    def fit(self, x: np.ndarray, y: np.ndarray):
        cfg = self.cfg
        n, p = x.shape
        # quantile bin edges per feature; interior edges only
        qs = np.linspace(0, 100, cfg.bins + 1)[1:-1]
        self.edges_ = [np.unique(np.percentile(x[:, j], qs)) for j in range(p)]
        codes = np.empty((n, p), dtype=np.int64)
        for j in range(p):
            codes[:, j] = np.searchsorted(self.edges_[j], x[:, j], side="right")
        self.base_ = float(np.mean(y) if cfg.loss == "squared" else np.median(y))
        self.trees_ = []
        self.train_loss_ = []
        f = np.full(n, self.base_)
        for _ in range(cfg.trees):
            resid = y - f
            grad = resid if cfg.loss == "squared" else np.sign(resid)
            tree = self._grow(codes, grad, resid, np.arange(n))
            f += cfg.rate * self._predict_codes(tree, codes)
            if cfg.loss == "squared":
                self.train_loss_.append(float(np.mean((y - f) ** 2)))
            else:
                self.train_loss_.append(float(np.mean(np.abs(y - f))))
            self.trees_.append(tree)
        return self

    def _leaf_value(self, resid_node):
        if self.cfg.loss == "squared":
            return float(np.mean(resid_node))
        return float(np.median(resid_node))

    def _grow(self, codes, grad, resid, node, depth=0):
        cfg = self.cfg
        if depth >= cfg.depth or node.size < 2 * cfg.min_leaf:
            return ("leaf", self._leaf_value(resid[node]))
        g = grad[node]
        total_sum = g.sum()
        total_cnt = node.size
        best = None  # (gain, feature, threshold_bin)
        for j in range(codes.shape[1]):
            c = codes[node, j]
            nb = len(self.edges_[j]) + 1
            if nb < 2:
                continue
            sums = np.bincount(c, weights=g, minlength=nb)
            cnts = np.bincount(c, minlength=nb)
            ls = np.cumsum(sums)[:-1]
            lc = np.cumsum(cnts)[:-1]
            rs = total_sum - ls
            rc = total_cnt - lc
            valid = (lc >= cfg.min_leaf) & (rc >= cfg.min_leaf)
            if not valid.any():
                continue
            with np.errstate(divide="ignore", invalid="ignore"):
                gain = np.where(valid, ls**2 / np.maximum(lc, 1)
                                + rs**2 / np.maximum(rc, 1), -np.inf)
            b = int(np.argmax(gain))
            if np.isfinite(gain[b]) and (best is None or gain[b] > best[0]):
                best = (gain[b], j, b)
        if best is None:
            return ("leaf", self._leaf_value(resid[node]))
        _, j, b = best
        go_left = codes[node, j] <= b
        left = self._grow(codes, grad, resid, node[go_left], depth + 1)
        right = self._grow(codes, grad, resid, node[~go_left], depth + 1)
        return ("split", j, b, left, right)

    def _predict_codes(self, tree, codes):
        out = np.empty(codes.shape[0])
        stack = [(tree, np.arange(codes.shape[0]))]
        while stack:
            node, idx = stack.pop()
            if node[0] == "leaf":
                out[idx] = node[1]
            else:
                _, j, b, left, right = node
                go_left = codes[idx, j] <= b
                stack.append((left, idx[go_left]))
                stack.append((right, idx[~go_left]))
        return out

    def predict(self, x: np.ndarray) -> np.ndarray:
        n, p = x.shape
        codes = np.empty((n, p), dtype=np.int64)
        for j in range(p):
            codes[:, j] = np.searchsorted(self.edges_[j], x[:, j], side="right")
        f = np.full(n, self.base_)
        for tree in self.trees_:
            f += self.cfg.rate * self._predict_codes(tree, codes)
        return f


def fit_predict_learner(learner: LearnerKind, x_train, y_train, x_test) -> np.ndarray:
    """Fit one learner on (x_train, y_train) and predict x_test."""
    x_train = np.asarray(x_train, float)
    y_train = np.asarray(y_train, float)
    x_test = np.asarray(x_test, float)
    _check_finite(x_train, y_train, x_test)
    if x_train.shape[0] < 2:
        raise ValueError("need at least 2 training samples")
    if x_train.shape[1] != x_test.shape[1]:
        raise ValueError("train/test column mismatch")
    if isinstance(learner, Zero):
        return np.zeros(x_test.shape[0])
    if isinstance(learner, Ridge):
        return _ridge_fit_predict(learner, x_train, y_train, x_test)
    if isinstance(learner, Lasso):
        return _lasso_fit_predict(learner, x_train, y_train, x_test)
    if isinstance(learner, Gbt):
        return _HistGbt(learner).fit(x_train, y_train).predict(x_test)
    raise TypeError(f"unknown learner: {learner!r}")


def _make_folds(n: int, K: int, seed: int) -> np.ndarray:
    """Seeded random partition into K near-equal folds, labels 1..K."""
    order = child_rng(seed, "folds", n, K).permutation(n)
    fold_id = np.empty(n, dtype=int)
    for k, chunk in enumerate(np.array_split(order, K), start=1):
        fold_id[chunk] = k
    return fold_id


def _residualize(x, t, y, fold_id, K, learner, mask, t_raw=None):
    n = y.shape[0]
    t = np.asarray(t, float).reshape(n, -1)  # (n, d)
    y_hat = np.empty(n)
    t_hat = np.empty_like(t)
    for k in range(1, K + 1):
        test = fold_id == k
        train = ~test
        if test.sum() < 2 or train.sum() < 2:
            raise ValueError(f"degenerate fold {k}")
        y_hat[test] = fit_predict_learner(learner, x[train], y[train], x[test])
        for j in range(t.shape[1]):
            t_hat[test, j] = fit_predict_learner(learner, x[train], t[train, j], x[test])
    t_tilde = t - t_hat
    raw = np.asarray(t_raw if t_raw is not None else t)
    if t_tilde.shape[1] == 1:
        t_tilde = t_tilde[:, 0]
        raw = raw.reshape(n, -1)[:, 0]
    return Residualized(y_tilde=y - y_hat, t_tilde=t_tilde, fold_id=fold_id,
                        t_raw=raw, outlier_mask=mask)


def crossfit_residualize(ds, learner: LearnerKind, K: int = 3, seed: int = 0) -> Residualized:
    """K-fold cross-fitted residuals; each prediction is out-of-fold."""
    if K < 2:
        raise ValueError("K must be >= 2")
    n = ds.y.shape[0]
    if n < 5 * K:
        raise ValueError("need n >= 5K")
    fold_id = _make_folds(n, K, seed)
    return _residualize(ds.x, ds.t, ds.y, fold_id, K, learner,
                        ds.outlier_mask, t_raw=ds.t)


def block_crossfit_residualize(ds, learner: LearnerKind, K: int = 4,
                               buffer: int = 5, seed: int = 0) -> Residualized:
    """Cross-fitting over contiguous time blocks with a boundary buffer.

    The training set for each test block excludes `buffer` timestamps on
    each side of the block, limiting serial-dependence leakage.
    """
    n = ds.y.shape[0]
    blocks = np.array_split(np.arange(n), K)
    fold_id = np.empty(n, dtype=int)
    for k, b in enumerate(blocks, start=1):
        fold_id[b] = k
    y_hat = np.empty(n)
    t_hat = np.empty(n)
    t = np.asarray(ds.t, float)
    for k, b in enumerate(blocks, start=1):
        lo, hi = b[0], b[-1]
        train = np.ones(n, dtype=bool)
        train[max(0, lo - buffer): min(n, hi + buffer + 1)] = False
        if train.sum() < 2:
            raise ValueError("buffer leaves no training data")
        y_hat[b] = fit_predict_learner(learner, ds.x[train], ds.y[train], ds.x[b])
        t_hat[b] = fit_predict_learner(learner, ds.x[train], t[train], ds.x[b])
    return Residualized(y_tilde=ds.y - y_hat, t_tilde=t - t_hat, fold_id=fold_id,
                        t_raw=t, outlier_mask=ds.outlier_mask)
