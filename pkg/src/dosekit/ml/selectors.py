"""Feature selectors: LASSO-penalized logistic regression (coordinate
descent), MRMR, PCA, RFE, and random-forest importances.

Selectors operate on standardized features and return feature-name
subsets; PCA additionally returns the fitted transform so validation
and test data reuse the training-fitted projection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, DataError, NumericalError
from ..features import FeatureMatrix
from .classifiers import LogisticRegression, RandomForest
from .filters import mannwhitney_pvalues

SELECTOR_KINDS = ("lasso", "mrmr", "pca", "rfe", "rf_importance")


def standardize(X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    return (X - mu) / sd, mu, sd


# ---------------------------------------------------------------------------
# LASSO logistic regression by coordinate descent
# ---------------------------------------------------------------------------


def cd_lasso_wls(X: np.ndarray, z: np.ndarray, w: np.ndarray, lam: float,
                 beta0: np.ndarray | None = None, max_iter: int = 200,
                 tol: float = 1e-8) -> np.ndarray:
    """Coordinate descent for L1-penalized weighted least squares.

    Minimizes (1/2n) sum_i w_i (z_i - b0 - x_i.b)^2 + lam * |b|_1; the
    intercept is unpenalized. Returns [b0, b]. On an orthonormal design
    with unit weights this reduces to the soft-threshold closed form.
    """
    n, d = X.shape
    beta = np.zeros(d + 1) if beta0 is None else beta0.copy()
    wsum = w.sum()
    wx2 = (w[:, None] * X**2).sum(axis=0) / n
    resid = z - beta[0] - X @ beta[1:]
    for _ in range(max_iter):
        max_delta = 0.0
        b0_new = beta[0] + (w * resid).sum() / wsum
        resid -= b0_new - beta[0]
        max_delta = max(max_delta, abs(b0_new - beta[0]))
        beta[0] = b0_new
        for j in range(d):
            bj = beta[j + 1]
            rho = (w * X[:, j] * resid).sum() / n + wx2[j] * bj
            if wx2[j] <= 0:
                continue
            bj_new = np.sign(rho) * max(abs(rho) - lam, 0.0) / wx2[j]
            if bj_new != bj:
                resid -= X[:, j] * (bj_new - bj)
                max_delta = max(max_delta, abs(bj_new - bj))
                beta[j + 1] = bj_new
        if max_delta < tol:
            return beta
    return beta


def lasso_logistic_path(X: np.ndarray, y: np.ndarray, lam: float,
                        max_outer: int = 50, tol: float = 1e-7) -> np.ndarray:
    """L1 logistic regression via IRLS with an inner coordinate-descent
    solve (quadratic approximation of the log-likelihood)."""
    n, d = X.shape
    beta = np.zeros(d + 1)
    for it in range(max_outer):
        eta = beta[0] + X @ beta[1:]
        p = 1.0 / (1.0 + np.exp(-np.clip(eta, -35, 35)))
        w = np.maximum(p * (1.0 - p), 1e-6)
        z = eta + (y - p) / w
        new_beta = cd_lasso_wls(X, z, w, lam, beta0=beta)
        delta = np.max(np.abs(new_beta - beta))
        beta = new_beta
        if delta < tol:
            return beta
    raise NumericalError(
        f"lasso logistic regression did not converge (lam={lam}, {max_outer} outer iters, "
        f"last delta={delta:.3e})"
    )


def _stratified_folds(y: np.ndarray, n_folds: int, rng: np.random.Generator):
    folds = [[] for _ in range(n_folds)]
    for cls in (0, 1):
        idx = np.nonzero(y == cls)[0]
        idx = idx[rng.permutation(len(idx))]
        for i, sample in enumerate(idx):
            folds[i % n_folds].append(sample)
    return [np.sort(np.asarray(f)) for f in folds]


def _rank_auc(scores: np.ndarray, labels: np.ndarray) -> float:
    from .evaluation import roc_auc

    return roc_auc(scores, labels)[1]


def lasso_select(fm: FeatureMatrix, lambda_grid: np.ndarray | None = None,
                 n_folds: int = 5, rng: np.random.Generator | None = None) -> list[str]:
    """Features with nonzero coefficients at the CV-AUC-optimal lambda."""
    rng = rng or np.random.default_rng(0)
    X, _, _ = standardize(fm.values)
    y = fm.labels.astype(np.float64)
    n = len(y)
    if lambda_grid is None:
        lam_max = np.abs(X.T @ (y - y.mean())).max() / n
        lambda_grid = np.geomspace(lam_max, lam_max * 1e-3, 20)
    folds = _stratified_folds(fm.labels, n_folds, rng)
    mean_auc = np.zeros(len(lambda_grid))
    for li, lam in enumerate(lambda_grid):
        aucs = []
        for f in range(n_folds):
            test_idx = folds[f]
            train_idx = np.setdiff1d(np.arange(n), test_idx)
            if len(np.unique(y[test_idx])) < 2 or len(np.unique(y[train_idx])) < 2:
                continue
            beta = lasso_logistic_path(X[train_idx], y[train_idx], lam)
            scores = beta[0] + X[test_idx] @ beta[1:]
            aucs.append(_rank_auc(scores, fm.labels[test_idx]))
        mean_auc[li] = np.mean(aucs) if aucs else 0.5
    # ties favor the larger lambda (sparser model); grid is descending
    best = int(np.argmax(mean_auc))
    beta = lasso_logistic_path(X, y, float(lambda_grid[best]))
    return [n_ for n_, b in zip(fm.feature_names, beta[1:]) if b != 0.0]


# ---------------------------------------------------------------------------
# MRMR
# ---------------------------------------------------------------------------


def _quantile_discretize(col: np.ndarray, bins: int = 4) -> np.ndarray:
    edges = np.quantile(col, np.linspace(0, 1, bins + 1)[1:-1])
    return np.searchsorted(edges, col, side="right")


def mutual_information(a: np.ndarray, b: np.ndarray) -> float:
    """MI (nats) between two small-alphabet integer arrays."""
    na, nb = a.max() + 1, b.max() + 1
    joint = np.bincount(a * nb + b, minlength=na * nb).reshape(na, nb) / a.size
    pa = joint.sum(axis=1, keepdims=True)
    pb = joint.sum(axis=0, keepdims=True)
    nz = joint > 0
    return float((joint[nz] * np.log(joint[nz] / (pa @ pb)[nz])).sum())


def mrmr_select(fm: FeatureMatrix, k: int) -> list[str]:
    """Greedy MID scheme: maximize MI(feature; label) minus mean MI against
    the already-selected set, over 4-bin quantile-discretized features."""
    if not 1 <= k <= fm.n_features:
        raise ConfigError(f"invalid mrmr k={k}")
    disc = np.column_stack([_quantile_discretize(fm.values[:, j]) for j in range(fm.n_features)])
    y = fm.labels
    relevance = np.array([mutual_information(disc[:, j], y) for j in range(fm.n_features)])
    selected: list[int] = []
    red_cache = np.zeros((fm.n_features, 0))
    while len(selected) < k:
        if selected:
            redundancy = red_cache.mean(axis=1)
        else:
            redundancy = np.zeros(fm.n_features)
        score = relevance - redundancy
        score[selected] = -np.inf
        j = int(np.argmax(score))
        selected.append(j)
        col = np.array([[mutual_information(disc[:, i], disc[:, j])] for i in range(fm.n_features)])
        red_cache = np.hstack([red_cache, col])
    return [fm.feature_names[j] for j in selected]


# ---------------------------------------------------------------------------
# PCA
# ---------------------------------------------------------------------------


@dataclass
class PcaResult:
    component_names: list[str]
    loadings: np.ndarray  # (n_features, k)
    mean: np.ndarray
    scale: np.ndarray
    explained_variance: np.ndarray
    feature_names: list[str]

    def transform(self, X: np.ndarray) -> np.ndarray:
        return ((X - self.mean) / self.scale) @ self.loadings


def pca_select(fm: FeatureMatrix, k: int) -> tuple[np.ndarray, PcaResult]:
    """Top-k principal components of the standardized features."""
    Xs, mu, sd = standardize(fm.values)
    rank = int(np.linalg.matrix_rank(Xs)) if min(Xs.shape) > 0 else 0
    if k > rank:
        raise ConfigError(f"pca k={k} exceeds data rank {rank}")
    _, s, vt = np.linalg.svd(Xs, full_matrices=False)
    loadings = vt[:k].T
    # deterministic sign: largest-magnitude loading positive
    for j in range(k):
        col = loadings[:, j]
        if col[np.argmax(np.abs(col))] < 0:
            loadings[:, j] = -col
    explained = (s[:k] ** 2) / max(len(fm.labels) - 1, 1)
    result = PcaResult(
        component_names=[f"pc{j + 1}" for j in range(k)],
        loadings=loadings,
        mean=mu,
        scale=sd,
        explained_variance=explained,
        feature_names=list(fm.feature_names),
    )
    return Xs @ loadings, result


# ---------------------------------------------------------------------------
# RFE and RF importances
# ---------------------------------------------------------------------------


def rfe_select(fm: FeatureMatrix, k: int) -> list[str]:
    """Recursive elimination of the smallest-|coefficient| L2-logistic
    feature until k remain."""
    if not 1 <= k <= fm.n_features:
        raise ConfigError(f"invalid rfe k={k}")
    X, _, _ = standardize(fm.values)
    active = list(range(fm.n_features))
    while len(active) > k:
        model = LogisticRegression().fit(X[:, active], fm.labels)
        drop = int(np.argmin(np.abs(model.coef_)))
        active.pop(drop)
    return [fm.feature_names[j] for j in sorted(active)]


def rf_importance_select(fm: FeatureMatrix, k: int,
                         rng: np.random.Generator | None = None) -> list[str]:
    """Top-k features by mean impurity decrease of a 200-tree forest."""
    if not 1 <= k <= fm.n_features:
        raise ConfigError(f"invalid rf k={k}")
    rng = rng or np.random.default_rng(0)
    forest = RandomForest(n_trees=200, rng=rng).fit(fm.values, fm.labels)
    order = np.lexsort((np.arange(fm.n_features), -forest.importances_))
    chosen = sorted(order[:k])
    return [fm.feature_names[j] for j in chosen]
