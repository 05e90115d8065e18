"""Binary classifiers trained on radiomic features.

All five models are self-contained and deterministic given their RNG:
CART (Gini), k-NN (distance-weighted), L2 logistic regression (IRLS),
random forest (bagging + per-node feature subsampling), and AdaBoost
(SAMME over depth-1 stumps). Every model exposes ``predict_proba``
returning P(y = 1) per row, and serializes to plain JSON-able dicts.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError, DataError

CLASSIFIER_KINDS = ("AdaBoost", "DecisionTree", "KNN", "LogisticRegression", "RandomForest")


def _check_xy(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise DataError("X must be (n, d) with matching y")
    if not (np.any(y == 0) and np.any(y == 1)):
        raise DataError("training set must contain both classes")
    return X, y


# ---------------------------------------------------------------------------
# CART
# ---------------------------------------------------------------------------


def _gini(w1, w):
    # weighted Gini impurity for a binary node; w = total weight, w1 = positives
    if w <= 0:
        return 0.0
    p = w1 / w
    return 2.0 * p * (1.0 - p)


def _best_split(X, y, w, feature_ids):
    """(feature, threshold, gain) of the best weighted-Gini split, or None.

    Deterministic tie-break: first feature in the given order, lowest
    threshold within a feature.
    """
    w_total = w.sum()
    w1_total = (w * y).sum()
    parent = _gini(w1_total, w_total)
    best = None
    best_gain = 1e-12
    for f in feature_ids:
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        if xs[0] == xs[-1]:
            continue
        ws = w[order]
        w1s = ws * y[order]
        cw = np.cumsum(ws)[:-1]
        cw1 = np.cumsum(w1s)[:-1]
        boundaries = np.nonzero(xs[1:] > xs[:-1])[0]
        if boundaries.size == 0:
            continue
        wl = cw[boundaries]
        w1l = cw1[boundaries]
        wr = w_total - wl
        w1r = w1_total - w1l
        ok = (wl > 0) & (wr > 0)  # zero-weight sides give no usable split
        if not ok.any():
            continue
        boundaries, wl, w1l, wr, w1r = (a[ok] for a in (boundaries, wl, w1l, wr, w1r))
        pl = w1l / wl
        pr = w1r / wr
        child = wl * 2 * pl * (1 - pl) + wr * 2 * pr * (1 - pr)
        gains = parent - child / w_total
        k = int(np.argmax(gains))
        if gains[k] > best_gain:
            best_gain = float(gains[k])
            thr = 0.5 * (xs[boundaries[k]] + xs[boundaries[k] + 1])
            best = (int(f), float(thr), best_gain)
    return best


class DecisionTree:
    """CART with Gini impurity. Nodes are stored as parallel arrays so the
    model serializes naturally."""

    def __init__(self, max_depth=8, min_samples_split=2, n_feature_subsample=None):
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.n_feature_subsample = n_feature_subsample
        self.nodes: list[dict] = []
        self.importances_: np.ndarray | None = None

    def fit(self, X, y, sample_weight=None, rng=None):
        X, y = _check_xy(X, y)
        w = np.ones(len(y)) if sample_weight is None else np.asarray(sample_weight, float)
        self.nodes = []
        self._imp = np.zeros(X.shape[1])
        self._grow(X, y, w, np.nonzero(w > 0)[0], depth=0, rng=rng)
        total = self._imp.sum()
        self.importances_ = self._imp / total if total > 0 else self._imp
        return self

    def _grow(self, X, y, w, rows, depth, rng) -> int:
        node_id = len(self.nodes)
        self.nodes.append({})
        wr = w[rows]
        w_total = wr.sum()
        prob = float((wr * y[rows]).sum() / w_total)
        leaf = {"leaf": True, "prob": prob}
        if (
            depth >= self.max_depth
            or rows.size < self.min_samples_split
            or prob in (0.0, 1.0)
        ):
            self.nodes[node_id] = leaf
            return node_id
        d = X.shape[1]
        if self.n_feature_subsample and self.n_feature_subsample < d:
            feats = np.sort(rng.choice(d, size=self.n_feature_subsample, replace=False))
        else:
            feats = np.arange(d)
        split = _best_split(X[rows], y[rows], wr, feats)
        if split is None:
            self.nodes[node_id] = leaf
            return node_id
        f, thr, gain = split
        self._imp[f] += gain * w_total
        left_rows = rows[X[rows, f] <= thr]
        right_rows = rows[X[rows, f] > thr]
        left = self._grow(X, y, w, left_rows, depth + 1, rng)
        right = self._grow(X, y, w, right_rows, depth + 1, rng)
        self.nodes[node_id] = {"leaf": False, "feature": f, "threshold": thr,
                               "left": left, "right": right}
        return node_id

    def predict_proba(self, X):
        X = np.asarray(X, dtype=np.float64)
        out = np.empty(X.shape[0])
        for i, row in enumerate(X):
            node = self.nodes[0]
            while not node["leaf"]:
                node = self.nodes[node["left"] if row[node["feature"]] <= node["threshold"] else node["right"]]
            out[i] = node["prob"]
        return out

    def to_dict(self):
        return {"kind": "DecisionTree", "max_depth": self.max_depth, "nodes": self.nodes}

    @classmethod
    def from_dict(cls, d):
        tree = cls(max_depth=d["max_depth"])
        tree.nodes = d["nodes"]
        return tree


# ---------------------------------------------------------------------------
# random forest
# ---------------------------------------------------------------------------


class RandomForest:
    def __init__(self, n_trees=200, max_depth=8, rng=None):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.rng = rng or np.random.default_rng(0)
        self.trees: list[DecisionTree] = []
        self.importances_: np.ndarray | None = None

    def fit(self, X, y):
        X, y = _check_xy(X, y)
        n, d = X.shape
        n_sub = max(1, int(round(np.sqrt(d))))
        self.trees = []
        imp = np.zeros(d)
        for _ in range(self.n_trees):
            idx = self.rng.integers(0, n, size=n)
            weights = np.bincount(idx, minlength=n).astype(np.float64)
            tree = DecisionTree(max_depth=self.max_depth, n_feature_subsample=n_sub)
            tree.fit(X, y, sample_weight=weights, rng=self.rng)
            imp += tree.importances_
            self.trees.append(tree)
        total = imp.sum()
        self.importances_ = imp / total if total > 0 else imp
        return self

    def predict_proba(self, X):
        probs = np.zeros(np.asarray(X).shape[0])
        for tree in self.trees:
            probs += tree.predict_proba(X)
        return probs / len(self.trees)

    def to_dict(self):
        return {
            "kind": "RandomForest",
            "max_depth": self.max_depth,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d):
        rf = cls(n_trees=len(d["trees"]), max_depth=d["max_depth"])
        rf.trees = [DecisionTree.from_dict(t) for t in d["trees"]]
        return rf


# ---------------------------------------------------------------------------
# k-NN
# ---------------------------------------------------------------------------


class KNearestNeighbors:
    def __init__(self, k=5):
        self.k = k
        self.X_: np.ndarray | None = None
        self.y_: np.ndarray | None = None

    def fit(self, X, y):
        X, y = _check_xy(X, y)
        self.X_ = X
        self.y_ = y.astype(np.float64)
        return self

    def predict_proba(self, X):
        X = np.asarray(X, dtype=np.float64)
        d2 = ((X[:, None, :] - self.X_[None, :, :]) ** 2).sum(axis=2)
        k = min(self.k, self.X_.shape[0])
        order = np.argsort(d2, axis=1, kind="stable")[:, :k]
        dists = np.sqrt(np.take_along_axis(d2, order, axis=1))
        weights = 1.0 / (dists + 1e-12)
        labels = self.y_[order]
        return (weights * labels).sum(axis=1) / weights.sum(axis=1)

    def to_dict(self):
        return {"kind": "KNN", "k": self.k, "X": self.X_.tolist(), "y": self.y_.tolist()}

    @classmethod
    def from_dict(cls, d):
        knn = cls(k=d["k"])
        knn.X_ = np.asarray(d["X"], dtype=np.float64)
        knn.y_ = np.asarray(d["y"], dtype=np.float64)
        return knn


# ---------------------------------------------------------------------------
# logistic regression
# ---------------------------------------------------------------------------


class LogisticRegression:
    """L2-penalized logistic regression fit by IRLS (deterministic).

    The intercept is not penalized.
    """

    def __init__(self, l2=1e-3, max_iter=100, tol=1e-10):
        self.l2 = l2
        self.max_iter = max_iter
        self.tol = tol
        self.coef_: np.ndarray | None = None
        self.intercept_: float = 0.0

    def fit(self, X, y):
        X, y = _check_xy(X, y)
        n, d = X.shape
        beta = np.zeros(d + 1)
        Xb = np.hstack([np.ones((n, 1)), X])
        reg = self.l2 * np.eye(d + 1)
        reg[0, 0] = 0.0
        for _ in range(self.max_iter):
            eta = Xb @ beta
            p = 1.0 / (1.0 + np.exp(-np.clip(eta, -35, 35)))
            wdiag = np.maximum(p * (1.0 - p), 1e-10)
            grad = Xb.T @ (y - p) - reg @ beta
            hess = (Xb * wdiag[:, None]).T @ Xb + reg
            try:
                step = np.linalg.solve(hess, grad)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(hess, grad, rcond=None)[0]
            beta = beta + step
            if np.max(np.abs(step)) < self.tol:
                break
        self.intercept_ = float(beta[0])
        self.coef_ = beta[1:]
        return self

    def predict_proba(self, X):
        eta = np.asarray(X, dtype=np.float64) @ self.coef_ + self.intercept_
        return 1.0 / (1.0 + np.exp(-np.clip(eta, -35, 35)))

    def to_dict(self):
        return {"kind": "LogisticRegression", "coef": self.coef_.tolist(),
                "intercept": self.intercept_}

    @classmethod
    def from_dict(cls, d):
        lr = cls()
        lr.coef_ = np.asarray(d["coef"], dtype=np.float64)
        lr.intercept_ = float(d["intercept"])
        return lr


# ---------------------------------------------------------------------------
# AdaBoost (SAMME, depth-1 stumps)
# ---------------------------------------------------------------------------


class AdaBoost:
    def __init__(self, n_stumps=100, learning_rate=1.0):
        self.n_stumps = n_stumps
        self.learning_rate = learning_rate
        self.stumps: list[dict] = []

    def fit(self, X, y):
        X, y = _check_xy(X, y)
        n, d = X.shape
        w = np.full(n, 1.0 / n)
        self.stumps = []
        for _ in range(self.n_stumps):
            split = _best_split(X, y, w, np.arange(d))
            if split is None:
                break
            f, thr, _ = split
            left = X[:, f] <= thr
            # orient the stump so the positive side is the purer one
            p_left = (w * y)[left].sum() / max(w[left].sum(), 1e-300)
            p_right = (w * y)[~left].sum() / max(w[~left].sum(), 1e-300)
            positive_side = 0 if p_left >= p_right else 1
            pred = np.where(left, positive_side == 0, positive_side == 1).astype(int)
            err = float(w[pred != y].sum())
            err = min(max(err, 1e-10), 1.0 - 1e-10)
            if err >= 0.5:
                break
            alpha = self.learning_rate * np.log((1.0 - err) / err)
            self.stumps.append(
                {"feature": f, "threshold": thr, "positive_side": positive_side,
                 "alpha": float(alpha)}
            )
            w = w * np.exp(alpha * (pred != y))
            w /= w.sum()
        if not self.stumps:
            # degenerate data: fall back to the prior
            self.stumps.append({"feature": 0, "threshold": -np.inf,
                                "positive_side": 1, "alpha": 0.0})
        return self

    def predict_proba(self, X):
        """Weighted vote fraction for the positive class."""
        X = np.asarray(X, dtype=np.float64)
        total = sum(s["alpha"] for s in self.stumps)
        if total <= 0:
            return np.full(X.shape[0], 0.5)
        votes = np.zeros(X.shape[0])
        for s in self.stumps:
            left = X[:, s["feature"]] <= s["threshold"]
            pred = np.where(left, s["positive_side"] == 0, s["positive_side"] == 1)
            votes += s["alpha"] * pred
        return votes / total

    def to_dict(self):
        return {"kind": "AdaBoost", "stumps": self.stumps}

    @classmethod
    def from_dict(cls, d):
        ada = cls(n_stumps=len(d["stumps"]))
        ada.stumps = d["stumps"]
        return ada


# ---------------------------------------------------------------------------
# factory
# ---------------------------------------------------------------------------

DEFAULT_HYPERPARAMS = {
    "AdaBoost": {"n_stumps": 100, "learning_rate": 1.0},
    "DecisionTree": {"max_depth": 8},
    "KNN": {"k": 5},
    "LogisticRegression": {"l2": 1e-3},
    "RandomForest": {"n_trees": 200, "max_depth": 8},
}


def make_classifier(kind: str, hyperparams: dict | None = None,
                    rng: np.random.Generator | None = None):
    if kind not in CLASSIFIER_KINDS:
        raise ConfigError(f"unknown classifier kind {kind!r}")
    hp = dict(DEFAULT_HYPERPARAMS[kind])
    hp.update(hyperparams or {})
    if kind == "AdaBoost":
        return AdaBoost(**hp)
    if kind == "DecisionTree":
        return DecisionTree(**hp)
    if kind == "KNN":
        return KNearestNeighbors(**hp)
    if kind == "LogisticRegression":
        return LogisticRegression(**hp)
    return RandomForest(rng=rng, **hp)


def classifier_from_dict(d: dict):
    kind = d["kind"]
    cls = {"AdaBoost": AdaBoost, "DecisionTree": DecisionTree, "KNN": KNearestNeighbors,
           "LogisticRegression": LogisticRegression, "RandomForest": RandomForest}[kind]
    return cls.from_dict(d)
