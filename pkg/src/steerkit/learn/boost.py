"""Adaptive boosting over depth-limited weighted decision trees.

Each stage fits a tree to the current sample weights, computes its weighted
error ``eps`` and stage weight ``1/2 ln((1 - eps)/eps)``, then reweights and
renormalises. A stage with ``eps >= 0.5`` is rejected and boosting stops.
Trees see raw (unscaled) features.
"""
import logging

import numpy as np

from . import common
from ..errors import AllStagesRejected

log = logging.getLogger(__name__)

EPS_FLOOR = 1e-10


class Tree:
    """Axis-aligned binary tree stored in flat arrays; leaves have ``feature == -1``."""

    def __init__(self, feature, threshold, left, right, value):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=np.int64)

    def predict(self, X):
        node = np.zeros(len(X), dtype=np.int64)
        for _ in range(len(self.feature)):
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                break
            go_left = X[np.arange(len(X)), np.where(inner, f, 0)] <= self.threshold[node]
            node = np.where(inner, np.where(go_left, self.left[node], self.right[node]), node)
        return self.value[node]

    def to_json(self):
        return {k: getattr(self, k).tolist() for k in ("feature", "threshold", "left", "right", "value")}

    @classmethod
    def from_json(cls, d):
        return cls(d["feature"], d["threshold"], d["left"], d["right"], d["value"])


def _best_split(X, y, w, idx):
    """Weighted-Gini split of rows ``idx``; returns ``(feature, threshold)`` or None."""
    wi, yi = w[idx], y[idx]
    total = wi.sum()
    pos_total = wi[yi > 0].sum()
    parent = total - (pos_total ** 2 + (total - pos_total) ** 2) / total
    best = (parent - 1e-15 * total, None)
    for f in range(X.shape[1]):
        xs = X[idx, f]
        order = np.argsort(xs, kind="stable")
        xs, ws, ys = xs[order], wi[order], yi[order]
        cw = np.cumsum(ws)[:-1]
        cp = np.cumsum(np.where(ys > 0, ws, 0.0))[:-1]
        valid = xs[1:] > xs[:-1]
        if not valid.any():
            continue
        rw = total - cw
        rp = pos_total - cp
        with np.errstate(divide="ignore", invalid="ignore"):
            # weighted Gini impurity (unnormalised) of the two children
            imp = (cw - (cp ** 2 + (cw - cp) ** 2) / cw) + (rw - (rp ** 2 + (rw - rp) ** 2) / rw)
        imp = np.where(valid & (cw > 0) & (rw > 0), imp, np.inf)
        k = int(np.argmin(imp))
        if imp[k] < best[0]:
            best = (imp[k], (f, 0.5 * (xs[k] + xs[k + 1])))
    return best[1]


def fit_tree(X, y, w, max_depth: int) -> Tree:
    feature, threshold, left, right, value = [], [], [], [], []

    def leaf_value(idx):
        return 1 if w[idx][y[idx] > 0].sum() >= w[idx][y[idx] < 0].sum() else -1

    def grow(idx, depth):
        node = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(leaf_value(idx))
        if depth >= max_depth or len(np.unique(y[idx])) < 2:
            return node
        split = _best_split(X, y, w, idx)
        if split is None:
            return node
        f, thr = split
        mask = X[idx, f] <= thr
        feature[node], threshold[node] = f, thr
        left[node] = grow(idx[mask], depth + 1)
        right[node] = grow(idx[~mask], depth + 1)
        return node

    grow(np.arange(len(y)), 0)
    return Tree(feature, threshold, left, right, value)


class BoostModel(common.Model):
    family = "boost"

    def __init__(self, feature_kind, scaler, trees, weights):
        super().__init__(feature_kind, scaler)
        self.trees = list(trees)
        self.weights = np.asarray(weights, dtype=np.float64)
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("stage weights must be finite")

    @property
    def stages(self) -> int:
        return len(self.trees)

    def staged_decision(self, X):
        """Ensemble scores after each stage, shape ``(stages, n)``."""
        X = np.asarray(X, dtype=np.float64)
        votes = np.array([a * t.predict(X) for t, a in zip(self.trees, self.weights)])
        return np.cumsum(votes, axis=0)

    def decision(self, X):
        X = np.asarray(X, dtype=np.float64)
        out = np.zeros(len(X))
        for t, a in zip(self.trees, self.weights):
            out += a * t.predict(X)
        return out

    def params_json(self):
        return {"weights": self.weights.tolist(), "trees": [t.to_json() for t in self.trees]}

    @classmethod
    def from_json(cls, d):
        p = d["params"]
        return cls(d["feature_kind"], common.Standardizer.from_json(d["standardization"]),
                   [Tree.from_json(t) for t in p["trees"]], p["weights"])


def fit_boost(X, y, kind: str, stages: int = 200, max_depth: int = 3):
    """Returns ``(BoostModel, trace)``; ``trace`` records per-stage eps and training error."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n = len(y)
    w = np.full(n, 1.0 / n)
    trees, alphas, trace = [], [], {"eps": [], "train_error": [], "stopped": None}
    score = np.zeros(n)
    for s in range(stages):
        tree = fit_tree(X, y, w, max_depth)
        h = tree.predict(X)
        eps = float(w[h != y].sum())
        if eps >= 0.5:
            trace["stopped"] = f"stage {s}: eps={eps:.4f} >= 0.5"
            if s == 0:
                raise AllStagesRejected(f"first weak learner has weighted error {eps:.4f} >= 0.5")
            break
        e = max(eps, EPS_FLOOR)
        a = 0.5 * np.log((1.0 - e) / e)
        trees.append(tree)
        alphas.append(a)
        score += a * h
        trace["eps"].append(eps)
        trace["train_error"].append(float(np.mean(np.where(score >= 0, 1, -1) != y)))
        if eps <= EPS_FLOOR:
            trace["stopped"] = f"stage {s}: perfect weak learner"
            break
        w = w * np.exp(-a * y * h)
        w /= w.sum()
    model = BoostModel(kind, common.Standardizer.identity(X.shape[1]), trees, alphas)
    return model, trace


def train_boost(train, stages: int = 200, max_depth: int = 3, folds: int = 5, seed: int = 0):
    """Returns ``(BoostModel, EvalReport)``."""
    y = np.asarray(train.y, dtype=np.int64)
    common.check_two_classes(y)
    accs = []
    for tr, va in common.stratified_folds(y, folds, seed):
        m, _ = fit_boost(train.X[tr], y[tr], train.kind, stages, max_depth)
        accs.append(common.accuracy(y[va], m.predict_rows(train.X[va])))
    model, trace = fit_boost(train.X, y, train.kind, stages, max_depth)
    report = common.EvalReport(
        family="boost", feature_kind=train.kind, cv_accuracy=float(np.mean(accs)),
        train_accuracy=common.accuracy(y, model.predict_rows(train.X)),
        hyperparameters={"stages": stages, "max_depth": max_depth, "folds": folds, "seed": seed,
                         "standardized": False},
        notes={"stages_accepted": model.stages, "eps": trace["eps"], "train_error": trace["train_error"],
               "stopped": trace["stopped"], "fold_accuracies": accs},
    )
    return model, report
