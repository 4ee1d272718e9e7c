"""Gradient-boosted depth-limited regression trees on log-loss gradients.

Each round fits a squared-error regression tree to the current residuals
(y - p) and replaces leaf values with a Newton step, the usual second-order
update for binomial deviance. Training is deterministic: no subsampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import SingleClassInputError
from .base import (
    FeatureImportanceReport,
    TrainedModel,
    sigmoid,
    validate_training_input,
)

GBT_DEFAULTS = {
    "n_trees": 100,
    "max_depth": 3,
    "learning_rate": 0.1,
    "min_samples_split": 2,
}

_HESSIAN_FLOOR = 1e-12


@dataclass
class RegressionNode:
    feature: int = -1
    threshold: float = 0.0
    left: "RegressionNode | None" = None
    right: "RegressionNode | None" = None
    value: float = 0.0


def _best_regression_split(X, residual, n_min_split):
    """Split minimizing residual SSE; same tie-break as the Gini trees."""
    n = X.shape[0]
    best_score = math.inf
    best = None
    for j in range(X.shape[1]):
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        rs = residual[order]
        cum = np.cumsum(rs)
        cum2 = np.cumsum(rs * rs)
        distinct = np.nonzero(xs[1:] > xs[:-1])[0]
        if distinct.size == 0:
            continue
        n_l = (distinct + 1).astype(np.float64)
        n_r = n - n_l
        sum_l = cum[distinct]
        sum_r = cum[-1] - sum_l
        total_sq = cum2[-1]
        scores = total_sq - sum_l * sum_l / n_l - sum_r * sum_r / n_r
        k = int(np.argmin(scores))
        if scores[k] < best_score:
            best_score = float(scores[k])
            best = (int(j), float((xs[distinct[k]] + xs[distinct[k] + 1]) / 2.0))
    return best


class _GradientTree:
    def __init__(self, max_depth, min_samples_split):
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.root: RegressionNode | None = None
        self.importances_: np.ndarray | None = None

    def fit(self, X, residual, hessian):
        self.importances_ = np.zeros(X.shape[1])
        self._n_root = X.shape[0]
        self.root = self._grow(X, residual, hessian, depth=0)
        return self

    def _grow(self, X, residual, hessian, depth):
        node = RegressionNode(
            value=float(residual.sum() / max(hessian.sum(), _HESSIAN_FLOOR))
        )
        n = X.shape[0]
        if depth >= self.max_depth or n < self.min_samples_split:
            return node
        split = _best_regression_split(X, residual, self.min_samples_split)
        if split is None:
            return node
        j, thr = split
        mask = X[:, j] <= thr
        # SSE decrease as the importance contribution
        sse = float(np.sum(residual**2) - residual.sum() ** 2 / n)
        rl, rr = residual[mask], residual[~mask]
        sse_children = float(
            np.sum(rl**2) - rl.sum() ** 2 / rl.size
            + np.sum(rr**2) - rr.sum() ** 2 / rr.size
        )
        self.importances_[j] += max(sse - sse_children, 0.0) / self._n_root
        node.feature = j
        node.threshold = thr
        node.left = self._grow(X[mask], rl, hessian[mask], depth + 1)
        node.right = self._grow(X[~mask], rr, hessian[~mask], depth + 1)
        return node

    def predict(self, X):
        out = np.empty(X.shape[0])
        for i, row in enumerate(X):
            node = self.root
            while node.feature >= 0:
                node = node.left if row[node.feature] <= node.threshold else node.right
            out[i] = node.value
        return out

    def to_payload(self):
        def pack(node):
            if node.feature < 0:
                return {"value": node.value}
            return {
                "feature": node.feature,
                "threshold": node.threshold,
                "left": pack(node.left),
                "right": pack(node.right),
            }
        return pack(self.root)

    @classmethod
    def from_payload(cls, payload):
        tree = cls(max_depth=0, min_samples_split=2)

        def unpack(obj):
            if "value" in obj:
                return RegressionNode(value=obj["value"])
            return RegressionNode(
                feature=obj["feature"],
                threshold=obj["threshold"],
                left=unpack(obj["left"]),
                right=unpack(obj["right"]),
            )

        tree.root = unpack(payload)
        return tree


class GradientBoostModel(TrainedModel):
    kind = "gradient_boost"

    def __init__(self, feature_names, base_score, learning_rate, trees, importances):
        super().__init__(feature_names)
        self.base_score = float(base_score)  # log-odds of the base rate
        self.learning_rate = float(learning_rate)
        self.trees = trees
        self._importances = importances

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        X = self._check_schema(X)
        z = np.full(X.shape[0], self.base_score)
        for tree in self.trees:
            z += self.learning_rate * tree.predict(X)
        return z

    def predict_scores(self, X: np.ndarray) -> np.ndarray:
        return sigmoid(self.decision_function(X))

    def feature_importances(self) -> FeatureImportanceReport:
        return FeatureImportanceReport(dict(zip(self.feature_names, self._importances)))

    def to_payload(self) -> dict:
        return {
            "base_score": self.base_score,
            "learning_rate": self.learning_rate,
            "trees": [t.to_payload() for t in self.trees],
            "importances": list(self._importances),
        }

    @classmethod
    def from_payload(cls, feature_names, payload) -> "GradientBoostModel":
        trees = [_GradientTree.from_payload(t) for t in payload["trees"]]
        return cls(
            feature_names,
            payload["base_score"],
            payload["learning_rate"],
            trees,
            payload["importances"],
        )


def train_gradient_boost(X, y, feature_names, params=None, seed: int = 0) -> GradientBoostModel:
    """Deterministic boosting; seed is accepted for interface parity."""
    X, y = validate_training_input(X, y)
    if len(np.unique(y)) < 2:
        raise SingleClassInputError("gradient boosting needs both classes")
    p = dict(GBT_DEFAULTS)
    if params:
        unknown = set(params) - set(GBT_DEFAULTS)
        if unknown:
            raise ValueError(f"unknown gradient boost params: {sorted(unknown)}")
        p.update(params)

    yf = y.astype(np.float64)
    base_rate = float(yf.mean())
    base_score = math.log(base_rate / (1.0 - base_rate))
    z = np.full(X.shape[0], base_score)
    trees = []
    raw_importance = np.zeros(X.shape[1])
    for _ in range(int(p["n_trees"])):
        prob = sigmoid(z)
        residual = yf - prob
        hessian = prob * (1.0 - prob)
        tree = _GradientTree(int(p["max_depth"]), int(p["min_samples_split"]))
        tree.fit(X, residual, hessian)
        raw_importance += tree.importances_
        z += p["learning_rate"] * tree.predict(X)
        trees.append(tree)
    total = raw_importance.sum()
    importances = (raw_importance / total if total > 0 else raw_importance).tolist()
    return GradientBoostModel(
        feature_names, base_score, p["learning_rate"], trees, importances
    )
