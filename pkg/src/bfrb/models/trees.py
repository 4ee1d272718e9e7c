"""Gini decision trees and bootstrap-bagged random forests.

Split search scans features in ascending index order and candidate thresholds
(midpoints of consecutive distinct sorted values) in ascending order, keeping
a split only on strict improvement. That makes the tie-break "lowest feature
index, then smallest threshold" and training fully deterministic.

Forest randomness comes from one generator per training run, consumed in a
fixed order: for each tree, the bootstrap draw first, then the per-node
feature subsets in depth-first order (node, left subtree, right subtree).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .base import (
    FeatureImportanceReport,
    TrainedModel,
    validate_training_input,
)

RF_DEFAULTS = {
    "n_trees": 100,
    "max_depth": 8,
    "min_samples_split": 2,
    "max_features": "sqrt",  # "sqrt", "all", or an int
    "bootstrap": True,
}


@dataclass
class TreeNode:
    feature: int = -1          # -1 marks a leaf
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    value: float = 0.0         # positive-class fraction at a leaf


def _weighted_gini(pos_l, n_l, pos_r, n_r):
    """n_l*gini(left) + n_r*gini(right); lower is better. Vector-friendly."""
    neg_l = n_l - pos_l
    neg_r = n_r - pos_r
    return (n_l - (pos_l * pos_l + neg_l * neg_l) / n_l) + (
        n_r - (pos_r * pos_r + neg_r * neg_r) / n_r
    )


def best_split(X: np.ndarray, y: np.ndarray, feature_indices) -> tuple[int, float] | None:
    """Best (feature, threshold) by Gini over the given features, or None.

    Samples with value <= threshold go left. Ties resolve to the lowest
    feature index, then the smallest threshold.
    """
    n = X.shape[0]
    best_score = math.inf
    best = None
    for j in feature_indices:
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        ys = y[order]
        pos_cum = np.cumsum(ys)
        # boundaries between distinct consecutive values
        distinct = np.nonzero(xs[1:] > xs[:-1])[0]
        if distinct.size == 0:
            continue
        n_l = (distinct + 1).astype(np.float64)
        pos_l = pos_cum[distinct].astype(np.float64)
        n_r = n - n_l
        pos_r = pos_cum[-1] - pos_l
        scores = _weighted_gini(pos_l, n_l, pos_r, n_r)
        k = int(np.argmin(scores))  # thresholds ascend, so first min = smallest
        if scores[k] < best_score:
            best_score = float(scores[k])
            best = (int(j), float((xs[distinct[k]] + xs[distinct[k] + 1]) / 2.0))
    return best


class DecisionTree:
    """Single Gini classification tree with optional per-node feature sampling."""

    def __init__(self, max_depth=8, min_samples_split=2, max_features=None):
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.max_features = max_features  # None = all features
        self.root: TreeNode | None = None
        self.importances_: np.ndarray | None = None
        self._n_root = 0

    def fit(self, X: np.ndarray, y: np.ndarray, rng: np.random.Generator | None = None):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        self._n_root = X.shape[0]
        self.importances_ = np.zeros(X.shape[1])
        self.root = self._grow(X, y, depth=0, rng=rng)
        return self

    def _feature_subset(self, p: int, rng: np.random.Generator | None):
        if self.max_features is None or self.max_features >= p:
            return range(p)
        if rng is None:
            raise ValueError("feature subsampling requires an rng")
        # sorted so the scan order (and tie-break) stays index-ascending
        return np.sort(rng.choice(p, size=self.max_features, replace=False))

    def _grow(self, X, y, depth, rng) -> TreeNode:
        n = X.shape[0]
        pos = int(y.sum())
        node = TreeNode(value=pos / n)
        if depth >= self.max_depth or n < self.min_samples_split or pos in (0, n):
            return node
        split = best_split(X, y, self._feature_subset(X.shape[1], rng))
        if split is None:
            return node
        j, thr = split
        mask = X[:, j] <= thr
        n_l = int(mask.sum())
        # impurity decrease weighted by the node's share of the training set
        imp = self._gini(y)
        imp_l = self._gini(y[mask])
        imp_r = self._gini(y[~mask])
        self.importances_[j] += (
            n * imp - n_l * imp_l - (n - n_l) * imp_r
        ) / self._n_root
        node.feature = j
        node.threshold = thr
        node.left = self._grow(X[mask], y[mask], depth + 1, rng)
        node.right = self._grow(X[~mask], y[~mask], depth + 1, rng)
        return node

    @staticmethod
    def _gini(y) -> float:
        n = y.shape[0]
        if n == 0:
            return 0.0
        p = float(y.sum()) / n
        return 1.0 - p * p - (1.0 - p) * (1.0 - p)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        out = np.empty(X.shape[0])
        for i, row in enumerate(X):
            node = self.root
            while node.feature >= 0:
                node = node.left if row[node.feature] <= node.threshold else node.right
            out[i] = node.value
        return out

    def predict(self, X: np.ndarray) -> np.ndarray:
        return (self.predict_proba(X) >= 0.5).astype(np.int64)

    def to_payload(self) -> dict:
        def pack(node: TreeNode):
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
    def from_payload(cls, payload, **kwargs) -> "DecisionTree":
        tree = cls(**kwargs)

        def unpack(obj) -> TreeNode:
            if "value" in obj:
                return TreeNode(value=obj["value"])
            return TreeNode(
                feature=obj["feature"],
                threshold=obj["threshold"],
                left=unpack(obj["left"]),
                right=unpack(obj["right"]),
            )

        tree.root = unpack(payload)
        return tree


class RandomForestModel(TrainedModel):
    kind = "random_forest"

    def __init__(self, feature_names, trees, importances):
        super().__init__(feature_names)
        self.trees = trees
        self._importances = importances

    def predict_scores(self, X: np.ndarray) -> np.ndarray:
        """Fraction of trees voting positive (leaf fraction >= 0.5)."""
        X = self._check_schema(X)
        votes = np.zeros(X.shape[0])
        for tree in self.trees:
            votes += tree.predict_proba(X) >= 0.5
        return votes / len(self.trees)

    def feature_importances(self) -> FeatureImportanceReport:
        return FeatureImportanceReport(dict(zip(self.feature_names, self._importances)))

    def to_payload(self) -> dict:
        return {
            "trees": [t.to_payload() for t in self.trees],
            "importances": list(self._importances),
        }

    @classmethod
    def from_payload(cls, feature_names, payload) -> "RandomForestModel":
        trees = [DecisionTree.from_payload(t) for t in payload["trees"]]
        return cls(feature_names, trees, payload["importances"])


def train_random_forest(X, y, feature_names, params=None, seed: int = 0) -> RandomForestModel:
    X, y = validate_training_input(X, y)
    p = dict(RF_DEFAULTS)
    if params:
        unknown = set(params) - set(RF_DEFAULTS)
        if unknown:
            raise ValueError(f"unknown random forest params: {sorted(unknown)}")
        p.update(params)
    n, n_features = X.shape
    if p["max_features"] == "sqrt":
        mtry = max(1, int(math.isqrt(n_features)))
    elif p["max_features"] in ("all", None):
        mtry = None
    else:
        mtry = int(p["max_features"])

    rng = np.random.default_rng(seed)
    trees = []
    raw_importance = np.zeros(n_features)
    for _ in range(int(p["n_trees"])):
        if p["bootstrap"]:
            idx = rng.integers(0, n, size=n)
            Xb, yb = X[idx], y[idx]
        else:
            Xb, yb = X, y
        tree = DecisionTree(
            max_depth=int(p["max_depth"]),
            min_samples_split=int(p["min_samples_split"]),
            max_features=mtry,
        )
        tree.fit(Xb, yb, rng=rng if mtry is not None else None)
        raw_importance += tree.importances_
        trees.append(tree)
    total = raw_importance.sum()
    importances = (raw_importance / total if total > 0 else raw_importance).tolist()
    return RandomForestModel(feature_names, trees, importances)
