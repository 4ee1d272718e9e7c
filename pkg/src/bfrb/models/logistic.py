"""L2-regularized logistic regression trained by full-batch gradient descent."""

from __future__ import annotations

import numpy as np

from ..errors import SingleClassInputError
from .base import (
    FeatureImportanceReport,
    TrainedModel,
    sigmoid,
    validate_training_input,
)

DEFAULTS = {
    "learning_rate": 0.1,
    "l2": 1e-4,
    "max_iter": 5000,
    "tol": 1e-6,  # stop when max |gradient| drops below this
}


def logloss_and_grad(
    weights: np.ndarray,
    intercept: float,
    X: np.ndarray,
    y: np.ndarray,
    l2: float,
) -> tuple[float, np.ndarray, float]:
    """Mean log-loss with L2 penalty on the weights (intercept unpenalized).

    Returns (loss, grad_weights, grad_intercept); the analytic gradients are
    checked against finite differences in the test suite.
    """
    n = X.shape[0]
    z = X @ weights + intercept
    p = sigmoid(z)
    eps = 1e-12
    loss = -np.mean(y * np.log(p + eps) + (1 - y) * np.log(1 - p + eps))
    loss += 0.5 * l2 * float(weights @ weights)
    residual = p - y
    grad_w = X.T @ residual / n + l2 * weights
    grad_b = float(np.mean(residual))
    return float(loss), grad_w, grad_b


class LogisticModel(TrainedModel):
    kind = "logistic"

    def __init__(self, feature_names, weights, intercept, n_iter):
        super().__init__(feature_names)
        self.weights = np.asarray(weights, dtype=np.float64)
        self.intercept = float(intercept)
        self.n_iter = int(n_iter)

    def predict_scores(self, X: np.ndarray) -> np.ndarray:
        X = self._check_schema(X)
        return sigmoid(X @ self.weights + self.intercept)

    def feature_importances(self) -> FeatureImportanceReport:
        return FeatureImportanceReport(
            {n: abs(float(w)) for n, w in zip(self.feature_names, self.weights)}
        )

    def to_payload(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "intercept": self.intercept,
            "n_iter": self.n_iter,
        }

    @classmethod
    def from_payload(cls, feature_names, payload) -> "LogisticModel":
        return cls(feature_names, payload["weights"], payload["intercept"], payload["n_iter"])


def train_logistic(X, y, feature_names, params=None, seed: int = 0) -> LogisticModel:
    """Deterministic full-batch gradient descent; seed is accepted but unused."""
    X, y = validate_training_input(X, y)
    if len(np.unique(y)) < 2:
        raise SingleClassInputError("logistic regression needs both classes")
    p = dict(DEFAULTS)
    if params:
        unknown = set(params) - set(DEFAULTS)
        if unknown:
            raise ValueError(f"unknown logistic params: {sorted(unknown)}")
        p.update(params)

    weights = np.zeros(X.shape[1])
    intercept = 0.0
    yf = y.astype(np.float64)
    n_iter = 0
    for n_iter in range(1, int(p["max_iter"]) + 1):
        _, grad_w, grad_b = logloss_and_grad(weights, intercept, X, yf, p["l2"])
        grad_inf = max(float(np.max(np.abs(grad_w))) if grad_w.size else 0.0, abs(grad_b))
        if grad_inf < p["tol"]:
            break
        weights -= p["learning_rate"] * grad_w
        intercept -= p["learning_rate"] * grad_b
    return LogisticModel(feature_names, weights, intercept, n_iter)
