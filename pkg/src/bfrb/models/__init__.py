"""Native classifiers: logistic regression, random forest, gradient boosting."""

from __future__ import annotations

import json
from pathlib import Path

from .base import (
    FeatureImportanceReport,
    ModelConfig,
    TrainedModel,
    schema_fingerprint,
    sigmoid,
)
from .boosting import GradientBoostModel, train_gradient_boost
from .logistic import LogisticModel, logloss_and_grad, train_logistic
from .trees import DecisionTree, RandomForestModel, best_split, train_random_forest

_TRAINERS = {
    "logistic": train_logistic,
    "random_forest": train_random_forest,
    "gradient_boost": train_gradient_boost,
}

_MODEL_CLASSES = {
    "logistic": LogisticModel,
    "random_forest": RandomForestModel,
    "gradient_boost": GradientBoostModel,
}


def train(config: ModelConfig, X, y, feature_names) -> TrainedModel:
    """Train the classifier described by ``config`` on a design matrix."""
    return _TRAINERS[config.kind](X, y, feature_names, config.params, config.seed)


def load_model(path: str | Path) -> TrainedModel:
    payload = json.loads(Path(path).read_text())
    cls = _MODEL_CLASSES[payload["kind"]]
    model = cls.from_payload(payload["feature_names"], payload["model"])
    if model.fingerprint != payload["fingerprint"]:
        raise ValueError("model file fingerprint does not match its feature names")
    return model


__all__ = [
    "DecisionTree",
    "FeatureImportanceReport",
    "GradientBoostModel",
    "LogisticModel",
    "ModelConfig",
    "RandomForestModel",
    "TrainedModel",
    "best_split",
    "load_model",
    "logloss_and_grad",
    "schema_fingerprint",
    "sigmoid",
    "train",
    "train_gradient_boost",
    "train_logistic",
    "train_random_forest",
]
