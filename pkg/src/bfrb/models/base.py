"""Shared model plumbing: configs, schema fingerprints, importances, JSON I/O."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import NonFiniteFeatureError, SchemaMismatchError
from ..features import modality_of

MODEL_KINDS = ("logistic", "random_forest", "gradient_boost")

SERIALIZATION_VERSION = 1


def schema_fingerprint(feature_names) -> str:
    joined = "\x1f".join(feature_names)
    return hashlib.sha256(joined.encode()).hexdigest()[:16]


def validate_training_input(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("X must be a non-empty 2-D matrix")
    if y.shape != (X.shape[0],):
        raise ValueError("y length must match X rows")
    if not np.all(np.isfinite(X)):
        raise NonFiniteFeatureError("X contains NaN or inf")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("y must be binary 0/1")
    return X, y


@dataclass(frozen=True)
class ModelConfig:
    kind: str
    seed: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}; choose from {MODEL_KINDS}")


@dataclass
class FeatureImportanceReport:
    """Per-feature importances plus sums per sensor family."""

    importances: dict[str, float]

    @property
    def by_modality(self) -> dict[str, float]:
        out: dict[str, float] = {}
        for name, value in self.importances.items():
            out[modality_of(name)] = out.get(modality_of(name), 0.0) + value
        return out


class TrainedModel:
    """Common interface for the three classifiers."""

    kind: str

    def __init__(self, feature_names):
        self.feature_names = list(feature_names)
        self.fingerprint = schema_fingerprint(feature_names)

    def _check_schema(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.shape[1] != len(self.feature_names):
            raise SchemaMismatchError(
                f"expected {len(self.feature_names)} features, got {X.shape[1]}"
            )
        return X

    def predict_scores(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def feature_importances(self) -> FeatureImportanceReport:
        raise NotImplementedError

    def to_payload(self) -> dict:
        raise NotImplementedError

    def save(self, path: str | Path) -> None:
        payload = {
            "version": SERIALIZATION_VERSION,
            "kind": self.kind,
            "feature_names": self.feature_names,
            "fingerprint": self.fingerprint,
            "model": self.to_payload(),
        }
        Path(path).write_text(json.dumps(payload, sort_keys=True))


def sigmoid(z: np.ndarray) -> np.ndarray:
    # stable piecewise form; avoids overflow for large |z|
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out
