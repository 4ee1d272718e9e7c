"""Cross-validation, metrics, ablations, and experiment orchestration."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .errors import (
    NoPositivesError,
    SingleClassLabelsError,
    TooFewParticipantsError,
    TooFewSamplesError,
)
from .features import (
    MODALITIES,
    FeatureMatrix,
    build_feature_matrix,
    hrv_validity_filter,
    modality_of,
)
from .ingest import Behavior, SessionBundle, Stage
from .models import ModelConfig, train
from .preprocess import compute_baseline_stats, normalize_session
from .windowing import LabelSet, WindowSpec, build_dataset

CLASSIFICATION_THRESHOLD = 0.5
STRATIFIED_TEST_FRACTION = 0.2
STRATIFIED_ITERATIONS = 10


@dataclass(frozen=True)
class Fold:
    name: str                  # participant id (LOUO) or iteration tag
    train_idx: np.ndarray
    test_idx: np.ndarray


@dataclass
class FoldPlan:
    strategy: str              # "louo" | "stratified"
    folds: list[Fold]
    seed: int


def plan_folds(matrix: FeatureMatrix, strategy: str, seed: int) -> FoldPlan:
    """Deterministic cross-validation plan over a feature matrix."""
    participants = sorted(set(matrix.participants))
    pids = np.asarray(matrix.participants)
    if strategy == "louo":
        if len(participants) < 2:
            raise TooFewParticipantsError("leave-one-user-out needs >= 2 participants")
        folds = []
        for pid in participants:
            test = np.nonzero(pids == pid)[0]
            train_idx = np.nonzero(pids != pid)[0]
            folds.append(Fold(pid, train_idx, test))
        return FoldPlan("louo", folds, seed)
    if strategy == "stratified":
        for pid in participants:
            if int((pids == pid).sum()) < 5:
                raise TooFewSamplesError(pid)
        folds = []
        rng = np.random.default_rng(seed)
        for it in range(STRATIFIED_ITERATIONS):
            test_parts = []
            for pid in participants:
                idx = np.nonzero(pids == pid)[0]
                n_test = math.ceil(STRATIFIED_TEST_FRACTION * idx.size)
                test_parts.append(rng.choice(idx, size=n_test, replace=False))
            test = np.sort(np.concatenate(test_parts))
            mask = np.ones(len(matrix), dtype=bool)
            mask[test] = False
            folds.append(Fold(f"iter{it}", np.nonzero(mask)[0], test))
        return FoldPlan("stratified", folds, seed)
    raise ValueError(f"unknown cv strategy {strategy!r}")


def auc(scores, labels) -> float:
    """Mann-Whitney AUC: P(score+ > score-) + 0.5 P(score+ = score-)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassLabelsError("AUC needs both classes")
    ranks = rankdata(scores)  # average ranks handle ties per the 0.5 rule
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def recall_f1_confusion(
    scores, labels, threshold: float = CLASSIFICATION_THRESHOLD
) -> tuple[float, float, dict[str, int]]:
    """(recall, F1, confusion counts) with positive prediction at score >= threshold."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if not np.any(labels == 1):
        raise NoPositivesError("recall is undefined without positive labels")
    pred = scores >= threshold
    tp = int(np.sum(pred & (labels == 1)))
    fp = int(np.sum(pred & (labels == 0)))
    fn = int(np.sum(~pred & (labels == 1)))
    tn = int(np.sum(~pred & (labels == 0)))
    recall = tp / (tp + fn)
    precision = tp / (tp + fp) if (tp + fp) else 0.0
    f1 = 0.0 if (precision + recall) == 0 else 2 * precision * recall / (precision + recall)
    return recall, f1, {"tp": tp, "fp": fp, "fn": fn, "tn": tn}


def roc_points(scores, labels) -> list[tuple[float, float, float]]:
    """(threshold, fpr, tpr) per distinct score, endpoints included."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassLabelsError("ROC needs both classes")
    points = [(math.inf, 0.0, 0.0)]
    for thr in sorted(set(scores.tolist()), reverse=True):
        pred = scores >= thr
        tpr = float(np.sum(pred & pos)) / n_pos
        fpr = float(np.sum(pred & ~pos)) / n_neg
        points.append((float(thr), fpr, tpr))
    if points[-1][1:] != (1.0, 1.0):
        points.append((-math.inf, 1.0, 1.0))
    return points


def roc_area(points) -> float:
    """Trapezoidal area under a roc_points list."""
    area = 0.0
    for (_, f0, t0), (_, f1, t1) in zip(points, points[1:]):
        area += (f1 - f0) * (t0 + t1) / 2.0
    return area


@dataclass
class FoldResult:
    name: str
    n_test: int
    defined: bool
    recall: float | None = None
    auc: float | None = None
    f1: float | None = None


@dataclass
class EvalReport:
    spec_tag: str
    label_set: str
    model_kind: str
    strategy: str
    modalities: list[str]
    seed: int
    folds: list[FoldResult]
    mean: dict[str, float | None]
    std: dict[str, float | None]
    confusion: dict[str, int]
    roc: list[tuple[float, float, float]]
    importances: dict[str, float]
    importances_by_modality: dict[str, float]
    n_vectors: int
    n_undefined_folds: int
    hrv_dropped: int = 0
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "window": self.spec_tag,
            "label_set": self.label_set,
            "model": self.model_kind,
            "strategy": self.strategy,
            "modalities": self.modalities,
            "seed": self.seed,
            "n_vectors": self.n_vectors,
            "n_undefined_folds": self.n_undefined_folds,
            "hrv_dropped": self.hrv_dropped,
            "folds": [
                {
                    "name": f.name,
                    "n_test": f.n_test,
                    "defined": f.defined,
                    "recall": f.recall,
                    "auc": f.auc,
                    "f1": f.f1,
                }
                for f in self.folds
            ],
            "mean": self.mean,
            "std": self.std,
            "confusion": self.confusion,
            "roc": [[t if math.isfinite(t) else str(t), f, p] for t, f, p in self.roc],
            "importances": self.importances,
            "importances_by_modality": self.importances_by_modality,
            "metadata": self.metadata,
        }


def _aggregate(folds: list[FoldResult]) -> tuple[dict, dict]:
    mean, std = {}, {}
    for metric in ("recall", "auc", "f1"):
        vals = [getattr(f, metric) for f in folds if f.defined and getattr(f, metric) is not None]
        if vals:
            mean[metric] = float(np.mean(vals))
            std[metric] = float(np.std(vals))
        else:
            mean[metric] = None
            std[metric] = None
    return mean, std


def prepare_feature_matrix(
    bundles: list[SessionBundle],
    spec: WindowSpec,
    labels: LabelSet,
    seed: int,
    clean_only: bool = False,
    balance: str = "session",
    rmssd_mode: str = "stats",
    hrv_threshold: float = 0.5,
) -> tuple[FeatureMatrix, int]:
    """Normalize, window, featurize and (for 5-min windows) validity-filter.

    Returns the matrix and the number of vectors dropped by the validity filter.
    """
    normalized = [normalize_session(b, compute_baseline_stats(b)) for b in bundles]
    dataset = build_dataset(normalized, spec, labels, seed, clean_only, balance)
    matrix, _ = build_feature_matrix(dataset, normalized, rmssd_mode)
    dropped = 0
    if spec.x_seconds >= 300 and hrv_threshold > 0:
        matrix, report = hrv_validity_filter(matrix, hrv_threshold)
        dropped = len(report.dropped)
    return matrix, dropped


def evaluate_folds(
    matrix: FeatureMatrix,
    plan: FoldPlan,
    model_config: ModelConfig,
) -> tuple[list[FoldResult], dict[str, int], np.ndarray, np.ndarray]:
    """Train/test per fold; returns fold metrics, pooled confusion, pooled scores/labels."""
    fold_results = []
    confusion = {"tp": 0, "fp": 0, "fn": 0, "tn": 0}
    pooled_scores, pooled_labels = [], []
    for fold in plan.folds:
        X_tr, y_tr = matrix.X[fold.train_idx], matrix.y[fold.train_idx]
        X_te, y_te = matrix.X[fold.test_idx], matrix.y[fold.test_idx]
        if len(set(y_te.tolist())) < 2 or len(set(y_tr.tolist())) < 2:
            fold_results.append(FoldResult(fold.name, int(y_te.size), defined=False))
            continue
        model = train(model_config, X_tr, y_tr, matrix.feature_names)
        scores = model.predict_scores(X_te)
        recall, f1, conf = recall_f1_confusion(scores, y_te)
        fold_results.append(FoldResult(
            fold.name, int(y_te.size), True,
            recall=recall, auc=auc(scores, y_te), f1=f1,
        ))
        for k in confusion:
            confusion[k] += conf[k]
        pooled_scores.append(scores)
        pooled_labels.append(y_te)
    scores = np.concatenate(pooled_scores) if pooled_scores else np.empty(0)
    labels = np.concatenate(pooled_labels) if pooled_labels else np.empty(0, dtype=np.int64)
    return fold_results, confusion, scores, labels


def run_experiment(
    bundles: list[SessionBundle],
    spec: WindowSpec,
    labels: LabelSet,
    model_config: ModelConfig,
    strategy: str,
    modalities=MODALITIES,
    seed: int = 0,
    clean_only: bool = False,
    balance: str = "session",
    rmssd_mode: str = "stats",
    hrv_threshold: float = 0.5,
    plan: FoldPlan | None = None,
    matrix: FeatureMatrix | None = None,
    hrv_dropped: int = 0,
) -> EvalReport:
    """One full windows -> features -> CV -> metrics pass.

    ``plan``/``matrix`` may be supplied to share folds across ablation subsets.
    Seed derivation: dataset seed = seed, fold seed = seed + 1, model seed =
    seed + 2 (all deterministic).
    """
    if matrix is None:
        matrix, hrv_dropped = prepare_feature_matrix(
            bundles, spec, labels, seed, clean_only, balance, rmssd_mode, hrv_threshold
        )
    if plan is None:
        plan = plan_folds(matrix, strategy, seed + 1)
    sub = matrix.select_modalities(modalities)
    config = ModelConfig(model_config.kind, seed + 2, dict(model_config.params))

    fold_results, confusion, scores, y_pool = evaluate_folds(sub, plan, config)
    mean, std = _aggregate(fold_results)
    try:
        roc = roc_points(scores, y_pool) if scores.size else []
    except SingleClassLabelsError:
        roc = []

    # importances reported from a model over the full (filtered) dataset
    importances: dict[str, float] = {}
    if len(set(sub.y.tolist())) == 2:
        full_model = train(config, sub.X, sub.y, sub.feature_names)
        importances = {
            k: float(v) for k, v in full_model.feature_importances().importances.items()
        }
    by_modality: dict[str, float] = {}
    if importances:
        for name, value in importances.items():
            by_modality[modality_of(name)] = by_modality.get(modality_of(name), 0.0) + value

    return EvalReport(
        spec_tag=spec.tag,
        label_set=labels.name,
        model_kind=model_config.kind,
        strategy=strategy,
        modalities=sorted(modalities),
        seed=seed,
        folds=fold_results,
        mean=mean,
        std=std,
        confusion=confusion,
        roc=roc,
        importances=importances,
        importances_by_modality=by_modality,
        n_vectors=len(sub),
        n_undefined_folds=sum(1 for f in fold_results if not f.defined),
        hrv_dropped=hrv_dropped,
        metadata={
            "seed": seed,
            "clean_only": clean_only,
            "balance": balance,
            "rmssd_mode": rmssd_mode,
            "hrv_threshold": hrv_threshold,
            "model_params": dict(model_config.params),
        },
    )


def run_ablation_suite(
    bundles: list[SessionBundle],
    spec: WindowSpec,
    labels: LabelSet,
    model_config: ModelConfig,
    strategy: str,
    subsets: list[tuple[str, ...]],
    seed: int = 0,
    **kwargs,
) -> list[EvalReport]:
    """One report per modality subset plus the all-modalities run, shared folds."""
    matrix, dropped = prepare_feature_matrix(
        bundles, spec, labels, seed,
        kwargs.get("clean_only", False),
        kwargs.get("balance", "session"),
        kwargs.get("rmssd_mode", "stats"),
        kwargs.get("hrv_threshold", 0.5),
    )
    plan = plan_folds(matrix, strategy, seed + 1)
    all_subsets = list(subsets)
    if tuple(sorted(MODALITIES)) not in {tuple(sorted(s)) for s in all_subsets}:
        all_subsets.append(MODALITIES)
    reports = []
    for subset in all_subsets:
        reports.append(run_experiment(
            bundles, spec, labels, model_config, strategy,
            modalities=subset, seed=seed,
            plan=plan, matrix=matrix, hrv_dropped=dropped, **kwargs,
        ))
    return reports


def descriptive_stats_report(bundles: list[SessionBundle]) -> dict:
    """Stage-level physiology and behavior summaries across sessions."""
    stage_hr: dict[str, list[float]] = {s.value: [] for s in Stage}
    stage_counts: dict[str, int] = {s.value: 0 for s in Stage}
    per_participant: dict[str, dict] = {}
    type_counts: dict[str, int] = {b.value: 0 for b in Behavior}

    for bundle in bundles:
        normalized = normalize_session(bundle, compute_baseline_stats(bundle))
        rec = normalized.recording
        hr = rec.channel("hr")
        for mark in normalized.stages:
            sl = rec.span_slice(mark.start_ms, mark.end_ms)
            seg = hr[sl]
            seg = seg[~np.isnan(seg)]
            if seg.size:
                stage_hr[mark.stage.value].append(float(np.mean(seg)))
            stage_counts[mark.stage.value] += sum(
                1 for ev in bundle.events
                if mark.start_ms <= ev.start_ms < mark.end_ms
            )
        durations = [ev.duration_ms for ev in bundle.events]
        per_participant[bundle.participant_id] = {
            "n_events": len(bundle.events),
            "total_duration_ms": int(sum(durations)),
            "mean_duration_ms": float(np.mean(durations)) if durations else None,
            "median_duration_ms": float(np.median(durations)) if durations else None,
        }
        for ev in bundle.events:
            type_counts[ev.behavior.value] += 1

    total_events = sum(type_counts.values())
    shares = {
        name: (count / total_events if total_events else None)
        for name, count in type_counts.items()
    }
    return {
        "stage_mean_normalized_hr": {
            name: (float(np.mean(vals)) if vals else None) for name, vals in stage_hr.items()
        },
        "stage_behavior_counts": stage_counts,
        "per_participant": per_participant,
        "behavior_counts": type_counts,
        "behavior_shares": shares,
        "total_events": total_events,
    }
