"""Fixed-length feature vectors from window x-spans.

Each of the seven channels contributes mean/std/min/max ("accXstd" style
names). Five-minute windows additionally carry RMSSD summarized over their
five 60-second sub-segments; shorter windows omit heart-rate variability
entirely because the index is unreliable below five minutes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    EmptyChannelError,
    FeatureUnavailableError,
    InsufficientDataError,
    InsufficientHrDataError,
)
from .ingest import CHANNELS, MOTION_CHANNELS, SessionBundle
from .preprocess import RrSeries, derive_rr_intervals
from .windowing import WindowDataset, WindowInstance, WindowSpec

STAT_NAMES = ("mean", "std", "min", "max")
HRV_MIN_X_SECONDS = 300
RMSSD_SUBSEGMENT_SECONDS = 60

# channel name as it appears in feature names ("hr" column -> "HR" features)
_FEATURE_CHANNEL = {c: ("HR" if c == "hr" else c) for c in CHANNELS}

MODALITIES = ("accelerometer", "gyroscope", "heart")


def modality_of(feature_name: str) -> str:
    if feature_name.startswith("acc"):
        return "accelerometer"
    if feature_name.startswith("gyr"):
        return "gyroscope"
    if feature_name.startswith(("HR", "RMSSD")):
        return "heart"
    raise ValueError(f"feature {feature_name!r} has no modality")


def feature_schema(spec: WindowSpec, rmssd_mode: str = "stats") -> list[str]:
    """Alphabetical feature-name list for a window spec."""
    names = [
        f"{_FEATURE_CHANNEL[c]}{s}" for c in CHANNELS for s in STAT_NAMES
    ]
    if spec.x_seconds >= HRV_MIN_X_SECONDS:
        if rmssd_mode == "stats":
            names += [f"RMSSD{s}" for s in STAT_NAMES]
        elif rmssd_mode == "single":
            names += ["RMSSD"]
        else:
            raise ValueError(f"unknown rmssd mode {rmssd_mode!r}")
    return sorted(names)


def descriptive_stats(values: np.ndarray) -> tuple[float, float, float, float]:
    """(mean, population std, min, max) of a channel segment."""
    values = np.asarray(values, dtype=np.float64)
    values = values[~np.isnan(values)]
    if values.size == 0:
        raise EmptyChannelError()
    std = 0.0 if values.size < 2 else float(np.std(values))
    return float(np.mean(values)), std, float(np.min(values)), float(np.max(values))


def rmssd(rr: RrSeries | np.ndarray) -> float:
    """Root mean square of successive differences of the interbeat series."""
    intervals = rr.intervals if isinstance(rr, RrSeries) else np.asarray(rr, dtype=np.float64)
    n = intervals.size
    if n < 2:
        raise InsufficientDataError(f"need >= 2 RR intervals, got {n}")
    diffs = np.diff(intervals)
    return float(np.sqrt(np.sum(diffs * diffs) / (n - 1)))


@dataclass(frozen=True)
class FeatureVector:
    names: tuple[str, ...]
    values: np.ndarray
    label: int
    participant_id: str
    behavior: str
    clean: bool | None
    hr_validity: float


def featurize(
    window: WindowInstance,
    bundle: SessionBundle,
    rmssd_mode: str = "stats",
) -> FeatureVector:
    """Extract the full feature vector for one window's x-span.

    Raises FeatureUnavailableError when the heart channel is entirely missing
    in the x-span, or when any RMSSD sub-segment lacks two RR intervals; such
    windows are excluded from datasets rather than zero-filled.
    """
    rec = bundle.recording
    x_start, x_end = window.x_span
    sl = rec.span_slice(x_start, x_end)
    segment = rec.data[sl]
    if segment.shape[0] == 0:
        raise EmptyChannelError(f"no samples in x-span {window.x_span}")

    feats: dict[str, float] = {}
    for j, channel in enumerate(CHANNELS):
        try:
            mean, std, mn, mx = descriptive_stats(segment[:, j])
        except EmptyChannelError:
            raise FeatureUnavailableError(_FEATURE_CHANNEL[channel]) from None
        base = _FEATURE_CHANNEL[channel]
        feats[f"{base}mean"] = mean
        feats[f"{base}std"] = std
        feats[f"{base}min"] = mn
        feats[f"{base}max"] = mx

    spec_x_seconds = (x_end - x_start) // 1000
    if spec_x_seconds >= HRV_MIN_X_SECONDS:
        if rmssd_mode == "stats":
            sub_ms = RMSSD_SUBSEGMENT_SECONDS * 1000
            values = []
            for k in range(spec_x_seconds // RMSSD_SUBSEGMENT_SECONDS):
                lo = x_start + k * sub_ms
                try:
                    values.append(rmssd(derive_rr_intervals(rec, lo, lo + sub_ms)))
                except (InsufficientDataError, InsufficientHrDataError):
                    raise FeatureUnavailableError("RMSSD") from None
            arr = np.asarray(values)
            feats["RMSSDmean"] = float(np.mean(arr))
            feats["RMSSDstd"] = float(np.std(arr))
            feats["RMSSDmin"] = float(np.min(arr))
            feats["RMSSDmax"] = float(np.max(arr))
        elif rmssd_mode == "single":
            try:
                feats["RMSSD"] = rmssd(derive_rr_intervals(rec, x_start, x_end))
            except (InsufficientDataError, InsufficientHrDataError):
                raise FeatureUnavailableError("RMSSD") from None
        else:
            raise ValueError(f"unknown rmssd mode {rmssd_mode!r}")

    names = tuple(sorted(feats))
    values_arr = np.array([feats[n] for n in names], dtype=np.float64)
    if np.any(np.isnan(values_arr)):
        raise FeatureUnavailableError("NaN in feature vector")
    return FeatureVector(
        names=names,
        values=values_arr,
        label=1 if window.positive else 0,
        participant_id=window.participant_id,
        behavior=window.behavior.value if window.behavior else "",
        clean=window.clean,
        hr_validity=window.hr_validity,
    )


@dataclass
class FeatureMatrix:
    """Dense design matrix plus per-row metadata, columns in schema order."""

    feature_names: list[str]
    X: np.ndarray           # (n, p) float64
    y: np.ndarray           # (n,) int
    participants: list[str]
    behaviors: list[str]
    clean: list[bool | None]
    hr_validity: np.ndarray  # (n,) float64

    def __len__(self) -> int:
        return self.X.shape[0]

    def subset(self, rows: np.ndarray) -> "FeatureMatrix":
        rows = np.asarray(rows)
        return FeatureMatrix(
            feature_names=list(self.feature_names),
            X=self.X[rows],
            y=self.y[rows],
            participants=[self.participants[i] for i in rows],
            behaviors=[self.behaviors[i] for i in rows],
            clean=[self.clean[i] for i in rows],
            hr_validity=self.hr_validity[rows],
        )

    def select_modalities(self, modalities) -> "FeatureMatrix":
        """Keep only columns belonging to the given sensor families."""
        modalities = set(modalities)
        unknown = modalities - set(MODALITIES)
        if unknown:
            raise ValueError(f"unknown modalities: {sorted(unknown)}")
        cols = [i for i, n in enumerate(self.feature_names) if modality_of(n) in modalities]
        if not cols:
            raise ValueError("modality subset selects no features")
        return FeatureMatrix(
            feature_names=[self.feature_names[i] for i in cols],
            X=self.X[:, cols],
            y=self.y,
            participants=list(self.participants),
            behaviors=list(self.behaviors),
            clean=list(self.clean),
            hr_validity=self.hr_validity,
        )

    def to_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(self.feature_names + ["label", "participant", "behavior", "clean"])
            for i in range(len(self)):
                row = [f"{v:.6f}" for v in self.X[i]]
                row += [
                    int(self.y[i]),
                    self.participants[i],
                    self.behaviors[i],
                    "" if self.clean[i] is None else int(self.clean[i]),
                ]
                writer.writerow(row)


@dataclass
class ExclusionReport:
    """Windows dropped during featurization or validity filtering."""

    dropped: list[tuple[str, int, str]] = field(default_factory=list)  # (participant, label, reason)

    def counts(self) -> dict[str, dict[str, int]]:
        out: dict[str, dict[str, int]] = {}
        for participant, label, _reason in self.dropped:
            key = "positive" if label == 1 else "negative"
            out.setdefault(participant, {"positive": 0, "negative": 0})[key] += 1
        return out


def build_feature_matrix(
    dataset: WindowDataset,
    bundles: list[SessionBundle],
    rmssd_mode: str = "stats",
) -> tuple[FeatureMatrix, ExclusionReport]:
    """Featurize every window; incomplete vectors go to the exclusion report."""
    by_id = {b.participant_id: b for b in bundles}
    schema = feature_schema(dataset.spec, rmssd_mode)
    rows, labels, participants, behaviors, clean, validity = [], [], [], [], [], []
    report = ExclusionReport()
    for window in dataset.windows:
        bundle = by_id[window.participant_id]
        try:
            vec = featurize(window, bundle, rmssd_mode)
        except (FeatureUnavailableError, EmptyChannelError) as exc:
            report.dropped.append(
                (window.participant_id, 1 if window.positive else 0, str(exc))
            )
            continue
        if list(vec.names) != schema:
            raise ValueError(
                f"feature schema mismatch for {window.participant_id}: {vec.names}"
            )
        rows.append(vec.values)
        labels.append(vec.label)
        participants.append(vec.participant_id)
        behaviors.append(vec.behavior)
        clean.append(vec.clean)
        validity.append(vec.hr_validity)
    X = np.vstack(rows) if rows else np.empty((0, len(schema)))
    matrix = FeatureMatrix(
        feature_names=schema,
        X=X,
        y=np.asarray(labels, dtype=np.int64),
        participants=participants,
        behaviors=behaviors,
        clean=clean,
        hr_validity=np.asarray(validity, dtype=np.float64),
    )
    return matrix, report


def hrv_validity_filter(
    matrix: FeatureMatrix,
    threshold: float = 0.5,
) -> tuple[FeatureMatrix, ExclusionReport]:
    """Drop rows whose heart-rate coverage in the x-span is below threshold."""
    keep = matrix.hr_validity >= threshold
    report = ExclusionReport()
    for i in np.nonzero(~keep)[0]:
        report.dropped.append(
            (matrix.participants[i], int(matrix.y[i]), f"hr_validity {matrix.hr_validity[i]:.3f} < {threshold}")
        )
    return matrix.subset(np.nonzero(keep)[0]), report
