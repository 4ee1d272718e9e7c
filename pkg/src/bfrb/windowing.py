"""Anticipatory window generation.

Positive windows are anchored at behavior onsets: the x-span holds the A
seconds of sensor history before onset, the y-span the B seconds after.
Negative windows are drawn uniformly from 1-second grid anchors whose y-span
touches no labeled behavior, one per positive so datasets stay balanced.
"""

from __future__ import annotations

import csv
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InsufficientNegativeSpaceError
from .ingest import Behavior, BehaviorEvent, SessionBundle
from .preprocess import hr_validity_score

SUPPORTED_X_SECONDS = (60, 120, 180, 240, 300)

ALL_COMPULSIVE = frozenset(Behavior)


@dataclass(frozen=True)
class WindowSpec:
    x_seconds: int
    y_seconds: int = 1

    def __post_init__(self):
        if self.x_seconds not in SUPPORTED_X_SECONDS:
            raise ValueError(
                f"x window of {self.x_seconds}s unsupported; choose from {SUPPORTED_X_SECONDS}"
            )
        if self.y_seconds < 1:
            raise ValueError("y window must be >= 1s")

    @property
    def x_ms(self) -> int:
        return self.x_seconds * 1000

    @property
    def y_ms(self) -> int:
        return self.y_seconds * 1000

    @property
    def tag(self) -> str:
        return f"{self.x_seconds}x{self.y_seconds}y"


@dataclass(frozen=True)
class LabelSet:
    """Which behavior types count as positive."""

    name: str
    behaviors: frozenset[Behavior]

    def __post_init__(self):
        if not self.behaviors:
            raise ValueError("label set must include at least one behavior")

    @classmethod
    def all_compulsive(cls) -> "LabelSet":
        return cls("all_compulsive", ALL_COMPULSIVE)

    @classmethod
    def face_touching(cls) -> "LabelSet":
        return cls("face_touching", frozenset({Behavior.FACE_TOUCHING}))

    @classmethod
    def skin_picking(cls) -> "LabelSet":
        return cls("skin_picking", frozenset({Behavior.SKIN_PICKING}))

    @classmethod
    def custom(cls, behaviors) -> "LabelSet":
        return cls("custom", frozenset(behaviors))

    @classmethod
    def named(cls, name: str) -> "LabelSet":
        factories = {
            "all_compulsive": cls.all_compulsive,
            "face_touching": cls.face_touching,
            "skin_picking": cls.skin_picking,
        }
        if name not in factories:
            raise ValueError(f"unknown label set {name!r}")
        return factories[name]()


@dataclass(frozen=True)
class WindowInstance:
    participant_id: str
    anchor_ms: int            # behavior onset (positives) or grid anchor (negatives)
    x_start_ms: int           # anchor - A*1000
    y_end_ms: int             # anchor + B*1000
    positive: bool
    behavior: Behavior | None  # positives only
    clean: bool | None         # positives only: x-span free of any behavior
    hr_validity: float

    @property
    def x_span(self) -> tuple[int, int]:
        return (self.x_start_ms, self.anchor_ms)

    @property
    def y_span(self) -> tuple[int, int]:
        return (self.anchor_ms, self.y_end_ms)


@dataclass
class WindowDataset:
    spec: WindowSpec
    windows: list[WindowInstance]
    skipped_positives: dict[str, int] = field(default_factory=dict)

    @property
    def positives(self) -> list[WindowInstance]:
        return [w for w in self.windows if w.positive]

    @property
    def negatives(self) -> list[WindowInstance]:
        return [w for w in self.windows if not w.positive]

    def to_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(
                ("participant", "anchor_ms", "label", "behavior", "clean", "hr_validity")
            )
            for w in self.windows:
                writer.writerow((
                    w.participant_id,
                    w.anchor_ms,
                    1 if w.positive else 0,
                    w.behavior.value if w.behavior else "",
                    "" if w.clean is None else int(w.clean),
                    f"{w.hr_validity:.6f}",
                ))


def _overlaps(ev: BehaviorEvent, start_ms: int, end_ms: int) -> bool:
    """Does the event's [start, end] interval intersect the half-open span?"""
    return ev.start_ms < end_ms and ev.end_ms > start_ms


def positive_windows(
    bundle: SessionBundle,
    spec: WindowSpec,
    labels: LabelSet,
) -> tuple[list[WindowInstance], int]:
    """One window per eligible labeled onset; returns (windows, skipped count).

    Onsets without A seconds of history, or without B seconds of remaining
    recording, are skipped rather than padded.
    """
    rec = bundle.recording
    windows, skipped = [], 0
    for ev in bundle.events:
        if ev.behavior not in labels.behaviors:
            continue
        t = ev.start_ms
        if t - spec.x_ms < rec.start_ms or t + spec.y_ms > rec.end_ms:
            skipped += 1
            continue
        x_start = t - spec.x_ms
        # cleanliness considers every labeled behavior, not just target types
        clean = not any(
            other is not ev and _overlaps(other, x_start, t) for other in bundle.events
        )
        windows.append(WindowInstance(
            participant_id=bundle.participant_id,
            anchor_ms=t,
            x_start_ms=x_start,
            y_end_ms=t + spec.y_ms,
            positive=True,
            behavior=ev.behavior,
            clean=clean,
            hr_validity=hr_validity_score(rec, x_start, t),
        ))
    return windows, skipped


def eligible_negative_anchors(bundle: SessionBundle, spec: WindowSpec) -> np.ndarray:
    """1-second grid anchors whose y-span intersects no behavior of any type."""
    rec = bundle.recording
    lo = rec.start_ms + spec.x_ms
    lo = ((lo + 999) // 1000) * 1000  # round up to the grid
    hi = rec.end_ms - spec.y_ms
    if hi < lo:
        return np.empty(0, dtype=np.int64)
    anchors = np.arange(lo, hi + 1, 1000, dtype=np.int64)
    keep = np.ones(anchors.shape, dtype=bool)
    for ev in bundle.events:
        # y-span [t, t + y_ms) intersects [ev.start, ev.end]
        keep &= ~((ev.start_ms < anchors + spec.y_ms) & (ev.end_ms > anchors))
    return anchors[keep]


def negative_windows(
    bundle: SessionBundle,
    spec: WindowSpec,
    count: int,
    seed: int,
) -> list[WindowInstance]:
    """Uniformly sample ``count`` behavior-free-y windows without replacement."""
    anchors = eligible_negative_anchors(bundle, spec)
    if count > anchors.size:
        raise InsufficientNegativeSpaceError(int(anchors.size), count)
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(anchors, size=count, replace=False))
    rec = bundle.recording
    return [
        WindowInstance(
            participant_id=bundle.participant_id,
            anchor_ms=int(t),
            x_start_ms=int(t) - spec.x_ms,
            y_end_ms=int(t) + spec.y_ms,
            positive=False,
            behavior=None,
            clean=None,
            hr_validity=hr_validity_score(rec, int(t) - spec.x_ms, int(t)),
        )
        for t in chosen
    ]


def session_seed(seed: int, participant_id: str) -> int:
    """Stable per-session RNG seed, independent of session ordering."""
    return (seed + zlib.crc32(participant_id.encode())) % 2**32


def build_dataset(
    bundles: list[SessionBundle],
    spec: WindowSpec,
    labels: LabelSet,
    seed: int,
    clean_only: bool = False,
    balance: str = "session",
) -> WindowDataset:
    """Positives plus equally many negatives across the given sessions.

    ``balance="session"`` matches negatives to positives within each session;
    ``balance="aggregate"`` draws the pooled negative count from the union of
    all sessions' eligible anchors.
    """
    if not bundles:
        raise ValueError("need at least one session")
    if balance not in ("session", "aggregate"):
        raise ValueError(f"unknown balance mode {balance!r}")

    all_windows: list[WindowInstance] = []
    skipped: dict[str, int] = {}
    per_session_pos: dict[str, list[WindowInstance]] = {}
    for bundle in bundles:
        pos, n_skipped = positive_windows(bundle, spec, labels)
        if clean_only:
            pos = [w for w in pos if w.clean]
        per_session_pos[bundle.participant_id] = pos
        if n_skipped:
            skipped[bundle.participant_id] = n_skipped

    if balance == "session":
        for bundle in bundles:
            pos = per_session_pos[bundle.participant_id]
            neg = negative_windows(
                bundle, spec, len(pos), session_seed(seed, bundle.participant_id)
            )
            all_windows.extend(pos)
            all_windows.extend(neg)
    else:
        total = sum(len(p) for p in per_session_pos.values())
        pool = []  # (bundle index, anchor)
        for i, bundle in enumerate(bundles):
            for t in eligible_negative_anchors(bundle, spec):
                pool.append((i, int(t)))
        if total > len(pool):
            raise InsufficientNegativeSpaceError(len(pool), total)
        rng = np.random.default_rng(seed)
        picks = rng.choice(len(pool), size=total, replace=False)
        for pos in per_session_pos.values():
            all_windows.extend(pos)
        for k in sorted(picks):
            i, t = pool[k]
            bundle = bundles[i]
            all_windows.append(WindowInstance(
                participant_id=bundle.participant_id,
                anchor_ms=t,
                x_start_ms=t - spec.x_ms,
                y_end_ms=t + spec.y_ms,
                positive=False,
                behavior=None,
                clean=None,
                hr_validity=hr_validity_score(bundle.recording, t - spec.x_ms, t),
            ))
    return WindowDataset(spec, all_windows, skipped)
