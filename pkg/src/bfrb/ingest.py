"""Loading and validation of raw recordings, behavior labels, and stage marks.

Canonical file formats:
    recording CSV: header ``timestamp_ms,accX,accY,accZ,gyrX,gyrY,gyrZ,hr``
    labels CSV:    header ``start_ms,end_ms,behavior,hand``
    stages CSV:    header ``stage,start_ms,end_ms``

An adapter config (JSON) maps foreign column names, behavior-name aliases and
unit scales onto the canonical schema, so third-party dumps can be ingested
without rewriting files.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import (
    EmptyRecordingError,
    EventOutOfRangeError,
    MissingBaselineIError,
    MissingChannelError,
    NegativeDurationError,
    NonMonotoneTimestampsError,
    OverlappingStagesError,
    StageOutOfRangeError,
    UnknownBehaviorError,
    UnknownStageError,
)

MOTION_CHANNELS = ("accX", "accY", "accZ", "gyrX", "gyrY", "gyrZ")
CHANNELS = MOTION_CHANNELS + ("hr",)
DEFAULT_RATE_HZ = 10.0


class Stage(Enum):
    BASELINE_I = "baseline1"
    TASK1_PREP = "task1_prep"
    TASK1_PRESENT = "task1_present"
    BASELINE_II = "baseline2"
    TASK2 = "task2"
    BASELINE_III = "baseline3"


class Behavior(Enum):
    SKIN_PICKING = "skin_picking"
    FACE_TOUCHING = "face_touching"
    FIDGETING = "fidgeting"
    SKIN_BITING = "skin_biting"
    HAND_SCRATCHING = "hand_scratching"
    NAIL_BITING = "nail_biting"
    LEG_SCRATCHING = "leg_scratching"
    HAIR_PULLING = "hair_pulling"


class Hand(Enum):
    WATCH_HAND = "watch"
    OTHER_HAND = "other"
    BOTH = "both"
    UNKNOWN = "unknown"


# accepted out of the box; an adapter config can add more
_BUILTIN_BEHAVIOR_ALIASES = {
    b.value.replace("_", "-"): b.value for b in Behavior
} | {b.value.replace("_", ""): b.value for b in Behavior}

_HAND_ALIASES = {
    "watch": Hand.WATCH_HAND,
    "watch_hand": Hand.WATCH_HAND,
    "other": Hand.OTHER_HAND,
    "other_hand": Hand.OTHER_HAND,
    "both": Hand.BOTH,
    "unknown": Hand.UNKNOWN,
    "": Hand.UNKNOWN,
}


@dataclass(frozen=True)
class AdapterConfig:
    """Column renames, behavior aliases and unit scaling for foreign files."""

    columns: dict[str, str] = field(default_factory=dict)  # source -> canonical
    behavior_aliases: dict[str, str] = field(default_factory=dict)
    unit_scale: dict[str, float] = field(default_factory=dict)  # canonical channel -> factor

    @classmethod
    def load(cls, path: str | Path) -> "AdapterConfig":
        raw = json.loads(Path(path).read_text())
        known = {"columns", "behavior_aliases", "unit_scale"}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown adapter config keys: {sorted(unknown)}")
        return cls(
            columns=dict(raw.get("columns", {})),
            behavior_aliases={k.lower(): v for k, v in raw.get("behavior_aliases", {}).items()},
            unit_scale={k: float(v) for k, v in raw.get("unit_scale", {}).items()},
        )

    def canonical_column(self, name: str) -> str:
        return self.columns.get(name, name)

    def resolve_behavior(self, name: str) -> Behavior:
        key = name.strip().lower()
        key = self.behavior_aliases.get(key, key)
        key = _BUILTIN_BEHAVIOR_ALIASES.get(key, key)
        try:
            return Behavior(key)
        except ValueError:
            raise UnknownBehaviorError(name) from None


@dataclass(frozen=True)
class Recording:
    """One participant's synchronized 8-channel time series.

    ``data`` is an (n, 7) float array in CHANNELS order; missing heart-rate
    samples are NaN. Timestamps are session-relative milliseconds.
    """

    participant_id: str
    timestamps: np.ndarray  # int64, strictly increasing
    data: np.ndarray        # float64, shape (n, 7)
    nominal_rate: float = DEFAULT_RATE_HZ

    def __post_init__(self):
        if len(self.timestamps) == 0:
            raise EmptyRecordingError(self.participant_id)
        diffs = np.diff(self.timestamps)
        bad = np.nonzero(diffs <= 0)[0]
        if bad.size:
            raise NonMonotoneTimestampsError(int(bad[0]) + 1)

    @property
    def start_ms(self) -> int:
        return int(self.timestamps[0])

    @property
    def end_ms(self) -> int:
        return int(self.timestamps[-1])

    @property
    def duration_ms(self) -> int:
        return self.end_ms - self.start_ms

    def channel(self, name: str) -> np.ndarray:
        return self.data[:, CHANNELS.index(name)]

    def span_slice(self, start_ms: int, end_ms: int) -> slice:
        """Index slice of samples with start_ms <= t < end_ms."""
        lo = int(np.searchsorted(self.timestamps, start_ms, side="left"))
        hi = int(np.searchsorted(self.timestamps, end_ms, side="left"))
        return slice(lo, hi)


@dataclass(frozen=True, order=True)
class StageMark:
    start_ms: int
    end_ms: int
    stage: Stage

    def __post_init__(self):
        if self.start_ms >= self.end_ms:
            raise ValueError(f"stage {self.stage} has start >= end")


@dataclass(frozen=True, order=True)
class BehaviorEvent:
    start_ms: int
    end_ms: int
    behavior: Behavior
    hand: Hand = Hand.UNKNOWN

    @property
    def duration_ms(self) -> int:
        return self.end_ms - self.start_ms


@dataclass(frozen=True)
class SessionBundle:
    recording: Recording
    stages: tuple[StageMark, ...]
    events: tuple[BehaviorEvent, ...]

    @property
    def participant_id(self) -> str:
        return self.recording.participant_id

    def stage_mark(self, stage: Stage) -> StageMark | None:
        for mark in self.stages:
            if mark.stage is stage:
                return mark
        return None


def _read_rows(path: str | Path) -> tuple[list[str], list[list[str]]]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return [], []
        return [h.strip() for h in header], [row for row in reader if row]


def load_recording(
    path: str | Path,
    adapter: AdapterConfig | None = None,
    participant_id: str | None = None,
    nominal_rate: float = DEFAULT_RATE_HZ,
) -> Recording:
    """Parse a canonical (or adapter-mapped) recording CSV."""
    adapter = adapter or AdapterConfig()
    header, rows = _read_rows(path)
    header = [adapter.canonical_column(h) for h in header]
    for name in ("timestamp_ms",) + CHANNELS:
        if name not in header:
            raise MissingChannelError(name)
    if not rows:
        raise EmptyRecordingError(str(path))

    idx = {name: header.index(name) for name in ("timestamp_ms",) + CHANNELS}
    n = len(rows)
    ts = np.empty(n, dtype=np.int64)
    data = np.empty((n, len(CHANNELS)), dtype=np.float64)
    for i, row in enumerate(rows):
        ts[i] = int(row[idx["timestamp_ms"]])
        for j, name in enumerate(CHANNELS):
            cell = row[idx[name]].strip()
            data[i, j] = math.nan if cell == "" else float(cell)

    for j, name in enumerate(CHANNELS):
        scale = adapter.unit_scale.get(name)
        if scale is not None:
            data[:, j] *= scale
    # PPG dropout shows up as zero/negative BPM on consumer watches
    hr = data[:, CHANNELS.index("hr")]
    hr[hr <= 0] = math.nan

    pid = participant_id if participant_id is not None else Path(path).stem
    return Recording(pid, ts, data, nominal_rate)


def serialize_recording(recording: Recording, path: str | Path) -> None:
    """Write a canonical recording CSV (%.6f floats, missing hr as empty cell)."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("timestamp_ms",) + CHANNELS)
        for t, row in zip(recording.timestamps, recording.data):
            cells = [str(int(t))]
            for v in row:
                cells.append("" if math.isnan(v) else f"{v:.6f}")
            writer.writerow(cells)


def load_labels(path: str | Path, adapter: AdapterConfig | None = None) -> list[BehaviorEvent]:
    """Parse and sort a behavior-label CSV; row order does not matter."""
    adapter = adapter or AdapterConfig()
    header, rows = _read_rows(path)
    header = [adapter.canonical_column(h) for h in header]
    for name in ("start_ms", "end_ms", "behavior"):
        if name not in header:
            raise MissingChannelError(name)
    i_start = header.index("start_ms")
    i_end = header.index("end_ms")
    i_beh = header.index("behavior")
    i_hand = header.index("hand") if "hand" in header else None

    events = []
    for rownum, row in enumerate(rows, start=2):
        start, end = int(row[i_start]), int(row[i_end])
        if end < start:
            raise NegativeDurationError(rownum)
        behavior = adapter.resolve_behavior(row[i_beh])
        hand = Hand.UNKNOWN
        if i_hand is not None and i_hand < len(row):
            key = row[i_hand].strip().lower()
            if key not in _HAND_ALIASES:
                raise ValueError(f"unknown hand value {row[i_hand]!r} at row {rownum}")
            hand = _HAND_ALIASES[key]
        events.append(BehaviorEvent(start, end, behavior, hand))
    return sorted(events)


def serialize_labels(events: list[BehaviorEvent], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("start_ms", "end_ms", "behavior", "hand"))
        for ev in sorted(events):
            writer.writerow((ev.start_ms, ev.end_ms, ev.behavior.value, ev.hand.value))


def load_stages(path: str | Path, adapter: AdapterConfig | None = None) -> list[StageMark]:
    adapter = adapter or AdapterConfig()
    header, rows = _read_rows(path)
    header = [adapter.canonical_column(h) for h in header]
    for name in ("stage", "start_ms", "end_ms"):
        if name not in header:
            raise MissingChannelError(name)
    i_stage = header.index("stage")
    i_start = header.index("start_ms")
    i_end = header.index("end_ms")

    marks = []
    for rownum, row in enumerate(rows, start=2):
        try:
            stage = Stage(row[i_stage].strip().lower())
        except ValueError:
            raise UnknownStageError(row[i_stage]) from None
        start, end = int(row[i_start]), int(row[i_end])
        if end <= start:
            raise NegativeDurationError(rownum)
        marks.append(StageMark(start, end, stage))
    marks.sort()
    for a, b in zip(marks, marks[1:]):
        if b.start_ms < a.end_ms:
            raise OverlappingStagesError(a.stage.value, b.stage.value)
    if not any(m.stage is Stage.BASELINE_I for m in marks):
        raise MissingBaselineIError()
    return marks


def serialize_stages(marks: list[StageMark], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("stage", "start_ms", "end_ms"))
        for mark in sorted(marks):
            writer.writerow((mark.stage.value, mark.start_ms, mark.end_ms))


def assemble_session(
    recording: Recording,
    stages: list[StageMark],
    events: list[BehaviorEvent],
) -> SessionBundle:
    """Cross-validate the three parts of a session and freeze them together."""
    # stage ends are exclusive, so allow one sample period past the last sample
    period_ms = 1000.0 / recording.nominal_rate
    for mark in stages:
        if mark.start_ms < recording.start_ms or mark.end_ms > recording.end_ms + period_ms:
            raise StageOutOfRangeError(mark)
    for ev in events:
        if ev.start_ms < recording.start_ms or ev.end_ms > recording.end_ms:
            raise EventOutOfRangeError(ev)
    return SessionBundle(recording, tuple(sorted(stages)), tuple(sorted(events)))


def load_session(
    session_dir: str | Path,
    adapter: AdapterConfig | None = None,
    nominal_rate: float = DEFAULT_RATE_HZ,
) -> SessionBundle:
    """Load ``recording.csv``, ``labels.csv``, ``stages.csv`` from one directory."""
    session_dir = Path(session_dir)
    recording = load_recording(
        session_dir / "recording.csv",
        adapter,
        participant_id=session_dir.name,
        nominal_rate=nominal_rate,
    )
    events = load_labels(session_dir / "labels.csv", adapter)
    stages = load_stages(session_dir / "stages.csv", adapter)
    return assemble_session(recording, stages, events)


def load_dataset(
    root: str | Path,
    adapter: AdapterConfig | None = None,
    nominal_rate: float = DEFAULT_RATE_HZ,
) -> list[SessionBundle]:
    """Load every session subdirectory under ``root``, sorted by name."""
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(root)
    dirs = sorted(p for p in root.iterdir() if p.is_dir() and (p / "recording.csv").exists())
    if not dirs:
        raise EmptyRecordingError(f"no session directories under {root}")
    return [load_session(d, adapter, nominal_rate) for d in dirs]
