"""Baseline-referenced normalization and heart-rate derived series.

All channels are z-scored against the first resting stage of the same
session, so task stages express deviation from that participant's idle
state rather than absolute sensor units.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    EmptySpanError,
    InsufficientHrDataError,
    MissingBaselineIError,
    SessionMismatchError,
)
from .ingest import CHANNELS, Recording, SessionBundle, Stage

log = logging.getLogger(__name__)

SIGMA_FLOOR = 1e-8


@dataclass(frozen=True)
class BaselineStats:
    """Per-channel mean and population std over the baseline1 stage."""

    participant_id: str
    mu: dict[str, float]
    sigma: dict[str, float]

    @property
    def degenerate_channels(self) -> list[str]:
        """Channels that were constant during baseline1 (sigma hits the floor)."""
        return [c for c in CHANNELS if self.sigma[c] <= SIGMA_FLOOR]


@dataclass(frozen=True)
class RrSeries:
    """Pseudo interbeat intervals in ms reconstructed from instantaneous BPM."""

    intervals: np.ndarray  # float64, all > 0
    span: tuple[int, int]  # (start_ms, end_ms) the intervals came from


def compute_baseline_stats(bundle: SessionBundle) -> BaselineStats:
    """Mean and population std per channel over the baseline1 samples.

    Heart-rate statistics use non-missing samples only. A constant channel
    yields sigma 0; that is handled downstream by the epsilon floor.
    """
    mark = bundle.stage_mark(Stage.BASELINE_I)
    if mark is None:
        raise MissingBaselineIError()
    sl = bundle.recording.span_slice(mark.start_ms, mark.end_ms)
    segment = bundle.recording.data[sl]
    if segment.shape[0] < 2:
        raise MissingBaselineIError()

    mu, sigma = {}, {}
    for j, name in enumerate(CHANNELS):
        col = segment[:, j]
        valid = col[~np.isnan(col)]
        if valid.size == 0:
            mu[name] = math.nan
            sigma[name] = math.nan
        else:
            mu[name] = float(np.mean(valid))
            sigma[name] = float(np.std(valid))  # population std
    return BaselineStats(bundle.participant_id, mu, sigma)


def normalize_session(bundle: SessionBundle, stats: BaselineStats) -> SessionBundle:
    """Return a copy of the session with every channel z-scored against baseline1.

    Degenerate (constant-baseline) channels divide by the epsilon floor and are
    logged; missing heart-rate samples stay missing.
    """
    if stats.participant_id != bundle.participant_id:
        raise SessionMismatchError(
            f"stats for {stats.participant_id}, session {bundle.participant_id}"
        )
    degenerate = stats.degenerate_channels
    if degenerate:
        log.warning(
            "session %s: degenerate baseline channels %s (sigma floored at %g)",
            bundle.participant_id, degenerate, SIGMA_FLOOR,
        )
    data = bundle.recording.data.copy()
    for j, name in enumerate(CHANNELS):
        data[:, j] = (data[:, j] - stats.mu[name]) / max(stats.sigma[name], SIGMA_FLOOR)
    recording = replace(bundle.recording, data=data)
    return replace(bundle, recording=recording)


def derive_rr_intervals(recording: Recording, start_ms: int, end_ms: int) -> RrSeries:
    """One pseudo RR interval (60000 / BPM) per non-missing hr sample in the span.

    Approximates the interbeat series a dedicated PPG pipeline would emit;
    missing samples are skipped rather than interpolated.
    """
    sl = recording.span_slice(start_ms, end_ms)
    hr = recording.channel("hr")[sl]
    valid = hr[~np.isnan(hr)]
    if valid.size < 2:
        raise InsufficientHrDataError(
            f"{valid.size} non-missing hr samples in [{start_ms}, {end_ms})"
        )
    return RrSeries(60000.0 / valid, (start_ms, end_ms))


def hr_validity_score(recording: Recording, start_ms: int, end_ms: int) -> float:
    """Fraction of the expected hr samples that are actually present in the span."""
    if end_ms <= start_ms:
        raise EmptySpanError(f"[{start_ms}, {end_ms})")
    sl = recording.span_slice(start_ms, end_ms)
    hr = recording.channel("hr")[sl]
    expected = (end_ms - start_ms) / 1000.0 * recording.nominal_rate
    if expected <= 0:
        raise EmptySpanError(f"[{start_ms}, {end_ms})")
    present = int(np.count_nonzero(~np.isnan(hr)))
    return min(1.0, present / expected)
