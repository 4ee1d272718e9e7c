import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bfrb.errors import (
    EmptySpanError,
    InsufficientHrDataError,
    MissingBaselineIError,
    SessionMismatchError,
)
from bfrb.ingest import (
    CHANNELS,
    Recording,
    SessionBundle,
    Stage,
    StageMark,
    assemble_session,
)
from bfrb.preprocess import (
    SIGMA_FLOOR,
    BaselineStats,
    compute_baseline_stats,
    derive_rr_intervals,
    hr_validity_score,
    normalize_session,
)


def bundle_from_data(data, pid="p01", baseline_ms=None):
    n = data.shape[0]
    ts = np.arange(n, dtype=np.int64) * 100
    rec = Recording(pid, ts, data)
    baseline_ms = baseline_ms if baseline_ms is not None else n * 100
    return assemble_session(rec, [StageMark(0, baseline_ms, Stage.BASELINE_I)], [])


class TestComputeBaselineStats:
    def test_constant_channel(self):
        data = np.full((50, 7), 5.0)
        stats = compute_baseline_stats(bundle_from_data(data))
        assert stats.mu["accX"] == 5.0
        assert stats.sigma["accX"] == 0.0
        assert "accX" in stats.degenerate_channels

    def test_hand_computed_mean_and_population_std(self):
        data = np.full((3, 7), 1.0)
        data[:, 0] = [1.0, 2.0, 3.0]
        stats = compute_baseline_stats(bundle_from_data(data))
        assert stats.mu["accX"] == pytest.approx(2.0)
        assert stats.sigma["accX"] == pytest.approx(math.sqrt(2.0 / 3.0))

    def test_hr_stats_use_non_missing_only(self):
        data = np.full((4, 7), 1.0)
        data[:, 6] = [60.0, np.nan, 80.0, np.nan]
        stats = compute_baseline_stats(bundle_from_data(data))
        assert stats.mu["hr"] == pytest.approx(70.0)

    def test_missing_baseline(self):
        n = 10
        rec = Recording("p01", np.arange(n, dtype=np.int64) * 100, np.ones((n, 7)))
        bundle = SessionBundle(rec, (), ())
        with pytest.raises(MissingBaselineIError):
            compute_baseline_stats(bundle)


class TestNormalizeSession:
    def _bundle(self):
        rng = np.random.default_rng(0)
        data = rng.normal(size=(600, 7)) * 2.0 + 3.0
        return bundle_from_data(data, baseline_ms=30_000)

    def test_mean_maps_to_zero_and_sigma_to_one(self):
        bundle = self._bundle()
        stats = compute_baseline_stats(bundle)
        norm = normalize_session(bundle, stats)
        x = stats.mu["accY"]
        j = CHANNELS.index("accY")
        raw_val = bundle.recording.data[0, j]
        # normalized value of mu is exactly 0; of mu+sigma is exactly 1
        assert (x - stats.mu["accY"]) / stats.sigma["accY"] == 0.0
        expected = (raw_val - stats.mu["accY"]) / stats.sigma["accY"]
        assert norm.recording.data[0, j] == pytest.approx(expected)

    def test_baseline_segment_standardized(self):
        bundle = self._bundle()
        norm = normalize_session(bundle, compute_baseline_stats(bundle))
        sl = norm.recording.span_slice(0, 30_000)
        for j in range(7):
            seg = norm.recording.data[sl, j]
            assert abs(float(np.mean(seg))) < 1e-9
            assert abs(float(np.std(seg)) - 1.0) < 1e-9

    def test_degenerate_channel_uses_epsilon_floor(self):
        data = np.full((100, 7), 2.0)
        data[50:, 0] = 3.0  # constant over baseline, steps afterwards
        bundle = bundle_from_data(data, baseline_ms=5000)
        norm = normalize_session(bundle, compute_baseline_stats(bundle))
        assert norm.recording.data[60, 0] == pytest.approx(1.0 / SIGMA_FLOOR)

    def test_missing_hr_stays_missing(self):
        data = np.full((100, 7), 2.0)
        data[10, 6] = np.nan
        bundle = bundle_from_data(data)
        norm = normalize_session(bundle, compute_baseline_stats(bundle))
        assert math.isnan(norm.recording.data[10, 6])

    def test_session_mismatch(self):
        bundle = self._bundle()
        stats = compute_baseline_stats(bundle)
        wrong = BaselineStats("someone_else", stats.mu, stats.sigma)
        with pytest.raises(SessionMismatchError):
            normalize_session(bundle, wrong)

    def test_affine_consistency(self):
        # normalizing a + b*x with correspondingly transformed stats == normalizing x
        bundle = self._bundle()
        stats = compute_baseline_stats(bundle)
        norm_ref = normalize_session(bundle, stats)

        a, b = 5.0, 3.0
        data2 = a + b * bundle.recording.data
        bundle2 = bundle_from_data(data2, baseline_ms=30_000)
        stats2 = compute_baseline_stats(bundle2)
        norm2 = normalize_session(bundle2, stats2)
        np.testing.assert_allclose(
            norm2.recording.data, norm_ref.recording.data, atol=1e-9
        )


class TestDeriveRr:
    def _recording(self, hr_values):
        n = len(hr_values)
        data = np.ones((n, 7))
        data[:, 6] = hr_values
        return Recording("p01", np.arange(n, dtype=np.int64) * 100, data)

    def test_60_bpm_gives_1000_ms(self):
        rr = derive_rr_intervals(self._recording([60.0, 60.0]), 0, 1000)
        np.testing.assert_allclose(rr.intervals, [1000.0, 1000.0])

    def test_mixed_bpm(self):
        rr = derive_rr_intervals(self._recording([60.0, 120.0]), 0, 1000)
        np.testing.assert_allclose(rr.intervals, [1000.0, 500.0])

    def test_all_missing(self):
        with pytest.raises(InsufficientHrDataError):
            derive_rr_intervals(self._recording([np.nan] * 5), 0, 1000)

    def test_missing_samples_skipped(self):
        rr = derive_rr_intervals(self._recording([60.0, np.nan, 120.0]), 0, 1000)
        assert rr.intervals.size == 2

    @given(
        bpm=st.lists(st.floats(min_value=30, max_value=220), min_size=2, max_size=50)
    )
    @settings(max_examples=50, deadline=None)
    def test_monotone_inverse(self, bpm):
        rr = derive_rr_intervals(self._recording(bpm), 0, len(bpm) * 100)
        order = np.argsort(bpm)
        assert np.all(np.diff(rr.intervals[order]) <= 0)


class TestHrValidity:
    def _recording(self, hr_values):
        n = len(hr_values)
        data = np.ones((n, 7))
        data[:, 6] = hr_values
        return Recording("p01", np.arange(n, dtype=np.int64) * 100, data)

    def test_full_coverage(self):
        rec = self._recording([70.0] * 100)
        assert hr_validity_score(rec, 0, 10_000) == 1.0

    def test_half_missing(self):
        hr = [70.0, np.nan] * 50
        rec = self._recording(hr)
        assert hr_validity_score(rec, 0, 10_000) == 0.5

    def test_dead_sensor(self):
        rec = self._recording([np.nan] * 100)
        assert hr_validity_score(rec, 0, 10_000) == 0.0

    def test_empty_span(self):
        rec = self._recording([70.0] * 10)
        with pytest.raises(EmptySpanError):
            hr_validity_score(rec, 1000, 1000)

    @given(missing=st.lists(st.booleans(), min_size=1, max_size=200))
    @settings(max_examples=50, deadline=None)
    def test_always_in_unit_interval(self, missing):
        hr = [np.nan if m else 70.0 for m in missing]
        rec = self._recording(hr)
        score = hr_validity_score(rec, 0, len(hr) * 100)
        assert 0.0 <= score <= 1.0
