import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bfrb.errors import EmptyChannelError, FeatureUnavailableError, InsufficientDataError
from bfrb.features import (
    build_feature_matrix,
    descriptive_stats,
    feature_schema,
    featurize,
    hrv_validity_filter,
    modality_of,
    rmssd,
)
from bfrb.ingest import Behavior, BehaviorEvent, Recording, Stage, StageMark, assemble_session
from bfrb.windowing import LabelSet, WindowSpec, build_dataset, positive_windows

rr_lists = st.lists(
    st.floats(min_value=300.0, max_value=2000.0), min_size=2, max_size=100
)


class TestDescriptiveStats:
    def test_constant(self):
        assert descriptive_stats(np.array([2.0, 2.0, 2.0])) == (2.0, 0.0, 2.0, 2.0)

    def test_two_values(self):
        mean, std, mn, mx = descriptive_stats(np.array([1.0, 3.0]))
        assert (mean, std, mn, mx) == (2.0, 1.0, 1.0, 3.0)

    def test_empty(self):
        with pytest.raises(EmptyChannelError):
            descriptive_stats(np.array([]))

    def test_single_sample_std_zero(self):
        assert descriptive_stats(np.array([4.0]))[1] == 0.0

    @given(values=st.lists(st.floats(-100, 100), min_size=1, max_size=50))
    @settings(max_examples=100, deadline=None)
    def test_min_le_mean_le_max(self, values):
        mean, std, mn, mx = descriptive_stats(np.array(values))
        assert mn <= mean + 1e-12 and mean <= mx + 1e-12
        assert (std == 0.0) == (len(set(values)) == 1 or len(values) == 1)


class TestRmssd:
    def test_constant_series_is_zero(self):
        assert rmssd(np.array([800.0] * 10)) == 0.0

    def test_hand_computed(self):
        assert rmssd(np.array([800.0, 810.0, 790.0])) == pytest.approx(
            math.sqrt(250.0), rel=1e-12
        )

    def test_single_interval(self):
        with pytest.raises(InsufficientDataError):
            rmssd(np.array([800.0]))

    @given(rr=rr_lists, c=st.floats(-200, 200))
    @settings(max_examples=100, deadline=None)
    def test_translation_invariant(self, rr, c):
        a = rmssd(np.array(rr))
        b = rmssd(np.array(rr) + c)
        assert a == pytest.approx(b, rel=1e-9, abs=1e-9)

    @given(rr=rr_lists, k=st.floats(0.1, 10.0))
    @settings(max_examples=100, deadline=None)
    def test_scales_linearly(self, rr, k):
        assert rmssd(np.array(rr) * k) == pytest.approx(
            k * rmssd(np.array(rr)), rel=1e-9
        )


class TestSchema:
    def test_short_window_has_28_features(self):
        assert len(feature_schema(WindowSpec(60, 1))) == 28

    def test_long_window_has_32_features(self):
        names = feature_schema(WindowSpec(300, 1))
        assert len(names) == 32
        assert "RMSSDstd" in names

    def test_single_rmssd_mode(self):
        names = feature_schema(WindowSpec(300, 1), rmssd_mode="single")
        assert len(names) == 29
        assert "RMSSD" in names

    def test_modality_partition(self):
        names = feature_schema(WindowSpec(300, 1))
        groups = {m: 0 for m in ("accelerometer", "gyroscope", "heart")}
        for n in names:
            groups[modality_of(n)] += 1
        assert groups == {"accelerometer": 12, "gyroscope": 12, "heart": 8}


def session_with_event(duration_s=900, hr=70.0, hr_dead_span=None):
    n = duration_s * 10
    data = np.random.default_rng(0).normal(size=(n, 7))
    data[:, 6] = hr
    if hr_dead_span is not None:
        lo, hi = hr_dead_span
        data[lo * 10:hi * 10, 6] = np.nan
    rec = Recording("p01", np.arange(n, dtype=np.int64) * 100, data)
    stages = [StageMark(0, 60_000, Stage.BASELINE_I)]
    events = [BehaviorEvent(600_000, 603_000, Behavior.SKIN_PICKING)]
    return assemble_session(rec, stages, events)


class TestFeaturize:
    def test_60x_window_28_features_no_rmssd(self):
        bundle = session_with_event()
        window = positive_windows(bundle, WindowSpec(60, 1), LabelSet.all_compulsive())[0][0]
        vec = featurize(window, bundle)
        assert len(vec.names) == 28
        assert not any(n.startswith("RMSSD") for n in vec.names)

    def test_300x_window_32_features(self):
        bundle = session_with_event()
        window = positive_windows(bundle, WindowSpec(300, 1), LabelSet.all_compulsive())[0][0]
        vec = featurize(window, bundle)
        assert len(vec.names) == 32
        assert "RMSSDstd" in vec.names
        assert not np.any(np.isnan(vec.values))

    def test_hr_dead_minute_excludes_vector(self):
        # heart sensor dead during minute 3 of the 5-minute x-span (360-420 s
        # into the session, x-span is 300-600 s)
        bundle = session_with_event(hr_dead_span=(420, 480))
        window = positive_windows(bundle, WindowSpec(300, 1), LabelSet.all_compulsive())[0][0]
        with pytest.raises(FeatureUnavailableError) as exc:
            featurize(window, bundle)
        assert exc.value.name == "RMSSD"

    def test_deterministic(self):
        bundle = session_with_event()
        window = positive_windows(bundle, WindowSpec(300, 1), LabelSet.all_compulsive())[0][0]
        a = featurize(window, bundle)
        b = featurize(window, bundle)
        np.testing.assert_array_equal(a.values, b.values)


class TestFeatureMatrix:
    def _matrix(self, cohort, spec=WindowSpec(60, 1)):
        dataset = build_dataset(cohort, spec, LabelSet.all_compulsive(), seed=5)
        return build_feature_matrix(dataset, cohort)

    def test_schema_identical_across_vectors(self, cohort):
        matrix, _ = self._matrix(cohort)
        assert matrix.X.shape[1] == len(matrix.feature_names) == 28

    def test_modality_selection(self, cohort):
        matrix, _ = self._matrix(cohort)
        gyro = matrix.select_modalities(["gyroscope"])
        assert all(n.startswith("gyr") for n in gyro.feature_names)
        assert gyro.X.shape == (len(matrix), 12)

    def test_csv_header(self, tmp_path, cohort):
        matrix, _ = self._matrix(cohort)
        out = tmp_path / "features.csv"
        matrix.to_csv(out)
        header = out.read_text().splitlines()[0].split(",")
        assert header == matrix.feature_names + ["label", "participant", "behavior", "clean"]


class TestHrvValidityFilter:
    def _matrix(self, cohort):
        dataset = build_dataset(cohort, WindowSpec(300, 1), LabelSet.all_compulsive(), seed=5)
        matrix, _ = build_feature_matrix(dataset, cohort)
        return matrix

    def test_full_validity_unchanged(self, cohort):
        matrix = self._matrix(cohort)
        filtered, report = hrv_validity_filter(matrix, 0.5)
        assert len(filtered) == len(matrix)
        assert report.dropped == []

    def test_threshold_zero_unchanged(self, cohort):
        matrix = self._matrix(cohort)
        filtered, _ = hrv_validity_filter(matrix, 0.0)
        assert len(filtered) == len(matrix)

    def test_low_validity_rows_dropped_and_reported(self, cohort):
        matrix = self._matrix(cohort)
        matrix.hr_validity = matrix.hr_validity.copy()
        matrix.hr_validity[:4] = 0.3
        filtered, report = hrv_validity_filter(matrix, 0.5)
        assert len(filtered) == len(matrix) - 4
        assert len(report.dropped) == 4
        assert report.counts()  # per-participant counts populated
