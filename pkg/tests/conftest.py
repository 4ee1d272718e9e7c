import numpy as np
import pytest

from synth import make_session


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def session(rng):
    """One deterministic 25-minute synthetic session."""
    return make_session("p01", rng, duration_s=1500, n_events=8)


@pytest.fixture
def cohort(rng):
    """Three sessions with enough events for cross-validation tests."""
    return [
        make_session(f"p{i:02d}", np.random.default_rng(1000 + i), duration_s=1500, n_events=10)
        for i in range(1, 4)
    ]
