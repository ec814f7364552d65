import numpy as np
import pytest

from sedkit.labels import derive_sad, rasterize
from sedkit.synth import EventAnnotation

NAMES = ["alpha", "beta", "gamma"]


class TestRasterize:
    def test_one_second_event_fills_50_frames(self):
        gt = rasterize([EventAnnotation(0.0, 1.0, "alpha")], 500, NAMES)
        col = gt.values[:, 0]
        assert np.all(col[:50] == 1)
        assert col[50] == 0
        assert col.sum() == 50

    def test_empty_events_zero_matrix(self):
        gt = rasterize([], 500, NAMES)
        assert gt.values.shape == (500, 3)
        assert np.all(gt.values == 0)

    def test_overlap_activates_both_columns(self):
        events = [
            EventAnnotation(1.0, 3.0, "alpha"),
            EventAnnotation(2.0, 4.0, "beta"),
        ]
        gt = rasterize(events, 500, NAMES)
        overlap = gt.values[100:150]
        assert np.all(overlap[:, 0] == 1)
        assert np.all(overlap[:, 1] == 1)
        assert np.all(gt.values[:, 2] == 0)

    def test_partial_frame_overlap_activates(self):
        # any nonzero overlap with [i*hop, (i+1)*hop) switches the frame on
        gt = rasterize([EventAnnotation(0.031, 0.049, "beta")], 10, NAMES)
        assert np.array_equal(np.flatnonzero(gt.values[:, 1]), [1, 2])

    def test_unknown_label(self):
        with pytest.raises(ValueError, match="unknown label"):
            rasterize([EventAnnotation(0.0, 1.0, "nope")], 500, NAMES)

    def test_negative_times(self):
        with pytest.raises(ValueError):
            rasterize([EventAnnotation(-0.5, 1.0, "alpha")], 500, NAMES)

    def test_event_past_horizon(self):
        with pytest.raises(ValueError):
            rasterize([EventAnnotation(0.0, 10.5, "alpha")], 500, NAMES)


class TestDeriveSad:
    def test_zero_matrix(self):
        gt = rasterize([], 100, NAMES)
        assert np.all(derive_sad(gt) == 0)

    def test_or_reduction_example(self):
        rows = np.array([[1, 0], [0, 0], [0, 1]], dtype=np.int8)
        assert np.array_equal(derive_sad(rows), [1, 0, 1])

    def test_dominates_every_class(self, rng):
        for _ in range(50):
            m = (rng.random((60, 4)) < 0.3).astype(np.int8)
            sad = derive_sad(m)
            assert np.all(sad[:, None] >= m)

    def test_matches_bruteforce_any(self, rng):
        for _ in range(200):
            T = int(rng.integers(1, 40))
            C = int(rng.integers(1, 6))
            m = (rng.random((T, C)) < rng.uniform(0.05, 0.6)).astype(np.int8)
            expected = np.array([1 if any(row) else 0 for row in m], dtype=np.int8)
            assert np.array_equal(derive_sad(m), expected)
