import numpy as np
import pytest

from sedkit.labels import rasterize
from sedkit.postproc import binarize, decode_events, median_smooth, reweight
from sedkit.synth import EventAnnotation

NAMES = ["alpha", "beta"]


class TestReweight:
    def test_identity_when_activity_is_one(self, rng):
        p = rng.random((50, 3))
        assert np.array_equal(reweight(p, np.ones(50)), p)

    def test_annihilation_when_activity_is_zero(self, rng):
        p = rng.random((50, 3))
        assert np.all(reweight(p, np.zeros(50)) == 0.0)

    def test_elementwise_product(self):
        p = np.full((1, 1), 0.5)
        assert reweight(p, np.array([0.4]))[0, 0] == pytest.approx(0.2)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            reweight(np.zeros((10, 2)), np.zeros(9))


class TestBinarize:
    def test_boundary_is_inclusive(self):
        out = binarize(np.array([0.19, 0.20, 0.21]), 0.2)
        assert np.array_equal(out, [0, 1, 1])

    def test_zeros_stay_zero(self):
        assert np.all(binarize(np.zeros((5, 2)), 0.5) == 0)

    def test_threshold_domain(self):
        for bad in (0.0, 1.0, -0.1, 1.5):
            with pytest.raises(ValueError):
                binarize(np.zeros(3), bad)

    def test_reweighted_detections_never_grow(self, rng):
        for _ in range(100):
            p = rng.random((40, 4))
            s = rng.random(40)
            tau = float(rng.uniform(0.05, 0.95))
            assert np.all(binarize(reweight(p, s), tau) <= binarize(p, tau))


class TestDecodeEvents:
    def test_all_zero_gives_empty(self):
        assert decode_events(np.zeros((100, 2), dtype=np.int8), NAMES) == []

    def test_single_run(self):
        b = np.zeros((100, 1), dtype=np.int8)
        b[10:25, 0] = 1
        events = decode_events(b, ["alpha"])
        assert len(events) == 1
        assert events[0] == EventAnnotation(pytest.approx(0.2), pytest.approx(0.5), "alpha")

    def test_sorted_by_onset_then_label(self):
        b = np.zeros((50, 2), dtype=np.int8)
        b[5:10, 1] = 1
        b[5:8, 0] = 1
        b[20:22, 0] = 1
        events = decode_events(b, NAMES)
        assert [e.label for e in events] == ["alpha", "beta", "alpha"]

    def test_decode_then_rasterize_roundtrip(self, rng):
        for _ in range(200):
            T = int(rng.integers(1, 80))
            C = int(rng.integers(1, 4))
            names = [f"c{i}" for i in range(C)]
            b = (rng.random((T, C)) < 0.25).astype(np.int8)
            events = decode_events(b, names)
            back = rasterize(events, T, names)
            assert np.array_equal(back.values, b)

    def test_rasterize_then_decode_roundtrip(self):
        events = [
            EventAnnotation(0.10, 0.50, "alpha"),
            EventAnnotation(0.30, 0.80, "beta"),
            EventAnnotation(1.00, 1.02, "alpha"),
        ]
        gt = rasterize(events, 100, NAMES)
        decoded = decode_events(gt.values, NAMES)
        expected = sorted(events, key=lambda e: (e.onset, e.label))
        assert len(decoded) == len(expected)
        for d, e in zip(decoded, expected):
            assert d.label == e.label
            assert d.onset == pytest.approx(e.onset)
            assert d.offset == pytest.approx(e.offset)

    def test_shape_vs_names_mismatch(self):
        with pytest.raises(ValueError):
            decode_events(np.zeros((10, 3), dtype=np.int8), NAMES)


class TestMedianSmooth:
    def test_off_path_identity(self):
        b = np.array([[1], [0], [1], [1], [0]], dtype=np.int8)
        assert np.array_equal(median_smooth(b, 1), b)

    def test_removes_single_frame_blip(self):
        b = np.zeros((9, 1), dtype=np.int8)
        b[4, 0] = 1
        assert np.all(median_smooth(b, 3) == 0)

    def test_even_width_rejected(self):
        with pytest.raises(ValueError):
            median_smooth(np.zeros((5, 1), dtype=np.int8), 4)
