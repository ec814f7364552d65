"""Posteriogram post-processing: activity re-weighting, thresholding,
run-length decoding back to event lists."""

from __future__ import annotations

import numpy as np

from .labels import FRAME_HOP
from .synth import EventAnnotation


def reweight(p_sed: np.ndarray, p_sad: np.ndarray) -> np.ndarray:
    """Scale every class posterior by the frame's activity posterior.

    The activity vector is broadcast across classes, i.e. repeated into a
    (T, C) matrix and combined by Hadamard product.
    """
    p_sed = np.asarray(p_sed, dtype=np.float64)
    p_sad = np.asarray(p_sad, dtype=np.float64)
    if p_sad.ndim != 1 or p_sed.shape[0] != p_sad.shape[0]:
        raise ValueError(
            f"frame counts differ: SED {p_sed.shape} vs SAD {p_sad.shape}"
        )
    return p_sed * p_sad[:, None]


def binarize(p: np.ndarray, threshold: float) -> np.ndarray:
    """value >= threshold -> 1, else 0. Threshold must lie in (0, 1)."""
    if not (0.0 < threshold < 1.0):
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    return (np.asarray(p) >= threshold).astype(np.int8)


def median_smooth(binary: np.ndarray, width: int) -> np.ndarray:
    """Optional per-class median filter over frames; off in all default paths."""
    if width < 1 or width % 2 == 0:
        raise ValueError("width must be a positive odd number")
    if width == 1:
        return np.asarray(binary, dtype=np.int8).copy()
    b = np.atleast_2d(np.asarray(binary, dtype=np.int8).T).T
    half = width // 2
    padded = np.pad(b, ((half, half), (0, 0)), mode="edge")
    out = np.empty_like(b)
    for t in range(b.shape[0]):
        out[t] = (padded[t : t + width].sum(axis=0) > half).astype(np.int8)
    return out.reshape(np.asarray(binary).shape)


def _runs(column: np.ndarray):
    """Maximal runs of ones as (first_frame, last_frame) inclusive pairs."""
    padded = np.concatenate(([0], column.astype(np.int8), [0]))
    edges = np.flatnonzero(np.diff(padded))
    return zip(edges[0::2], edges[1::2] - 1)


def decode_events(
    binary: np.ndarray,
    class_names: list[str],
    frame_hop: float = FRAME_HOP,
) -> list[EventAnnotation]:
    """Binary (T, C) matrix -> event list; run over frames [i, j] becomes
    the event (i*hop, (j+1)*hop)."""
    b = np.asarray(binary)
    if b.ndim == 1:
        b = b[:, None]
    if b.shape[1] != len(class_names):
        raise ValueError(f"{b.shape[1]} columns but {len(class_names)} class names")
    events = []
    for c, name in enumerate(class_names):
        for first, last in _runs(b[:, c]):
            events.append(
                EventAnnotation(first * frame_hop, (last + 1) * frame_hop, name)
            )
    events.sort(key=lambda e: (e.onset, e.label))
    return events
