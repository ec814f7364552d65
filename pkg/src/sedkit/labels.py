"""Frame supervision targets from strong annotations.

A frame is active for a class iff an event of that class overlaps the
frame's half-open interval [i*hop, (i+1)*hop) with nonzero length; this
rule is exactly inverted by run-length decoding on frame-aligned data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .synth import EventAnnotation

FRAME_HOP = 0.02
_SLOP = 1e-9  # absorbs binary-representation noise in second-valued times


@dataclass(frozen=True)
class FrameLabelMatrix:
    values: np.ndarray  # (T, C) in {0, 1}
    class_names: tuple[str, ...]
    frame_hop: float = FRAME_HOP


def rasterize(
    events: list[EventAnnotation],
    n_frames: int,
    class_names: list[str],
    frame_hop: float = FRAME_HOP,
) -> FrameLabelMatrix:
    """Strong annotations -> binary (T, C) frame-activity matrix."""
    col = {name: i for i, name in enumerate(class_names)}
    values = np.zeros((n_frames, len(class_names)), dtype=np.int8)
    horizon = n_frames * frame_hop
    for e in events:
        if e.label not in col:
            raise ValueError(f"unknown label {e.label!r}")
        if e.onset < 0 or e.offset <= e.onset:
            raise ValueError(f"bad event times ({e.onset}, {e.offset})")
        if e.offset > horizon + _SLOP:
            raise ValueError(f"event ends at {e.offset} s, past {horizon} s")
        first = max(0, int(np.floor(e.onset / frame_hop + _SLOP)))
        last = min(n_frames, int(np.ceil(e.offset / frame_hop - _SLOP)))
        values[first:last, col[e.label]] = 1
    return FrameLabelMatrix(values, tuple(class_names), frame_hop)


def derive_sad(gt: FrameLabelMatrix | np.ndarray) -> np.ndarray:
    """Class-agnostic activity target: OR-reduction across classes."""
    values = gt.values if isinstance(gt, FrameLabelMatrix) else np.asarray(gt)
    return (values != 0).any(axis=1).astype(np.int8)
