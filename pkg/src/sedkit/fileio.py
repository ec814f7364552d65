"""On-disk formats: 16-bit mono WAV, TSV annotations, flat float32 matrices."""

from __future__ import annotations

import json
import struct
import wave
from pathlib import Path

import numpy as np

from .synth import EventAnnotation


def write_wav(path, samples, sample_rate: int = 44100) -> None:
    """Write [-1, 1] float samples as RIFF PCM, 16-bit signed LE, mono."""
    x = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    pcm = np.round(x * 32767.0).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(sample_rate)
        w.writeframes(pcm.tobytes())


def read_wav(path) -> tuple[np.ndarray, int]:
    """Read a mono 16-bit WAV back to float samples in [-1, 1]."""
    with wave.open(str(path), "rb") as w:
        if w.getnchannels() != 1 or w.getsampwidth() != 2:
            raise ValueError(f"{path}: expected mono 16-bit PCM")
        sr = w.getframerate()
        raw = w.readframes(w.getnframes())
    pcm = np.frombuffer(raw, dtype="<i2")
    return pcm.astype(np.float64) / 32767.0, sr


def write_annotations(path, events: list[EventAnnotation]) -> None:
    """One event per line, onset<TAB>offset<TAB>label, 6 decimals, onset order."""
    lines = [
        f"{e.onset:.6f}\t{e.offset:.6f}\t{e.label}\n"
        for e in sorted(events, key=lambda e: (e.onset, e.offset, e.label))
    ]
    Path(path).write_text("".join(lines), encoding="utf-8")


def read_annotations(path) -> list[EventAnnotation]:
    events = []
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ValueError(f"{path}:{line_no}: expected onset<TAB>offset<TAB>label")
        events.append(EventAnnotation(float(parts[0]), float(parts[1]), parts[2]))
    return events


def save_matrix(path, values, header: dict | None = None) -> None:
    """Flat little-endian float32, row-major, with a sidecar JSON header."""
    values = np.asarray(values)
    path = Path(path)
    np.ascontiguousarray(values, dtype="<f4").tofile(path)
    meta = {"rows": int(values.shape[0]),
            "cols": int(values.shape[1]) if values.ndim > 1 else 1}
    if header:
        meta.update(header)
    path.with_suffix(".json").write_text(
        json.dumps(meta, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_matrix(path) -> tuple[np.ndarray, dict]:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text(encoding="utf-8"))
    flat = np.fromfile(path, dtype="<f4")
    rows, cols = meta["rows"], meta["cols"]
    if flat.size != rows * cols:
        raise ValueError(f"{path}: blob has {flat.size} values, header says {rows}x{cols}")
    values = flat.reshape(rows, cols) if cols > 1 else flat
    return values.astype(np.float64), meta


def save_features(path, feature_values, frame_hop: float, sr: int = 44100) -> None:
    """Feature file: 40xT float32 blob + sidecar {n_mels, T, frame_hop, sr}."""
    feature_values = np.asarray(feature_values)
    save_matrix(
        path,
        feature_values,
        {
            "n_mels": int(feature_values.shape[0]),
            "T": int(feature_values.shape[1]),
            "frame_hop": frame_hop,
            "sr": sr,
        },
    )


def load_features(path) -> tuple[np.ndarray, dict]:
    values, meta = load_matrix(path)
    if values.shape != (meta["n_mels"], meta["T"]):
        raise ValueError(f"{path}: shape {values.shape} disagrees with header")
    return values, meta
