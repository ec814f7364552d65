"""Log-mel front end: 40 normalized bands at a 20 ms hop.

A 10 s, 44.1 kHz recording maps to exactly 500 frames: the signal is
reflection-padded by half a window, framed every `hop` samples, then the
frame count is truncated to ceil(N / hop).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

N_FFT = 2048
HOP = 882
N_MELS = 40
SAMPLE_RATE = 44100
LOG_FLOOR = 1e-10


@dataclass(frozen=True)
class Spectrogram:
    magnitudes: np.ndarray  # (bins, frames), nonnegative
    bin_hz: float
    frame_hop: float


@dataclass(frozen=True)
class FeatureMatrix:
    values: np.ndarray  # (n_mels, frames) in [0, 1]
    frame_hop: float


def stft_magnitude(
    samples,
    n_fft: int = N_FFT,
    hop: int = HOP,
    sample_rate: int = SAMPLE_RATE,
) -> Spectrogram:
    """Hann-windowed magnitude STFT with ceil(N/hop) frames."""
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("samples must be a 1-D sequence")
    if x.size < n_fft:
        raise ValueError(f"input too short: {x.size} samples < one {n_fft} window")
    n_frames = -(-x.size // hop)
    pad = n_fft // 2
    xp = np.pad(x, pad, mode="reflect")
    starts = np.arange(n_frames) * hop
    idx = starts[:, None] + np.arange(n_fft)[None, :]
    window = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n_fft) / n_fft)
    frames = xp[idx] * window
    mags = np.abs(np.fft.rfft(frames, axis=1)).T
    return Spectrogram(mags, bin_hz=sample_rate / n_fft, frame_hop=hop / sample_rate)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(
    n_mels: int = N_MELS,
    sample_rate: int = SAMPLE_RATE,
    n_fft: int = N_FFT,
    fmin: float = 0.0,
    fmax: float | None = None,
) -> np.ndarray:
    """Triangular mel filters, (n_mels, n_fft//2 + 1), unit peak."""
    if n_mels < 1:
        raise ValueError("n_mels must be >= 1")
    if fmax is None:
        fmax = sample_rate / 2.0
    if fmax > sample_rate / 2.0:
        raise ValueError(f"fmax {fmax} exceeds Nyquist {sample_rate / 2.0}")
    corners = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    bin_freqs = np.arange(n_fft // 2 + 1) * (sample_rate / n_fft)
    fb = np.zeros((n_mels, bin_freqs.size))
    for i in range(n_mels):
        f_lo, f_c, f_hi = corners[i], corners[i + 1], corners[i + 2]
        rising = (bin_freqs - f_lo) / (f_c - f_lo)
        falling = (f_hi - bin_freqs) / (f_hi - f_c)
        fb[i] = np.maximum(0.0, np.minimum(rising, falling))
    return fb


def filter_centers_hz(n_mels: int = N_MELS, fmin: float = 0.0, fmax: float = SAMPLE_RATE / 2.0):
    corners = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    return corners[1:-1]


def log_mel_normalize(spec: Spectrogram, fb: np.ndarray) -> FeatureMatrix:
    """Log filterbank energies, min-max scaled to [0, 1] over the recording.

    Power-spectrum energies with a 1e-10 log floor; a constant (e.g. silent)
    recording maps to all zeros. Global min-max makes the result invariant
    to the input's overall gain.
    """
    if fb.shape[1] != spec.magnitudes.shape[0]:
        raise ValueError(
            f"filterbank expects {fb.shape[1]} bins, spectrogram has "
            f"{spec.magnitudes.shape[0]}"
        )
    energies = fb @ (spec.magnitudes ** 2)
    v = np.log(energies + LOG_FLOOR)
    lo, hi = v.min(), v.max()
    if hi > lo:
        values = (v - lo) / (hi - lo)
    else:
        values = np.zeros_like(v)
    return FeatureMatrix(values, spec.frame_hop)


def extract_features(samples, sample_rate: int = SAMPLE_RATE) -> FeatureMatrix:
    """Raw audio -> normalized 40xT log-mel features (T=500 for 10 s)."""
    spec = stft_magnitude(samples, sample_rate=sample_rate)
    fb = mel_filterbank(sample_rate=sample_rate)
    return log_mel_normalize(spec, fb)
