"""Synthetic polyphonic soundscape generator.

Every recording is a Brownian-noise background plus 1-9 parametrically
generated events (tones, chirps, noise bursts, click trains, warbling
noise). Audio, annotations and the sampled recipe are all pure functions
of a config and a seed, so whole datasets are reproducible from a single
master seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SAMPLE_RATE = 44100
SCAPE_DURATION = 10.0
FADE_SECONDS = 0.010
MAX_EVENTS = 9

GENERATOR_KINDS = ("tone", "chirp", "noise_burst", "impulse_train", "am_noise")


@dataclass(frozen=True)
class EventClassSpec:
    """One event class: a parametric generator plus sampling ranges."""

    class_id: int
    name: str
    kind: str
    duration_range: tuple[float, float]
    gain_range: tuple[float, float]
    params: dict = field(default_factory=dict)

    def validate(self, scape_duration: float = SCAPE_DURATION) -> None:
        if self.kind not in GENERATOR_KINDS:
            raise ValueError(f"unknown generator kind {self.kind!r}")
        lo, hi = self.duration_range
        if not (0.0 < lo <= hi <= scape_duration):
            raise ValueError(
                f"class {self.name!r}: duration_range {self.duration_range} "
                f"must satisfy 0 < min <= max <= {scape_duration}"
            )
        glo, ghi = self.gain_range
        if not (0.0 < glo <= ghi <= 1.0):
            raise ValueError(f"class {self.name!r}: gain_range must lie in (0, 1]")


@dataclass(frozen=True)
class Placement:
    class_id: int
    onset: float
    duration: float
    gain: float


@dataclass(frozen=True)
class SoundscapeSpec:
    """Declarative recipe for one annotated mixture."""

    seed: int
    placements: tuple[Placement, ...]
    background_gain: float = 0.5
    duration: float = SCAPE_DURATION
    sample_rate: int = SAMPLE_RATE

    def validate(self) -> None:
        if not (1 <= len(self.placements) <= MAX_EVENTS):
            raise ValueError(
                f"spec must place 1..{MAX_EVENTS} events, got {len(self.placements)}"
            )
        for p in self.placements:
            if p.onset < 0 or p.onset + p.duration > self.duration + 1e-9:
                raise ValueError(
                    f"placement {p} does not fit within [0, {self.duration}] s"
                )


@dataclass(frozen=True)
class AudioClip:
    samples: np.ndarray
    sample_rate: int


@dataclass(frozen=True, order=True)
class EventAnnotation:
    onset: float
    offset: float
    label: str


def stable_seed(*parts: int) -> int:
    """Deterministic 64-bit seed derived from integer parts.

    Uses SeedSequence hashing so per-event seeds do not depend on where the
    event sits in a placement list.
    """
    ss = np.random.SeedSequence([int(p) & 0xFFFFFFFF for p in parts])
    return int(ss.generate_state(1, np.uint64)[0])


def gen_brownian_noise(n_samples: int, seed: int) -> np.ndarray:
    """Integrated white noise, de-meaned and peak-normalized to 1.0."""
    if n_samples <= 0:
        raise ValueError("n_samples must be positive")
    rng = np.random.default_rng(seed)
    walk = np.cumsum(rng.standard_normal(n_samples))
    walk -= walk.mean()
    peak = np.max(np.abs(walk))
    if peak > 0:
        walk /= peak
    return walk


def _default(params, key, rng, lo, hi, log=False):
    if key in params:
        return float(params[key])
    rlo, rhi = params.get(key + "_range", (lo, hi))
    if log:
        return float(np.exp(rng.uniform(np.log(rlo), np.log(rhi))))
    return float(rng.uniform(rlo, rhi))


def _gen_tone(n, rng, params, sr):
    f0 = _default(params, "f0", rng, 300.0, 1500.0, log=True)
    t = np.arange(n) / sr
    phase = rng.uniform(0, 2 * np.pi)
    x = np.zeros(n)
    for h, amp in enumerate((1.0, 0.3, 0.15), start=1):
        if h * f0 < 0.45 * sr:
            x += amp * np.sin(2 * np.pi * h * f0 * t + phase * h)
    return x

def _gen_chirp(n, rng, params, sr):
    f_start = _default(params, "f_start", rng, 200.0, 800.0, log=True)
    f_end = _default(params, "f_end", rng, 1200.0, 4000.0, log=True)
    t = np.arange(n) / sr
    dur = n / sr
    phase = 2 * np.pi * (f_start * t + 0.5 * (f_end - f_start) * t ** 2 / dur)
    return np.sin(phase + rng.uniform(0, 2 * np.pi))

def _gen_noise_burst(n, rng, params, sr):
    x = rng.standard_normal(n)
    if params.get("tilt") == "brown":
        # integrated white noise: same 1/f^2 texture as the scape background,
        # so low-gain bursts are genuinely ambiguous
        x = np.cumsum(x)
        x -= x.mean()
    return x

def _gen_impulse_train(n, rng, params, sr):
    rate = _default(params, "rate", rng, 8.0, 25.0)
    click_len = max(8, int(0.004 * sr))
    decay = np.exp(-np.arange(click_len) / (0.001 * sr))
    x = np.zeros(n)
    period = sr / rate
    start = rng.uniform(0, period)
    pos = start
    while pos < n:
        i = int(pos)
        m = min(click_len, n - i)
        x[i : i + m] += rng.standard_normal(m) * decay[:m]
        pos += period
    return x

def _gen_am_noise(n, rng, params, sr):
    mod_rate = _default(params, "mod_rate", rng, 2.0, 8.0)
    t = np.arange(n) / sr
    envelope = 0.5 + 0.5 * np.sin(2 * np.pi * mod_rate * t + rng.uniform(0, 2 * np.pi))
    return rng.standard_normal(n) * envelope


_GENERATORS = {
    "tone": _gen_tone,
    "chirp": _gen_chirp,
    "noise_burst": _gen_noise_burst,
    "impulse_train": _gen_impulse_train,
    "am_noise": _gen_am_noise,
}


def render_event(
    spec: EventClassSpec, duration: float, seed: int, sample_rate: int = SAMPLE_RATE
) -> np.ndarray:
    """Render one event; deterministic per (spec, duration, seed).

    Output is peak-normalized (peak <= 1.0) with 10 ms linear fades so that
    event edges never click.
    """
    lo, hi = spec.duration_range
    if not (lo - 1e-9 <= duration <= hi + 1e-9):
        raise ValueError(
            f"duration {duration} outside {spec.name!r} range [{lo}, {hi}]"
        )
    n = int(round(duration * sample_rate))
    rng = np.random.default_rng(seed)
    x = _GENERATORS[spec.kind](n, rng, spec.params, sample_rate)
    peak = np.max(np.abs(x))
    if peak > 0:
        x = x / peak
    fade = min(int(round(FADE_SECONDS * sample_rate)), n // 2)
    if fade > 0:
        ramp = np.arange(fade) / fade  # starts at exactly 0
        x[:fade] *= ramp
        x[-fade:] *= ramp[::-1]
    return x


def sample_spec(config: "DatasetConfig", rng_seed: int) -> SoundscapeSpec:
    """Draw one soundscape recipe: 1-9 placements that fit in the scape."""
    if not config.classes:
        raise ValueError("dataset config defines no event classes")
    rng = np.random.default_rng(rng_seed)
    n_events = int(rng.integers(1, MAX_EVENTS + 1))
    placements = []
    for _ in range(n_events):
        cls = config.classes[int(rng.integers(len(config.classes)))]
        dlo, dhi = cls.duration_range
        dur = float(rng.uniform(dlo, min(dhi, config.duration)))
        onset = float(rng.uniform(0.0, config.duration - dur))
        gain = float(rng.uniform(*cls.gain_range))
        placements.append(Placement(cls.class_id, onset, dur, gain))
    spec = SoundscapeSpec(
        seed=rng_seed,
        placements=tuple(placements),
        background_gain=config.background_gain,
        duration=config.duration,
        sample_rate=config.sample_rate,
    )
    spec.validate()
    return spec


def compose(
    spec: SoundscapeSpec, classes: list[EventClassSpec]
) -> tuple[AudioClip, list[EventAnnotation]]:
    """Mix background + placed events; annotations mirror the placements.

    If the mix peak exceeds 1.0 the whole mixture is rescaled by the global
    peak, preserving relative event energies.
    """
    spec.validate()
    by_id = {c.class_id: c for c in classes}
    n = int(round(spec.duration * spec.sample_rate))
    mix = spec.background_gain * gen_brownian_noise(
        n, stable_seed(spec.seed, 0xB6_0000)
    )
    annotations = []
    for p in spec.placements:
        if p.class_id not in by_id:
            raise KeyError(f"placement references unknown class_id {p.class_id}")
        cls = by_id[p.class_id]
        seed = stable_seed(
            spec.seed,
            p.class_id,
            round(p.onset * spec.sample_rate),
            round(p.duration * spec.sample_rate),
            round(p.gain * 1e9),
        )
        y = render_event(cls, p.duration, seed, spec.sample_rate)
        start = int(round(p.onset * spec.sample_rate))
        y = y[: n - start]
        mix[start : start + len(y)] += p.gain * y
        annotations.append(
            EventAnnotation(p.onset, min(p.onset + p.duration, spec.duration), cls.name)
        )
    peak = np.max(np.abs(mix))
    if peak > 1.0:
        mix = mix / peak
    return AudioClip(mix, spec.sample_rate), annotations


DEFAULT_CLASSES = (
    EventClassSpec(0, "tone", "tone", (0.5, 2.5), (0.25, 0.9)),
    EventClassSpec(1, "chirp", "chirp", (0.4, 2.0), (0.25, 0.9)),
    EventClassSpec(2, "noise_burst", "noise_burst", (0.2, 1.2), (0.25, 0.9)),
    EventClassSpec(3, "impulse_train", "impulse_train", (0.5, 2.5), (0.25, 0.9)),
    EventClassSpec(4, "am_noise", "am_noise", (0.8, 3.0), (0.25, 0.9)),
)


@dataclass(frozen=True)
class DatasetConfig:
    """JSON-loadable recipe for a full train/val/test dataset."""

    classes: tuple[EventClassSpec, ...] = DEFAULT_CLASSES
    splits: dict = field(default_factory=lambda: {"train": 600, "val": 200, "test": 200})
    master_seed: int = 1
    duration: float = SCAPE_DURATION
    sample_rate: int = SAMPLE_RATE
    background_gain: float = 0.5

    def validate(self) -> None:
        if not self.classes:
            raise ValueError("dataset config defines no event classes")
        names = [c.name for c in self.classes]
        if len(set(names)) != len(names):
            raise ValueError("class names must be unique")
        for c in self.classes:
            c.validate(self.duration)

    @property
    def class_names(self) -> list[str]:
        return [c.name for c in self.classes]

    def to_dict(self) -> dict:
        return {
            "classes": [
                {
                    "class_id": c.class_id,
                    "name": c.name,
                    "kind": c.kind,
                    "duration_range": list(c.duration_range),
                    "gain_range": list(c.gain_range),
                    "params": dict(c.params),
                }
                for c in self.classes
            ],
            "splits": dict(self.splits),
            "master_seed": self.master_seed,
            "duration": self.duration,
            "sample_rate": self.sample_rate,
            "background_gain": self.background_gain,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetConfig":
        classes = tuple(
            EventClassSpec(
                class_id=c["class_id"],
                name=c["name"],
                kind=c["kind"],
                duration_range=tuple(c["duration_range"]),
                gain_range=tuple(c["gain_range"]),
                params=c.get("params", {}),
            )
            for c in d.get("classes", [])
        ) or DEFAULT_CLASSES
        cfg = cls(
            classes=classes,
            splits=dict(d.get("splits", {"train": 600, "val": 200, "test": 200})),
            master_seed=int(d.get("master_seed", 1)),
            duration=float(d.get("duration", SCAPE_DURATION)),
            sample_rate=int(d.get("sample_rate", SAMPLE_RATE)),
            background_gain=float(d.get("background_gain", 0.5)),
        )
        cfg.validate()
        return cfg


SPLIT_TAGS = {"train": 1, "val": 2, "test": 3}


def scape_seed(master_seed: int, split: str, index: int) -> int:
    return stable_seed(master_seed, SPLIT_TAGS[split], index)
