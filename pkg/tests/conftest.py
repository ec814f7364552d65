import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sedkit.synth import EventAnnotation


def random_event_lists(rng, max_events=6, n_classes=3, file_duration=10.0):
    """A (ref, sys) pair of small event lists with realistic overlap:
    sys is ref with onset jitter, drops, relabels, and spurious extras."""
    labels = [f"class_{i}" for i in range(n_classes)]
    ref = []
    for _ in range(int(rng.integers(0, max_events + 1))):
        onset = float(rng.uniform(0.0, file_duration - 0.6))
        dur = float(rng.uniform(0.2, 2.0))
        ref.append(
            EventAnnotation(
                onset,
                min(onset + dur, file_duration),
                labels[int(rng.integers(n_classes))],
            )
        )
    sys = []
    for e in ref:
        roll = rng.random()
        if roll < 0.25:
            continue  # deletion
        onset = float(np.clip(e.onset + rng.uniform(-0.4, 0.4), 0.0, file_duration - 0.1))
        label = e.label if rng.random() > 0.3 else labels[int(rng.integers(n_classes))]
        sys.append(
            EventAnnotation(onset, min(onset + (e.offset - e.onset), file_duration), label)
        )
    for _ in range(int(rng.integers(0, 3))):  # insertions
        onset = float(rng.uniform(0.0, file_duration - 0.5))
        sys.append(
            EventAnnotation(
                onset,
                min(onset + float(rng.uniform(0.2, 1.5)), file_duration),
                labels[int(rng.integers(n_classes))],
            )
        )
    ref.sort(key=lambda e: (e.onset, e.label))
    sys.sort(key=lambda e: (e.onset, e.label))
    return ref, sys


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240901)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
