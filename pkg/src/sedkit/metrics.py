"""Segment-based and event-based detection metrics.

Both modes accumulate micro-averaged intermediate statistics (TP/FP/FN and
substitution/deletion/insertion counts) per file and reduce them with
`micro_aggregate`. Segment mode compares class activity in fixed-length
windows; event mode matches instances by onset within a time collar,
ignoring offsets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .synth import EventAnnotation

SEGMENT_LENGTH = 1.0
ONSET_COLLAR = 0.25


@dataclass
class IntermediateStats:
    mode: str  # "segment" or "event"
    tp: int = 0
    fp: int = 0
    fn: int = 0
    substitutions: int = 0
    deletions: int = 0
    insertions: int = 0
    n_ref: int = 0


@dataclass
class MetricReport:
    mode: str | None
    f1: float
    precision: float
    recall: float
    error_rate: float
    stats: IntermediateStats
    segment_length: float | None = None
    collar: float | None = None

    def to_dict(self) -> dict:
        d = {
            "mode": self.mode,
            "f1": self.f1,
            "precision": self.precision,
            "recall": self.recall,
            "error_rate": self.error_rate,
            "tp": self.stats.tp,
            "fp": self.stats.fp,
            "fn": self.stats.fn,
            "substitutions": self.stats.substitutions,
            "deletions": self.stats.deletions,
            "insertions": self.stats.insertions,
            "n_ref": self.stats.n_ref,
        }
        if self.segment_length is not None:
            d["segment_length"] = self.segment_length
        if self.collar is not None:
            d["collar"] = self.collar
        return d


def _check_within(events, file_duration, who):
    for e in events:
        if e.onset < 0 or e.offset > file_duration + 1e-9:
            raise ValueError(
                f"{who} event ({e.onset}, {e.offset}, {e.label!r}) outside "
                f"the {file_duration} s file"
            )


def _check_sorted(events, who):
    onsets = [e.onset for e in events]
    if any(a > b for a, b in zip(onsets, onsets[1:])):
        raise ValueError(f"{who} events must be sorted by onset")


def segment_eval(
    ref: list[EventAnnotation],
    sys: list[EventAnnotation],
    seg_len: float = SEGMENT_LENGTH,
    file_duration: float = 10.0,
) -> IntermediateStats:
    """Per-file segment statistics: a class is active in a segment iff any
    of its events overlaps the segment with nonzero length."""
    _check_within(ref, file_duration, "reference")
    _check_within(sys, file_duration, "system")
    classes = sorted({e.label for e in ref} | {e.label for e in sys})
    n_seg = int(np.ceil(file_duration / seg_len - 1e-9))
    ref_act = np.zeros((n_seg, len(classes)), dtype=bool)
    sys_act = np.zeros((n_seg, len(classes)), dtype=bool)
    col = {name: i for i, name in enumerate(classes)}
    for act, events in ((ref_act, ref), (sys_act, sys)):
        for e in events:
            first = max(0, int(np.floor(e.onset / seg_len + 1e-9)))
            last = min(n_seg, int(np.ceil(e.offset / seg_len - 1e-9)))
            act[first:last, col[e.label]] = True

    tp_seg = (ref_act & sys_act).sum(axis=1)
    fn_seg = (ref_act & ~sys_act).sum(axis=1)
    fp_seg = (~ref_act & sys_act).sum(axis=1)
    s_seg = np.minimum(fn_seg, fp_seg)
    return IntermediateStats(
        mode="segment",
        tp=int(tp_seg.sum()),
        fp=int(fp_seg.sum()),
        fn=int(fn_seg.sum()),
        substitutions=int(s_seg.sum()),
        deletions=int((fn_seg - s_seg).sum()),
        insertions=int((fp_seg - s_seg).sum()),
        n_ref=int(ref_act.sum()),
    )


def event_eval(
    ref: list[EventAnnotation],
    sys: list[EventAnnotation],
    collar: float = ONSET_COLLAR,
) -> IntermediateStats:
    """Per-file event statistics with greedy earliest-first onset matching.

    A system event is a TP when its onset falls within the collar of an
    unmatched reference event of the same class. Leftover system/reference
    events that still satisfy the onset condition but carry different
    labels pair up as substitutions (again greedily, in onset order).
    """
    _check_sorted(ref, "reference")
    _check_sorted(sys, "system")
    ref_matched = [False] * len(ref)
    sys_matched = [False] * len(sys)
    tp = 0
    for j, s in enumerate(sys):
        for i, r in enumerate(ref):
            if ref_matched[i] or r.label != s.label:
                continue
            if abs(s.onset - r.onset) <= collar + 1e-12:
                ref_matched[i] = True
                sys_matched[j] = True
                tp += 1
                break
    subs = 0
    for j, s in enumerate(sys):
        if sys_matched[j]:
            continue
        for i, r in enumerate(ref):
            if ref_matched[i] or r.label == s.label:
                continue
            if abs(s.onset - r.onset) <= collar + 1e-12:
                ref_matched[i] = True
                sys_matched[j] = True
                subs += 1
                break
    fn = len(ref) - tp
    fp = len(sys) - tp
    return IntermediateStats(
        mode="event",
        tp=tp,
        fp=fp,
        fn=fn,
        substitutions=subs,
        deletions=fn - subs,
        insertions=fp - subs,
        n_ref=len(ref),
    )


def micro_aggregate(stats: list[IntermediateStats]) -> MetricReport:
    """Sum intermediate statistics across files, then compute the ratios.

    Zero denominators yield 0 for P/R/F1; the error rate is 0 when there is
    no reference and nothing spurious, +inf when insertions have no
    reference to count against.
    """
    modes = {s.mode for s in stats}
    if len(modes) > 1:
        raise ValueError(f"cannot aggregate mixed modes {sorted(modes)}")
    mode = modes.pop() if modes else None
    total = IntermediateStats(mode=mode or "segment")
    for s in stats:
        total.tp += s.tp
        total.fp += s.fp
        total.fn += s.fn
        total.substitutions += s.substitutions
        total.deletions += s.deletions
        total.insertions += s.insertions
        total.n_ref += s.n_ref
    precision = 100.0 * total.tp / (total.tp + total.fp) if total.tp + total.fp else 0.0
    recall = 100.0 * total.tp / (total.tp + total.fn) if total.tp + total.fn else 0.0
    denom = 2 * total.tp + total.fp + total.fn
    f1 = 200.0 * total.tp / denom if denom else 0.0
    sdi = total.substitutions + total.deletions + total.insertions
    if total.n_ref:
        error_rate = sdi / total.n_ref
    else:
        error_rate = 0.0 if sdi == 0 else float("inf")
    return MetricReport(
        mode=mode,
        f1=f1,
        precision=precision,
        recall=recall,
        error_rate=error_rate,
        stats=total,
    )


def evaluate_corpus(
    ref_by_file: dict[str, list[EventAnnotation]],
    sys_by_file: dict[str, list[EventAnnotation]],
    mode: str,
    seg_len: float = SEGMENT_LENGTH,
    collar: float = ONSET_COLLAR,
    file_duration: float = 10.0,
) -> MetricReport:
    """Score a whole corpus; files present only in `sys_by_file` are an error."""
    extra = sorted(set(sys_by_file) - set(ref_by_file))
    if extra:
        raise ValueError(f"system output for unknown files: {extra}")
    per_file = []
    for file_id in sorted(ref_by_file):
        ref = ref_by_file[file_id]
        sys = sys_by_file.get(file_id, [])
        if mode == "segment":
            per_file.append(segment_eval(ref, sys, seg_len, file_duration))
        elif mode == "event":
            per_file.append(event_eval(ref, sys, collar))
        else:
            raise ValueError(f"unknown mode {mode!r}")
    report = micro_aggregate(per_file)
    if mode == "segment":
        report.segment_length = seg_len
        report.mode = report.mode or "segment"
    else:
        report.collar = collar
        report.mode = report.mode or "event"
    return report


def format_report(report: MetricReport) -> str:
    """Aligned plain-text rendering of one report."""
    s = report.stats
    rows = [
        ("mode", report.mode or "-"),
        ("F1 (%)", f"{report.f1:.2f}"),
        ("precision (%)", f"{report.precision:.2f}"),
        ("recall (%)", f"{report.recall:.2f}"),
        ("error rate", f"{report.error_rate:.4f}"),
        ("TP / FP / FN", f"{s.tp} / {s.fp} / {s.fn}"),
        ("S / D / I", f"{s.substitutions} / {s.deletions} / {s.insertions}"),
        ("N reference", f"{s.n_ref}"),
    ]
    width = max(len(k) for k, _ in rows)
    return "\n".join(f"{k:<{width}}  {v}" for k, v in rows)
