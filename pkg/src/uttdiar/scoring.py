"""Overlap-aware diarization error rate with a boundary collar.

Frames within +-collar of any reference segment boundary are excluded from
scoring (reference boundaries only). On the remaining time the reference
and hypothesis speaker sets are compared per instant under the optimal
speaker mapping: missed speech where the reference has more simultaneous
speakers than the hypothesis, false alarm for the converse, and confusion
where matched capacity carries the wrong speaker. All arithmetic is exact
on integer milliseconds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .diarization import Diarization, _normalize_segments
from .errors import InvalidInputError, UndefinedDerError

Segments = tuple[tuple[int, int], ...]


def _subtract(segments: Segments, holes: Segments) -> Segments:
    """Remove hole intervals from segments (all [on, off) ms)."""
    out = []
    for on, off in segments:
        cur = on
        for h_on, h_off in holes:
            if h_off <= cur:
                continue
            if h_on >= off:
                break
            if h_on > cur:
                out.append((cur, min(h_on, off)))
            cur = max(cur, h_off)
            if cur >= off:
                break
        if cur < off:
            out.append((cur, off))
    return tuple(out)


def _intersection_ms(a: Segments, b: Segments) -> int:
    total = 0
    i = j = 0
    while i < len(a) and j < len(b):
        lo = max(a[i][0], b[j][0])
        hi = min(a[i][1], b[j][1])
        if hi > lo:
            total += hi - lo
        if a[i][1] <= b[j][1]:
            i += 1
        else:
            j += 1
    return total


def _collar_holes(reference: Diarization, collar_ms: int) -> Segments:
    if collar_ms == 0:
        return ()
    holes = []
    for segments in reference.speakers.values():
        for on, off in segments:
            holes.append((max(0, on - collar_ms), on + collar_ms))
            holes.append((max(0, off - collar_ms), off + collar_ms))
    return _normalize_segments(holes)


def _masked(d: Diarization, holes: Segments) -> Diarization:
    if not holes:
        return d
    return Diarization(d.recording_id, {
        label: _subtract(segments, holes) for label, segments in d.speakers.items()
    })


@dataclass(frozen=True)
class ErrorTimes:
    """Exact millisecond error accumulators; the basis of every DerReport."""

    miss_ms: int
    falarm_ms: int
    confusion_ms: int
    ref_ms: int

    def __add__(self, other: "ErrorTimes") -> "ErrorTimes":
        return ErrorTimes(
            self.miss_ms + other.miss_ms,
            self.falarm_ms + other.falarm_ms,
            self.confusion_ms + other.confusion_ms,
            self.ref_ms + other.ref_ms,
        )


ZERO_TIMES = ErrorTimes(0, 0, 0, 0)


@dataclass(frozen=True)
class DerReport:
    """DER and its breakdown, in percentage points of scored reference speech."""

    der: float
    miss: float
    false_alarm: float
    confusion: float
    scored_time: float

    @classmethod
    def from_times(cls, times: ErrorTimes) -> "DerReport":
        if times.ref_ms == 0:
            raise UndefinedDerError("scored reference speech time is zero")
        miss = 100.0 * times.miss_ms / times.ref_ms
        falarm = 100.0 * times.falarm_ms / times.ref_ms
        confusion = 100.0 * times.confusion_ms / times.ref_ms
        return cls(
            der=miss + falarm + confusion,
            miss=miss,
            false_alarm=falarm,
            confusion=confusion,
            scored_time=times.ref_ms / 1000.0,
        )

    def to_dict(self) -> dict:
        return {
            "der": self.der,
            "miss": self.miss,
            "false_alarm": self.false_alarm,
            "confusion": self.confusion,
            "scored_time": self.scored_time,
        }


def map_speakers(reference: Diarization, hypothesis: Diarization) -> dict[str, str]:
    """Optimal reference->hypothesis label mapping by total overlap duration.

    Maximum-weight bipartite matching (Hungarian method); pairs with zero
    overlap stay unmapped, as do labels left over on either side.
    """
    ref_labels = list(reference.labels)
    hyp_labels = list(hypothesis.labels)
    if not ref_labels or not hyp_labels:
        return {}
    weights = np.zeros((len(ref_labels), len(hyp_labels)), dtype=np.int64)
    for i, r in enumerate(ref_labels):
        for j, h in enumerate(hyp_labels):
            weights[i, j] = _intersection_ms(reference.speakers[r],
                                             hypothesis.speakers[h])
    rows, cols = linear_sum_assignment(-weights)
    return {
        ref_labels[i]: hyp_labels[j]
        for i, j in zip(rows, cols)
        if weights[i, j] > 0
    }


def _error_times(reference: Diarization, hypothesis: Diarization,
                 mapping: dict[str, str]) -> ErrorTimes:
    events: dict[int, list[tuple[int, int, str]]] = {}
    for side, d in ((0, reference), (1, hypothesis)):
        for label, segments in d.speakers.items():
            for on, off in segments:
                events.setdefault(on, []).append((side, 1, label))
                events.setdefault(off, []).append((side, -1, label))
    times = sorted(events)
    active_ref: set[str] = set()
    active_hyp: set[str] = set()
    miss = falarm = confusion = ref_total = 0
    for idx, t in enumerate(times):
        for side, delta, label in events[t]:
            target = active_ref if side == 0 else active_hyp
            if delta == 1:
                target.add(label)
            else:
                target.discard(label)
        if idx + 1 == len(times):
            break
        length = times[idx + 1] - t
        n_ref = len(active_ref)
        n_hyp = len(active_hyp)
        if n_ref == 0 and n_hyp == 0:
            continue
        n_correct = sum(1 for r in active_ref if mapping.get(r) in active_hyp)
        ref_total += n_ref * length
        miss += max(0, n_ref - n_hyp) * length
        falarm += max(0, n_hyp - n_ref) * length
        confusion += (min(n_ref, n_hyp) - n_correct) * length
    return ErrorTimes(miss, falarm, confusion, ref_total)


def score_error_times(reference: Diarization, hypothesis: Diarization,
                      collar: float = 0.25) -> ErrorTimes:
    """Collar-excluded error times; the mapping is optimized on scored time."""
    if reference.recording_id != hypothesis.recording_id:
        raise InvalidInputError(
            f"recording ids differ: {reference.recording_id!r} vs "
            f"{hypothesis.recording_id!r}"
        )
    if collar < 0:
        raise InvalidInputError("collar must be >= 0")
    holes = _collar_holes(reference, round(collar * 1000))
    ref = _masked(reference, holes)
    hyp = _masked(hypothesis, holes)
    mapping = map_speakers(ref, hyp)
    return _error_times(ref, hyp, mapping)


def score_der(reference: Diarization, hypothesis: Diarization,
              collar: float = 0.25) -> DerReport:
    """DER with MI/FA/CF breakdown at the given collar."""
    return DerReport.from_times(score_error_times(reference, hypothesis, collar))


def score_corpus(references: list[Diarization],
                 hypotheses: dict[str, Diarization], collar: float = 0.25
                 ) -> tuple[dict[str, DerReport | None], DerReport, list[str]]:
    """Score a corpus; the aggregate is time-weighted (summed raw times).

    A reference recording without a hypothesis is scored against an empty
    one (all miss) with a warning. Recordings whose scored reference time is
    zero get a None report but still contribute their times. Hypothesis
    recordings without a reference are ignored with a warning.
    """
    warnings: list[str] = []
    reports: dict[str, DerReport | None] = {}
    total = ZERO_TIMES
    ref_ids = set()
    for reference in references:
        rec = reference.recording_id
        ref_ids.add(rec)
        hypothesis = hypotheses.get(rec)
        if hypothesis is None:
            warnings.append(f"no hypothesis for recording {rec!r}; scoring as all-miss")
            hypothesis = Diarization(rec, {})
        times = score_error_times(reference, hypothesis, collar)
        total = total + times
        if times.ref_ms == 0:
            warnings.append(f"recording {rec!r} has zero scored reference speech")
            reports[rec] = None
        else:
            reports[rec] = DerReport.from_times(times)
    for rec in sorted(set(hypotheses) - ref_ids):
        warnings.append(f"hypothesis recording {rec!r} has no reference; ignored")
    return reports, DerReport.from_times(total), warnings
