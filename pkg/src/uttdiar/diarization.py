"""Per-speaker segment tracks and RTTM interchange.

Times are stored as integer milliseconds so that scoring arithmetic is
exact and RTTM round-trips are stable at 1 ms precision; the public API
speaks seconds.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

from .errors import InvalidInputError, RttmParseError
from .timeline import Timeline


def _normalize_segments(segments: Iterable[tuple[int, int]]) -> tuple[tuple[int, int], ...]:
    """Sort, validate, and merge overlapping or abutting [on, off) ms spans."""
    cleaned = []
    for on, off in segments:
        on, off = int(on), int(off)
        if on < 0:
            raise InvalidInputError(f"segment onset must be >= 0, got {on}")
        if off < on:
            raise InvalidInputError(f"segment [{on}, {off}) has negative duration")
        if off > on:
            cleaned.append((on, off))
    cleaned.sort()
    merged: list[list[int]] = []
    for on, off in cleaned:
        if merged and on <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], off)
        else:
            merged.append([on, off])
    return tuple((on, off) for on, off in merged)


@dataclass(frozen=True)
class Diarization:
    """Who spoke when: label -> sorted, non-overlapping [onset, offset) ms spans."""

    recording_id: str
    speakers: Mapping[str, tuple[tuple[int, int], ...]]

    def __post_init__(self):
        normalized = {}
        for label, segments in self.speakers.items():
            segs = _normalize_segments(segments)
            if segs:
                normalized[label] = segs
        object.__setattr__(self, "speakers", dict(sorted(normalized.items())))

    @classmethod
    def from_seconds(cls, recording_id: str,
                     speakers: Mapping[str, Iterable[tuple[float, float]]]) -> "Diarization":
        """Build from second-based segments, quantized to 1 ms."""
        return cls(recording_id, {
            label: tuple((round(on * 1000), round(off * 1000)) for on, off in segments)
            for label, segments in speakers.items()
        })

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(self.speakers)

    @property
    def is_empty(self) -> bool:
        return not self.speakers

    def segments_seconds(self, label: str) -> list[tuple[float, float]]:
        return [(on / 1000.0, off / 1000.0) for on, off in self.speakers[label]]

    def speaker_time_ms(self) -> int:
        """Total speaker-time (overlap counted once per speaker)."""
        return sum(off - on for segs in self.speakers.values() for on, off in segs)

    def relabeled(self, mapping: Mapping[str, str]) -> "Diarization":
        """Apply a label bijection; labels missing from the map keep their name."""
        return Diarization(self.recording_id, {
            mapping.get(label, label): segs for label, segs in self.speakers.items()
        })


def reference_diarization(timeline: Timeline, recording_id: str) -> Diarization:
    """Ground-truth diarization from a speaker-labeled timeline."""
    segments: dict[str, list[tuple[float, float]]] = {}
    for u in timeline.utterances:
        if u.speaker is None:
            raise InvalidInputError(f"utterance {u.id} has no speaker id")
        segments.setdefault(u.speaker, []).append(
            (u.start / timeline.frame_rate, u.end / timeline.frame_rate)
        )
    return Diarization.from_seconds(recording_id, segments)


def _format_seconds(ms: int) -> str:
    return f"{ms // 1000}.{ms % 1000:03d}"


def write_rttm(diarizations: Diarization | Iterable[Diarization]) -> str:
    """RTTM v1.3 SPEAKER lines, one per segment, sorted by onset per recording."""
    if isinstance(diarizations, Diarization):
        diarizations = [diarizations]
    lines = []
    for d in diarizations:
        rows = []
        for label, segments in d.speakers.items():
            for on, off in segments:
                rows.append((on, off, label))
        rows.sort()
        for on, off, label in rows:
            lines.append(
                f"SPEAKER {d.recording_id} 1 {_format_seconds(on)} "
                f"{_format_seconds(off - on)} <NA> <NA> {label} <NA> <NA>"
            )
    return "\n".join(lines) + ("\n" if lines else "")


def parse_rttm(text: str) -> list[Diarization]:
    """Parse SPEAKER lines into one Diarization per recording.

    Recordings keep first-appearance order. Lines starting with ';;' are
    comments; anything else malformed raises RttmParseError with the
    1-based line number.
    """
    recordings: dict[str, dict[str, list[tuple[int, int]]]] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith(";;"):
            continue
        tokens = line.split()
        if tokens[0] != "SPEAKER":
            raise RttmParseError(lineno, f"expected SPEAKER line, got {tokens[0]!r}")
        if len(tokens) < 9:
            raise RttmParseError(lineno, f"expected >= 9 fields, got {len(tokens)}")
        rec = tokens[1]
        try:
            onset = float(tokens[3])
            duration = float(tokens[4])
        except ValueError as exc:
            raise RttmParseError(lineno, f"bad onset/duration: {exc}") from exc
        if onset < 0:
            raise RttmParseError(lineno, f"negative onset {onset}")
        if duration < 0:
            raise RttmParseError(lineno, f"negative duration {duration}")
        label = tokens[7]
        on_ms = round(onset * 1000)
        off_ms = on_ms + round(duration * 1000)
        recordings.setdefault(rec, {}).setdefault(label, []).append((on_ms, off_ms))
    return [Diarization(rec, speakers) for rec, speakers in recordings.items()]
