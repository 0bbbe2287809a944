"""Utterance timelines, frame-level label grids, and the utterance overlap graph.

Frames are the canonical time unit everywhere in this module; ``frame_rate``
only matters when converting to/from seconds at I/O boundaries. Intervals are
half-open ``[start, end)``: two utterances overlap iff their intervals
intersect, so utterances that merely touch (``end == start``) do not overlap.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .errors import ConstraintViolationError, InvalidInputError

VAD = "vad"
UBD = "ubd"
LABEL_KINDS = (VAD, UBD)


def _check_kind(kind: str) -> str:
    if kind not in LABEL_KINDS:
        raise InvalidInputError(f"kind must be one of {LABEL_KINDS}, got {kind!r}")
    return kind


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.ascontiguousarray(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Utterance:
    """A labeled time interval ``[start, end)`` in frames.

    ``id`` is a 1-based index that is unique and dense within a Timeline.
    ``speaker`` is optional; ground-truth timelines carry it, decoded ones
    usually do not.
    """

    id: int
    start: int
    end: int
    speaker: Optional[str] = None

    def __post_init__(self):
        if self.id < 1:
            raise InvalidInputError(f"utterance id must be >= 1, got {self.id}")
        if self.start < 0:
            raise InvalidInputError(f"utterance start must be >= 0, got {self.start}")
        if self.end <= self.start:
            raise InvalidInputError(
                f"utterance [{self.start}, {self.end}) must have positive duration"
            )

    @property
    def duration(self) -> int:
        return self.end - self.start

    def overlaps(self, other: "Utterance") -> bool:
        return self.start < other.end and other.start < self.end


@dataclass(frozen=True)
class Timeline:
    """An ordered collection of utterances over ``total_frames`` frames."""

    utterances: tuple[Utterance, ...]
    total_frames: int
    frame_rate: float

    def __init__(self, utterances: Iterable[Utterance], total_frames: int,
                 frame_rate: float = 100.0):
        object.__setattr__(self, "utterances", tuple(utterances))
        object.__setattr__(self, "total_frames", int(total_frames))
        object.__setattr__(self, "frame_rate", float(frame_rate))
        self._validate()

    def _validate(self):
        if self.total_frames < 0:
            raise InvalidInputError("total_frames must be >= 0")
        if self.frame_rate <= 0:
            raise InvalidInputError("frame_rate must be > 0")
        ids = sorted(u.id for u in self.utterances)
        if ids != list(range(1, len(self.utterances) + 1)):
            raise InvalidInputError("utterance ids must be unique and dense 1..U")
        for u in self.utterances:
            if u.end > self.total_frames:
                raise InvalidInputError(
                    f"utterance {u.id} ends at {u.end} > total_frames {self.total_frames}"
                )

    @property
    def num_utterances(self) -> int:
        return len(self.utterances)

    @property
    def speakers(self) -> tuple[str, ...]:
        """Distinct speaker ids present, sorted; empty if unlabeled."""
        return tuple(sorted({u.speaker for u in self.utterances if u.speaker is not None}))

    def by_id(self, utterance_id: int) -> Utterance:
        for u in self.utterances:
            if u.id == utterance_id:
                return u
        raise InvalidInputError(f"no utterance with id {utterance_id}")

    def sorted_by_start(self) -> list[Utterance]:
        return sorted(self.utterances, key=lambda u: (u.start, u.end, u.id))

    def to_json(self, indent: int | None = None) -> str:
        doc = {
            "total_frames": self.total_frames,
            "frame_rate": self.frame_rate,
            "utterances": [
                {"id": u.id, "start": u.start, "end": u.end, "speaker": u.speaker}
                for u in self.utterances
            ],
        }
        return json.dumps(doc, indent=indent, sort_keys=True)

    @classmethod
    def from_json(cls, text: str | dict) -> "Timeline":
        doc = json.loads(text) if isinstance(text, str) else text
        try:
            utts = [
                Utterance(
                    id=int(u["id"]),
                    start=int(u["start"]),
                    end=int(u["end"]),
                    speaker=u.get("speaker"),
                )
                for u in doc["utterances"]
            ]
            return cls(utts, total_frames=int(doc["total_frames"]),
                       frame_rate=float(doc["frame_rate"]))
        except (KeyError, TypeError) as exc:
            raise InvalidInputError(f"malformed timeline document: {exc}") from exc


@dataclass(frozen=True)
class LabelMatrix:
    """A T x U binary grid; column ``u-1`` is utterance ``u``'s label vector.

    VAD kind: column is 1 exactly on ``[start, end)``.
    UBD kind: column has a single 1 at the start frame.
    """

    values: np.ndarray
    kind: str

    def __post_init__(self):
        _check_kind(self.kind)
        arr = _frozen_array(self.values, np.uint8)
        if arr.ndim != 2:
            raise InvalidInputError("label matrix must be 2-dimensional (T x U)")
        if arr.size and not np.isin(arr, (0, 1)).all():
            raise InvalidInputError("label matrix entries must be 0 or 1")
        object.__setattr__(self, "values", arr)

    @classmethod
    def from_timeline(cls, timeline: Timeline, kind: str) -> "LabelMatrix":
        _check_kind(kind)
        grid = np.zeros((timeline.total_frames, timeline.num_utterances), dtype=np.uint8)
        for u in timeline.utterances:
            if kind == VAD:
                grid[u.start:u.end, u.id - 1] = 1
            else:
                grid[u.start, u.id - 1] = 1
        return cls(grid, kind)

    @property
    def num_frames(self) -> int:
        return self.values.shape[0]

    @property
    def num_utterances(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class OverlapGraph:
    """Vertices are utterance ids 1..U; an edge joins temporally overlapping pairs."""

    num_vertices: int
    edges: frozenset[tuple[int, int]]

    def __post_init__(self):
        for a, b in self.edges:
            if a == b:
                raise InvalidInputError("overlap graph cannot contain self-loops")
            if not (1 <= a < b <= self.num_vertices):
                raise InvalidInputError(f"edge ({a}, {b}) out of range or unordered")

    def has_edge(self, u: int, v: int) -> bool:
        a, b = (u, v) if u < v else (v, u)
        return (a, b) in self.edges


@dataclass(frozen=True)
class Assignment:
    """A map from utterance ids to output channels, entries in 1..num_channels."""

    channel_of: tuple[int, ...]
    num_channels: int

    def __post_init__(self):
        object.__setattr__(self, "channel_of", tuple(int(c) for c in self.channel_of))
        if self.num_channels < 1:
            raise InvalidInputError("num_channels must be >= 1")
        for c in self.channel_of:
            if not (1 <= c <= self.num_channels):
                raise InvalidInputError(
                    f"channel {c} outside 1..{self.num_channels}"
                )

    def __len__(self) -> int:
        return len(self.channel_of)

    def channel(self, utterance_id: int) -> int:
        return self.channel_of[utterance_id - 1]


def build_overlap_graph(timeline: Timeline) -> OverlapGraph:
    """Sweep-line construction of the overlap graph, O(U log U + |E|)."""
    edges: set[tuple[int, int]] = set()
    active: list[tuple[int, int]] = []  # heap of (end, id)
    for u in timeline.sorted_by_start():
        while active and active[0][0] <= u.start:
            heapq.heappop(active)
        for _, vid in active:
            edges.add((min(vid, u.id), max(vid, u.id)))
        heapq.heappush(active, (u.end, u.id))
    return OverlapGraph(timeline.num_utterances, frozenset(edges))


def is_valid_assignment(graph: OverlapGraph, assignment: Assignment) -> bool:
    """True iff no edge is monochromatic (proper coloring)."""
    if len(assignment) != graph.num_vertices:
        raise InvalidInputError(
            f"assignment length {len(assignment)} != graph vertices {graph.num_vertices}"
        )
    chan = assignment.channel_of
    return all(chan[a - 1] != chan[b - 1] for a, b in graph.edges)


def max_concurrency(timeline: Timeline) -> int:
    """Maximum number of simultaneously active utterances at any frame.

    Equals the clique number of the interval overlap graph. Ends sort before
    starts at the same frame, consistent with half-open intervals.
    """
    events: list[tuple[int, int]] = []
    for u in timeline.utterances:
        events.append((u.start, 1))
        events.append((u.end, -1))
    events.sort()
    best = cur = 0
    for _, delta in events:
        cur += delta
        best = max(best, cur)
    return best


def activity_counts(timeline: Timeline) -> np.ndarray:
    """Per-frame count of active utterances, length total_frames."""
    diff = np.zeros(timeline.total_frames + 1, dtype=np.int64)
    for u in timeline.utterances:
        diff[u.start] += 1
        diff[u.end] -= 1
    return np.cumsum(diff[:-1])


def render_reference(timeline: Timeline, assignment: Assignment, kind: str) -> np.ndarray:
    """Project per-utterance labels onto channels: a T x C binary grid.

    Column c is the union of the label columns of utterances assigned to
    channel c. Raises ConstraintViolationError if the assignment is not a
    proper coloring of the timeline's overlap graph (which would make two
    VAD activations collide on one channel).
    """
    _check_kind(kind)
    if len(assignment) != timeline.num_utterances:
        raise InvalidInputError(
            f"assignment length {len(assignment)} != {timeline.num_utterances} utterances"
        )
    graph = build_overlap_graph(timeline)
    if not is_valid_assignment(graph, assignment):
        raise ConstraintViolationError(
            "assignment maps overlapping utterances to the same channel"
        )
    grid = np.zeros((timeline.total_frames, assignment.num_channels), dtype=np.uint8)
    for u in timeline.utterances:
        c = assignment.channel(u.id) - 1
        if kind == VAD:
            grid[u.start:u.end, c] = 1
        else:
            grid[u.start, c] = 1
    return grid
