"""Channel-assignment cost decomposition, exact solvers, and the VAD loss.

The unnormalized BCE between an estimated score grid and the reference grid
rendered under any proper coloring decomposes additively: a baseline (all
channels silent) plus one delta term per utterance that depends only on the
chosen channel. Minimizing the total over all proper colorings is therefore
a min-cost coloring problem, solved exactly either by exhaustive enumeration
(test oracle, small U only) or by a dynamic program over start-ordered
utterances (production path).

The DP kernel has two interchangeable backends: a compiled Cython module and
a pure-Python fallback, selected at import time. ``dp_backend()`` reports
which one is active; ``solve_dp(..., backend=...)`` can force either.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import InfeasibleError, InvalidInputError
from .scores import ScoreMatrix, bce_terms
from .timeline import VAD, Assignment, LabelMatrix, OverlapGraph, Timeline, build_overlap_graph

from . import _dpcore_py

try:
    from . import _dpcore as _dpcore_native
except ImportError:  # extension not built; pure-Python fallback
    _dpcore_native = None

BRUTE_FORCE_MAX_UTTERANCES = 12


def dp_backend() -> str:
    """Name of the DP kernel selected at import: "compiled" or "python"."""
    return "compiled" if _dpcore_native is not None else "python"


def _kernel(backend: str):
    if backend == "auto":
        return _dpcore_native.dp_assign if _dpcore_native is not None else _dpcore_py.dp_assign
    if backend == "compiled":
        if _dpcore_native is None:
            raise InvalidInputError("compiled DP backend is not available")
        return _dpcore_native.dp_assign
    if backend == "python":
        return _dpcore_py.dp_assign
    raise InvalidInputError(f"unknown DP backend {backend!r}")


@dataclass(frozen=True)
class CostMatrix:
    """Additive decomposition of the unnormalized BCE over channel choices.

    ``baseline`` is the total BCE of an all-silent reference; ``delta[u-1, c-1]``
    is the change from activating utterance u's frames on channel c. For any
    proper coloring, baseline + sum of chosen deltas equals the full-grid
    unnormalized BCE exactly, because same-channel utterances never share
    frames.
    """

    baseline: float
    delta: np.ndarray
    num_frames: int

    def __post_init__(self):
        arr = np.ascontiguousarray(self.delta, dtype=np.float64)
        if arr.ndim != 2:
            raise InvalidInputError("delta must be 2-dimensional (U x C)")
        arr.setflags(write=False)
        object.__setattr__(self, "delta", arr)
        object.__setattr__(self, "baseline", float(self.baseline))
        if self.num_frames < 1:
            raise InvalidInputError("num_frames must be >= 1")

    @property
    def num_utterances(self) -> int:
        return self.delta.shape[0]

    @property
    def num_channels(self) -> int:
        return self.delta.shape[1]

    def normalized(self, delta_total: float) -> float:
        """Mean-reduced loss over the T x C grid."""
        return (self.baseline + delta_total) / (self.num_frames * self.num_channels)


@dataclass(frozen=True)
class AssignmentResult:
    assignment: Assignment
    loss: float
    explored_states: int


def compute_cost_matrix(labels: LabelMatrix, scores: ScoreMatrix) -> CostMatrix:
    """Cost decomposition from a dense T x U label grid.

    Suitable for moderate sizes; for long meetings prefer
    ``cost_matrix_from_timeline`` which avoids materializing T x U labels.
    """
    if labels.kind != VAD:
        raise InvalidInputError("cost matrix needs VAD-kind labels")
    if labels.num_frames != scores.num_frames:
        raise InvalidInputError(
            f"labels have {labels.num_frames} frames, scores {scores.num_frames}"
        )
    diff = _activation_bce_diff(scores)
    baseline = float(bce_terms(0.0, scores.values).sum())
    delta = labels.values.T.astype(np.float64) @ diff
    return CostMatrix(baseline, delta, scores.num_frames)


def cost_matrix_from_timeline(timeline: Timeline, scores: ScoreMatrix) -> CostMatrix:
    """Cost decomposition straight from utterance intervals, O(speech * C)."""
    if timeline.total_frames != scores.num_frames:
        raise InvalidInputError(
            f"timeline has {timeline.total_frames} frames, scores {scores.num_frames}"
        )
    diff = _activation_bce_diff(scores)
    baseline = float(bce_terms(0.0, scores.values).sum())
    delta = np.zeros((timeline.num_utterances, scores.num_channels), dtype=np.float64)
    for u in timeline.utterances:
        delta[u.id - 1] = diff[u.start:u.end].sum(axis=0)
    return CostMatrix(baseline, delta, scores.num_frames)


def _activation_bce_diff(scores: ScoreMatrix) -> np.ndarray:
    # BCE(1, p) - BCE(0, p) = -log(p) + log(1 - p), per frame and channel
    p = scores.values
    return np.log1p(-p) - np.log(p)


def solve_brute_force(graph: OverlapGraph, cost: CostMatrix, num_channels: int,
                      max_utterances: int = BRUTE_FORCE_MAX_UTTERANCES) -> AssignmentResult:
    """Exact minimum over all proper colorings by exhaustive enumeration.

    Intended as a test oracle: refuses instances with more than
    ``max_utterances`` utterances because the search is C^U. Ties are broken
    toward the lexicographically smallest channel vector.
    ``explored_states`` counts the proper colorings evaluated.
    """
    num_utts = cost.num_utterances
    if graph.num_vertices != num_utts:
        raise InvalidInputError("graph and cost matrix disagree on utterance count")
    if num_channels < 1:
        raise InvalidInputError("num_channels must be >= 1")
    if num_channels != cost.num_channels:
        raise InvalidInputError(
            f"cost matrix has {cost.num_channels} channels, requested {num_channels}"
        )
    if num_utts > max_utterances:
        raise InvalidInputError(
            f"brute force refused: {num_utts} utterances exceeds cap {max_utterances}"
        )

    edges = [(a - 1, b - 1) for a, b in sorted(graph.edges)]
    delta = cost.delta
    best_cost = None
    best_channels = None
    explored = 0
    for channels in product(range(1, num_channels + 1), repeat=num_utts):
        if any(channels[a] == channels[b] for a, b in edges):
            continue
        explored += 1
        total = 0.0
        for u in range(num_utts):
            total += delta[u, channels[u] - 1]
        if best_cost is None or total < best_cost:
            best_cost = total
            best_channels = channels
    if best_cost is None:
        raise InfeasibleError(
            f"no proper coloring with {num_channels} channels exists"
        )
    return AssignmentResult(
        assignment=Assignment(best_channels, num_channels),
        loss=cost.normalized(best_cost),
        explored_states=explored,
    )


def solve_dp(graph: OverlapGraph, cost: CostMatrix, timeline: Timeline,
             num_channels: int, backend: str = "auto") -> AssignmentResult:
    """Exact minimum-cost proper coloring via the start-order dynamic program.

    Loss-equivalent to ``solve_brute_force`` on every feasible instance and
    polynomial for bounded concurrency. ``explored_states`` counts DP states
    retained after merging, summed over steps.
    """
    num_utts = cost.num_utterances
    if graph.num_vertices != num_utts or timeline.num_utterances != num_utts:
        raise InvalidInputError("graph, cost matrix, and timeline disagree on utterance count")
    if num_channels < 1:
        raise InvalidInputError("num_channels must be >= 1")
    if num_channels != cost.num_channels:
        raise InvalidInputError(
            f"cost matrix has {cost.num_channels} channels, requested {num_channels}"
        )
    kernel = _kernel(backend)
    if num_utts == 0:
        return AssignmentResult(Assignment((), num_channels), cost.normalized(0.0), 1)

    order = timeline.sorted_by_start()
    proc_ids = np.array([u.id for u in order], dtype=np.int64)
    starts = np.array([u.start for u in order], dtype=np.int64)
    ends = np.array([u.end for u in order], dtype=np.int64)
    delta_proc = np.ascontiguousarray(cost.delta[proc_ids - 1])
    order_by_id = np.argsort(proc_ids).astype(np.int64)

    solved = kernel(starts, ends, delta_proc, order_by_id)
    if solved is None:
        raise InfeasibleError(
            f"no proper coloring with {num_channels} channels exists"
        )
    delta_total, channels_proc, explored = solved
    channel_of = np.zeros(num_utts, dtype=np.int64)
    channel_of[proc_ids - 1] = channels_proc + 1
    return AssignmentResult(
        assignment=Assignment(tuple(int(c) for c in channel_of), num_channels),
        loss=cost.normalized(float(delta_total)),
        explored_states=int(explored),
    )


def graph_pit_vad_loss(labels: LabelMatrix, scores: ScoreMatrix, timeline: Timeline,
                       num_channels: int, solver: str = "dp") -> tuple[float, Assignment]:
    """Mean-reduced BCE under the best utterance-to-channel assignment.

    ``labels`` must be the timeline's own VAD label grid (shapes are
    validated; the cost is computed from the intervals). Returns the loss and
    the optimal assignment, whose rendered reference realizes that loss.
    """
    if labels.kind != VAD or scores.kind != VAD:
        raise InvalidInputError("VAD loss needs VAD-kind labels and scores")
    if labels.num_utterances != timeline.num_utterances:
        raise InvalidInputError("labels and timeline disagree on utterance count")
    if labels.num_frames != scores.num_frames:
        raise InvalidInputError("labels and scores disagree on frame count")
    cost = cost_matrix_from_timeline(timeline, scores)
    graph = build_overlap_graph(timeline)
    if solver == "dp":
        result = solve_dp(graph, cost, timeline, num_channels)
    elif solver == "brute":
        result = solve_brute_force(graph, cost, num_channels)
    else:
        raise InvalidInputError(f"unknown solver {solver!r}")
    return result.loss, result.assignment
