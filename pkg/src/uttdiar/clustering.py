"""Constrained agglomerative clustering of utterance embeddings.

Cross-channel temporally overlapping utterances cannot belong to one
speaker, so they carry cannot-link constraints; a merge between clusters
containing any cannot-linked pair is treated as infinitely distant. With no
target speaker count, merging stops once the smallest legal average-linkage
distance reaches the stop threshold, which is how the speaker count is
estimated.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .decoding import DecodedUtterance
from .diarization import Diarization
from .embeddings import UtteranceEmbedding
from .errors import InvalidInputError


@dataclass(frozen=True)
class CannotLinkSet:
    """Unordered utterance-id pairs that must not share a cluster."""

    pairs: frozenset[tuple[int, int]] = frozenset()

    def __post_init__(self):
        normalized = set()
        for a, b in self.pairs:
            if a == b:
                raise InvalidInputError("cannot-link pair must join distinct ids")
            normalized.add((min(a, b), max(a, b)))
        object.__setattr__(self, "pairs", frozenset(normalized))

    def forbids(self, a: int, b: int) -> bool:
        return (min(a, b), max(a, b)) in self.pairs

    def __len__(self) -> int:
        return len(self.pairs)


def derive_cannot_links(utterances: Sequence[DecodedUtterance]) -> CannotLinkSet:
    """Pairs of cross-channel utterances whose intervals intersect.

    Ids are 1-based positions in the input list. Same-channel utterances are
    expected to be non-overlapping (decoder output); a violation raises.
    """
    order = sorted(range(len(utterances)), key=lambda i: (utterances[i].start,
                                                          utterances[i].end, i))
    pairs = set()
    active: list[tuple[int, int]] = []  # heap of (end, index)
    for i in order:
        u = utterances[i]
        while active and active[0][0] <= u.start:
            heapq.heappop(active)
        for _, j in active:
            v = utterances[j]
            if v.channel == u.channel:
                raise InvalidInputError(
                    f"same-channel utterances {j + 1} and {i + 1} overlap"
                )
            pairs.add((min(i, j) + 1, max(i, j) + 1))
        heapq.heappush(active, (u.end, i))
    return CannotLinkSet(frozenset(pairs))


@dataclass(frozen=True)
class ClusterResult:
    """Speaker labels per utterance id, plus whether a requested count was met."""

    labels: dict[int, str]
    num_clusters: int
    infeasible: bool = False


def cluster(embeddings: Sequence[UtteranceEmbedding],
            constraints: CannotLinkSet = CannotLinkSet(),
            num_speakers: Optional[int] = None,
            stop_threshold: float = 1.0) -> ClusterResult:
    """Bottom-up average-linkage clustering on Euclidean distance.

    With ``num_speakers`` given, merges until that many clusters remain; if
    constraints block every merge first, the current clustering is returned
    with ``infeasible`` set instead of erroring. Without it, merges continue
    while the smallest legal linkage distance is below ``stop_threshold``.
    Equal-distance merges pick the pair whose (smallest member id, other
    smallest member id) is lowest, so results are reproducible.
    """
    if not embeddings:
        raise InvalidInputError("cluster needs at least one embedding")
    if num_speakers is not None and num_speakers < 1:
        raise InvalidInputError("num_speakers must be >= 1")
    ids = [e.utterance_id for e in embeddings]
    if len(set(ids)) != len(ids):
        raise InvalidInputError("duplicate utterance ids in embeddings")

    vectors = np.stack([e.vector for e in embeddings])
    n = len(ids)
    # cluster state: members (utterance ids), sizes, pairwise average distance
    members: dict[int, set[int]] = {i: {ids[i]} for i in range(n)}
    size = {i: 1 for i in range(n)}
    rep = {i: ids[i] for i in range(n)}
    diffs = vectors[:, None, :] - vectors[None, :, :]
    dist = np.sqrt((diffs ** 2).sum(axis=2))
    d = {(i, j): float(dist[i, j]) for i in range(n) for j in range(i + 1, n)}
    forbidden = {
        (i, j)
        for i in range(n) for j in range(i + 1, n)
        if constraints.forbids(ids[i], ids[j])
    }
    active = set(range(n))
    next_idx = n

    def best_pair():
        best = None
        best_key = None
        for pair, pair_dist in d.items():
            if pair in forbidden:
                continue
            key = (pair_dist, min(rep[pair[0]], rep[pair[1]]),
                   max(rep[pair[0]], rep[pair[1]]))
            if best_key is None or key < best_key:
                best, best_key = pair, key
        return best, (best_key[0] if best_key else None)

    infeasible = False
    while len(active) > 1:
        pair, pair_dist = best_pair()
        if num_speakers is not None:
            if len(active) <= num_speakers:
                break
            if pair is None:
                infeasible = True
                break
        else:
            if pair is None or pair_dist >= stop_threshold:
                break
        a, b = pair
        merged = next_idx
        next_idx += 1
        members[merged] = members.pop(a) | members.pop(b)
        size[merged] = size[a] + size[b]
        rep[merged] = min(rep[a], rep[b])
        for other in active:
            if other in (a, b):
                continue
            da = d.pop((min(a, other), max(a, other)))
            db = d.pop((min(b, other), max(b, other)))
            d[(other, merged)] = (size[a] * da + size[b] * db) / size[merged]
            if (min(a, other), max(a, other)) in forbidden or \
                    (min(b, other), max(b, other)) in forbidden:
                forbidden.add((other, merged))
        d.pop((a, b))
        forbidden = {p for p in forbidden if a not in p and b not in p}
        active.discard(a)
        active.discard(b)
        active.add(merged)

    if num_speakers is not None and len(active) > num_speakers:
        infeasible = True

    ordered = sorted(active, key=lambda c: rep[c])
    labels: dict[int, str] = {}
    for rank, c in enumerate(ordered, 1):
        for uid in members[c]:
            labels[uid] = f"spk{rank}"
    return ClusterResult(labels=labels, num_clusters=len(ordered),
                         infeasible=infeasible)


def assemble_diarization(utterances: Sequence[DecodedUtterance],
                         labels: dict[int, str], frame_rate: float,
                         recording_id: str = "recording") -> Diarization:
    """Group labeled utterances into per-speaker second-based segment tracks.

    Utterance ids are 1-based positions in ``utterances``; every utterance
    must be labeled. Abutting or overlapping same-speaker segments merge.
    """
    if frame_rate <= 0:
        raise InvalidInputError("frame_rate must be > 0")
    segments: dict[str, list[tuple[float, float]]] = {}
    for i, utt in enumerate(utterances, 1):
        if i not in labels:
            raise InvalidInputError(f"utterance {i} has no speaker label")
        segments.setdefault(labels[i], []).append(
            (utt.start / frame_rate, utt.end / frame_rate)
        )
    return Diarization.from_seconds(recording_id, segments)
