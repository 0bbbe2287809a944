"""Meeting-like ground-truth generation plus oracle/noisy model outputs.

Each speaker alternates exponential pauses (mean ``beta`` seconds) with
uniform-duration utterances on a shared clock starting at 0, truncated at
the target length; mixing the tracks yields realistic partial overlap. An
optional concurrency cap delays utterances (preserving per-speaker order)
to the earliest start where the cap holds, so capped meetings are always
decodable with that many output channels.

Posteriors and frame embeddings are synthesized from the ground truth so
the whole downstream pipeline can run without a trained model: saturated
references with optional logit-domain jitter, and per-speaker orthonormal
centroid embeddings with optional Gaussian noise.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .diarization import Diarization, reference_diarization, write_rttm
from .embeddings import FrameEmbeddings
from .errors import InfeasibleError, InvalidInputError, PlacementError
from .scores import CLAMP_MAX, CLAMP_MIN, ScoreMatrix
from .timeline import (Assignment, Timeline, Utterance, activity_counts,
                       max_concurrency, render_reference)


@dataclass(frozen=True)
class SimConfig:
    """Knobs of the meeting generator; ``seed`` fixes all randomness."""

    num_speakers: tuple[int, int] = (2, 7)
    beta: float = 10.0
    utterance_duration: tuple[float, float] = (1.0, 2.5)
    target_frames: int = 19800
    frame_rate: float = 100.0
    max_concurrency_cap: int | None = 2
    seed: int = 0
    posterior_noise: float = 0.0
    embedding_noise: float = 0.05
    embedding_dim: int = 16

    def __post_init__(self):
        lo, hi = self.num_speakers
        if not (1 <= lo <= hi):
            raise InvalidInputError(f"bad speaker range {self.num_speakers}")
        dlo, dhi = self.utterance_duration
        if not (0 < dlo <= dhi):
            raise InvalidInputError(f"bad duration range {self.utterance_duration}")
        if self.beta <= 0:
            raise InvalidInputError("beta must be > 0")
        if self.target_frames < 1:
            raise InvalidInputError("target_frames must be >= 1")
        if self.frame_rate <= 0:
            raise InvalidInputError("frame_rate must be > 0")
        if self.max_concurrency_cap is not None and self.max_concurrency_cap < 1:
            raise InvalidInputError("max_concurrency_cap must be >= 1 or None")
        if self.posterior_noise < 0 or self.embedding_noise < 0:
            raise InvalidInputError("noise levels must be >= 0")
        if self.embedding_dim < 1:
            raise InvalidInputError("embedding_dim must be >= 1")


def simulate_timeline(config: SimConfig) -> Timeline:
    """Generate one meeting; deterministic for a given config (incl. seed)."""
    rng = np.random.default_rng(config.seed)
    lo, hi = config.num_speakers
    num_speakers = int(rng.integers(lo, hi + 1))
    total = config.target_frames
    rate = config.frame_rate
    dlo, dhi = config.utterance_duration

    desired: list[tuple[int, int, int]] = []  # (start, dur, speaker idx)
    for spk in range(num_speakers):
        clock = 0.0
        last_end = 0
        while True:
            clock += float(rng.exponential(config.beta))
            duration = float(rng.uniform(dlo, dhi))
            start = max(int(round(clock * rate)), last_end)
            if start >= total:
                break
            frames = max(1, int(round(duration * rate)))
            desired.append((start, frames, spk))
            last_end = start + frames
            clock += duration
    desired.sort(key=lambda d: (d[0], d[2]))

    if config.max_concurrency_cap is None:
        placed = [(start, min(start + frames, total), spk)
                  for start, frames, spk in desired]
    else:
        tail = int(np.ceil(2 * dhi * rate))
        placed = _place_with_cap(desired, total, config.max_concurrency_cap, tail)

    placed.sort(key=lambda p: (p[0], p[1], p[2]))
    utterances = [
        Utterance(i, start, end, speaker=f"spk{spk + 1}")
        for i, (start, end, spk) in enumerate(placed, 1)
    ]
    return Timeline(utterances, total_frames=total, frame_rate=rate)


def _place_with_cap(desired: list[tuple[int, int, int]], total: int,
                    cap: int, tail: int) -> list[tuple[int, int, int]]:
    """Delay utterances to the earliest start where concurrency stays <= cap.

    An utterance with no legal start left before the final frame is dropped.
    When its desired start lay within ``tail`` frames of the end, that is
    ordinary end-of-meeting truncation (the meeting closed around it);
    anywhere earlier it means the workload systematically exceeds the cap,
    so PlacementError reports those drops.
    """
    concurrency = np.zeros(total, dtype=np.int64)
    last_end: dict[int, int] = {}
    placed = []
    congestion_drops = []
    for start, frames, spk in desired:
        t = max(start, last_end.get(spk, 0))
        spot = None
        while t < total:
            end = min(t + frames, total)
            blocked = np.flatnonzero(concurrency[t:end] >= cap)
            if blocked.size == 0:
                spot = (t, end)
                break
            free = np.flatnonzero(concurrency[t + blocked[0]:] < cap)
            if free.size == 0:
                break
            t = t + int(blocked[0]) + int(free[0])
        if spot is None:
            if start + tail <= total:
                congestion_drops.append((f"spk{spk + 1}", start))
            continue
        t, end = spot
        concurrency[t:end] += 1
        placed.append((t, end, spk))
        last_end[spk] = end
    if congestion_drops:
        raise PlacementError(congestion_drops)
    return placed


def overlap_ratio(timeline: Timeline) -> float:
    """Overlapped speech time / total speech time (wall-clock frames)."""
    counts = activity_counts(timeline)
    speech = int((counts >= 1).sum())
    if speech == 0:
        return 0.0
    return float((counts >= 2).sum()) / speech


def first_fit_assignment(timeline: Timeline, num_channels: int) -> Assignment:
    """Greedy coloring in start order; optimal for interval overlap graphs."""
    tails = [0] * num_channels
    channel_of = [0] * timeline.num_utterances
    for u in timeline.sorted_by_start():
        for c in range(num_channels):
            if tails[c] <= u.start:
                tails[c] = u.end
                channel_of[u.id - 1] = c + 1
                break
        else:
            raise InfeasibleError(
                f"utterance {u.id} has no free channel among {num_channels}"
            )
    return Assignment(tuple(channel_of), num_channels)


def _jitter(reference: np.ndarray, noise: float, rng) -> np.ndarray:
    posteriors = np.where(reference == 1, CLAMP_MAX, CLAMP_MIN)
    if noise > 0:
        logits = np.log(posteriors / (1.0 - posteriors))
        logits += rng.normal(0.0, noise, size=logits.shape)
        posteriors = 1.0 / (1.0 + np.exp(-logits))
    return posteriors


def synthesize_posteriors(timeline: Timeline, num_channels: int,
                          noise: float = 0.0, seed=0
                          ) -> tuple[ScoreMatrix, ScoreMatrix]:
    """Render oracle VAD/UBD grids and jitter them in the logit domain.

    Utterances are placed on channels by first-fit in start order; the
    binary references map to the posterior clamp bounds, then Gaussian
    logit-domain jitter of the given std is applied. noise=0 round-trips
    through the decoder to the exact ground-truth intervals.
    """
    if max_concurrency(timeline) > num_channels:
        raise InfeasibleError(
            f"max concurrency {max_concurrency(timeline)} exceeds "
            f"{num_channels} channels"
        )
    rng = np.random.default_rng(seed)
    assignment = first_fit_assignment(timeline, num_channels)
    vad_ref = render_reference(timeline, assignment, "vad")
    ubd_ref = render_reference(timeline, assignment, "ubd")
    vad = ScoreMatrix(_jitter(vad_ref, noise, rng), "vad")
    ubd = ScoreMatrix(_jitter(ubd_ref, noise, rng), "ubd")
    return vad, ubd


def synthesize_embeddings(timeline: Timeline, num_channels: int, dim: int,
                          noise: float = 0.0, seed=0) -> FrameEmbeddings:
    """Per-speaker orthonormal centroids plus Gaussian noise on active frames.

    Active frames carry the speaker's centroid perturbed by noise and
    renormalized to unit length; inactive frames carry pure noise. Requires
    speaker ids on every utterance and at most ``dim`` distinct speakers.
    """
    speakers = timeline.speakers
    if any(u.speaker is None for u in timeline.utterances):
        raise InvalidInputError("synthesize_embeddings needs speaker ids")
    if len(speakers) > dim:
        raise InvalidInputError(
            f"{len(speakers)} speakers need embedding_dim >= {len(speakers)}"
        )
    rng = np.random.default_rng(seed)
    total = timeline.total_frames
    values = np.zeros((total, num_channels, dim), dtype=np.float64)
    if noise > 0:
        values += noise * rng.standard_normal(values.shape)
    if not speakers:
        return FrameEmbeddings(values)

    gauss = rng.standard_normal((dim, len(speakers)))
    q, r = np.linalg.qr(gauss)
    q = q * np.sign(np.diag(r))
    centroids = {label: q[:, k] for k, label in enumerate(speakers)}

    assignment = first_fit_assignment(timeline, num_channels)
    for u in timeline.utterances:
        c = assignment.channel(u.id) - 1
        span = values[u.start:u.end, c, :]
        span += centroids[u.speaker]
        norms = np.maximum(np.linalg.norm(span, axis=1, keepdims=True), 1e-12)
        span /= norms
    return FrameEmbeddings(values)


@dataclass(frozen=True)
class Meeting:
    """One simulated meeting with every artifact the pipeline consumes."""

    meeting_id: str
    timeline: Timeline
    vad: ScoreMatrix
    ubd: ScoreMatrix
    embeddings: FrameEmbeddings
    reference: Diarization


def make_meeting(config: SimConfig, num_channels: int, meeting_id: str) -> Meeting:
    """Simulate a meeting and synthesize all of its model-output stand-ins."""
    timeline = simulate_timeline(config)
    vad, ubd = synthesize_posteriors(timeline, num_channels,
                                     noise=config.posterior_noise,
                                     seed=[config.seed, 1])
    embeddings = synthesize_embeddings(timeline, num_channels,
                                       config.embedding_dim,
                                       noise=config.embedding_noise,
                                       seed=[config.seed, 2])
    reference = reference_diarization(timeline, meeting_id)
    return Meeting(meeting_id, timeline, vad, ubd, embeddings, reference)


def write_meeting(meeting: Meeting, out_dir) -> Path:
    """Write timeline.json, vad.csv, ubd.csv, emb.csv (+sidecar), ref.rttm."""
    directory = Path(out_dir) / meeting.meeting_id
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "timeline.json").write_text(meeting.timeline.to_json(indent=2) + "\n")
    meeting.vad.write_csv(directory / "vad.csv")
    meeting.ubd.write_csv(directory / "ubd.csv")
    meeting.embeddings.write_csv(directory / "emb.csv")
    (directory / "ref.rttm").write_text(write_rttm(meeting.reference))
    return directory
