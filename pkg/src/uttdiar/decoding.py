"""Turn estimated VAD/UBD posterior grids into hypothesized utterances.

Per channel, the VAD posteriors are median-filtered and thresholded into
activity runs; each run is then split at interior onset-posterior peaks so
that two adjacent utterances that landed back-to-back on one channel are
recovered as two utterances. Same-channel outputs never overlap by
construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.ndimage import median_filter

from .errors import InvalidInputError
from .scores import ScoreMatrix


@dataclass(frozen=True)
class DecoderConfig:
    threshold: float = 0.5
    median_window: int = 11
    peak_threshold: float = 0.3
    min_gap: int = 10
    min_duration: int = 5


@dataclass(frozen=True)
class DecodedUtterance:
    """A hypothesized utterance with its source channel (1-based)."""

    start: int
    end: int
    channel: int
    confidence: float

    def __post_init__(self):
        if self.end <= self.start:
            raise InvalidInputError("decoded utterance must have positive duration")
        if self.channel < 1:
            raise InvalidInputError("channel must be >= 1")

    @property
    def duration(self) -> int:
        return self.end - self.start

    def overlaps(self, other: "DecodedUtterance") -> bool:
        return self.start < other.end and other.start < self.end


def binarize_vad(scores: ScoreMatrix, threshold: float = 0.5,
                 median_window: int = 11) -> np.ndarray:
    """Median-filter each channel (edge-replicated) and threshold at >=."""
    if not (0.0 < threshold < 1.0):
        raise InvalidInputError("threshold must be in (0, 1)")
    if median_window < 1 or median_window % 2 == 0:
        raise InvalidInputError("median window must be an odd integer >= 1")
    filtered = median_filter(scores.values, size=(median_window, 1), mode="nearest")
    return (filtered >= threshold).astype(np.uint8)


def _pick_peaks(values: np.ndarray, peak_threshold: float, min_gap: int) -> list[int]:
    """Local maxima >= threshold, greedily thinned to >= min_gap separation.

    Candidates compare >= to both neighbors (one-sided at the edges), so
    plateau frames all qualify. Selection prefers higher peaks, then earlier
    frames, dropping candidates closer than min_gap to a kept peak.
    """
    n = len(values)
    candidates = []
    for t in range(n):
        v = values[t]
        if v < peak_threshold:
            continue
        if t > 0 and values[t - 1] > v:
            continue
        if t + 1 < n and values[t + 1] > v:
            continue
        candidates.append(t)
    kept: list[int] = []
    for t in sorted(candidates, key=lambda t: (-values[t], t)):
        if all(abs(t - k) >= min_gap for k in kept):
            kept.append(t)
    return sorted(kept)


def split_on_ubd(binary: np.ndarray, ubd_scores: ScoreMatrix,
                 peak_threshold: float = 0.3, min_gap: int = 10,
                 vad_scores: Optional[ScoreMatrix] = None) -> list[DecodedUtterance]:
    """Cut each channel's activity runs at interior onset-posterior peaks.

    A peak at a run's first frame is ignored (the run start already begins
    an utterance). ``vad_scores``, when given, provides the per-utterance
    confidence (mean posterior over the span); otherwise confidence is 1.
    """
    grid = np.asarray(binary)
    if grid.shape != ubd_scores.values.shape:
        raise InvalidInputError(
            f"binary grid shape {grid.shape} != UBD shape {ubd_scores.values.shape}"
        )
    num_frames, num_channels = grid.shape
    utterances: list[DecodedUtterance] = []
    for c in range(num_channels):
        column = grid[:, c]
        padded = np.diff(np.concatenate(([0], column, [0])))
        run_starts = np.flatnonzero(padded == 1)
        run_ends = np.flatnonzero(padded == -1)
        for run_start, run_end in zip(run_starts, run_ends):
            segment = ubd_scores.values[run_start:run_end, c]
            peaks = [run_start + p for p in
                     _pick_peaks(segment, peak_threshold, min_gap) if p > 0]
            bounds = [int(run_start)] + [int(p) for p in peaks] + [int(run_end)]
            for lo, hi in zip(bounds[:-1], bounds[1:]):
                if vad_scores is not None:
                    confidence = float(vad_scores.values[lo:hi, c].mean())
                else:
                    confidence = 1.0
                utterances.append(DecodedUtterance(lo, hi, c + 1, confidence))
    utterances.sort(key=lambda u: (u.start, u.end, u.channel))
    return utterances


def decode(vad: ScoreMatrix, ubd: ScoreMatrix,
           config: DecoderConfig = DecoderConfig()) -> list[DecodedUtterance]:
    """binarize_vad + split_on_ubd, then drop utterances below min_duration."""
    if vad.values.shape != ubd.values.shape:
        raise InvalidInputError(
            f"VAD shape {vad.values.shape} != UBD shape {ubd.values.shape}"
        )
    binary = binarize_vad(vad, config.threshold, config.median_window)
    utterances = split_on_ubd(binary, ubd, config.peak_threshold, config.min_gap,
                              vad_scores=vad)
    return [u for u in utterances if u.duration >= config.min_duration]


def decoded_to_json(utterances: Sequence[DecodedUtterance], total_frames: int,
                    frame_rate: float, indent: int | None = None) -> str:
    """Timeline JSON schema plus a "channel" field per utterance."""
    doc = {
        "total_frames": int(total_frames),
        "frame_rate": float(frame_rate),
        "utterances": [
            {"id": i, "start": u.start, "end": u.end, "speaker": None,
             "channel": u.channel}
            for i, u in enumerate(utterances, 1)
        ],
    }
    return json.dumps(doc, indent=indent, sort_keys=True)


def decoded_from_json(text: str | dict) -> list[DecodedUtterance]:
    doc = json.loads(text) if isinstance(text, str) else text
    try:
        return [
            DecodedUtterance(int(u["start"]), int(u["end"]), int(u["channel"]), 1.0)
            for u in doc["utterances"]
        ]
    except (KeyError, TypeError) as exc:
        raise InvalidInputError(f"malformed decoded-utterance document: {exc}") from exc
