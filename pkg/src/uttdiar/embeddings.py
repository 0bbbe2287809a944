"""Frame-level embedding grids and posterior-weighted utterance embeddings."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .decoding import DecodedUtterance
from .errors import DegenerateEmbeddingError, InvalidInputError
from .scores import ScoreMatrix

DEGENERATE_NORM = 1e-12


@dataclass(frozen=True)
class FrameEmbeddings:
    """A T x C x L grid: one L-dimensional vector per frame and channel."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.values, dtype=np.float64)
        if arr.ndim != 3:
            raise InvalidInputError("frame embeddings must be 3-dimensional (T x C x L)")
        if arr.shape[2] < 1:
            raise InvalidInputError("embedding dimension must be >= 1")
        if not np.isfinite(arr).all():
            raise InvalidInputError("frame embeddings must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def num_frames(self) -> int:
        return self.values.shape[0]

    @property
    def num_channels(self) -> int:
        return self.values.shape[1]

    @property
    def dim(self) -> int:
        return self.values.shape[2]

    def write_csv(self, path) -> None:
        """T*C rows x L columns, channel-major, plus a .json sidecar with shape."""
        path = Path(path)
        t, c, l = self.values.shape
        flat = self.values.transpose(1, 0, 2).reshape(t * c, l)
        np.savetxt(path, flat, fmt="%.10g", delimiter=",")
        sidecar = {"num_frames": t, "num_channels": c, "embedding_dim": l}
        path.with_suffix(".json").write_text(json.dumps(sidecar, sort_keys=True))

    @classmethod
    def read_csv(cls, path) -> "FrameEmbeddings":
        path = Path(path)
        sidecar_path = path.with_suffix(".json")
        try:
            sidecar = json.loads(sidecar_path.read_text())
            t = int(sidecar["num_frames"])
            c = int(sidecar["num_channels"])
            l = int(sidecar["embedding_dim"])
        except (OSError, KeyError, TypeError, ValueError) as exc:
            raise InvalidInputError(f"bad embeddings sidecar {sidecar_path}: {exc}") from exc
        try:
            flat = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
        except ValueError as exc:
            raise InvalidInputError(f"malformed embeddings CSV {path}: {exc}") from exc
        if flat.shape != (t * c, l):
            raise InvalidInputError(
                f"embeddings CSV shape {flat.shape} != sidecar ({t}*{c}, {l})"
            )
        return cls(flat.reshape(c, t, l).transpose(1, 0, 2))


@dataclass(frozen=True)
class UtteranceEmbedding:
    utterance_id: int
    vector: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.vector, dtype=np.float64)
        if arr.ndim != 1:
            raise InvalidInputError("utterance embedding must be a vector")
        if abs(float(np.linalg.norm(arr)) - 1.0) > 1e-6:
            raise InvalidInputError("utterance embedding must be unit-norm")
        arr.setflags(write=False)
        object.__setattr__(self, "vector", arr)


def aggregate_embedding(frames: FrameEmbeddings, vad_scores: ScoreMatrix,
                        utterance: DecodedUtterance,
                        utterance_id: int) -> UtteranceEmbedding:
    """VAD-posterior-weighted mean of frame embeddings, normalized to unit norm.

    Reads frames [start, end) on the utterance's channel, weighting each by
    that frame's VAD posterior. Raises DegenerateEmbeddingError when the
    weighted sum (nearly) cancels and cannot be normalized.
    """
    if frames.num_frames != vad_scores.num_frames or \
            frames.num_channels != vad_scores.num_channels:
        raise InvalidInputError("frame embeddings and VAD scores disagree on shape")
    if utterance.end > frames.num_frames:
        raise InvalidInputError(
            f"utterance ends at {utterance.end} > {frames.num_frames} frames"
        )
    if utterance.channel > frames.num_channels:
        raise InvalidInputError(
            f"channel {utterance.channel} > {frames.num_channels} channels"
        )
    c = utterance.channel - 1
    weights = vad_scores.values[utterance.start:utterance.end, c]
    vectors = frames.values[utterance.start:utterance.end, c, :]
    weighted = (weights[:, None] * vectors).sum(axis=0)
    norm = float(np.linalg.norm(weighted))
    if norm < DEGENERATE_NORM:
        raise DegenerateEmbeddingError(
            f"weighted embedding sum for utterance {utterance_id} has norm {norm:g}"
        )
    return UtteranceEmbedding(utterance_id, weighted / norm)
