"""Posterior score grids and binary cross-entropy helpers.

All posteriors are clamped into [CLAMP_MIN, CLAMP_MAX] on construction so
log terms stay finite at saturated predictions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .timeline import _check_kind

CLAMP_MIN = 1e-7
CLAMP_MAX = 1.0 - 1e-7


def clamp_posteriors(values) -> np.ndarray:
    return np.clip(np.asarray(values, dtype=np.float64), CLAMP_MIN, CLAMP_MAX)


def bce_terms(targets, posteriors) -> np.ndarray:
    """Elementwise binary cross entropy; soft targets in [0, 1] allowed."""
    t = np.asarray(targets, dtype=np.float64)
    p = np.asarray(posteriors, dtype=np.float64)
    return -(t * np.log(p) + (1.0 - t) * np.log1p(-p))


def mean_bce(targets, posteriors) -> float:
    return float(bce_terms(targets, posteriors).mean())


@dataclass(frozen=True)
class ScoreMatrix:
    """A T x C grid of per-frame, per-channel posteriors, clamped into (0, 1)."""

    values: np.ndarray
    kind: str

    def __post_init__(self):
        _check_kind(self.kind)
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2:
            raise InvalidInputError("score matrix must be 2-dimensional (T x C)")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InvalidInputError("score matrix needs at least one frame and channel")
        if not np.isfinite(arr).all():
            raise InvalidInputError("score matrix entries must be finite")
        arr = np.ascontiguousarray(np.clip(arr, CLAMP_MIN, CLAMP_MAX))
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def num_frames(self) -> int:
        return self.values.shape[0]

    @property
    def num_channels(self) -> int:
        return self.values.shape[1]

    def write_csv(self, path) -> None:
        """Headerless CSV, one row per frame, one column per channel."""
        np.savetxt(path, self.values, fmt="%.10g", delimiter=",")

    @classmethod
    def read_csv(cls, path, kind: str) -> "ScoreMatrix":
        try:
            values = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
        except ValueError as exc:
            raise InvalidInputError(f"malformed score CSV {path}: {exc}") from exc
        return cls(values, kind)

    def to_json(self, frame_rate: float, indent: int | None = None) -> str:
        doc = {
            "kind": self.kind,
            "frame_rate": float(frame_rate),
            "values": self.values.tolist(),
        }
        return json.dumps(doc, indent=indent, sort_keys=True)

    @classmethod
    def from_json(cls, text: str | dict) -> tuple["ScoreMatrix", float]:
        doc = json.loads(text) if isinstance(text, str) else text
        try:
            return cls(np.asarray(doc["values"], dtype=np.float64), doc["kind"]), \
                float(doc["frame_rate"])
        except (KeyError, TypeError) as exc:
            raise InvalidInputError(f"malformed score document: {exc}") from exc
