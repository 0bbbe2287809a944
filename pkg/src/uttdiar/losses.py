"""Onset-detection loss, embedding contrast loss, and the multi-task sum.

The onset (UBD) reference rendered from an optimal assignment is a grid of
single-frame spikes; ``widen_ubd_labels`` spreads each spike over a small
triangular window to counter the extreme 0/1 class imbalance before the BCE
is taken.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidInputError
from .scores import ScoreMatrix, bce_terms

UNIT_NORM_TOL = 1e-6


def widen_ubd_labels(grid: np.ndarray, width: int) -> np.ndarray:
    """Spread each unit spike into a triangular window of half-width ``width``.

    A spike at frame t becomes (width+1-|d|)/(width+1) at frame t+d for
    |d| <= width; overlapping windows take the pointwise max. width=0 is the
    identity.
    """
    if width < 0:
        raise InvalidInputError("width must be >= 0")
    spikes = np.asarray(grid, dtype=np.float64)
    if spikes.ndim != 2:
        raise InvalidInputError("UBD grid must be 2-dimensional (T x C)")
    num_frames = spikes.shape[0]
    out = np.zeros_like(spikes)
    for d in range(-width, width + 1):
        value = (width + 1 - abs(d)) / (width + 1)
        src_lo, src_hi = max(0, -d), min(num_frames, num_frames - d)
        dst_lo, dst_hi = max(0, d), min(num_frames, num_frames + d)
        np.maximum(out[dst_lo:dst_hi], value * spikes[src_lo:src_hi],
                   out=out[dst_lo:dst_hi])
    return out


def ubd_loss(reference: np.ndarray, scores: ScoreMatrix, width: int = 2) -> float:
    """Mean BCE between the widened onset reference and the estimated grid."""
    ref = np.asarray(reference, dtype=np.float64)
    if ref.shape != scores.values.shape:
        raise InvalidInputError(
            f"reference shape {ref.shape} != scores shape {scores.values.shape}"
        )
    return float(bce_terms(widen_ubd_labels(ref, width), scores.values).mean())


def embedding_loss(embeddings: Sequence[tuple[np.ndarray, str]],
                   margin: float = 1.0) -> float:
    """Pairwise contrast loss over unit-norm utterance embeddings.

    Mean squared distance over same-speaker pairs plus mean squared hinge
    max(0, margin - distance) over different-speaker pairs; a term with no
    pairs contributes 0.
    """
    if len(embeddings) < 2:
        raise InvalidInputError("embedding loss needs at least 2 embeddings")
    vectors = np.stack([np.asarray(v, dtype=np.float64) for v, _ in embeddings])
    speakers = [s for _, s in embeddings]
    norms = np.linalg.norm(vectors, axis=1)
    if np.abs(norms - 1.0).max() > UNIT_NORM_TOL:
        raise InvalidInputError("embeddings must be unit-norm")

    diff = vectors[:, None, :] - vectors[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=2))
    same = np.array([[a == b for b in speakers] for a in speakers])
    upper = np.triu(np.ones_like(same, dtype=bool), k=1)

    same_pairs = dist[same & upper]
    diff_pairs = dist[~same & upper]
    loss = 0.0
    if same_pairs.size:
        loss += float((same_pairs ** 2).mean())
    if diff_pairs.size:
        hinge = np.maximum(0.0, margin - diff_pairs)
        loss += float((hinge ** 2).mean())
    return loss


@dataclass(frozen=True)
class MultiTaskWeights:
    """Weights of the VAD, UBD, and embedding loss components."""

    alpha: float = 1.0
    gamma: float = 0.1
    lambda_: float = 0.03

    def __post_init__(self):
        if self.alpha < 0 or self.gamma < 0 or self.lambda_ < 0:
            raise InvalidInputError("multi-task weights must be >= 0")

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "gamma": self.gamma, "lambda": self.lambda_}

    @classmethod
    def from_dict(cls, doc: dict) -> "MultiTaskWeights":
        unknown = set(doc) - {"alpha", "gamma", "lambda"}
        if unknown:
            raise InvalidInputError(f"unknown weight keys: {sorted(unknown)}")
        defaults = cls()
        return cls(
            alpha=float(doc.get("alpha", defaults.alpha)),
            gamma=float(doc.get("gamma", defaults.gamma)),
            lambda_=float(doc.get("lambda", defaults.lambda_)),
        )


@dataclass(frozen=True)
class LossBreakdown:
    vad: float
    ubd: float
    emb: float
    total: float

    def to_dict(self) -> dict:
        return {"vad": self.vad, "ubd": self.ubd, "emb": self.emb, "total": self.total}


def combine(losses: tuple[float, float, float],
            weights: MultiTaskWeights = MultiTaskWeights()) -> LossBreakdown:
    """Weighted sum of the three loss components."""
    vad, ubd, emb = (float(x) for x in losses)
    for name, value in (("vad", vad), ("ubd", ubd), ("emb", emb)):
        if not np.isfinite(value):
            raise InvalidInputError(f"{name} loss must be finite")
    total = weights.alpha * vad + weights.gamma * ubd + weights.lambda_ * emb
    return LossBreakdown(vad=vad, ubd=ubd, emb=emb, total=total)
