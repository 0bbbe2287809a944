"""Pipeline configuration: one JSON document, full defaulting, strict keys.

Every field has a default, so an empty document (or no config file at all)
is a complete configuration; unknown keys are rejected anywhere in the
tree so typos cannot silently fall back to defaults.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

from .decoding import DecoderConfig
from .errors import InvalidInputError
from .losses import MultiTaskWeights
from .simulate import SimConfig


@dataclass(frozen=True)
class ClusteringConfig:
    stop_threshold: float = 1.0
    num_speakers: Optional[int] = None


@dataclass(frozen=True)
class PipelineConfig:
    frame_rate: float = 100.0
    channels: int = 2
    ubd_widen_width: int = 2
    collar: float = 0.25
    weights: MultiTaskWeights = field(default_factory=MultiTaskWeights)
    decoder: DecoderConfig = field(default_factory=DecoderConfig)
    clustering: ClusteringConfig = field(default_factory=ClusteringConfig)
    simulator: SimConfig = field(default_factory=SimConfig)


def _check_keys(doc: dict, allowed: set[str], section: str) -> None:
    unknown = set(doc) - allowed
    if unknown:
        raise InvalidInputError(
            f"unknown config key(s) in {section}: {sorted(unknown)}"
        )


def _build_simple(cls, doc: dict, section: str):
    """Fill a flat dataclass from a dict, keeping defaults for absent keys."""
    names = {f.name for f in fields(cls)}
    _check_keys(doc, names, section)
    defaults = cls()
    kwargs = {}
    for f in fields(cls):
        if f.name in doc:
            value = doc[f.name]
            if isinstance(value, list):
                value = tuple(value)
            kwargs[f.name] = value
        else:
            kwargs[f.name] = getattr(defaults, f.name)
    return cls(**kwargs)


def config_from_dict(doc: dict) -> PipelineConfig:
    _check_keys(doc, {"frame_rate", "channels", "ubd_widen_width", "collar",
                      "weights", "decoder", "clustering", "simulator"}, "config")
    defaults = PipelineConfig()
    return PipelineConfig(
        frame_rate=float(doc.get("frame_rate", defaults.frame_rate)),
        channels=int(doc.get("channels", defaults.channels)),
        ubd_widen_width=int(doc.get("ubd_widen_width", defaults.ubd_widen_width)),
        collar=float(doc.get("collar", defaults.collar)),
        weights=MultiTaskWeights.from_dict(doc.get("weights", {})),
        decoder=_build_simple(DecoderConfig, doc.get("decoder", {}), "decoder"),
        clustering=_build_simple(ClusteringConfig, doc.get("clustering", {}),
                                 "clustering"),
        simulator=_build_simple(SimConfig, doc.get("simulator", {}), "simulator"),
    )


def config_to_dict(config: PipelineConfig) -> dict:
    return {
        "frame_rate": config.frame_rate,
        "channels": config.channels,
        "ubd_widen_width": config.ubd_widen_width,
        "collar": config.collar,
        "weights": config.weights.to_dict(),
        "decoder": {f.name: getattr(config.decoder, f.name)
                    for f in fields(DecoderConfig)},
        "clustering": {f.name: getattr(config.clustering, f.name)
                       for f in fields(ClusteringConfig)},
        "simulator": {f.name: list(v) if isinstance(v := getattr(config.simulator, f.name), tuple) else v
                      for f in fields(SimConfig)},
    }


def load_config(path=None) -> PipelineConfig:
    """Read a JSON config file; None means all defaults."""
    if path is None:
        return PipelineConfig()
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise InvalidInputError(f"config {path} must be a JSON object")
    return config_from_dict(doc)
