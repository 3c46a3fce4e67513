"""JSON run configuration with strict schema validation.

Example::

    {
      "train":   {"architecture": "double_siamese", "steps": 500, "width": 64, "height": 32},
      "sampler": {"p_similar": 0.5, "window_k": 3},
      "canny":   {"gaussian_sigma": 1.4, "low_threshold": 0.05, "high_threshold": 0.15},
      "eval":    {"pairs": 100, "mode": "raw"}
    }

Every section is optional; unknown keys anywhere are rejected.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from .canny import CannyConfig
from .training import TrainConfig

_NUM = {"type": "number"}
_POS_INT = {"type": "integer", "minimum": 1}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "train": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "architecture": {"enum": ["double_siamese", "common_edges"]},
                "learning_rate": {"type": "number", "minimum": 0},
                "batch_size": _POS_INT,
                "steps": {"type": "integer", "minimum": 0},
                "width": _POS_INT,
                "height": _POS_INT,
                "encoder_channels": {"type": "array", "items": _POS_INT, "minItems": 1},
                "kernel_size": _POS_INT,
                "optimizer": {"enum": ["sgd", "adam"]},
                "seed": {"type": "integer", "minimum": 0},
                "checkpoint_every": _POS_INT,
            },
        },
        "sampler": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "p_similar": {"type": "number", "minimum": 0, "maximum": 1},
                "window_k": _POS_INT,
                "score_polarity": {"enum": ["dissimilarity", "similarity"]},
            },
        },
        "canny": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "gaussian_sigma": {"type": "number", "exclusiveMinimum": 0},
                "low_threshold": _NUM,
                "high_threshold": _NUM,
            },
        },
        "eval": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "pairs": _POS_INT,
                "mode": {"enum": ["raw", "image_cr", "depth_cr", "cross_cr"]},
                "max_keypoints": _POS_INT,
                "max_match_distance": {"type": "integer", "minimum": 0, "maximum": 256},
                "ransac_iterations": _POS_INT,
                "inlier_px": {"type": "number", "exclusiveMinimum": 0},
            },
        },
    },
}


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        super().__init__("invalid config:\n  " + "\n  ".join(problems))
        self.problems = problems


@dataclass
class RunConfig:
    train: TrainConfig = field(default_factory=TrainConfig)
    canny: CannyConfig = field(default_factory=CannyConfig)
    eval: dict = field(default_factory=dict)


def validate(doc) -> list[str]:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    problems = []
    for err in sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path)):
        where = ".".join(str(p) for p in err.absolute_path) or "<root>"
        problems.append(f"{where}: {err.message}")
    return problems


def parse_config(doc) -> RunConfig:
    problems = validate(doc)
    if problems:
        raise ConfigError(problems)
    train = dict(doc.get("train", {}))
    train.update(doc.get("sampler", {}))
    try:
        tc = TrainConfig(**train)
        cc = CannyConfig(**doc.get("canny", {}))
    except ValueError as exc:
        raise ConfigError([str(exc)]) from exc
    return RunConfig(tc, cc, dict(doc.get("eval", {})))


def load_config(path) -> RunConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError([f"not valid JSON: {exc}"]) from exc
    return parse_config(doc)
