"""Layered run configuration: built-in defaults, then a JSON config
file, then command-line flags. The effective values are echoed to the
log at the start of every run."""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import ConfigError
from .geometry import DEFAULT_PIVOT, PIVOT_BOTTOM, PIVOT_TOP, SPEED_OF_SOUND
from .scoring import WEIGHT_MODE_DIRECT, WEIGHT_MODE_INVERSE

DEFAULT_THRESHOLD = 0.60


@dataclass
class CliConfig:
    c: float = SPEED_OF_SOUND
    pivot: str = DEFAULT_PIVOT
    method: str = "combined"
    threshold: float = DEFAULT_THRESHOLD
    weight_mode: str = WEIGHT_MODE_INVERSE

    def validate(self):
        if self.pivot not in (PIVOT_TOP, PIVOT_BOTTOM):
            raise ConfigError(f"geometry.pivot must be 'top' or 'bottom', got {self.pivot!r}")
        if self.weight_mode not in (WEIGHT_MODE_INVERSE, WEIGHT_MODE_DIRECT):
            raise ConfigError(
                f"scoring.weight_mode must be 'inverse' or 'direct', got {self.weight_mode!r}"
            )
        if self.c <= 0:
            raise ConfigError("geometry.c must be positive")
        return self

    def as_dict(self) -> dict:
        return {
            "geometry": {"c": self.c, "pivot": self.pivot},
            "scoring": {
                "method": self.method,
                "threshold": self.threshold,
                "weight_mode": self.weight_mode,
            },
        }


def load_config(path=None, overrides=None) -> CliConfig:
    """Defaults <- config file <- explicit flag overrides."""
    config = CliConfig()
    if path is not None:
        with open(path) as f:
            doc = json.load(f)
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        geometry = doc.get("geometry", {})
        scoring = doc.get("scoring", {})
        config.c = float(geometry.get("c", config.c))
        config.pivot = str(geometry.get("pivot", config.pivot))
        config.method = str(scoring.get("method", config.method))
        config.threshold = float(scoring.get("threshold", config.threshold))
        config.weight_mode = str(scoring.get("weight_mode", config.weight_mode))
    for key, value in (overrides or {}).items():
        if value is not None:
            setattr(config, key, value)
    return config.validate()
