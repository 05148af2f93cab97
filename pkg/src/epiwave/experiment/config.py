"""Experiment configuration loaded from TOML."""
from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field
from pathlib import Path

from ..model.config import ModelConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SABGNN_MODELS = ("sabgnn", "sabgnn_wsa", "sabgnn_wt", "sabgnn_ws")
BASELINE_MODELS = ("ha_all", "ha_window", "lstm_I", "lstm_IW", "seq2seq_I", "seq2seq_IW")
ALL_MODELS = SABGNN_MODELS + BASELINE_MODELS
ABLATION_MODELS = SABGNN_MODELS


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    """What to run and where to write it.

    ``data`` is a snapshot-series directory (as written by ``preprocess``).
    ``model`` holds ModelConfig overrides shared by every trainable model.
    ``sweep`` maps a ModelConfig field to the values to try.
    ``timing`` off writes 0 in the seconds column, making reports byte-stable.
    """

    data: Path
    out: Path
    scenarios: list = field(default_factory=lambda: [(21, 7), (21, 14), (21, 21)])
    ratios: tuple = (0.7, 0.1, 0.2)
    validation_block: int = 7
    models: list = field(default_factory=lambda: list(ALL_MODELS))
    seeds: list = field(default_factory=lambda: [0, 1, 2])
    model: dict = field(default_factory=dict)
    ha_window: int | None = None
    sweep: dict = field(default_factory=dict)
    workers: int = 1
    timing: bool = True
    save_models: bool = True
    time_budget: float = 1200.0

    def __post_init__(self):
        self.data = Path(self.data)
        self.out = Path(self.out)
        self.scenarios = [tuple(int(v) for v in s) for s in self.scenarios]
        self.ratios = tuple(float(r) for r in self.ratios)
        if len(self.ratios) != 3 or min(self.ratios) < 0 or abs(sum(self.ratios) - 1.0) > 1e-9:
            raise ConfigError(f"ratios must be three nonnegative numbers summing to 1, got {self.ratios}")
        for s in self.scenarios:
            if len(s) != 2 or min(s) < 1:
                raise ConfigError(f"scenario {s} must be a positive (D1, D2) pair")
        unknown = [m for m in self.models if m not in ALL_MODELS]
        if unknown:
            raise ConfigError(f"unknown models {unknown}; choose from {list(ALL_MODELS)}")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        self.seeds = [int(s) for s in self.seeds]
        fields = {f.name for f in dataclasses.fields(ModelConfig)}
        bad = sorted(set(self.model) - fields) + sorted(set(self.sweep) - fields)
        if bad:
            raise ConfigError(f"unknown model settings {bad}")
        for key in ("d1", "d2", "seed", "variant"):
            if key in self.model or key in self.sweep:
                raise ConfigError(f"{key!r} is set by the experiment, not the model table")
        for key, values in self.sweep.items():
            if not isinstance(values, list) or not values:
                raise ConfigError(f"sweep {key!r} needs a nonempty list of values")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        self.model_config(21, 7, 0)  # validates the overrides

    def model_config(self, d1, d2, seed, variant="full", **overrides) -> ModelConfig:
        try:
            return ModelConfig(**{**self.model, **overrides, "d1": d1, "d2": d2, "seed": seed, "variant": variant})
        except (TypeError, ValueError) as e:
            raise ConfigError(str(e)) from e

    @classmethod
    def from_dict(cls, d: dict, base: Path = Path(".")) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown experiment keys {unknown}")
        if "data" not in d or "out" not in d:
            raise ConfigError("experiment config needs 'data' and 'out'")
        d = dict(d)
        for key in ("data", "out"):
            p = Path(d[key])
            d[key] = p if p.is_absolute() else base / p
        return cls(**d)

    @classmethod
    def from_toml(cls, path) -> "ExperimentConfig":
        path = Path(path)
        with open(path, "rb") as f:
            return cls.from_dict(tomllib.load(f), path.parent)
