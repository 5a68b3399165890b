"""Run configuration: nested dataclasses with YAML/JSON overlay."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml


@dataclass
class EncoderConfig:
    provider: str = "transformer"
    d_h: int = 128
    layers: int = 2
    heads: int = 4
    max_len: int = 128
    ffn_mult: int = 2


@dataclass
class MblpConfig:
    d_m: int = 256
    heads: int = 4
    slots: int = 4    # memory rows per task
    hidden: int = 64  # F head hidden width


@dataclass
class TrainConfig:
    lr: float = 0.1
    mblp_lr: float = 0.05
    batch_size: int = 32
    epochs: int = 20
    clip_norm: float = 5.0
    # stop once the epoch EE loss improves by <1% for `patience` epochs
    early_stop_patience: int = 3
    early_stop_rtol: float = 0.01


@dataclass
class SelectConfig:
    strategy: str = "mblp"
    query_size: int = 100
    m: int | None = 10  # None means average over all predictions
    batches: int | None = None  # None -> one batch per selected sample


@dataclass
class ExperimentConfig:
    rounds: int = 10
    initial: int = 100  # seed labeled set size
    eval_size: int = 500
    seed: int = 0
    target_f1: float = 0.80


@dataclass
class Config:
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    mblp: MblpConfig = field(default_factory=MblpConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    select: SelectConfig = field(default_factory=SelectConfig)
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "Config":
        cfg = cls()
        for section, values in d.items():
            if not hasattr(cfg, section):
                raise KeyError(f"unknown config section {section!r}")
            sub = getattr(cfg, section)
            if not isinstance(values, dict):
                raise TypeError(f"section {section!r} must be a mapping")
            for k, v in values.items():
                if not hasattr(sub, k):
                    raise KeyError(f"unknown key {section}.{k}")
                setattr(sub, k, v)
        return cfg


def load_config(path: str | Path | None = None) -> Config:
    """Read YAML or JSON config; missing keys keep defaults."""
    if path is None:
        return Config()
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        data = json.loads(text)
    else:
        data = yaml.safe_load(text) or {}
    return Config.from_dict(data)
