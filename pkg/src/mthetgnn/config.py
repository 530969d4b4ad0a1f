"""Flat ``key = value`` run configuration shared by every subcommand.

Blank lines and ``#`` comments are ignored. List values are comma-separated
(``kernel_sizes = 3,5,7``). Command-line flags override file values.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, fields
from pathlib import Path

from .dataset import DatasetConfig
from .errors import ConfigError
from .hetgnn import ModelConfig
from .relation import RELATION_TAGS, RelationConfig
from .temporal import TemporalConfig
from .training import TrainConfig

WORKDIR_ENV = "MTHETGNN_WORKDIR"


@dataclass
class RunConfig:
    data: str = ""
    delimiter: str = ","
    skip_header: bool = False
    workdir: str = ""
    # dataset
    window_T: int = 32
    horizons: tuple[int, ...] = (3,)
    split_ratios: tuple[float, ...] = (0.6, 0.2, 0.2)
    normalization: str = "max_abs"
    # relations
    te_history_k: int = 1
    te_bins: int = 8
    threshold: float = 0.1
    adjacency_norm: str = "row"
    # temporal
    kernel_sizes: tuple[int, ...] = (3, 5, 7)
    channels_per_branch: int = 8
    # model
    gnn_layers: int = 2
    hidden_size: int = 50
    relations: tuple[str, ...] = RELATION_TAGS
    attention: bool = True
    # training
    loss: str = "auto"
    batch_size: int = 32
    epochs: int = 100
    lr: float = 1e-3
    seed: int = 0
    early_stop_patience: int = 15
    clip_norm: float = 5.0

    def resolved_workdir(self) -> Path:
        return Path(self.workdir or os.environ.get(WORKDIR_ENV) or "mthetgnn_work")

    def dataset_config(self, horizon: int | None = None) -> DatasetConfig:
        h = horizon if horizon is not None else max(self.horizons)
        return DatasetConfig(self.window_T, h, tuple(self.split_ratios), self.normalization)

    def relation_config(self) -> RelationConfig:
        return RelationConfig(self.te_history_k, self.te_bins, self.threshold, self.adjacency_norm)

    def temporal_config(self) -> TemporalConfig:
        return TemporalConfig(tuple(self.kernel_sizes), self.channels_per_branch)

    def model_config(self) -> ModelConfig:
        return ModelConfig(self.gnn_layers, self.hidden_size, tuple(self.relations), self.attention, self.threshold)

    def train_config(self) -> TrainConfig:
        return TrainConfig(self.loss, self.batch_size, self.epochs, self.lr, self.seed,
                           self.early_stop_patience, self.clip_norm)

    def validate(self) -> None:
        if not self.horizons:
            raise ConfigError("horizon list is empty")
        for h in self.horizons:
            self.dataset_config(h).validate(max(self.kernel_sizes))
        self.relation_config().validate()
        self.temporal_config().validate(self.window_T)
        self.model_config().validate()
        self.train_config().validate()


_BOOL = {"1": True, "true": True, "yes": True, "on": True, "0": False, "false": False, "no": False, "off": False}


def _convert(name: str, kind, raw: str):
    raw = raw.strip()
    try:
        if kind in (bool, "bool"):
            return _BOOL[raw.lower()]
        if kind in (int, "int"):
            return int(raw)
        if kind in (float, "float"):
            return float(raw)
        if kind in ("tuple[int, ...]",):
            return tuple(int(v) for v in raw.split(",") if v.strip())
        if kind in ("tuple[float, ...]",):
            return tuple(float(v) for v in raw.split(",") if v.strip())
        if kind in ("tuple[str, ...]",):
            return tuple(v.strip() for v in raw.split(",") if v.strip())
        if raw == "\\t":
            return "\t"
        return raw
    except (ValueError, KeyError):
        raise ConfigError(f"bad value for {name}: {raw!r}") from None


FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def parse_pairs(pairs: dict[str, str], base: RunConfig | None = None) -> RunConfig:
    cfg = dataclasses.replace(base) if base else RunConfig()
    for key, raw in pairs.items():
        key = key.strip().replace("-", "_")
        if key not in FIELD_TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        setattr(cfg, key, _convert(key, FIELD_TYPES[key], raw))
    return cfg


def read_config_file(path) -> dict[str, str]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"no such config file: {path}")
    pairs = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = line.split("=", 1)
        pairs[key.strip()] = value.strip()
    return pairs


def load_config(path=None, overrides: dict[str, str] | None = None) -> RunConfig:
    cfg = parse_pairs(read_config_file(path)) if path else RunConfig()
    if overrides:
        cfg = parse_pairs(overrides, cfg)
    return cfg


def dump_config(cfg: RunConfig) -> str:
    lines = []
    for f in fields(RunConfig):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = ",".join(str(x) for x in v)
        elif isinstance(v, bool):
            v = "true" if v else "false"
        elif v == "\t":
            v = "\\t"
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"
