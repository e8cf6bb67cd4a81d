"""Flat ``key = value`` run configuration (valid TOML).

Every ModelConfig and TrainConfig field has a key; absent keys keep their
defaults.
"""

from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .errors import ConfigError
from .model import ModelConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass
class TrainConfig:
    lr_start: float = 2e-4
    lr_end: float = 1e-7
    beta1: float = 0.9
    beta2: float = 0.999
    batch_size: int = 4
    steps: int = 2000
    patch: int = 64
    flips: bool = True
    seed: int = 0
    lambda_f: float = 0.1
    ckpt_every: int = 500

    def __post_init__(self):
        if self.steps < 1:
            raise ConfigError(f"steps must be >= 1, got {self.steps}")
        if not 0 <= self.lr_end <= self.lr_start:
            raise ConfigError(f"need 0 <= lr_end <= lr_start, got {self.lr_end}, {self.lr_start}")
        if self.batch_size < 1 or self.ckpt_every < 1:
            raise ConfigError("batch_size and ckpt_every must be positive")
        if self.lambda_f < 0:
            raise ConfigError("lambda_f must be nonnegative")


def _split(values: dict) -> tuple[ModelConfig, TrainConfig]:
    model_keys = {f.name for f in fields(ModelConfig)}
    train_keys = {f.name for f in fields(TrainConfig)}
    unknown = set(values) - model_keys - train_keys
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        model = ModelConfig(**{k: v for k, v in values.items() if k in model_keys})
        train = TrainConfig(**{k: v for k, v in values.items() if k in train_keys})
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return model, train


def parse_config(text: str) -> tuple[ModelConfig, TrainConfig]:
    try:
        values = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config is not valid key = value text: {exc}") from exc
    nested = [k for k, v in values.items() if isinstance(v, dict)]
    if nested:
        raise ConfigError(f"config must be flat, found tables {nested}")
    return _split(values)


def load_config(path) -> tuple[ModelConfig, TrainConfig]:
    if path is None:
        return ModelConfig(), TrainConfig()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return f'"{v}"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    return repr(v)


def dump_config(model: ModelConfig, train: TrainConfig) -> str:
    lines = ["# model"]
    lines += [f"{k} = {_toml_value(v)}" for k, v in model.to_dict().items()]
    lines.append("# training")
    lines += [f"{k} = {_toml_value(v)}" for k, v in asdict(train).items()]
    return "\n".join(lines) + "\n"
