"""Experiment configuration: YAML loading, defaults, hashing.

A single YAML file describes the whole experiment; every field has a default
that reproduces the reference protocol (11 threshold actions over scores
56..66, C_max=500, 100 training iterations, ~183 train days / 90 test days).
``env.money_scale`` / ``env.money_scale_state`` may be null, in which case the
harness derives them from the training partition (95th percentile of daily
fraud dollars).
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass

import yaml

from .agent import TrainConfig
from .env import EnvConfig, suggest_money_scale
from .errors import ConfigError
from .stream import StreamConfig, TransactionStream, default_calibration

DEFAULT_SEEDS = (11, 23, 37, 53, 71)
DEFAULT_NUM_DAYS = 273
DEFAULT_SPLIT = (183, 273)


@dataclass(frozen=True)
class ExperimentConfig:
    stream: StreamConfig
    env: EnvConfig
    train: TrainConfig
    split: tuple  # (train_end_day, test_end_day)
    seeds: tuple
    output_dir: str = "out"
    # None means "derive from the training partition" at run time.
    auto_money_scale: bool = True

    def validate(self) -> None:
        self.stream.validate()
        self.env.validate()
        self.train.validate()
        train_end, test_end = self.split
        if not 0 < train_end < test_end <= self.stream.num_days:
            raise ConfigError(
                f"split ({train_end}, {test_end}) invalid for a "
                f"{self.stream.num_days}-day stream"
            )
        if len(self.seeds) < 1:
            raise ConfigError("at least one seed is required")


def default_experiment_config(output_dir: str = "out") -> ExperimentConfig:
    return ExperimentConfig(
        stream=default_calibration(num_days=DEFAULT_NUM_DAYS),
        env=EnvConfig(),
        train=TrainConfig(),
        split=DEFAULT_SPLIT,
        seeds=DEFAULT_SEEDS,
        output_dir=output_dir,
        auto_money_scale=True,
    )


def _to_plain(obj):
    if dataclasses.is_dataclass(obj):
        return {
            f.name: _to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)
        }
    if isinstance(obj, (list, tuple)):
        return [_to_plain(v) for v in obj]
    return obj


def config_to_dict(config: ExperimentConfig) -> dict:
    plain = _to_plain(config)
    plain.pop("output_dir", None)  # a location, not an experiment parameter
    return plain


def config_hash(config: ExperimentConfig) -> str:
    canonical = json.dumps(config_to_dict(config), sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def _merge_dataclass(cls, defaults, overrides: dict, section: str):
    if not overrides:
        return defaults
    valid = {f.name for f in dataclasses.fields(cls)}
    unknown = set(overrides) - valid
    if unknown:
        raise ConfigError(f"{section}: unknown fields {sorted(unknown)}")
    coerced = {
        k: tuple(v) if isinstance(v, list) else v for k, v in overrides.items()
    }
    return dataclasses.replace(defaults, **coerced)


def load_config(path, output_dir=None) -> ExperimentConfig:
    """Load a YAML experiment config, filling every omitted field with defaults."""
    with open(path) as fh:
        raw = yaml.safe_load(fh) or {}
    base = default_experiment_config()

    stream_raw = dict(raw.get("stream") or {})
    num_days = stream_raw.pop("num_days", None)
    stream = default_calibration(
        num_days=num_days if num_days is not None else DEFAULT_NUM_DAYS
    )
    stream = _merge_dataclass(StreamConfig, stream, stream_raw, "stream")

    env_raw = dict(raw.get("env") or {})
    auto_money = (
        env_raw.get("money_scale") is None and env_raw.get("money_scale_state") is None
    )
    env_raw = {k: v for k, v in env_raw.items() if v is not None}
    env = _merge_dataclass(EnvConfig, base.env, env_raw, "env")

    train = _merge_dataclass(TrainConfig, base.train, raw.get("train") or {}, "train")

    split_raw = raw.get("split") or {}
    split = (
        split_raw.get("train_end_day", DEFAULT_SPLIT[0]),
        split_raw.get("test_end_day", min(DEFAULT_SPLIT[1], stream.num_days)),
    )
    seeds = tuple(raw.get("seeds") or DEFAULT_SEEDS)
    out = output_dir if output_dir is not None else raw.get("output_dir", "out")
    config = ExperimentConfig(
        stream=stream, env=env, train=train, split=split, seeds=seeds,
        output_dir=str(out), auto_money_scale=auto_money,
    )
    config.validate()
    return config


def resolve_env_config(config: ExperimentConfig,
                       train_stream: TransactionStream) -> EnvConfig:
    """Fill in auto money scales from the training partition."""
    if not config.auto_money_scale:
        return config.env
    scale = round(suggest_money_scale(train_stream), 2)
    return dataclasses.replace(
        config.env, money_scale=scale, money_scale_state=scale
    )
