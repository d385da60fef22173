"""Run configuration: defaults, validation, JSON round-trip, dotted overrides.

Every field has a default, so an empty config file is a complete run
specification. `config_to_dict` produces the effective-config echo; feeding
that echo back reproduces the identical run.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any


class ConfigError(ValueError):
    """Raised for unknown fields or invariant violations; names the field."""


@dataclass
class DatasetConfig:
    num_identities: int = 8
    images_per_identity: int = 8
    image_height: int = 64
    image_width: int = 32
    cameras: int = 2
    noise_level: float = 0.05
    seed: int = 0


@dataclass
class ModelConfig:
    stage_channels: tuple[int, int, int, int] = (16, 32, 64, 128)
    stage_strides: tuple[int, int, int, int] = (1, 2, 2, 1)
    blocks_per_stage: int = 2
    reduction_ratio: int = 16
    reverse_attention_on: bool = True
    multiscale_supervision_on: bool = True


@dataclass
class RllConfig:
    alpha: float = 1.2
    margin: float = 0.4
    temperature: float = 10.0
    lambda_balance: float = 1.0
    positive_weighting: str = "as_written"


@dataclass
class SmoothingConfig:
    epsilon: float = 0.1


@dataclass
class LossWeightsConfig:
    lambda1: float = 0.4
    lambda2: float = 0.1
    lambda3: float = 1.0
    lambda4: float = 0.03
    lambda5: float = 0.03


@dataclass
class ScheduleConfig:
    warmup_until: int = 10
    high_until: int = 40
    mid_until: int = 70
    last_until: int = 120
    warmup_lr: float = 3.5e-5
    high_lr: float = 3.5e-4
    mid_lr: float = 3.5e-5
    last_lr: float = 3.5e-6


@dataclass
class AdamConfig:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class AugmentConfig:
    flip_probability: float = 0.5
    erase_probability: float = 0.5
    erase_area_range: tuple[float, float] = (0.02, 0.4)
    erase_aspect_range: tuple[float, float] = (0.3, 3.3)
    erase_fill: float = 0.5


@dataclass
class TrainerConfig:
    batch_p: int = 16
    batch_k: int = 4
    iterations: int = 200
    iterations_per_epoch: int = 20
    # Desk-scale trainability knob: multiplies the schedule inside the
    # trainer only; the schedule function itself stays as printed.
    lr_scale: float = 50.0
    checkpoint_interval: int = 0
    queries_per_identity: int = 2


@dataclass
class Config:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    rll: RllConfig = field(default_factory=RllConfig)
    smoothing: SmoothingConfig = field(default_factory=SmoothingConfig)
    loss_weights: LossWeightsConfig = field(default_factory=LossWeightsConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    adam: AdamConfig = field(default_factory=AdamConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    trainer: TrainerConfig = field(default_factory=TrainerConfig)
    seed: int = 0


_SECTIONS = {f.name: f.type for f in dataclasses.fields(Config) if f.name != "seed"}


def default_config() -> Config:
    return Config()


def config_from_dict(d: dict) -> Config:
    cfg = Config()
    for key, value in d.items():
        if key == "seed":
            cfg.seed = int(value)
            continue
        section = getattr(cfg, key, None)
        if key not in _SECTIONS or section is None:
            raise ConfigError(f"unknown config field '{key}'")
        if not isinstance(value, dict):
            raise ConfigError(f"config section '{key}' must be an object")
        known = {f.name for f in dataclasses.fields(section)}
        for k, v in value.items():
            if k not in known:
                raise ConfigError(f"unknown config field '{key}.{k}'")
            if isinstance(getattr(section, k), tuple):
                v = tuple(v)
            setattr(section, k, v)
    return cfg


def config_to_dict(cfg: Config) -> dict:
    d = dataclasses.asdict(cfg)

    def fix(obj: Any) -> Any:
        if isinstance(obj, tuple):
            return [fix(v) for v in obj]
        if isinstance(obj, dict):
            return {k: fix(v) for k, v in obj.items()}
        return obj

    return fix(d)


def load_config_file(path) -> dict:
    """Read a JSON config file; empty or whitespace-only files mean defaults."""
    text = Path(path).read_text(encoding="utf-8")
    if not text.strip():
        return {}
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}") from None
    if not isinstance(d, dict):
        raise ConfigError(f"config file {path} must contain a JSON object")
    return d


def apply_override(d: dict, dotted: str, raw_value: str) -> None:
    """Set `a.b.c=value` into a nested config dict; values parse as JSON when possible."""
    try:
        value = json.loads(raw_value)
    except json.JSONDecodeError:
        value = raw_value
    keys = dotted.split(".")
    node = d
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot override through non-object field '{dotted}'")
    node[keys[-1]] = value


def _require(cond: bool, name: str, message: str) -> None:
    if not cond:
        raise ConfigError(f"{name}: {message}")


def validate_config(cfg: Config) -> Config:
    ds, m, r = cfg.dataset, cfg.model, cfg.rll
    _require(ds.num_identities >= 1, "dataset.num_identities", "must be >= 1")
    _require(ds.images_per_identity >= 1, "dataset.images_per_identity", "must be >= 1")
    _require(ds.cameras >= 1, "dataset.cameras", "must be >= 1")
    if ds.cameras >= 2:
        _require(ds.images_per_identity >= 2, "dataset.images_per_identity",
                 "must be >= 2 so every identity covers at least two cameras")
    _require(ds.noise_level >= 0, "dataset.noise_level", "must be nonnegative")
    _require(ds.image_height >= 8, "dataset.image_height", "must be >= 8")
    _require(ds.image_width >= 4, "dataset.image_width", "must be >= 4")

    _require(len(m.stage_channels) == 4, "model.stage_channels", "must list four stages")
    _require(len(m.stage_strides) == 4, "model.stage_strides", "must list four stages")
    _require(m.reduction_ratio >= 1, "model.reduction_ratio", "must be >= 1")
    _require(m.blocks_per_stage >= 1, "model.blocks_per_stage", "must be >= 1")
    for i, c in enumerate(m.stage_channels):
        _require(c >= 1, f"model.stage_channels[{i}]", "must be positive")
        _require(c % m.reduction_ratio == 0, f"model.stage_channels[{i}]",
                 f"must be divisible by reduction_ratio {m.reduction_ratio}")
        _require(c % 4 == 0, f"model.stage_channels[{i}]", "must be divisible by 4 (multi-scale groups)")
    for i, s in enumerate(m.stage_strides):
        _require(s >= 1, f"model.stage_strides[{i}]", "must be >= 1")
    _require(m.stage_strides[3] == 1, "model.stage_strides[3]", "last stage stride must be 1")

    _require(r.alpha > r.margin > 0, "rll.margin", "requires alpha > margin > 0")
    _require(r.temperature >= 0, "rll.temperature", "must be nonnegative")
    _require(r.positive_weighting in ("as_written", "uniform"), "rll.positive_weighting",
             "must be 'as_written' or 'uniform'")

    _require(0.0 <= cfg.smoothing.epsilon < 1.0, "smoothing.epsilon", "must lie in [0, 1)")
    for name in ("lambda1", "lambda2", "lambda3", "lambda4", "lambda5"):
        _require(getattr(cfg.loss_weights, name) >= 0, f"loss_weights.{name}", "must be nonnegative")

    s = cfg.schedule
    _require(1 <= s.warmup_until < s.high_until < s.mid_until < s.last_until,
             "schedule", "breakpoints must be increasing and start at >= 1")
    for name in ("warmup_lr", "high_lr", "mid_lr", "last_lr"):
        _require(getattr(s, name) > 0, f"schedule.{name}", "must be positive")

    a = cfg.adam
    _require(0.0 <= a.beta1 < 1.0, "adam.beta1", "must lie in [0, 1)")
    _require(0.0 <= a.beta2 < 1.0, "adam.beta2", "must lie in [0, 1)")
    _require(a.eps > 0, "adam.eps", "must be positive")

    g = cfg.augment
    _require(0.0 <= g.flip_probability <= 1.0, "augment.flip_probability", "must lie in [0, 1]")
    _require(0.0 <= g.erase_probability <= 1.0, "augment.erase_probability", "must lie in [0, 1]")
    _require(0 < g.erase_area_range[0] <= g.erase_area_range[1] <= 1.0,
             "augment.erase_area_range", "must satisfy 0 < lo <= hi <= 1")
    _require(0 < g.erase_aspect_range[0] <= g.erase_aspect_range[1],
             "augment.erase_aspect_range", "must satisfy 0 < lo <= hi")

    t = cfg.trainer
    _require(t.batch_p >= 1, "trainer.batch_p", "must be >= 1")
    _require(t.batch_k >= 2, "trainer.batch_k", "must be >= 2 (metric loss needs pairs)")
    _require(t.batch_k <= ds.images_per_identity, "trainer.batch_k",
             "cannot exceed dataset.images_per_identity")
    _require(t.iterations >= 1, "trainer.iterations", "must be >= 1")
    _require(t.iterations_per_epoch >= 1, "trainer.iterations_per_epoch", "must be >= 1")
    _require(t.lr_scale > 0, "trainer.lr_scale", "must be positive")
    _require(t.checkpoint_interval >= 0, "trainer.checkpoint_interval", "must be >= 0")
    _require(1 <= t.queries_per_identity < ds.images_per_identity, "trainer.queries_per_identity",
             "must leave at least one gallery image per identity")

    _require(cfg.seed >= 0, "seed", "must be nonnegative")
    return cfg
