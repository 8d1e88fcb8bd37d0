"""Flat key-value run configuration.

The config file is a flat YAML mapping (scalars and comma-separated lists
only). Every key maps to one TrainingConfig field; unknown keys are an error
so typos fail loudly.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

import yaml


class ConfigError(ValueError):
    pass


def _int_tuple(value) -> tuple:
    if isinstance(value, (list, tuple)):
        return tuple(int(v) for v in value)
    return tuple(int(v) for v in str(value).split(",") if str(v).strip())


@dataclass
class TrainingConfig:
    # run
    seed: int = 0
    out_dir: str = "runs/default"
    device: str = "cpu"
    # model
    image_size: int = 256
    base_width: int = 64
    dilated_blocks: int = 8
    dilation: int = 2
    lm_map_size: int = 128
    lm_branch_factors: tuple = (1, 2, 4)
    disc_width: int = 64
    reduced_scale: bool = False
    # data
    train_image_flist: str = ""
    train_landmark_flist: str = ""
    train_mask_flist: str = ""
    val_image_flist: str = ""
    val_landmark_flist: str = ""
    val_mask_flist: str = ""
    # optimization
    lr: float = 1e-4
    d_lr_ratio: float = 0.1
    lr_decay_factor: float = 1.0
    lr_decay_interval: int = 100000
    batch_size: int = 4
    max_iterations: int = 100000
    checkpoint_interval: int = 5000
    validation_interval: int = 5000
    # losses
    w_pixel: float = 1.0
    w_landmark: float = 0.1
    w_tv: float = 0.1
    w_style: float = 250.0
    w_perceptual: float = 0.1
    w_adversarial: float = 0.1
    pixel_hole_weight: float = 1.0
    extractor_layers: tuple = (1, 2, 3, 4, 5)
    extractor_weights: str = "auto"
    extractor_width: int = 64

    def __post_init__(self):
        self.lm_branch_factors = _int_tuple(self.lm_branch_factors)
        self.extractor_layers = _int_tuple(self.extractor_layers)
        if self.reduced_scale:
            # quarter-width preset small enough for second-scale tests
            self.image_size = 32
            self.base_width = 16
            self.disc_width = 16
            self.extractor_width = 8
        self.validate()

    def validate(self):
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1")
        if self.lr <= 0:
            raise ConfigError("lr must be > 0")
        if not (0.0 < self.lr_decay_factor <= 1.0):
            raise ConfigError("lr_decay_factor must be in (0, 1]")
        if self.lr_decay_interval < 1 or self.checkpoint_interval < 1 or self.validation_interval < 1:
            raise ConfigError("intervals must be >= 1")
        if self.d_lr_ratio <= 0:
            raise ConfigError("d_lr_ratio must be > 0")
        for name in ("w_pixel", "w_landmark", "w_tv", "w_style", "w_perceptual", "w_adversarial"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.image_size % 4 != 0:
            raise ConfigError("image_size must be divisible by 4")

    @classmethod
    def field_names(cls) -> set:
        return {f.name for f in dataclasses.fields(cls)}

    @classmethod
    def from_dict(cls, raw: dict) -> "TrainingConfig":
        unknown = set(raw) - cls.field_names()
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        coerced = {}
        for f in dataclasses.fields(cls):
            if f.name not in raw:
                continue
            coerced[f.name] = _coerce(f, raw[f.name])
        return cls(**coerced)

    @classmethod
    def from_file(cls, path) -> "TrainingConfig":
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
        if raw is None:
            raw = {}
        if not isinstance(raw, dict):
            raise ConfigError(f"config {path} must be a flat key-value mapping")
        for key, value in raw.items():
            if isinstance(value, dict):
                raise ConfigError(f"config {path}: key {key!r} is nested; the file must be flat")
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["lm_branch_factors"] = ",".join(str(v) for v in self.lm_branch_factors)
        out["extractor_layers"] = ",".join(str(v) for v in self.extractor_layers)
        return out

    def save(self, path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            yaml.safe_dump(self.to_dict(), fh, sort_keys=True)

    def with_overrides(self, **overrides) -> "TrainingConfig":
        unknown = set(overrides) - self.field_names()
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        merged = dataclasses.asdict(self)
        by_name = {f.name: f for f in dataclasses.fields(self)}
        for key, value in overrides.items():
            merged[key] = _coerce(by_name[key], value)
        return TrainingConfig(**merged)


def _coerce(f: dataclasses.Field, value):
    """Coerce a raw YAML/CLI value to the field's declared type."""
    if f.type in ("tuple", tuple):
        return _int_tuple(value)
    if f.type in ("bool", bool):
        if isinstance(value, bool):
            return value
        text = str(value).strip().lower()
        if text in ("1", "true", "yes", "on"):
            return True
        if text in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"cannot parse boolean for {f.name}: {value!r}")
    if f.type in ("int", int):
        return int(value)
    if f.type in ("float", float):
        return float(value)
    return str(value)
