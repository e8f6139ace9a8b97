"""Flat ``key = value`` run configuration.

Top-level keys configure dataset generation, training and prediction.
``model.<field>`` keys override :class:`ModelConfig` fields and
``augment.<field>`` keys override :class:`AugmentConfig` fields.  Lines
starting with ``#`` are comments.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from ..augment import AugmentConfig
from ..model import ModelConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    # dataset
    image_size: int = 128
    canvas: int = 384
    bins: int = 64
    augment: bool = True
    random_style: bool = True
    # training
    steps: int = 2000
    batch_size: int = 8
    max_lr: float = 3e-4
    warmup_frac: float = 0.05
    bond_weight: float = 1.0
    checkpoint_every: int = 500
    log_every: int = 50
    # prediction
    predict_batch_size: int = 16
    sigma: float = 0.8
    model: dict = field(default_factory=dict)
    aug: dict = field(default_factory=dict)

    def model_config(self, vocab_size: int) -> ModelConfig:
        kw = dict(image_size=self.image_size, bins=self.bins, vocab_size=vocab_size)
        kw.update(self.model)
        return ModelConfig(**kw)

    def augment_config(self) -> AugmentConfig:
        base = AugmentConfig() if self.augment else AugmentConfig.off()
        return replace(base, output_size=(self.image_size, self.image_size), seed=self.seed, **self.aug)

    def with_values(self, **kw) -> "PipelineConfig":
        return replace(self, **kw)


_TOP = {f.name: f for f in fields(PipelineConfig) if f.name not in ("model", "aug")}
_MODEL = {f.name: f for f in fields(ModelConfig)}
_AUG = {f.name: f for f in fields(AugmentConfig)}


def _coerce(key: str, raw: str, default):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            kind = type(default[0]) if default else float
            return tuple(kind(p) for p in raw.split(","))
        if default is None:  # optional int fields such as local_window
            return None if raw.lower() in ("", "none") else int(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc


def parse_config(text: str, base: PipelineConfig | None = None) -> PipelineConfig:
    cfg = base or PipelineConfig()
    top, model, aug = {}, dict(cfg.model), dict(cfg.aug)
    model_defaults, aug_defaults = ModelConfig(), AugmentConfig()
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key.startswith("model."):
            name = key[6:]
            if name not in _MODEL:
                raise ConfigError(f"line {n}: unknown model key {name!r}")
            model[name] = _coerce(key, value, getattr(model_defaults, name))
        elif key.startswith("augment."):
            name = key[8:]
            if name not in _AUG:
                raise ConfigError(f"line {n}: unknown augment key {name!r}")
            aug[name] = _coerce(key, value, getattr(aug_defaults, name))
        elif key in _TOP:
            top[key] = _coerce(key, value, getattr(cfg, key))
        else:
            raise ConfigError(f"line {n}: unknown key {key!r}")
    return replace(cfg, model=model, aug=aug, **top)


def load_config(path=None, **overrides) -> PipelineConfig:
    cfg = PipelineConfig()
    if path is not None:
        cfg = parse_config(Path(path).read_text(), cfg)
    return replace(cfg, **overrides) if overrides else cfg


def worker_threads() -> int:
    """Parallelism cap from ``MOLNEX_THREADS`` (default 1)."""
    raw = os.environ.get("MOLNEX_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1
