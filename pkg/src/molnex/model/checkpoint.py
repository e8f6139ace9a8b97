"""Checkpoint container: named tensors plus config, vocab digest and training state."""
from __future__ import annotations

from pathlib import Path

import torch

from .config import ModelConfig

FORMAT = "molnex-checkpoint"
VERSION = 1


class CheckpointError(RuntimeError):
    pass


def save_checkpoint(path, model, cfg: ModelConfig, vocab_tokens: list[str], vocab_digest: str, step: int = 0, optimizer=None, extra: dict | None = None) -> None:
    payload = {
        "format": FORMAT,
        "version": VERSION,
        "config": cfg.to_dict(),
        "vocab": list(vocab_tokens),
        "vocab_hash": vocab_digest,
        "step": int(step),
        "model": model.state_dict(),
        "optimizer": optimizer.state_dict() if optimizer is not None else None,
        "extra": extra or {},
    }
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    torch.save(payload, tmp)
    tmp.replace(path)


def load_checkpoint(path, expected_vocab_hash: str | None = None) -> dict:
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:  # torch raises a variety of types for bad files
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("format") != FORMAT:
        raise CheckpointError(f"{path} is not a checkpoint")
    if payload.get("version") != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {payload.get('version')}")
    if expected_vocab_hash is not None and payload["vocab_hash"] != expected_vocab_hash:
        raise CheckpointError("vocabulary hash mismatch")
    payload["config"] = ModelConfig.from_dict(payload["config"])
    return payload
