"""Dual-stream encoder and graph-sequence decoder (PyTorch)."""
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import ModelConfig
from .decoder import (
    Generation,
    OCSRModel,
    PrefixTooLong,
    compute_loss,
    grammar_legal,
)
from .encoder import ConvStream, Encoder, MHSA, ShapeMismatch, ViTStream, sinusoid_2d
from .schedule import lr_at, make_optimizer

__all__ = [
    "CheckpointError",
    "ConvStream",
    "Encoder",
    "Generation",
    "MHSA",
    "ModelConfig",
    "OCSRModel",
    "PrefixTooLong",
    "ShapeMismatch",
    "ViTStream",
    "compute_loss",
    "grammar_legal",
    "load_checkpoint",
    "lr_at",
    "make_optimizer",
    "save_checkpoint",
    "sinusoid_2d",
]
