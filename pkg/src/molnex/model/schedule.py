from __future__ import annotations

import math

import torch

MAX_LR = 3e-4
WARMUP_FRAC = 0.05


def lr_at(step: int, total: int, max_lr: float = MAX_LR, warmup_frac: float = WARMUP_FRAC) -> float:
    """Linear warmup reaching ``max_lr`` at ``warmup_frac * total``, cosine to zero after."""
    warm = max(1, int(round(warmup_frac * total)))
    if step < warm:
        return max_lr * (step + 1) / (warm + 1)
    if step == warm or total <= warm:
        return max_lr
    t = min(1.0, (step - warm) / (total - warm))
    return max_lr * 0.5 * (1.0 + math.cos(math.pi * t))


def make_optimizer(model: torch.nn.Module, max_lr: float = MAX_LR) -> torch.optim.Optimizer:
    return torch.optim.Adam(model.parameters(), lr=max_lr)
