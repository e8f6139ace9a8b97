"""Dual-stream image encoder: a ConvNeXt-style conv stream and a multi-patch ViT stream."""
from __future__ import annotations

import math

import torch
import torch.nn as nn
import torch.nn.functional as F

from .config import ModelConfig


class ShapeMismatch(ValueError):
    pass


class LayerNorm2d(nn.Module):
    """LayerNorm over channels of an NCHW tensor."""

    def __init__(self, c: int, eps: float = 1e-6):
        super().__init__()
        self.norm = nn.LayerNorm(c, eps=eps)

    def forward(self, x):
        return self.norm(x.permute(0, 2, 3, 1)).permute(0, 3, 1, 2)


class ConvBlock(nn.Module):
    """Depthwise 7x7, then a pointwise 4x expansion, GELU and projection; residual."""

    def __init__(self, c: int, expansion: int = 4):
        super().__init__()
        self.dw = nn.Conv2d(c, c, 7, padding=3, groups=c)
        self.norm = nn.LayerNorm(c, eps=1e-6)
        self.pw1 = nn.Linear(c, expansion * c)
        self.pw2 = nn.Linear(expansion * c, c)

    def forward(self, x):
        y = self.dw(x).permute(0, 2, 3, 1)
        y = self.pw2(F.gelu(self.pw1(self.norm(y))))
        return x + y.permute(0, 3, 1, 2)


class ConvStream(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        ch = cfg.conv_channels
        self.stem = nn.Sequential(nn.Conv2d(cfg.in_channels, ch[0], 4, stride=4), LayerNorm2d(ch[0]))
        self.down = nn.ModuleList(
            nn.Sequential(LayerNorm2d(ch[k - 1]), nn.Conv2d(ch[k - 1], ch[k], 2, stride=2)) for k in range(1, len(ch))
        )
        self.stages = nn.ModuleList(
            nn.Sequential(*[ConvBlock(ch[k]) for _ in range(cfg.conv_depths[k])]) for k in range(len(ch))
        )
        self.image_size = cfg.image_size
        self.in_channels = cfg.in_channels

    def forward(self, x) -> list[torch.Tensor]:
        if x.shape[1] != self.in_channels or x.shape[-2:] != (self.image_size, self.image_size):
            raise ShapeMismatch(f"expected (*, {self.in_channels}, {self.image_size}, {self.image_size}), got {tuple(x.shape)}")
        maps = []
        h = self.stem(x)
        for k, stage in enumerate(self.stages):
            if k:
                h = self.down[k - 1](h)
            h = stage(h)
            maps.append(h)
        return maps


class MHSA(nn.Module):
    """softmax(QK^T / sqrt(d_k)) V, optionally restricted to a local window of tokens."""

    def __init__(self, dim: int, heads: int, dropout: float = 0.0, window: int | None = None):
        super().__init__()
        self.heads = heads
        self.dk = dim // heads
        self.qkv = nn.Linear(dim, 3 * dim)
        self.out = nn.Linear(dim, dim)
        self.drop = nn.Dropout(dropout)
        self.window = window
        self.last_attention: torch.Tensor | None = None

    def forward(self, x, grid: tuple[int, int] | None = None):
        B, N, D = x.shape
        q, k, v = self.qkv(x).reshape(B, N, 3, self.heads, self.dk).permute(2, 0, 3, 1, 4)
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.dk)
        if self.window is not None and grid is not None:
            scores = scores.masked_fill(~_window_mask(grid, self.window, x.device), float("-inf"))
        attn = scores.softmax(dim=-1)
        self.last_attention = attn.detach()
        y = (self.drop(attn) @ v).transpose(1, 2).reshape(B, N, D)
        return self.out(y)


def _window_mask(grid, window, device):
    gh, gw = grid
    ys, xs = torch.meshgrid(torch.arange(gh, device=device), torch.arange(gw, device=device), indexing="ij")
    ys, xs = ys.flatten(), xs.flatten()
    return ((ys[:, None] - ys[None, :]).abs() <= window) & ((xs[:, None] - xs[None, :]).abs() <= window)


class ConvFFN(nn.Module):
    """Two 3x3 convolutions over the token grid."""

    def __init__(self, dim: int, mult: int = 4):
        super().__init__()
        self.c1 = nn.Conv2d(dim, dim * mult, 3, padding=1)
        self.c2 = nn.Conv2d(dim * mult, dim, 3, padding=1)

    def forward(self, x):
        return self.c2(F.gelu(self.c1(x)))


class PatchBranch(nn.Module):
    """Patchify at size p, one transformer block, then unpatchify back to the input grid."""

    def __init__(self, in_ch: int, grid: int, p: int, cfg: ModelConfig):
        super().__init__()
        self.p = p
        self.tokens = grid // p
        w = cfg.vit_width
        self.embed = nn.Linear(in_ch * p * p, w)  # linear map of each flattened p*p*C patch
        self.pos = nn.Parameter(torch.zeros(1, self.tokens * self.tokens, w))
        nn.init.trunc_normal_(self.pos, std=0.02)
        self.norm1 = nn.LayerNorm(w)
        self.attn = MHSA(w, cfg.vit_heads, cfg.dropout, cfg.local_window)
        self.norm2 = LayerNorm2d(w)
        self.ffn = ConvFFN(w, 2)
        self.out_ch = cfg.vit_out_channels
        self.unembed = nn.Linear(w, self.out_ch * p * p)

    def forward(self, f):
        B, C, H, W = f.shape
        p, t = self.p, self.tokens
        patches = f.reshape(B, C, t, p, t, p).permute(0, 2, 4, 1, 3, 5).reshape(B, t * t, C * p * p)
        x = self.embed(patches) + self.pos
        x = x + self.attn(self.norm1(x), (t, t))
        g = x.transpose(1, 2).reshape(B, -1, t, t)
        g = g + self.ffn(self.norm2(g))
        y = self.unembed(g.flatten(2).transpose(1, 2))  # B, t*t, out*p*p
        y = y.reshape(B, t, t, self.out_ch, p, p).permute(0, 3, 1, 4, 2, 5)
        return y.reshape(B, self.out_ch, H, W)


class ViTStream(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        grid = cfg.image_size // 4
        self.branches = nn.ModuleList(PatchBranch(cfg.conv_channels[0], grid, p, cfg) for p in cfg.patch_sizes)

    def forward(self, f1):
        return [b(f1) for b in self.branches]


def sinusoid_2d(h: int, w: int, dim: int, device=None) -> torch.Tensor:
    """(h*w, dim) fixed 2D position code: half the channels for y, half for x."""
    quarter = dim // 4
    freq = torch.exp(-math.log(10000.0) * torch.arange(quarter, device=device, dtype=torch.float32) / max(quarter, 1))
    ys, xs = torch.meshgrid(
        torch.arange(h, device=device, dtype=torch.float32),
        torch.arange(w, device=device, dtype=torch.float32),
        indexing="ij",
    )
    parts = []
    for c in (ys.flatten(), xs.flatten()):
        a = c[:, None] * freq[None, :]
        parts += [a.sin(), a.cos()]
    pe = torch.cat(parts, dim=1)
    if pe.shape[1] < dim:
        pe = F.pad(pe, (0, dim - pe.shape[1]))
    return pe


class Encoder(nn.Module):
    """Both streams fused at H/4 into a flat memory of decoder-width vectors."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.conv = ConvStream(cfg)
        self.vit = ViTStream(cfg)
        cat = len(cfg.patch_sizes) * cfg.vit_out_channels + sum(cfg.conv_channels)
        self.fuse = nn.Sequential(nn.Conv2d(cat, cfg.decoder_dim, 1), LayerNorm2d(cfg.decoder_dim))
        grid = cfg.image_size // 4
        self.register_buffer("pos", sinusoid_2d(grid, grid, cfg.decoder_dim), persistent=False)

    def forward(self, img):
        maps = self.conv(img)
        grid = maps[0].shape[-2:]
        parts = self.vit(maps[0]) + [maps[0]] + [F.interpolate(m, size=grid, mode="nearest") for m in maps[1:]]
        fused = self.fuse(torch.cat(parts, dim=1))
        return fused.flatten(2).transpose(1, 2) + self.pos.to(fused.dtype)
