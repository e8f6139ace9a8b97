from __future__ import annotations

from dataclasses import asdict, dataclass, fields


@dataclass(frozen=True)
class ModelConfig:
    image_size: int = 128
    in_channels: int = 3
    conv_channels: tuple[int, ...] = (32, 64, 128, 256)
    conv_depths: tuple[int, ...] = (1, 1, 1, 1)
    vit_width: int = 128
    vit_heads: int = 4
    vit_out_channels: int = 32
    patch_sizes: tuple[int, ...] = (4, 8, 16, 32)
    local_window: int | None = None  # optional truncated attention, off by default
    decoder_layers: int = 6
    decoder_heads: int = 8
    decoder_dim: int = 256
    ffn_mult: int = 4
    dropout: float = 0.1
    bins: int = 64
    vocab_size: int = 0
    max_atoms: int = 64

    def __post_init__(self):
        if self.image_size % 32:
            raise ValueError("image_size must be divisible by 32")
        if self.vit_width % self.vit_heads or self.decoder_dim % self.decoder_heads:
            raise ValueError("heads must divide the model width")
        grid = self.image_size // 4
        for p in self.patch_sizes:
            if grid % p:
                raise ValueError(f"patch size {p} does not tile the {grid}x{grid} feature map")

    @property
    def max_len(self) -> int:
        return 3 * self.max_atoms + 2

    @property
    def memory_len(self) -> int:
        return (self.image_size // 4) ** 2

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        names = {f.name for f in fields(cls)}
        kw = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items() if k in names}
        return cls(**kw)

    @classmethod
    def tiny(cls, vocab_size: int, **kw) -> "ModelConfig":
        """Width-16, one-layer-per-component config for numerical checks."""
        base = dict(
            image_size=64,
            conv_channels=(8, 16, 16, 16),
            conv_depths=(1, 1, 1, 1),
            vit_width=16,
            vit_heads=2,
            vit_out_channels=4,
            patch_sizes=(4, 8, 16),
            decoder_layers=1,
            decoder_heads=2,
            decoder_dim=16,
            ffn_mult=2,
            dropout=0.0,
            vocab_size=vocab_size,
            max_atoms=8,
        )
        base.update(kw)
        return cls(**base)
