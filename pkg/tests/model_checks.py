"""Numerical checks shared by the model tests and the acceptance run."""
import torch

from molnex.model import ModelConfig, OCSRModel, compute_loss

TINY_VOCAB = 4 + 6 + 64


def tiny_batch(cfg: ModelConfig, seed: int = 0, n_atoms=(3, 2)):
    g = torch.Generator().manual_seed(seed)
    B = len(n_atoms)
    off = cfg.vocab_size - cfg.bins
    T = 3 * max(n_atoms) + 2
    tokens = torch.zeros(B, T, dtype=torch.long)
    atom_pos = torch.full((B, max(n_atoms)), -1, dtype=torch.long)
    bonds = torch.full((B, max(n_atoms), max(n_atoms)), -100, dtype=torch.long)
    for b, n in enumerate(n_atoms):
        seq = [1]
        for _ in range(n):
            seq += [int(torch.randint(4, off, (1,), generator=g)), *(off + torch.randint(0, cfg.bins, (2,), generator=g)).tolist()]
        seq.append(2)
        tokens[b, : len(seq)] = torch.tensor(seq)
        atom_pos[b, :n] = torch.arange(n) * 3 + 3
        m = torch.randint(0, 7, (n, n), generator=g)
        m = torch.where(torch.isin(m, torch.tensor([5, 6])), m, torch.maximum(m, m.T))
        m.fill_diagonal_(0)
        bonds[b, :n, :n] = m
    img = torch.rand(B, cfg.in_channels, cfg.image_size, cfg.image_size, generator=g)
    return img, {"inputs": tokens[:, :-1], "tokens_out": tokens[:, 1:], "atom_pos": atom_pos, "bonds": bonds}


def gradient_check(seed: int = 0, eps: float = 1e-6):
    """Worst relative error between analytic and central-difference directional derivatives.

    One random direction per parameter tensor; float64 throughout.
    """
    torch.manual_seed(seed)
    cfg = ModelConfig.tiny(TINY_VOCAB)
    model = OCSRModel(cfg).double().eval()
    img, batch = tiny_batch(cfg, seed)
    img = img.double()

    def loss_fn():
        a, b = model(img, batch["inputs"], batch["atom_pos"])
        return compute_loss(a, b, batch)[0]

    model.zero_grad()
    loss_fn().backward()
    worst = 0.0
    gen = torch.Generator().manual_seed(seed + 1)
    for name, p in model.named_parameters():
        d = torch.randn(p.shape, generator=gen, dtype=p.dtype)
        analytic = float((p.grad * d).sum())
        with torch.no_grad():
            p.add_(eps * d)
            up = float(loss_fn())
            p.sub_(2 * eps * d)
            down = float(loss_fn())
            p.add_(eps * d)
        numeric = (up - down) / (2 * eps)
        rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)
        worst = max(worst, rel)
    return worst


def attention_row_error(image_size: int = 128, seed: int = 0) -> float:
    torch.manual_seed(seed)
    cfg = ModelConfig(image_size=image_size, vocab_size=TINY_VOCAB, decoder_layers=1)
    model = OCSRModel(cfg).eval()
    with torch.no_grad():
        model.encode(torch.rand(1, 3, image_size, image_size))
    worst = 0.0
    for branch in model.encoder.vit.branches:
        a = branch.attn.last_attention
        worst = max(worst, float((a.sum(-1) - 1).abs().max()))
    return worst


def conv_scales(image_size: int) -> list[int]:
    from molnex.model import ConvStream

    cfg = ModelConfig(image_size=image_size, vocab_size=TINY_VOCAB, patch_sizes=(4,))
    with torch.no_grad():
        maps = ConvStream(cfg)(torch.zeros(1, 3, image_size, image_size))
    return [m.shape[-1] for m in maps], [m.shape[-2] for m in maps], maps
