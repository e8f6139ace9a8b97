"""Autoregressive structure decoder, pairwise bond head, loss and greedy generation."""
from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .config import ModelConfig
from .encoder import Encoder, ShapeMismatch

PAD_ID, BOS_ID, EOS_ID, UNK_ID = 0, 1, 2, 3
N_BOND_CLASSES = 7
WEDGE_CLASSES = (5, 6)
MASKED = -1e4


class PrefixTooLong(ValueError):
    pass


class Attention(nn.Module):
    def __init__(self, dim: int, heads: int, dropout: float):
        super().__init__()
        self.heads = heads
        self.dk = dim // heads
        self.q = nn.Linear(dim, dim)
        self.kv = nn.Linear(dim, 2 * dim)
        self.out = nn.Linear(dim, dim)
        self.dropout = dropout

    def split(self, x):
        B, T, _ = x.shape
        return x.reshape(B, T, self.heads, self.dk).transpose(1, 2)

    def keys_values(self, src):
        k, v = self.kv(src).chunk(2, dim=-1)
        return self.split(k), self.split(v)

    def forward(self, x, k, v, causal: bool = False):
        q = self.split(self.q(x))
        p = self.dropout if self.training else 0.0
        y = F.scaled_dot_product_attention(q, k, v, dropout_p=p, is_causal=causal)
        B, _, T, _ = y.shape
        return self.out(y.transpose(1, 2).reshape(B, T, -1))


class DecoderLayer(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        d = cfg.decoder_dim
        self.n1, self.n2, self.n3 = nn.LayerNorm(d), nn.LayerNorm(d), nn.LayerNorm(d)
        self.self_attn = Attention(d, cfg.decoder_heads, cfg.dropout)
        self.cross = Attention(d, cfg.decoder_heads, cfg.dropout)
        self.ffn = nn.Sequential(nn.Linear(d, cfg.ffn_mult * d), nn.GELU(), nn.Linear(cfg.ffn_mult * d, d))
        self.drop = nn.Dropout(cfg.dropout)

    def forward(self, x, mem_kv, cache=None):
        h = self.n1(x)
        k, v = self.self_attn.keys_values(h)
        if cache is not None:
            if "k" in cache:
                k = torch.cat([cache["k"], k], dim=2)
                v = torch.cat([cache["v"], v], dim=2)
            cache["k"], cache["v"] = k, v
            causal = False  # one new query attends to every cached position
        else:
            causal = True
        x = x + self.drop(self.self_attn(h, k, v, causal=causal))
        x = x + self.drop(self.cross(self.n2(x), *mem_kv))
        return x + self.drop(self.ffn(self.n3(x)))


class BondHead(nn.Module):
    """Pairwise MLP over (h_i, h_j) pairs producing seven bond-type logits."""

    def __init__(self, d: int):
        super().__init__()
        self.mlp = nn.Sequential(nn.Linear(2 * d, d), nn.GELU(), nn.Linear(d, N_BOND_CLASSES))

    def forward(self, h):
        B, n, d = h.shape
        pair = torch.cat([h[:, :, None, :].expand(B, n, n, d), h[:, None, :, :].expand(B, n, n, d)], dim=-1)
        raw = self.mlp(pair)
        sym = (raw + raw.transpose(1, 2)) / 2
        keep = torch.zeros(N_BOND_CLASSES, dtype=torch.bool, device=h.device)
        keep[list(WEDGE_CLASSES)] = True
        out = torch.where(keep, raw, sym)
        eye = torch.eye(n, dtype=torch.bool, device=h.device)[None, :, :, None]
        diag = torch.full_like(out, MASKED)
        diag[..., 0] = 0.0
        return torch.where(eye, diag, out)


@dataclass
class Generation:
    tokens: list[list[int]]
    atom_hiddens: list[torch.Tensor]  # (n_i, d) per sample
    truncated: list[bool]


class OCSRModel(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        if cfg.vocab_size <= 4 + cfg.bins:
            raise ValueError("vocab_size must cover specials, labels and coordinate bins")
        self.cfg = cfg
        d = cfg.decoder_dim
        self.encoder = Encoder(cfg)
        self.tok = nn.Embedding(cfg.vocab_size, d)
        self.pos = nn.Embedding(cfg.max_len, d)
        self.layers = nn.ModuleList(DecoderLayer(cfg) for _ in range(cfg.decoder_layers))
        self.norm = nn.LayerNorm(d)
        self.head = nn.Linear(d, cfg.vocab_size)
        self.bonds = BondHead(d)

    @property
    def coord_offset(self) -> int:
        return self.cfg.vocab_size - self.cfg.bins

    def encode(self, img):
        return self.encoder(img)

    def memory_kv(self, memory):
        return [layer.cross.keys_values(memory) for layer in self.layers]

    def decoder_forward(self, memory, tokens, mem_kv=None):
        """Teacher-forced pass: (logits (B,T,V), hidden states (B,T,d))."""
        T = tokens.shape[1]
        if T > self.cfg.max_len:
            raise PrefixTooLong(f"prefix length {T} exceeds {self.cfg.max_len}")
        mem_kv = self.memory_kv(memory) if mem_kv is None else mem_kv
        x = self.tok(tokens) + self.pos(torch.arange(T, device=tokens.device))[None]
        for layer, kv in zip(self.layers, mem_kv):
            x = layer(x, kv)
        h = self.norm(x)
        return self.head(h), h

    def predict_bonds(self, atom_hiddens):
        if atom_hiddens.dim() == 2:
            return self.bonds(atom_hiddens[None])[0]
        return self.bonds(atom_hiddens)

    def forward(self, img, tokens, atom_pos):
        """``atom_pos`` (B, n) indexes each atom's y-token position; -1 pads."""
        memory = self.encode(img)
        logits, h = self.decoder_forward(memory, tokens)
        idx = atom_pos.clamp(min=0)
        ah = torch.gather(h, 1, idx[..., None].expand(-1, -1, h.shape[-1]))
        return logits, self.predict_bonds(ah)

    # ---------------------------------------------------------- generation

    def grammar_mask(self, n_body: torch.Tensor, n_atoms_cap: int) -> torch.Tensor:
        """Allowed next tokens given how many body tokens each sample has emitted."""
        V = self.cfg.vocab_size
        B = n_body.shape[0]
        mask = torch.zeros(B, V, dtype=torch.bool, device=n_body.device)
        phase = n_body % 3
        atoms = n_body // 3
        labels = slice(4, self.coord_offset)
        coords = slice(self.coord_offset, V)
        at_label = phase == 0
        mask[at_label, labels] = True
        mask[at_label & (atoms >= 1), EOS_ID] = True
        full = at_label & (atoms >= n_atoms_cap)
        mask[full] = False
        mask[full, EOS_ID] = True
        mask[~at_label, coords] = True
        return mask

    @torch.no_grad()
    def generate(self, memory, max_atoms: int | None = None) -> Generation:
        """Greedy decoding under the label -> x -> y grammar."""
        cap = self.cfg.max_atoms if max_atoms is None else min(max_atoms, self.cfg.max_atoms)
        B = memory.shape[0]
        dev = memory.device
        mem_kv = self.memory_kv(memory)
        caches = [dict() for _ in self.layers]
        tokens = torch.full((B, 1), BOS_ID, dtype=torch.long, device=dev)
        done = torch.zeros(B, dtype=torch.bool, device=dev)
        n_body = torch.zeros(B, dtype=torch.long, device=dev)
        hiddens: list[list[torch.Tensor]] = [[] for _ in range(B)]
        truncated = [False] * B
        step_tok = tokens
        for t in range(self.cfg.max_len - 1):
            x = self.tok(step_tok) + self.pos.weight[t][None, None]
            for layer, kv, cache in zip(self.layers, mem_kv, caches):
                x = layer(x, kv, cache)
            h = self.norm(x)[:, -1]
            if t > 0:
                # the hidden state at a y token describes the finished atom
                for b in range(B):
                    if not done[b] and n_body[b] > 0 and n_body[b] % 3 == 0 and tokens[b, -1] != EOS_ID:
                        hiddens[b].append(h[b])
            logits = self.head(h)
            allowed = self.grammar_mask(n_body, cap)
            logits = logits.masked_fill(~allowed, float("-inf"))
            nxt = logits.argmax(dim=-1)
            nxt = torch.where(done, torch.full_like(nxt, PAD_ID), nxt)
            tokens = torch.cat([tokens, nxt[:, None]], dim=1)
            newly = (nxt == EOS_ID) & ~done
            n_body = n_body + (~done & ~newly).long()
            done = done | newly
            step_tok = nxt[:, None]
            if bool(done.all()):
                break
        out_tokens = []
        for b in range(B):
            seq = tokens[b].tolist()
            if EOS_ID in seq:
                seq = seq[: seq.index(EOS_ID) + 1]
            else:
                truncated[b] = True
                seq = [s for s in seq if s != PAD_ID]
            out_tokens.append(seq)
        d = self.cfg.decoder_dim
        hs = [torch.stack(v) if v else torch.zeros(0, d, device=dev) for v in hiddens]
        return Generation(out_tokens, hs, truncated)


def compute_loss(atom_logits, bond_logits, targets: dict, bond_weight: float = 1.0):
    """Token cross-entropy (PAD ignored) plus bond-cell cross-entropy (-100 ignored)."""
    tgt = targets["tokens_out"]
    if atom_logits.shape[:2] != tgt.shape:
        raise ShapeMismatch(f"atom logits {tuple(atom_logits.shape)} vs targets {tuple(tgt.shape)}")
    bt = targets["bonds"]
    if bond_logits.shape[:3] != bt.shape:
        raise ShapeMismatch(f"bond logits {tuple(bond_logits.shape)} vs targets {tuple(bt.shape)}")
    atom = F.cross_entropy(atom_logits.reshape(-1, atom_logits.shape[-1]), tgt.reshape(-1), ignore_index=PAD_ID)
    if (bt >= 0).any():
        bond = F.cross_entropy(bond_logits.reshape(-1, N_BOND_CLASSES), bt.reshape(-1), ignore_index=-100)
    else:
        bond = bond_logits.sum() * 0.0
    return atom + bond_weight * bond, atom.detach(), bond.detach()


def grammar_legal(tokens: list[int], coord_offset: int, vocab_size: int) -> bool:
    """BOS, then whole (label, x, y) triples, then exactly one EOS."""
    if len(tokens) < 2 or tokens[0] != BOS_ID or tokens[-1] != EOS_ID:
        return False
    body = tokens[1:-1]
    if EOS_ID in body or len(body) % 3:
        return False
    for k in range(0, len(body), 3):
        lab, x, y = body[k : k + 3]
        if not 4 <= lab < coord_offset:
            return False
        if not (coord_offset <= x < vocab_size and coord_offset <= y < vocab_size):
            return False
    return True
