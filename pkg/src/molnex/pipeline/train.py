"""Resumable single-process training loop."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from ..depict import load_image
from ..model import OCSRModel, compute_loss, load_checkpoint, lr_at, make_optimizer, save_checkpoint
from ..seqcodec import UnknownToken, Vocab, encode_targets
from .config import PipelineConfig, worker_threads
from .dataset import DatasetMismatch, DatasetRecord, load_dataset

log = logging.getLogger("molnex.train")

LAST = "last.pt"
LOG_FILE = "train_log.tsv"
GRAD_CLIP = 1.0


@dataclass
class Example:
    image: torch.Tensor  # (3, H, W) float, ink-positive
    tokens: list[int]
    bonds: np.ndarray

    @property
    def n(self) -> int:
        return self.bonds.shape[0]


@dataclass
class TrainResult:
    checkpoint: Path
    losses: list[float] = field(default_factory=list)
    steps: int = 0


def image_tensor(img: np.ndarray) -> torch.Tensor:
    arr = np.asarray(img, dtype=np.float32)
    if arr.ndim == 2:
        arr = np.repeat(arr[:, :, None], 3, axis=2)
    return torch.from_numpy(1.0 - arr / 255.0).permute(2, 0, 1).contiguous()


def prepare_examples(records: list[DatasetRecord], vocab: Vocab, data_dir, max_atoms: int) -> list[Example]:
    out = []
    for r in records:
        try:
            seq = encode_targets(r.graph(), vocab)
        except UnknownToken as exc:
            raise DatasetMismatch(f"{r.image}: {exc}") from exc
        if seq.n > max_atoms:
            log.warning("%s has %d atoms (limit %d); left out", r.image, seq.n, max_atoms)
            continue
        img = image_tensor(load_image(Path(data_dir) / r.image))
        out.append(Example(img, seq.atom_tokens, seq.bond_matrix.astype(np.int64)))
    if not out:
        raise DatasetMismatch("no usable training records")
    return out


def collate(batch: list[Example]) -> dict:
    B = len(batch)
    T = max(len(e.tokens) for e in batch)
    n = max(e.n for e in batch)
    tokens = torch.zeros(B, T, dtype=torch.long)
    atom_pos = torch.full((B, n), -1, dtype=torch.long)
    bonds = torch.full((B, n, n), -100, dtype=torch.long)
    for b, e in enumerate(batch):
        tokens[b, : len(e.tokens)] = torch.tensor(e.tokens)
        # atom k's hidden state is read where its y token is the input
        atom_pos[b, : e.n] = torch.arange(e.n) * 3 + 3
        bonds[b, : e.n, : e.n] = torch.from_numpy(e.bonds)
    return {
        "images": torch.stack([e.image for e in batch]),
        "inputs": tokens[:, :-1],
        "tokens_out": tokens[:, 1:],
        "atom_pos": atom_pos,
        "bonds": bonds,
    }


def batch_indices(step: int, n: int, batch_size: int, seed: int) -> list[int]:
    """Indices for ``step``: a fresh permutation per epoch, stateless so resumes line up."""
    out = []
    pos = step * batch_size
    while len(out) < batch_size:
        epoch, off = divmod(pos, n)
        perm = np.random.default_rng([seed, epoch]).permutation(n)
        take = min(batch_size - len(out), n - off)
        out.extend(int(i) for i in perm[off : off + take])
        pos += take
    return out


def train_step(model, opt, batch, lr: float, bond_weight: float = 1.0):
    for group in opt.param_groups:
        group["lr"] = lr
    model.train()
    atom_logits, bond_logits = model(batch["images"], batch["inputs"], batch["atom_pos"])
    loss, atom, bond = compute_loss(atom_logits, bond_logits, batch, bond_weight)
    opt.zero_grad(set_to_none=True)
    loss.backward()
    torch.nn.utils.clip_grad_norm_(model.parameters(), GRAD_CLIP)
    opt.step()
    return float(loss.detach()), float(atom), float(bond)


def train(data_dir, out_dir, cfg: PipelineConfig | None = None, resume=None, steps: int | None = None) -> TrainResult:
    """Train on a generated dataset and write checkpoints to ``out_dir``.

    ``steps`` stops early (for instance to test resuming) without changing the
    schedule, which is always laid out over ``cfg.steps``.
    """
    cfg = cfg or PipelineConfig()
    torch.set_num_threads(worker_threads())
    torch.manual_seed(cfg.seed)
    records, vocab, meta = load_dataset(data_dir)
    if meta.get("bins", cfg.bins) != cfg.bins:
        raise DatasetMismatch(f"dataset uses {meta['bins']} coordinate bins, config {cfg.bins}")
    mcfg = cfg.model_config(len(vocab))
    examples = prepare_examples(records, vocab, data_dir, mcfg.max_atoms)
    model = OCSRModel(mcfg)
    opt = make_optimizer(model, cfg.max_lr)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    start = 0
    if resume is not None:
        payload = load_checkpoint(resume, vocab.digest())
        model.load_state_dict(payload["model"])
        if payload["optimizer"] is not None:
            opt.load_state_dict(payload["optimizer"])
        if "rng" in payload["extra"]:
            torch.set_rng_state(payload["extra"]["rng"])
        start = payload["step"]
    stop = cfg.steps if steps is None else min(cfg.steps, steps)
    result = TrainResult(out / LAST)
    mode = "a" if resume is not None and (out / LOG_FILE).exists() else "w"
    extra_base = {"superatoms": sorted(vocab.superatoms)}

    def checkpoint(step, path):
        extra = dict(extra_base, rng=torch.get_rng_state())
        save_checkpoint(path, model, mcfg, vocab.tokens, vocab.digest(), step, opt, extra)

    with open(out / LOG_FILE, mode) as logf:
        if mode == "w":
            logf.write("step\tlr\tloss\tatom\tbond\n")
        for step in range(start, stop):
            idx = batch_indices(step, len(examples), cfg.batch_size, cfg.seed)
            batch = collate([examples[i] for i in idx])
            lr = lr_at(step, cfg.steps, cfg.max_lr, cfg.warmup_frac)
            loss, atom, bond = train_step(model, opt, batch, lr, cfg.bond_weight)
            result.losses.append(loss)
            logf.write(f"{step}\t{lr:.6g}\t{loss:.6f}\t{atom:.6f}\t{bond:.6f}\n")
            if cfg.log_every and (step % cfg.log_every == 0 or step == stop - 1):
                logf.flush()
                log.info("step %d lr %.2e loss %.4f (atom %.4f bond %.4f)", step, lr, loss, atom, bond)
            if cfg.checkpoint_every and (step + 1) % cfg.checkpoint_every == 0:
                checkpoint(step + 1, out / f"step{step + 1:06d}.pt")
    result.steps = stop
    checkpoint(stop, out / LAST)
    return result
