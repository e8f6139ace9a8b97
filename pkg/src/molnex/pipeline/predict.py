"""Image -> structure inference with per-image failure isolation."""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from ..abbrev import SuperatomDict
from ..augment import letterbox
from ..depict import load_image
from ..model import CheckpointError, OCSRModel, load_checkpoint
from ..seqcodec import Vocab, decode_prediction
from .config import PipelineConfig, worker_threads
from .postprocess import finalize, outputs
from .train import image_tensor

log = logging.getLogger("molnex.predict")


class CheckpointLoadError(CheckpointError):
    pass


@dataclass
class Prediction:
    image: str
    smiles: str = ""
    molfile: str = ""
    ok: bool = False
    stage: str = ""  # failing stage when not ok
    error: str = ""
    truncated: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def load_model(path) -> tuple[OCSRModel, Vocab]:
    try:
        payload = load_checkpoint(path)
    except (CheckpointError, FileNotFoundError) as exc:
        raise CheckpointLoadError(str(exc)) from exc
    vocab = Vocab(payload["vocab"], payload["config"].bins, frozenset(payload["extra"].get("superatoms", ())))
    if vocab.digest() != payload["vocab_hash"]:
        raise CheckpointLoadError("vocabulary hash mismatch")
    model = OCSRModel(payload["config"])
    model.load_state_dict(payload["model"])
    model.eval()
    return model, vocab


def read_input(path, size: int) -> torch.Tensor:
    img = load_image(path)
    if img.shape[:2] != (size, size):
        im, _ = letterbox(Image.fromarray(img).convert("L"), (size, size))
        img = np.asarray(im)
    return image_tensor(img)


def _finish(pred: Prediction, tokens, bond_logits, vocab: Vocab, dictionary, sigma: float) -> None:
    stage = "decode"
    try:
        logits = bond_logits.numpy() if bond_logits is not None else np.zeros((0, 0, 7))
        mat = logits.argmax(axis=-1) if logits.size else np.zeros((0, 0), dtype=np.int64)
        g = decode_prediction(tokens, mat, vocab, logits if logits.size else None)
        stage = "postprocess"
        g = finalize(g, dictionary, sigma)
        stage = "write"
        pred.smiles, pred.molfile = outputs(g, Path(pred.image).stem)
        pred.ok, pred.stage = True, ""
    except Exception as exc:
        pred.stage, pred.error = stage, f"{type(exc).__name__}: {exc}"


@torch.no_grad()
def predict_images(model: OCSRModel, vocab: Vocab, paths, cfg: PipelineConfig | None = None, dictionary: SuperatomDict | None = None) -> list[Prediction]:
    cfg = cfg or PipelineConfig()
    torch.set_num_threads(worker_threads())
    paths = [str(p) for p in paths]
    preds = [Prediction(p) for p in paths]
    size = model.cfg.image_size
    for start in range(0, len(paths), cfg.predict_batch_size):
        chunk = list(range(start, min(start + cfg.predict_batch_size, len(paths))))
        loaded, images = [], []
        for k in chunk:
            try:
                images.append(read_input(paths[k], size))
                loaded.append(k)
            except Exception as exc:
                preds[k].stage, preds[k].error = "load", f"{type(exc).__name__}: {exc}"
        if not loaded:
            continue
        try:
            memory = model.encode(torch.stack(images))
            gen = model.generate(memory)
        except Exception as exc:
            for k in loaded:
                preds[k].stage, preds[k].error = "model", f"{type(exc).__name__}: {exc}"
            continue
        for j, k in enumerate(loaded):
            preds[k].truncated = gen.truncated[j]
            h = gen.atom_hiddens[j]
            bl = model.predict_bonds(h) if len(h) else None
            _finish(preds[k], gen.tokens[j], bl, vocab, dictionary, cfg.sigma)
    for p in preds:
        if not p.ok:
            log.warning("%s failed at %s: %s", p.image, p.stage, p.error)
    return preds


def write_predictions(preds: list[Prediction], out_dir) -> Path:
    """predictions.jsonl, predictions.smi (one line per input, blank on failure) and MOLfiles."""
    out = Path(out_dir)
    (out / "molfiles").mkdir(parents=True, exist_ok=True)
    with open(out / "predictions.jsonl", "w") as fh:
        for p in preds:
            fh.write(json.dumps(p.to_dict(), sort_keys=True) + "\n")
    (out / "predictions.smi").write_text("".join(p.smiles + "\n" for p in preds))
    for k, p in enumerate(preds):
        if p.ok:
            (out / "molfiles" / f"{k:06d}.mol").write_text(p.molfile)
    return out / "predictions.smi"


def predict(checkpoint, paths, out_dir=None, cfg: PipelineConfig | None = None) -> list[Prediction]:
    model, vocab = load_model(checkpoint)
    preds = predict_images(model, vocab, paths, cfg)
    if out_dir is not None:
        write_predictions(preds, out_dir)
    return preds
