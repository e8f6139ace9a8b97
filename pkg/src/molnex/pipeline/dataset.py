"""Synthetic training data: SMILES lines to rendered, augmented images plus JSONL labels."""
from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from PIL import Image

from ..abbrev import SuperatomDict, default_dictionary
from ..augment import augment_image_tracked, augment_molecule, contaminate, letterbox, map_coords
from ..chemio import smiles_parse
from ..depict import StyleParams, fit_to_canvas, layout_2d, render, sample_style, save_png
from ..molgraph import Bond, BondType, Chirality, MolGraph
from ..seqcodec import Vocab, atom_token, build_vocab, token_atom
from ..stereo import wedge_bonds
from .config import PipelineConfig, worker_threads
from .postprocess import finalize_smiles

log = logging.getLogger("molnex.dataset")

RECORDS = "records.jsonl"
VOCAB = "vocab.txt"
META = "meta.json"
TRUTH = "truth.smi"
IMAGES = "images"


class EmptyInput(ValueError):
    pass


class DatasetMismatch(ValueError):
    pass


@dataclass
class DatasetRecord:
    image: str
    smiles: str  # canonical, superatoms expanded, stereo perceived
    atoms: list[dict]  # {"label", "x", "y", "superatom"}
    bonds: list[list[int]]  # [i, j, kind]
    seed: list[int]
    source: str = ""

    def to_json(self) -> str:
        return json.dumps(
            {
                "image": self.image,
                "smiles": self.smiles,
                "atoms": self.atoms,
                "bonds": self.bonds,
                "seed": self.seed,
                "source": self.source,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, line: str) -> "DatasetRecord":
        d = json.loads(line)
        return cls(d["image"], d["smiles"], d["atoms"], d["bonds"], d["seed"], d.get("source", ""))

    def graph(self) -> MolGraph:
        supers = frozenset(a["label"] for a in self.atoms if a.get("superatom"))
        atoms = [token_atom(a["label"], (a["x"], a["y"]), supers) for a in self.atoms]
        bonds = [Bond(i, j, BondType(k)) for i, j, k in self.bonds]
        return MolGraph(tuple(atoms), tuple(bonds))


@dataclass
class DatasetSummary:
    out_dir: Path
    n_written: int = 0
    skipped: list[tuple[int, str]] = field(default_factory=list)

    @property
    def n_skipped(self) -> int:
        return len(self.skipped)


def _with_coords(g: MolGraph, coords) -> MolGraph:
    return g.with_atoms([replace(a, coord=(float(x), float(y))) for a, (x, y) in zip(g.atoms, coords)])


def make_sample(smiles: str, index: int, cfg: PipelineConfig, dictionary: SuperatomDict):
    """One record's graph (image-normalized coordinates) and its uint8 RGB image."""
    rng = np.random.default_rng([cfg.seed, index])
    acfg = cfg.augment_config()
    g = smiles_parse(smiles)
    g = augment_molecule(g, dictionary, acfg, rng)
    canvas = (cfg.canvas, cfg.canvas)
    coords = layout_2d(g, seed=int(rng.integers(2**31)))
    style = sample_style(rng, canvas) if cfg.random_style else StyleParams(image_size=canvas)
    coords = fit_to_canvas(g, coords, style)
    g = _with_coords(g, coords)
    if any(a.chirality is not Chirality.UNSPECIFIED for a in g.atoms):
        g = wedge_bonds(g)
    img = render(g, coords, style)
    img, M = augment_image_tracked(img, acfg, rng, out_size=canvas)
    img = contaminate(img, acfg, rng)
    small, fit = letterbox(Image.fromarray(np.ascontiguousarray(img[:, :, 0]), "L"), (cfg.image_size, cfg.image_size))
    coords = map_coords(coords, fit @ M, canvas, (cfg.image_size, cfg.image_size))
    arr = np.repeat(np.asarray(small, dtype=np.uint8)[:, :, None], 3, axis=2)
    return _with_coords(g, coords), arr


def _record_for(g: MolGraph, image: str, index: int, cfg: PipelineConfig, source: str) -> DatasetRecord:
    atoms = [
        {"label": atom_token(g, i), "x": round(a.coord[0], 6), "y": round(a.coord[1], 6), "superatom": a.is_superatom}
        for i, a in enumerate(g.atoms)
    ]
    bonds = [[b.a, b.b, int(b.kind)] for b in g.bonds]
    rec = DatasetRecord(image, "", atoms, bonds, [cfg.seed, index], source)
    # the stored truth is computed from the record itself, so decode -> finalize reproduces it
    rec.smiles = finalize_smiles(rec.graph())
    return rec


def _work(args):
    index, smiles, cfg, out_dir = args
    dictionary = default_dictionary()
    try:
        g, img = make_sample(smiles, index, cfg, dictionary)
        name = f"{IMAGES}/{index:06d}.png"
        rec = _record_for(g, name, index, cfg, smiles)
    except Exception as exc:  # every failure skips just this line
        return index, None, f"{type(exc).__name__}: {exc}"
    save_png(img, Path(out_dir) / name)
    return index, rec, None


def read_smiles_lines(path) -> list[tuple[int, str]]:
    lines = Path(path).read_text().splitlines()
    out = [(k, s.split()[0]) for k, s in enumerate(lines) if s.strip()]
    if not out:
        raise EmptyInput(f"{path} has no SMILES lines")
    return out


def generate_dataset(smiles_file, out_dir, cfg: PipelineConfig | None = None, workers: int | None = None) -> DatasetSummary:
    cfg = cfg or PipelineConfig()
    items = read_smiles_lines(smiles_file)
    out = Path(out_dir)
    (out / IMAGES).mkdir(parents=True, exist_ok=True)
    workers = worker_threads() if workers is None else workers
    jobs = [(k, s, cfg, str(out)) for k, s in items]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_work, jobs, chunksize=4))
    else:
        results = [_work(j) for j in jobs]
    summary = DatasetSummary(out)
    records = []
    for index, rec, err in results:
        if rec is None:
            log.warning("line %d skipped: %s", index + 1, err)
            summary.skipped.append((index + 1, err))
        else:
            records.append(rec)
    summary.n_written = len(records)
    with open(out / RECORDS, "w") as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")
    (out / TRUTH).write_text("".join(r.smiles + "\n" for r in records))
    supers = sorted({a["label"] for r in records for a in r.atoms if a["superatom"]})
    if records:
        vocab = build_vocab([r.graph() for r in records], cfg.bins, supers)
        vocab.save(out / VOCAB)
    meta = {
        "n_records": len(records),
        "n_skipped": summary.n_skipped,
        "skipped": [[k, e] for k, e in summary.skipped],
        "superatoms": supers,
        "seed": cfg.seed,
        "image_size": cfg.image_size,
        "bins": cfg.bins,
    }
    (out / META).write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n")
    log.info("wrote %d records to %s (%d skipped)", len(records), out, summary.n_skipped)
    return summary


def load_dataset(data_dir) -> tuple[list[DatasetRecord], Vocab, dict]:
    d = Path(data_dir)
    if not (d / RECORDS).exists() or not (d / VOCAB).exists():
        raise DatasetMismatch(f"{d} is not a generated dataset")
    meta = json.loads((d / META).read_text())
    records = [DatasetRecord.from_json(l) for l in (d / RECORDS).read_text().splitlines() if l.strip()]
    vocab = Vocab.load(d / VOCAB, meta.get("superatoms", ()))
    return records, vocab, meta
