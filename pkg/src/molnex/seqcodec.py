"""Graph <-> training-target conversion.

An atom becomes three tokens ``label x y``; the whole molecule is framed by
BOS/EOS.  Bonds live in an ``n x n`` matrix of ``BondType`` values where a
wedge sits at ``[narrow][wide]`` and its mirror cell holds ``SINGLE``.
"""
from __future__ import annotations

import hashlib
import re
import warnings
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .chemio.smiles import canonical_form
from .molgraph import (
    ELEMENT_SET,
    Atom,
    Bond,
    BondType,
    MolGraph,
    aromatic_implicit_h,
    implicit_hydrogens,
    total_hydrogens,
)

PAD, BOS, EOS, UNK = "<pad>", "<bos>", "<eos>", "<unk>"
SPECIALS = (PAD, BOS, EOS, UNK)
PAD_ID, BOS_ID, EOS_ID, UNK_ID = 0, 1, 2, 3
DEFAULT_BINS = 64

_LABEL_RE = re.compile(r"^([A-Z][a-z]?)(?:H(\d*))?([+-]\d*)?$")


class CodecError(ValueError):
    pass


class UnknownToken(CodecError):
    pass


class EmptySequence(CodecError):
    pass


class MatrixSizeMismatch(CodecError):
    pass


def _coord_token(k: int) -> str:
    return f"<c{k}>"


@dataclass
class Vocab:
    tokens: list[str]
    bins: int = DEFAULT_BINS
    superatoms: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        self.index = {t: i for i, t in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise ValueError("duplicate tokens in vocabulary")
        if tuple(self.tokens[:4]) != SPECIALS:
            raise ValueError("vocabulary must start with the four special tokens")
        self.coord_offset = self.index[_coord_token(0)]
        self.label_ids = [i for i, t in enumerate(self.tokens) if i >= 4 and not t.startswith("<c")]

    def __len__(self) -> int:
        return len(self.tokens)

    def id(self, token: str, strict: bool = True) -> int:
        if token in self.index:
            return self.index[token]
        if strict:
            raise UnknownToken(f"token {token!r} not in vocabulary")
        warnings.warn(f"unknown atom token {token!r} mapped to {UNK}")
        return UNK_ID

    def coord_id(self, k: int) -> int:
        return self.coord_offset + k

    def is_coord(self, i: int) -> bool:
        return self.coord_offset <= i < self.coord_offset + self.bins

    def is_label(self, i: int) -> bool:
        return 4 <= i < self.coord_offset

    def save(self, path) -> None:
        Path(path).write_text("\n".join(self.tokens) + "\n")

    @classmethod
    def load(cls, path, superatoms: Iterable[str] = ()) -> "Vocab":
        tokens = Path(path).read_text().splitlines()
        bins = sum(1 for t in tokens if re.fullmatch(r"<c\d+>", t))
        return cls(tokens, bins, frozenset(superatoms))

    def digest(self) -> str:
        return hashlib.sha256("\n".join(self.tokens).encode()).hexdigest()[:16]


def atom_token(g: MolGraph, i: int) -> str:
    """Fused label token: element plus hydrogen count (when not implied) and charge."""
    a = g.atoms[i]
    if a.is_superatom:
        return a.label
    h = total_hydrogens(g, i)
    probe = g.replace_atom(i, explicit_h=0, no_implicit=False)
    implied = aromatic_implicit_h(probe, i) if g.is_aromatic_atom(i) else implicit_hydrogens(probe, i)
    tok = a.label
    if h != implied:
        tok += "H" if h == 1 else f"H{h}"
    if a.charge:
        sign = "+" if a.charge > 0 else "-"
        tok += sign if abs(a.charge) == 1 else f"{sign}{abs(a.charge)}"
    return tok


def token_atom(token: str, coord=(0.0, 0.0), superatoms: frozenset[str] = frozenset()) -> Atom:
    if token not in superatoms:
        m = _LABEL_RE.match(token)
        if m and m.group(1) in ELEMENT_SET:
            sym, h, q = m.groups()
            charge = 0
            if q:
                charge = (1 if q[0] == "+" else -1) * (int(q[1:]) if len(q) > 1 else 1)
            if h is None:
                return Atom(sym, charge=charge, coord=coord)
            return Atom(sym, charge=charge, explicit_h=int(h) if h else 1, no_implicit=True, coord=coord)
    return Atom(token, is_superatom=True, coord=coord)


def build_vocab(corpus: Sequence[MolGraph], bins: int = DEFAULT_BINS, superatoms: Iterable[str] = ()) -> Vocab:
    if not corpus:
        raise ValueError("corpus is empty")
    counts: Counter[str] = Counter()
    for g in corpus:
        for i in range(len(g.atoms)):
            counts[atom_token(g, i)] += 1
    labels = sorted(counts, key=lambda t: (-counts[t], t))
    tokens = list(SPECIALS) + labels + [_coord_token(k) for k in range(bins)]
    return Vocab(tokens, bins, frozenset(superatoms))


def quantize_coord(v: float, bins: int = DEFAULT_BINS) -> int:
    if not 0.0 <= v <= 1.0:
        raise ValueError(f"coordinate {v} outside [0, 1]")
    return min(int(np.floor(v * bins)), bins - 1)


def dequantize_coord(k: int, bins: int = DEFAULT_BINS) -> float:
    return (k + 0.5) / bins


@dataclass
class GraphSequence:
    atom_tokens: list[int]
    bond_matrix: np.ndarray  # (n, n) int8 of BondType values
    order: list[int]  # source atom index per serialized position

    @property
    def n(self) -> int:
        return len(self.order)


def serialization_order(g: MolGraph) -> list[int]:
    """Atoms in the order the canonical SMILES writes them."""
    return canonical_form(g)[1]


def encode_targets(g: MolGraph, vocab: Vocab, strict: bool = True) -> GraphSequence:
    order = serialization_order(g)
    pos = {a: k for k, a in enumerate(order)}
    ids = [BOS_ID]
    for i in order:
        a = g.atoms[i]
        x, y = (min(max(c, 0.0), 1.0) for c in a.coord)
        ids += [
            vocab.id(atom_token(g, i), strict),
            vocab.coord_id(quantize_coord(x, vocab.bins)),
            vocab.coord_id(quantize_coord(y, vocab.bins)),
        ]
    ids.append(EOS_ID)
    n = len(order)
    mat = np.zeros((n, n), dtype=np.int8)
    for b in g.bonds:
        i, j = pos[b.a], pos[b.b]
        if b.kind.is_wedge:
            mat[i, j] = b.kind
            mat[j, i] = BondType.SINGLE
        else:
            mat[i, j] = mat[j, i] = b.kind
    return GraphSequence(ids, mat, order)


def parse_atom_tokens(tokens: Sequence[int], vocab: Vocab) -> list[tuple[int, int, int]]:
    """Split a generated id sequence into (label, x-bin, y-bin) triples."""
    if len(tokens) == 0 or tokens[0] != BOS_ID:
        raise EmptySequence("sequence must start with BOS")
    body = []
    for t in tokens[1:]:
        if t in (EOS_ID, PAD_ID):
            break
        body.append(int(t))
    triples = []
    for k in range(0, len(body) - len(body) % 3, 3):
        lab, x, y = body[k : k + 3]
        if not (vocab.is_label(lab) or lab == UNK_ID) or not vocab.is_coord(x) or not vocab.is_coord(y):
            warnings.warn(f"ill-formed atom triple at position {k + 1}; truncating")
            return triples
        triples.append((lab, x - vocab.coord_offset, y - vocab.coord_offset))
    if len(body) % 3:
        warnings.warn("incomplete trailing atom triple dropped")
    return triples


def decode_prediction(
    atom_tokens: Sequence[int],
    bond_matrix,
    vocab: Vocab,
    bond_logits=None,
) -> MolGraph:
    """Inverse of ``encode_targets`` up to coordinate quantisation.

    ``bond_matrix`` must match the parsed atom count, except that a matrix
    covering atoms lost to truncation is cut down to size.  Disagreeing non-wedge cells take the higher-logit side when
    ``bond_logits`` (n, n, 7) is given, else the smaller bond type value.
    """
    triples = parse_atom_tokens(atom_tokens, vocab)
    n = len(triples)
    mat = np.asarray(bond_matrix)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise MatrixSizeMismatch(f"bond matrix must be square, got {mat.shape}")
    # a dropped trailing triple leaves the matrix one row too large; keep its top-left block
    emitted = _emitted_atoms(atom_tokens)
    if mat.shape[0] != n and not (n < mat.shape[0] <= emitted + 1):
        raise MatrixSizeMismatch(f"bond matrix {mat.shape} for {n} atoms")
    atoms = []
    for lab, xb, yb in triples:
        coord = (dequantize_coord(xb, vocab.bins), dequantize_coord(yb, vocab.bins))
        atoms.append(token_atom(vocab.tokens[lab], coord, vocab.superatoms))
    logits = None if bond_logits is None else np.asarray(bond_logits)
    bonds = []
    for i in range(n):
        for j in range(i + 1, n):
            kij, kji = BondType(int(mat[i, j])), BondType(int(mat[j, i]))
            kind, a, b = _resolve(kij, kji, i, j, logits)
            if kind != BondType.NONE:
                bonds.append(Bond(a, b, kind))
    return MolGraph(tuple(atoms), tuple(bonds))


def _emitted_atoms(tokens: Sequence[int]) -> int:
    body = 0
    for t in tokens[1:]:
        if t in (EOS_ID, PAD_ID):
            break
        body += 1
    return body // 3


def _resolve(kij: BondType, kji: BondType, i: int, j: int, logits) -> tuple[BondType, int, int]:
    if kij == kji and not kij.is_wedge:
        return kij, i, j
    wij, wji = kij.is_wedge, kji.is_wedge
    if wij and not wji:
        return kij, i, j
    if wji and not wij:
        return kji, j, i
    if logits is not None:
        if logits[i, j, kij] >= logits[j, i, kji]:
            return kij, i, j
        return kji, j, i
    if wij and wji:
        return (kij, i, j) if kij <= kji else (kji, j, i)
    return (min(kij, kji), i, j)


def decode_graph_sequence(seq: GraphSequence, vocab: Vocab) -> MolGraph:
    return decode_prediction(seq.atom_tokens, seq.bond_matrix, vocab)
