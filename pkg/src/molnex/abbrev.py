"""Superatom (abbreviation) expansion with fuzzy self-correction.

Lookup runs in three stages: the dictionary, then a rule-based assembly of
the label's own atom symbols, then the closest dictionary label by edit
similarity (strictly above ``sigma``).  Anything left is reported as Failed.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from .chemio.smiles import smiles_parse
from .molgraph import (
    VALENCES,
    Atom,
    Bond,
    BondType,
    GraphError,
    MolGraph,
    explicit_valence,
    remove_atoms,
    validate_graph,
)

SIGMA = 0.8
ATTACH = "*"


class AbbrevError(ValueError):
    pass


class ParseError(AbbrevError):
    def __init__(self, msg: str, line: int):
        super().__init__(f"line {line}: {msg}")
        self.line = line


class DuplicateLabel(AbbrevError):
    pass


class UnsplittableLabel(AbbrevError):
    def __init__(self, label: str, position: int):
        super().__init__(f"cannot split {label!r} at position {position}")
        self.position = position


class AssemblyFailure(AbbrevError):
    pass


class MultipleAttachment(GraphError):
    pass


class NoAttachment(GraphError):
    pass


def _marker(g: MolGraph) -> list[int]:
    return [i for i, a in enumerate(g.atoms) if a.is_superatom and a.label == ATTACH]


@dataclass
class SuperatomDict:
    entries: dict[str, tuple[str, MolGraph]] = field(default_factory=dict)

    def __post_init__(self):
        self._folded: dict[str, str] = {}
        for label in sorted(self.entries):
            self._folded.setdefault(label.lower(), label)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, label: str) -> bool:
        return self.resolve(label) is not None

    def labels(self) -> list[str]:
        return list(self.entries)

    def resolve(self, label: str) -> str | None:
        """Exact label first, then a case-insensitive match."""
        if label in self.entries:
            return label
        return self._folded.get(label.lower())

    def fragment(self, label: str) -> MolGraph:
        key = self.resolve(label)
        if key is None:
            raise KeyError(label)
        return self.entries[key][1]

    def smiles(self, label: str) -> str:
        return self.entries[self.resolve(label) or label][0]


def parse_fragment(smiles: str) -> MolGraph:
    g = smiles_parse(smiles)
    if len(_marker(g)) != 1:
        raise AbbrevError(f"fragment {smiles!r} needs exactly one {ATTACH!r} marker")
    return g


def load_dictionary(path=None) -> SuperatomDict:
    """Read a ``label<TAB>fragment-SMILES`` file; ``#`` starts a comment line."""
    if path is None:
        text = resources.files("molnex.data").joinpath("superatoms.tsv").read_text()
    else:
        text = Path(path).read_text()
    entries: dict[str, tuple[str, MolGraph]] = {}
    for k, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.rstrip("\n").split("\t")
        if len(parts) != 2 or not parts[0] or not parts[1]:
            raise ParseError("expected label<TAB>smiles", k)
        label, smi = parts[0].strip(), parts[1].strip()
        if label in entries:
            raise DuplicateLabel(f"{label!r} repeated on line {k}")
        try:
            entries[label] = (smi, parse_fragment(smi))
        except (ValueError, GraphError) as exc:
            raise ParseError(str(exc), k) from exc
    return SuperatomDict(entries)


_DEFAULT: SuperatomDict | None = None


def default_dictionary() -> SuperatomDict:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = load_dictionary()
    return _DEFAULT


def levenshtein(a: str, b: str) -> int:
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def string_similarity(a: str, b: str) -> float:
    if not a and not b:
        return 1.0
    return 1.0 - levenshtein(a, b) / max(len(a), len(b))


# ---------------------------------------------------------------- assembly

_SPLIT_SYMBOLS = frozenset(el for el, _ in VALENCES)


def split_superatom(label: str) -> list[str]:
    """'O2CH3' -> ['O', 'O', 'C', 'H', 'H', 'H']."""
    if not label:
        raise UnsplittableLabel(label, 0)
    out: list[str] = []
    k = 0
    while k < len(label):
        if label[k].isdigit():
            j = k
            while j < len(label) and label[j].isdigit():
                j += 1
            if not out:
                raise UnsplittableLabel(label, k)
            out.extend([out[-1]] * (int(label[k:j]) - 1))
            k = j
            continue
        two = label[k : k + 2]
        if len(two) == 2 and two in _SPLIT_SYMBOLS:
            out.append(two)
            k += 2
        elif label[k] in _SPLIT_SYMBOLS:
            out.append(label[k])
            k += 1
        else:
            raise UnsplittableLabel(label, k)
    return out


def greedy_assemble(symbols: list[str], attach_valence: int = 1) -> MolGraph:
    """Connect split symbols into a fragment whose atom 0 is the ``*`` marker.

    Heavy atoms join, by single bond, the most recent earlier heavy atom
    that still has two free valences, or failing that one.  Each H goes on
    the most recent heavy atom with room.  Leftover free valence is then
    paired off along existing bonds, turning them double or triple.
    """
    heavy: list[int] = []  # symbol index -> atom index (marker is atom 0)
    labels: list[str] = []
    free: list[int] = []
    hcount: list[int] = []
    bonds: dict[tuple[int, int], int] = {}
    for sym in symbols:
        if sym == "H":
            host = next((a for a in reversed(range(len(labels))) if free[a] > 0), None)
            if host is None:
                raise AssemblyFailure("hydrogen has no heavy atom to bind")
            free[host] -= 1
            hcount[host] += 1
            continue
        val = VALENCES.get((sym, 0))
        if val is None:
            raise AssemblyFailure(f"no valence known for {sym}")
        cap = max(val)
        idx = len(labels)
        labels.append(sym)
        hcount.append(0)
        if idx == 0:
            free.append(cap - attach_valence)
            if free[0] < 0:
                raise AssemblyFailure(f"{sym} cannot carry the attachment")
            heavy.append(idx)
            continue
        free.append(cap)
        host = next((a for a in reversed(heavy) if free[a] >= 2), None)
        if host is None:
            host = next((a for a in reversed(heavy) if free[a] >= 1), None)
        if host is None:
            raise AssemblyFailure(f"{sym} has nothing to bond to")
        bonds[(host, idx)] = 1
        free[host] -= 1
        free[idx] -= 1
        heavy.append(idx)
    if not labels:
        raise AssemblyFailure("no heavy atoms")
    # fill remaining valence by raising bond orders along existing bonds
    changed = True
    while changed:
        changed = False
        for (a, b), order in sorted(bonds.items()):
            if free[a] > 0 and free[b] > 0 and order < 3:
                bonds[(a, b)] = order + 1
                free[a] -= 1
                free[b] -= 1
                changed = True
    kinds = {1: BondType.SINGLE, 2: BondType.DOUBLE, 3: BondType.TRIPLE}
    atoms = [Atom(ATTACH, is_superatom=True)]
    for a, sym in enumerate(labels):
        atoms.append(Atom(sym, explicit_h=hcount[a], no_implicit=True))
    out = [Bond(0, 1, BondType.SINGLE)]
    out += [Bond(a + 1, b + 1, kinds[o]) for (a, b), o in sorted(bonds.items())]
    g = MolGraph(tuple(atoms), tuple(out))
    rep = validate_graph(g)
    if rep.violations:
        raise AssemblyFailure("; ".join(rep.violations))
    return _settle_valence(g)


def _settle_valence(g: MolGraph) -> MolGraph:
    """Each atom must sit exactly on one of its allowed valences."""
    for i, a in enumerate(g.atoms):
        if a.is_superatom:
            continue
        v = explicit_valence(g, i)
        if v not in VALENCES[(a.label, a.charge)]:
            raise AssemblyFailure(f"{a.label} ends at valence {v}")
    return g


# --------------------------------------------------------------- expansion


class Provenance(enum.Enum):
    DICT_HIT = "DictHit"
    ASSEMBLED = "Assembled"
    CORRECTED = "Corrected"
    FAILED = "Failed"


@dataclass(frozen=True)
class ExpansionResult:
    fragment: MolGraph | None
    provenance: Provenance
    original: str = ""
    matched: str | None = None
    similarity: float | None = None


def best_match(label: str, dictionary: SuperatomDict) -> tuple[str | None, float]:
    best, best_key = None, None
    for cand in dictionary.labels():
        s = string_similarity(label, cand)
        key = (-s, len(cand), cand)
        if best_key is None or key < best_key:
            best, best_key = cand, key
    return best, (-best_key[0] if best_key else 0.0)


def expand_superatom(label: str, dictionary: SuperatomDict | None = None, sigma: float = SIGMA) -> ExpansionResult:
    dictionary = default_dictionary() if dictionary is None else dictionary
    key = dictionary.resolve(label)
    if key is not None:
        return ExpansionResult(dictionary.fragment(key), Provenance.DICT_HIT, label, key)
    try:
        frag = greedy_assemble(split_superatom(label))
        return ExpansionResult(frag, Provenance.ASSEMBLED, label)
    except AbbrevError:
        pass
    cand, sim = best_match(label, dictionary)
    if cand is not None and sim > sigma:
        return ExpansionResult(dictionary.fragment(cand), Provenance.CORRECTED, label, cand, sim)
    return ExpansionResult(None, Provenance.FAILED, label)


# ----------------------------------------------------------------- splicing


def splice_fragment(g: MolGraph, index: int, fragment: MolGraph) -> MolGraph:
    """Replace superatom ``index`` by ``fragment`` (which carries one ``*``)."""
    inc = g.incident(index)
    if not inc:
        raise NoAttachment(f"superatom {index} has no bond")
    if len(inc) > 1:
        raise MultipleAttachment(f"superatom {index} has {len(inc)} bonds")
    marks = _marker(fragment)
    if len(marks) != 1:
        raise AbbrevError("fragment must carry exactly one attachment marker")
    mark = marks[0]
    mark_bonds = fragment.incident(mark)
    if len(mark_bonds) != 1:
        raise AbbrevError("attachment marker must have exactly one bond")
    head = mark_bonds[0].other(mark)

    old = inc[0]
    anchor = old.other(index)
    frag, fmap = remove_atoms(fragment, [mark])
    head = fmap[head]
    base, gmap = remove_atoms(g, [index])
    offset = len(base.atoms)

    coords = _fragment_coords(g, index, anchor, frag, head)
    atoms = list(base.atoms) + [replace(a, coord=c) for a, c in zip(frag.atoms, coords)]
    bonds = list(base.bonds) + [Bond(b.a + offset, b.b + offset, b.kind) for b in frag.bonds]
    a_new, h_new = gmap[anchor], head + offset
    if old.kind.is_wedge and old.b == anchor:
        # wedge pointed into the superatom; keep the narrow end where it was
        bonds.append(Bond(h_new, a_new, old.kind))
    else:
        bonds.append(Bond(a_new, h_new, old.kind))
    return MolGraph(tuple(atoms), tuple(bonds))


def _fragment_coords(g: MolGraph, index: int, anchor: int, frag: MolGraph, head: int):
    """Head atom takes the superatom's place; the rest fan out beyond it."""
    sx, sy = g.atoms[index].coord
    ax, ay = g.atoms[anchor].coord
    dx, dy = sx - ax, sy - ay
    length = math.hypot(dx, dy)
    if length < 1e-9:
        dx, dy, length = 1.0, 0.0, 0.05
    ux, uy = dx / length, dy / length
    step = 0.25 * length
    depth = {head: 0}
    order = [head]
    for v in order:
        for w in frag.neighbors(v):
            if w not in depth:
                depth[w] = depth[v] + 1
                order.append(w)
    seen_at: dict[int, int] = {}
    out = []
    for i in range(len(frag.atoms)):
        d = depth.get(i, 1)
        k = seen_at.get(d, 0)
        seen_at[d] = k + 1
        side = (k + 1) // 2 * (1 if k % 2 else -1)
        x = sx + ux * step * d - uy * step * 0.5 * side
        y = sy + uy * step * d + ux * step * 0.5 * side
        out.append((min(max(x, 0.0), 1.0), min(max(y, 0.0), 1.0)))
    return out


def expand_all(
    g: MolGraph,
    dictionary: SuperatomDict | None = None,
    sigma: float = SIGMA,
    keep: frozenset[str] = frozenset(),
) -> tuple[MolGraph, list[ExpansionResult]]:
    """Expand every superatom except those labelled in ``keep`` (R-groups).

    Labels that cannot be expanded become ``*`` placeholders.
    """
    results = []
    while True:
        idx = next(
            (
                i
                for i, a in enumerate(g.atoms)
                if a.is_superatom and a.label not in keep and a.label != ATTACH
            ),
            None,
        )
        if idx is None:
            return g, results
        res = expand_superatom(g.atoms[idx].label, dictionary, sigma)
        results.append(res)
        if res.fragment is None or len(g.incident(idx)) != 1:
            if res.fragment is not None:
                results[-1] = ExpansionResult(None, Provenance.FAILED, res.original)
            g = g.replace_atom(idx, label=ATTACH)
            continue
        g = splice_fragment(g, idx, res.fragment)
