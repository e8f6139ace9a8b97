"""Molecular graph data model shared by every other module.

Atoms carry image-space coordinates (x right, y down, both in [0, 1]).
Tetrahedral chirality on an atom is expressed relative to its *reference
neighbour order*: neighbours sorted by atom index, with the implicit
hydrogen (if any) keyed by the centre's own index.  Wedge bonds are
directed, ``a`` being the narrow end.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Sequence

ELEMENTS = (
    "H He Li Be B C N O F Ne Na Mg Al Si P S Cl Ar K Ca Sc Ti V Cr Mn Fe Co "
    "Ni Cu Zn Ga Ge As Se Br Kr Rb Sr Y Zr Nb Mo Tc Ru Rh Pd Ag Cd In Sn Sb "
    "Te I Xe Cs Ba La Ce Pr Nd Pm Sm Eu Gd Tb Dy Ho Er Tm Yb Lu Hf Ta W Re "
    "Os Ir Pt Au Hg Tl Pb Bi Po At Rn Fr Ra Ac Th Pa U Np Pu Am Cm Bk Cf Es "
    "Fm Md No Lr Rf Db Sg Bh Hs Mt Ds Rg Cn Nh Fl Mc Lv Ts Og"
).split()
ELEMENT_SET = frozenset(ELEMENTS)

# (element, charge) -> allowed valences, smallest first
VALENCES: dict[tuple[str, int], tuple[int, ...]] = {
    ("H", 0): (1,),
    ("B", 0): (3,),
    ("B", -1): (4,),
    ("C", 0): (4,),
    ("C", 1): (3,),
    ("C", -1): (3,),
    ("N", 0): (3,),
    ("N", 1): (4,),
    ("N", -1): (2,),
    ("O", 0): (2,),
    ("O", 1): (3,),
    ("O", -1): (1,),
    ("Si", 0): (4,),
    ("P", 0): (3, 5),
    ("P", 1): (4,),
    ("S", 0): (2, 4, 6),
    ("S", 1): (3,),
    ("S", -1): (1,),
    ("F", 0): (1,),
    ("Cl", 0): (1,),
    ("Br", 0): (1,),
    ("I", 0): (1,),
}


class BondType(enum.IntEnum):
    NONE = 0
    SINGLE = 1
    DOUBLE = 2
    TRIPLE = 3
    AROMATIC = 4
    SOLID_WEDGE = 5
    DASHED_WEDGE = 6

    @property
    def order(self) -> float:
        return _BOND_ORDER[self]

    @property
    def is_wedge(self) -> bool:
        return self in (BondType.SOLID_WEDGE, BondType.DASHED_WEDGE)


_BOND_ORDER = {
    BondType.NONE: 0.0,
    BondType.SINGLE: 1.0,
    BondType.DOUBLE: 2.0,
    BondType.TRIPLE: 3.0,
    BondType.AROMATIC: 1.5,
    BondType.SOLID_WEDGE: 1.0,
    BondType.DASHED_WEDGE: 1.0,
}


class Chirality(enum.Enum):
    UNSPECIFIED = 0
    CW = 1  # "@@"
    CCW = 2  # "@"

    def flipped(self) -> "Chirality":
        if self is Chirality.CW:
            return Chirality.CCW
        if self is Chirality.CCW:
            return Chirality.CW
        return self


class GraphError(ValueError):
    pass


class ValenceError(GraphError):
    pass


@dataclass(frozen=True)
class Atom:
    label: str
    charge: int = 0
    explicit_h: int = 0
    is_superatom: bool = False
    coord: tuple[float, float] = (0.0, 0.0)
    chirality: Chirality = Chirality.UNSPECIFIED
    # bracket atoms and frozen aromatic atoms: hydrogen count is exactly explicit_h
    no_implicit: bool = False

    @property
    def element(self) -> str | None:
        return None if self.is_superatom else self.label


@dataclass(frozen=True)
class Bond:
    a: int
    b: int
    kind: BondType = BondType.SINGLE

    def other(self, i: int) -> int:
        return self.b if i == self.a else self.a

    @property
    def key(self) -> tuple[int, int]:
        return (self.a, self.b) if self.a < self.b else (self.b, self.a)


@dataclass(frozen=True)
class MolGraph:
    atoms: tuple[Atom, ...] = ()
    bonds: tuple[Bond, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple(self.atoms))
        object.__setattr__(self, "bonds", tuple(self.bonds))

    def __len__(self) -> int:
        return len(self.atoms)

    @cached_property
    def _adjacency(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in self.atoms]
        for k, b in enumerate(self.bonds):
            if 0 <= b.a < len(adj) and 0 <= b.b < len(adj) and b.a != b.b:
                adj[b.a].append(k)
                adj[b.b].append(k)
        return adj

    @cached_property
    def _bond_index(self) -> dict[tuple[int, int], int]:
        return {b.key: k for k, b in enumerate(self.bonds)}

    def incident(self, i: int) -> list[Bond]:
        return [self.bonds[k] for k in self._adjacency[i]]

    def neighbors(self, i: int) -> list[int]:
        return [self.bonds[k].other(i) for k in self._adjacency[i]]

    def degree(self, i: int) -> int:
        return len(self._adjacency[i])

    def bond(self, i: int, j: int) -> Bond | None:
        k = self._bond_index.get((i, j) if i < j else (j, i))
        return None if k is None else self.bonds[k]

    def bond_order_sum(self, i: int) -> float:
        return sum(self.bonds[k].kind.order for k in self._adjacency[i])

    def is_aromatic_atom(self, i: int) -> bool:
        return any(self.bonds[k].kind == BondType.AROMATIC for k in self._adjacency[i])

    def with_atoms(self, atoms: Sequence[Atom]) -> "MolGraph":
        out = MolGraph(tuple(atoms), self.bonds)
        if len(out.atoms) == len(self.atoms):
            # same bonds and atom count, so the cached topology carries over
            for key in ("_adjacency", "_bond_index"):
                if key in self.__dict__:
                    out.__dict__[key] = self.__dict__[key]
        return out

    def with_bonds(self, bonds: Sequence[Bond]) -> "MolGraph":
        return MolGraph(self.atoms, tuple(bonds))

    def replace_atom(self, i: int, **changes) -> "MolGraph":
        atoms = list(self.atoms)
        atoms[i] = replace(atoms[i], **changes)
        return self.with_atoms(atoms)

    def components(self) -> list[list[int]]:
        seen = [False] * len(self.atoms)
        out = []
        for s in range(len(self.atoms)):
            if seen[s]:
                continue
            stack, comp = [s], []
            seen[s] = True
            while stack:
                u = stack.pop()
                comp.append(u)
                for v in self.neighbors(u):
                    if not seen[v]:
                        seen[v] = True
                        stack.append(v)
            out.append(sorted(comp))
        return out


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    def __bool__(self) -> bool:
        return not self.violations

    @property
    def ok(self) -> bool:
        return not self.violations


def allowed_valences(element: str, charge: int) -> tuple[int, ...] | None:
    return VALENCES.get((element, charge))


def _rounded(x: float) -> int:
    return int(math.floor(x + 0.5))


def implicit_hydrogens(g: MolGraph, i: int) -> int:
    """Implicit hydrogen count of a non-superatom atom from the valence table.

    Bond orders are summed and rounded to the nearest integer; the count is
    the gap to the smallest allowed valence that fits.  Atoms on aromatic
    bonds use the SMILES aromatic convention (see ``aromatic_implicit_h``),
    which agrees with counting aromatic bonds as 1.5 for C, N and O.
    """
    atom = g.atoms[i]
    if atom.is_superatom:
        raise GraphError(f"atom {i} ({atom.label}) is a superatom")
    if atom.no_implicit:
        return 0
    vals = allowed_valences(atom.label, atom.charge)
    if vals is None:
        return 0
    if g.is_aromatic_atom(i):
        return aromatic_implicit_h(g, i)
    used = _rounded(g.bond_order_sum(i)) + atom.explicit_h
    for v in vals:
        if v >= used:
            return v - used
    return 0


def explicit_valence(g: MolGraph, i: int) -> int:
    atom = g.atoms[i]
    if g.is_aromatic_atom(i):
        used = sum(1 if b.kind == BondType.AROMATIC else int(b.kind.order) for b in g.incident(i))
        return used + atom.explicit_h + (1 if needs_aromatic_double(g, i) else 0)
    return _rounded(g.bond_order_sum(i)) + atom.explicit_h


def needs_aromatic_double(g: MolGraph, i: int) -> bool:
    """Whether aromatic atom ``i`` must carry a ring double bond when kekulized."""
    atom = g.atoms[i]
    if atom.is_superatom:
        return False
    incident = g.incident(i)
    if any(b.kind == BondType.DOUBLE for b in incident):
        return False
    n_single_like = sum(1 for b in incident if b.kind != BondType.DOUBLE)
    extra = sum(int(b.kind.order) - 1 for b in incident if b.kind in (BondType.TRIPLE,))
    vals = allowed_valences(atom.label, atom.charge)
    if vals is None:
        return False
    if atom.no_implicit:
        free = vals[0] - (n_single_like + extra + atom.explicit_h)
        return free >= 1
    if atom.label in ("C", "B") and atom.charge == 0:
        return atom.label == "C"
    if atom.label in ("N", "P"):
        return len(incident) == 2
    return False


def aromatic_implicit_h(g: MolGraph, i: int) -> int:
    atom = g.atoms[i]
    if atom.no_implicit:
        return 0
    vals = allowed_valences(atom.label, atom.charge)
    if vals is None:
        return 0
    used = sum(1 if b.kind == BondType.AROMATIC else int(b.kind.order) for b in g.incident(i))
    used += atom.explicit_h + (1 if needs_aromatic_double(g, i) else 0)
    for v in vals:
        if v >= used:
            return v - used
    return 0


def total_hydrogens(g: MolGraph, i: int) -> int:
    atom = g.atoms[i]
    if atom.is_superatom:
        return 0
    return atom.explicit_h + implicit_hydrogens(g, i)


def validate_graph(g: MolGraph) -> ValidationReport:
    rep = ValidationReport()
    n = len(g.atoms)
    for i, atom in enumerate(g.atoms):
        if not atom.label:
            rep.violations.append(f"empty label at atom {i}")
        elif not atom.is_superatom and atom.label not in ELEMENT_SET:
            rep.violations.append(f"unknown element {atom.label!r} at atom {i}")
        if atom.explicit_h < 0:
            rep.violations.append(f"negative hydrogen count at atom {i}")
        x, y = atom.coord
        if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
            rep.violations.append(f"coord out of range at atom {i}: {atom.coord}")
    seen = set()
    bad_index = False
    for b in g.bonds:
        if not (0 <= b.a < n and 0 <= b.b < n):
            rep.violations.append(f"bond index out of range: ({b.a}, {b.b})")
            bad_index = True
            continue
        if b.a == b.b:
            rep.violations.append(f"self-bond at atom {b.a}")
            continue
        if b.kind == BondType.NONE:
            rep.violations.append(f"bond ({b.a}, {b.b}) has kind None")
        if b.key in seen:
            rep.violations.append(f"duplicate bond ({b.a}, {b.b})")
        seen.add(b.key)
    if bad_index:
        return rep
    for i, atom in enumerate(g.atoms):
        if atom.is_superatom or atom.label not in ELEMENT_SET:
            continue
        vals = allowed_valences(atom.label, atom.charge)
        if vals is None:
            continue
        used = explicit_valence(g, i)
        if used > max(vals):
            rep.violations.append(f"valence overflow {atom.label}: {used} > {max(vals)}")
    return rep


def reference_order(g: MolGraph, i: int) -> list[int]:
    """Neighbour order chirality is expressed against; ``i`` stands for the implicit H."""
    nbrs = sorted(g.neighbors(i))
    if total_hydrogens(g, i) > 0:
        nbrs = sorted(nbrs + [i])
    return nbrs


def permutation_parity(src: Sequence[int], dst: Sequence[int]) -> int:
    """Parity (0 even, 1 odd) of the permutation taking ``src`` to ``dst``."""
    if sorted(src) != sorted(dst):
        raise ValueError("sequences are not permutations of each other")
    pos = {v: k for k, v in enumerate(dst)}
    arr = [pos[v] for v in src]
    parity = 0
    seen = [False] * len(arr)
    for s in range(len(arr)):
        if seen[s]:
            continue
        length = 0
        j = s
        while not seen[j]:
            seen[j] = True
            j = arr[j]
            length += 1
        parity ^= (length - 1) & 1
    return parity


def chirality_for_order(g: MolGraph, i: int, order: Sequence[int]) -> Chirality:
    """Chirality of atom ``i`` re-expressed relative to neighbour ``order``."""
    tag = g.atoms[i].chirality
    if tag is Chirality.UNSPECIFIED:
        return tag
    if permutation_parity(reference_order(g, i), order):
        return tag.flipped()
    return tag


def permute_atoms(g: MolGraph, perm: Sequence[int]) -> MolGraph:
    """Relabel atoms so old atom ``i`` becomes new atom ``perm[i]``."""
    n = len(g.atoms)
    if sorted(perm) != list(range(n)):
        raise GraphError("perm is not a permutation of atom indices")
    atoms: list[Atom | None] = [None] * n
    for i, atom in enumerate(g.atoms):
        atoms[perm[i]] = atom
    bonds = [Bond(perm[b.a], perm[b.b], b.kind) for b in g.bonds]
    out = MolGraph(tuple(atoms), tuple(bonds))  # type: ignore[arg-type]
    fixes = {}
    for i, atom in enumerate(g.atoms):
        if atom.chirality is Chirality.UNSPECIFIED:
            continue
        mapped = [perm[v] for v in reference_order(g, i)]
        if permutation_parity(mapped, reference_order(out, perm[i])):
            fixes[perm[i]] = atom.chirality.flipped()
    if fixes:
        out = out.with_atoms(
            [replace(a, chirality=fixes[k]) if k in fixes else a for k, a in enumerate(out.atoms)]
        )
    return out


def remove_atoms(g: MolGraph, drop: Iterable[int]) -> tuple[MolGraph, dict[int, int]]:
    """Delete atoms (and their bonds); returns the new graph and old->new index map."""
    drop = set(drop)
    mapping = {}
    atoms = []
    for i, a in enumerate(g.atoms):
        if i not in drop:
            mapping[i] = len(atoms)
            atoms.append(a)
    bonds = [
        Bond(mapping[b.a], mapping[b.b], b.kind)
        for b in g.bonds
        if b.a not in drop and b.b not in drop
    ]
    return MolGraph(tuple(atoms), tuple(bonds)), mapping
