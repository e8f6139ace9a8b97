"""Tetrahedral parity from 2D coordinates and wedge bonds.

Each stereocentre's neighbours are lifted into 3D (a solid wedge's wide end
to z=+1, a dashed one to z=-1, everything else flat).  An implicit hydrogen
sits on the centre itself, on the opposite side of the plane from the wedge.
The sign of the triple product over the neighbours, taken in canonical-rank
order, then gives the parity.  Coordinates are image-style (y down), and the
handedness flip that implies is applied in ``_parity_from_sign``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .chemio.canon import canonical_ranks, symmetry_classes
from .molgraph import (
    BondType,
    Chirality,
    GraphError,
    MolGraph,
    permutation_parity,
    reference_order,
    remove_atoms,
    total_hydrogens,
)

H_SLOT = -1
MIN_ANGLE_DEG = 1.0


class StereoError(GraphError):
    pass


class AmbiguousStereo(StereoError):
    pass


class ConflictingWedges(StereoError):
    pass


@dataclass(frozen=True)
class StereoAssignment:
    center: int
    ordered_neighbors: tuple[int, ...]  # H_SLOT marks the implicit hydrogen
    parity: Chirality


def _wedges_at(g: MolGraph, i: int):
    return [b for b in g.incident(i) if b.kind.is_wedge and b.a == i]


def _distinct_substituents(g: MolGraph, i: int) -> bool:
    nbrs = g.neighbors(i)
    h = total_hydrogens(g, i)
    if len(nbrs) + h != 4 or h > 1:
        return False
    rest, mapping = remove_atoms(g, [i])
    classes = symmetry_classes(rest)
    seen = {classes[mapping[v]] for v in nbrs}
    return len(seen) == len(nbrs)


def find_chiral_centers(g: MolGraph) -> list[int]:
    """Wedge-bearing atoms whose four substituents are pairwise distinct."""
    out = []
    for i, atom in enumerate(g.atoms):
        if atom.is_superatom or not _wedges_at(g, i):
            continue
        if _distinct_substituents(g, i):
            out.append(i)
    return out


def _lift(g: MolGraph, i: int, wedge, order: list[int]) -> np.ndarray:
    z_w = 1.0 if wedge.kind == BondType.SOLID_WEDGE else -1.0
    cx, cy = g.atoms[i].coord
    pts = []
    for v in order:
        if v == H_SLOT:
            pts.append((cx, cy, -z_w))
            continue
        x, y = g.atoms[v].coord
        pts.append((x, y, z_w if v == wedge.b else 0.0))
    return np.array(pts, dtype=float)


def triple_product(p: np.ndarray) -> float:
    v1, v2, v3, v4 = p
    return float(np.dot(v1 - v4, np.cross(v2 - v4, v3 - v4)))


def _parity_from_sign(s: float) -> Chirality:
    # In a right-handed y-up frame a positive product means "@".  Image
    # coordinates are mirrored (y down), so here positive means "@@".
    return Chirality.CW if s > 0 else Chirality.CCW


def _too_close(g: MolGraph, i: int, flat: list[int]) -> bool:
    cx, cy = g.atoms[i].coord
    angles = []
    for v in flat:
        x, y = g.atoms[v].coord
        if math.hypot(x - cx, y - cy) < 1e-9:
            return True
        angles.append(math.atan2(y - cy, x - cx))
    for a in range(len(angles)):
        for b in range(a + 1, len(angles)):
            d = abs(angles[a] - angles[b]) % (2 * math.pi)
            if math.degrees(min(d, 2 * math.pi - d)) < MIN_ANGLE_DEG:
                return True
    return False


def center_assignment(g: MolGraph, i: int, ranks: list[int] | None = None) -> StereoAssignment:
    """Parity of a single centre; raises AmbiguousStereo / ConflictingWedges."""
    ranks = canonical_ranks(g) if ranks is None else ranks
    order = sorted(g.neighbors(i), key=lambda v: ranks[v])
    if total_hydrogens(g, i):
        order.append(H_SLOT)  # the hydrogen ranks last
    wedges = _wedges_at(g, i)
    flat = [v for v in g.neighbors(i) if v not in {w.b for w in wedges}]
    if _too_close(g, i, flat):
        raise AmbiguousStereo(f"in-plane neighbours of atom {i} are nearly collinear")
    parities = set()
    for w in wedges:
        s = triple_product(_lift(g, i, w, order))
        if abs(s) < 1e-12:
            raise AmbiguousStereo(f"degenerate geometry at atom {i}")
        parities.add(_parity_from_sign(s))
    if len(parities) > 1:
        raise ConflictingWedges(f"wedges at atom {i} imply opposite parities")
    return StereoAssignment(i, tuple(order), parities.pop())


def _to_reference(g: MolGraph, a: StereoAssignment) -> Chirality:
    order = [a.center if v == H_SLOT else v for v in a.ordered_neighbors]
    if permutation_parity(order, reference_order(g, a.center)):
        return a.parity.flipped()
    return a.parity


def assign_chirality(g: MolGraph, strict: bool = False, issues: list | None = None) -> MolGraph:
    """Recompute every atom's chirality tag from wedges and coordinates.

    Problem centres are left Unspecified and the exception appended to
    ``issues``; with ``strict`` the first one is raised instead.
    """
    atoms = [replace(a, chirality=Chirality.UNSPECIFIED) for a in g.atoms]
    centers = find_chiral_centers(g)
    if centers:
        ranks = canonical_ranks(g)
        for i in centers:
            try:
                a = center_assignment(g, i, ranks)
            except StereoError as exc:
                if strict:
                    raise
                if issues is not None:
                    issues.append(exc)
                continue
            atoms[i] = replace(atoms[i], chirality=_to_reference(g, a))
    return g.with_atoms(atoms)


def wedge_bonds(g: MolGraph) -> MolGraph:
    """Draw one wedge per specified centre so that ``assign_chirality`` recovers it.

    Inverse direction, used when building training data: coordinates must
    already be laid out.  Centres whose geometry cannot carry a wedge are
    left plain and lose their tag.
    """
    bonds = list(g.bonds)
    used: set[int] = set()
    for i, atom in enumerate(g.atoms):
        if atom.chirality is Chirality.UNSPECIFIED:
            continue
        placed = False
        cands = sorted(
            (k for k, b in enumerate(bonds) if i in (b.a, b.b) and b.kind == BondType.SINGLE),
            key=lambda k: (len(g.neighbors(bonds[k].other(i))), bonds[k].other(i)),
        )
        for k in cands:
            if k in used:
                continue
            other = bonds[k].other(i)
            if g.atoms[other].chirality is not Chirality.UNSPECIFIED:
                continue
            for kind in (BondType.SOLID_WEDGE, BondType.DASHED_WEDGE):
                trial = list(bonds)
                trial[k] = type(bonds[k])(i, other, kind)
                h = g.with_bonds(trial)
                try:
                    got = _to_reference(h, center_assignment(h, i))
                except StereoError:
                    break
                if got == atom.chirality and i in find_chiral_centers(h):
                    bonds = trial
                    used.add(k)
                    placed = True
                    break
            if placed:
                break
    out = g.with_bonds(bonds)
    return assign_chirality(out)
