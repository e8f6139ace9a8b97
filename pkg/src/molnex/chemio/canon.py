"""Morgan-style canonical ranking with individualisation-refinement."""
from __future__ import annotations

from ..molgraph import BondType, MolGraph, total_hydrogens

_BOND_CODE = {
    BondType.SINGLE: 1,
    BondType.SOLID_WEDGE: 1,
    BondType.DASHED_WEDGE: 1,
    BondType.DOUBLE: 2,
    BondType.TRIPLE: 3,
    BondType.AROMATIC: 4,
}


def atom_invariants(g: MolGraph) -> list[tuple]:
    out = []
    for i, a in enumerate(g.atoms):
        h = 0 if a.is_superatom else total_hydrogens(g, i)
        out.append((a.label, a.is_superatom, a.charge, g.degree(i), h, g.is_aromatic_atom(i)))
    return out


def _dense(keys: list) -> list[int]:
    order = {k: r for r, k in enumerate(sorted(set(keys)))}
    return [order[k] for k in keys]


def _neighbor_table(g: MolGraph) -> list[list[tuple[int, int]]]:
    return [[(b.other(i), _BOND_CODE[b.kind]) for b in g.incident(i)] for i in range(len(g.atoms))]


def refine(nbrs: list[list[tuple[int, int]]], ranks: list[int]) -> tuple[list[int], tuple]:
    """Iterate neighbour-multiset refinement to a stable partition.

    Returns the refined ranks and a trace of the sorted keys at every step,
    which is invariant under atom relabelling.
    """
    trace = []
    n_classes = len(set(ranks))
    while True:
        keys = [(ranks[i], tuple(sorted((ranks[j], c) for j, c in nbrs[i]))) for i in range(len(ranks))]
        new = _dense(keys)
        trace.append(tuple(sorted(keys)))
        n_new = len(set(new))
        ranks = new
        if n_new == n_classes:
            return ranks, tuple(trace)
        n_classes = n_new


def _individualize(ranks: list[int], v: int) -> list[int]:
    keys = [(r, 0 if i == v else 1) for i, r in enumerate(ranks)]
    return _dense(keys)


def first_tied_class(ranks: list[int]) -> list[int]:
    counts: dict[int, list[int]] = {}
    for i, r in enumerate(ranks):
        counts.setdefault(r, []).append(i)
    for r in sorted(counts):
        if len(counts[r]) > 1:
            return counts[r]
    return []


def symmetry_classes(g: MolGraph) -> list[int]:
    """Refined (untie-broken) equivalence classes."""
    nbrs = _neighbor_table(g)
    ranks, _ = refine(nbrs, _dense(atom_invariants(g)))
    return ranks


def canonical_ranks(g: MolGraph) -> list[int]:
    """Total order on atoms; ties broken by individualising the lowest-index tied atom."""
    nbrs = _neighbor_table(g)
    ranks, _ = refine(nbrs, _dense(atom_invariants(g)))
    while True:
        tied = first_tied_class(ranks)
        if not tied:
            return ranks
        ranks, _ = refine(nbrs, _individualize(ranks, min(tied)))


def candidate_rankings(g: MolGraph, max_leaves: int = 512, prune: bool = True):
    """Yield complete rankings reachable by individualisation-refinement.

    With ``prune`` candidates whose refinement traces coincide are explored
    once.  Beyond ``max_leaves`` only the lowest-index branch is followed.
    """
    nbrs = _neighbor_table(g)
    start, _ = refine(nbrs, _dense(atom_invariants(g)))
    budget = [max_leaves]

    def walk(ranks):
        tied = first_tied_class(ranks)
        if not tied:
            budget[0] -= 1
            yield ranks
            return
        seen = set()
        for v in tied:
            new, trace = refine(nbrs, _individualize(ranks, v))
            if prune:
                if trace in seen:
                    continue
                seen.add(trace)
            yield from walk(new)
            if budget[0] <= 0:
                return

    yield from walk(start)
