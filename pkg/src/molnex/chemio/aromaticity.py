"""Ring perception, kekulization and Hückel aromaticity."""
from __future__ import annotations

from dataclasses import replace

import networkx as nx

from ..molgraph import (
    Bond,
    BondType,
    GraphError,
    MolGraph,
    needs_aromatic_double,
    total_hydrogens,
)

MAX_RING = 8
AROMATIC_RING_SIZES = (5, 6, 7)


class KekulizeError(GraphError):
    pass


def to_networkx(g: MolGraph) -> nx.Graph:
    G = nx.Graph()
    G.add_nodes_from(range(len(g.atoms)))
    G.add_edges_from(b.key for b in g.bonds)
    return G


def _cyclic_core(g: MolGraph) -> list[list[int]]:
    """Neighbour lists with chains pruned away, so only ring atoms and ring linkers keep edges."""
    adj = [set(g.neighbors(i)) for i in range(len(g.atoms))]
    leaves = [v for v in range(len(adj)) if len(adj[v]) == 1]
    while leaves:
        v = leaves.pop()
        for w in adj[v]:
            adj[w].discard(v)
            if len(adj[w]) == 1:
                leaves.append(w)
        adj[v] = set()
    return [sorted(a) for a in adj]


def simple_cycles(g: MolGraph, max_len: int = MAX_RING) -> list[tuple[int, ...]]:
    """All simple cycles up to ``max_len`` atoms, each as a canonical atom tuple.

    A cycle is reported once: starting at its smallest atom and heading to
    the smaller of that atom's two ring neighbours.
    """
    adj = _cyclic_core(g)
    out = []
    for s in range(len(adj)):
        if len(adj[s]) < 2:
            continue
        path, on = [s], {s}
        stack = [iter(adj[s])]
        while stack:
            w = next(stack[-1], None)
            if w is None:
                stack.pop()
                on.discard(path.pop())
                continue
            if w == s:
                if len(path) >= 3 and path[1] < path[-1]:
                    out.append(tuple(path))
            elif w > s and w not in on and len(path) < max_len:
                path.append(w)
                on.add(w)
                stack.append(iter(adj[w]))
    return sorted(out, key=lambda c: (len(c), c))


def ring_bond_keys(g: MolGraph) -> set[tuple[int, int]]:
    """Keys of bonds lying on some ring, i.e. every bond that is not a bridge."""
    n = len(g.atoms)
    disc, low = [-1] * n, [0] * n
    bridges = set()
    clock = 0
    for root in range(n):
        if disc[root] >= 0:
            continue
        disc[root] = low[root] = clock
        clock += 1
        stack = [(root, None, iter(g.incident(root)))]
        while stack:
            v, via, it = stack[-1]
            for b in it:
                if b is via:
                    continue
                w = b.other(v)
                if disc[w] < 0:
                    disc[w] = low[w] = clock
                    clock += 1
                    stack.append((w, b, iter(g.incident(w))))
                    break
                low[v] = min(low[v], disc[w])
            else:
                stack.pop()
                if stack:
                    u = stack[-1][0]
                    low[u] = min(low[u], low[v])
                    if low[v] > disc[u]:
                        bridges.add(via.key)
    return {b.key for b in g.bonds} - bridges


def kekulize(g: MolGraph) -> MolGraph:
    """Replace aromatic bonds with an alternating single/double assignment."""
    arom = [k for k, b in enumerate(g.bonds) if b.kind == BondType.AROMATIC]
    if not arom:
        return g
    atoms_in = sorted({i for k in arom for i in (g.bonds[k].a, g.bonds[k].b)})
    # freeze hydrogen counts measured on the aromatic form
    fixed_h = {}
    for i in atoms_in:
        a = g.atoms[i]
        if not a.is_superatom:
            fixed_h[i] = total_hydrogens(g, i)
    need = {i for i in atoms_in if needs_aromatic_double(g, i)}
    G = nx.Graph()
    G.add_nodes_from(sorted(need))
    for k in arom:
        b = g.bonds[k]
        if b.a in need and b.b in need:
            G.add_edge(b.a, b.b)
    matching = nx.max_weight_matching(G, maxcardinality=True)
    matched = {tuple(sorted(e)) for e in matching}
    covered = {i for e in matched for i in e}
    if covered != need:
        raise KekulizeError(f"cannot kekulize aromatic system (unmatched atoms {sorted(need - covered)})")
    bonds = []
    for b in g.bonds:
        if b.kind == BondType.AROMATIC:
            kind = BondType.DOUBLE if b.key in matched else BondType.SINGLE
            bonds.append(Bond(b.a, b.b, kind))
        else:
            bonds.append(b)
    atoms = list(g.atoms)
    for i, h in fixed_h.items():
        atoms[i] = replace(atoms[i], explicit_h=h, no_implicit=True)
    return MolGraph(tuple(atoms), tuple(bonds))


def _pi_electrons(
    g: MolGraph, ring: tuple[int, ...], aromatic_atoms: set[int], ring_atoms: set[int]
) -> int | None:
    """Hückel π count of ``ring`` in a kekulé graph, or None if the ring cannot be aromatic."""
    ring_set = set(ring)
    total = 0
    for i in ring:
        atom = g.atoms[i]
        if atom.is_superatom:
            return None
        el, q = atom.label, atom.charge
        in_ring_double = False
        exo_double = None
        for b in g.incident(i):
            j = b.other(i)
            if b.kind == BondType.DOUBLE:
                if j in ring_set:
                    in_ring_double = True
                else:
                    exo_double = j
            elif b.kind == BondType.TRIPLE:
                return None
        if in_ring_double:
            total += 1
            continue
        if exo_double is not None:
            if exo_double in aromatic_atoms:
                total += 1
                continue
            if exo_double in ring_atoms:
                # partner ring may still turn aromatic; retried next round
                return None
            other = g.atoms[exo_double].label
            if el in ("C", "N", "S", "P") and other in ("O", "N", "S"):
                continue
            return None
        if el == "C":
            if q == -1:
                total += 2
            elif q == 1:
                continue
            else:
                return None
        elif el in ("N", "P"):
            if q == 1:
                return None
            total += 2
        elif el in ("O", "S", "Se", "Te"):
            if q == 1:
                return None
            total += 2
        elif el == "B":
            continue
        else:
            return None
    return total


def perceive_aromaticity(g: MolGraph) -> MolGraph:
    """Mark every 5-7 membered Hückel ring aromatic.  Idempotent."""
    if any(b.kind == BondType.AROMATIC for b in g.bonds):
        g = kekulize(g)
    rings = [r for r in simple_cycles(g, max(AROMATIC_RING_SIZES)) if len(r) in AROMATIC_RING_SIZES]
    ring_atoms = {i for r in rings for i in r}
    aromatic_atoms: set[int] = set()
    aromatic_rings: list[tuple[int, ...]] = []
    pending = list(rings)
    changed = True
    while changed:
        changed = False
        rest = []
        for ring in pending:
            pi = _pi_electrons(g, ring, aromatic_atoms, ring_atoms)
            if pi is not None and pi % 4 == 2:
                aromatic_rings.append(ring)
                aromatic_atoms.update(ring)
                changed = True
            else:
                rest.append(ring)
        pending = rest
    if not aromatic_rings:
        return g
    arom_keys = set()
    for ring in aromatic_rings:
        for k in range(len(ring)):
            a, b = ring[k], ring[(k + 1) % len(ring)]
            arom_keys.add((a, b) if a < b else (b, a))
    atoms = list(g.atoms)
    for i in aromatic_atoms:
        atoms[i] = replace(atoms[i], explicit_h=total_hydrogens(g, i), no_implicit=True)
    bonds = [Bond(b.a, b.b, BondType.AROMATIC) if b.key in arom_keys else b for b in g.bonds]
    return MolGraph(tuple(atoms), tuple(bonds))
