"""SMILES parsing and canonical writing."""
from __future__ import annotations

import re
from dataclasses import replace

from ..molgraph import (
    Atom,
    Bond,
    BondType,
    Chirality,
    MolGraph,
    ValenceError,
    allowed_valences,
    aromatic_implicit_h,
    chirality_for_order,
    implicit_hydrogens,
    permutation_parity,
    reference_order,
    total_hydrogens,
    validate_graph,
)
from .aromaticity import kekulize, perceive_aromaticity, ring_bond_keys
from .canon import candidate_rankings, symmetry_classes
from .tokenizer import (
    ORGANIC,
    AtomBracket,
    AtomOrganic,
    BondSym,
    BranchClose,
    BranchOpen,
    Dot,
    RingClosure,
    SmilesError,
    smiles_tokenize,
)

RGROUP_RE = re.compile(r"^R(\d+)$")
RGROUP_LABELS = frozenset({"*", "R", "R'", "R''", "X", "Y", "Z", "Ar"})

_H_SLOT = -1


def parse_smiles(s: str) -> MolGraph:
    return smiles_parse(s)


def smiles_parse(s: str) -> MolGraph:
    """Parse a SMILES string into a validated MolGraph.

    Aromatic input is kekulized to fix hydrogen counts, then re-perceived so
    ring bonds come out Aromatic.  ``/`` and ``\\`` are read as plain single
    bonds.
    """
    s = s.strip()
    if not s:
        raise SmilesError("empty SMILES", 0)
    tokens = smiles_tokenize(s)
    atoms: list[Atom] = []
    aromatic: list[bool] = []
    bonds: dict[tuple[int, int], BondType] = {}
    # lexical neighbour order per atom; _H_SLOT marks the bracket hydrogen
    order: list[list[int]] = []
    prev: int | None = None
    stack: list[int | None] = []
    pending_bond: BondSym | None = None
    rings: dict[int, tuple[int, BondSym | None, int]] = {}

    def add_bond(i: int, j: int, sym: BondSym | None, pos: int):
        key = (i, j) if i < j else (j, i)
        if i == j or key in bonds:
            raise SmilesError("duplicate or self bond", pos)
        if sym is not None:
            kind = sym.kind
        elif aromatic[i] and aromatic[j]:
            kind = BondType.AROMATIC
        else:
            kind = BondType.SINGLE
        bonds[key] = kind

    for tok in tokens:
        if isinstance(tok, (AtomOrganic, AtomBracket)):
            idx = len(atoms)
            if isinstance(tok, AtomOrganic):
                if tok.symbol == "*":
                    atom = Atom("*", is_superatom=True)
                else:
                    atom = Atom(tok.symbol)
            else:
                if tok.symbol == "*":
                    label = "*" if tok.rgroup is None else f"R{tok.rgroup}"
                    atom = Atom(label, charge=tok.charge, is_superatom=True)
                else:
                    atom = Atom(
                        tok.symbol,
                        charge=tok.charge,
                        explicit_h=tok.hcount,
                        chirality=tok.chirality,
                        no_implicit=True,
                    )
            atoms.append(atom)
            aromatic.append(tok.aromatic)
            order.append([])
            if prev is not None:
                add_bond(prev, idx, pending_bond, tok.pos)
                order[prev].append(idx)
                order[idx].append(prev)
            if isinstance(tok, AtomBracket) and tok.hcount:
                order[idx].append(_H_SLOT)
            pending_bond = None
            prev = idx
        elif isinstance(tok, BondSym):
            if prev is None or pending_bond is not None:
                raise SmilesError("misplaced bond symbol", tok.pos)
            pending_bond = tok
        elif isinstance(tok, RingClosure):
            if prev is None:
                raise SmilesError("ring closure before any atom", tok.pos)
            if tok.number in rings:
                other, sym, slot = rings.pop(tok.number)
                if sym is not None and pending_bond is not None and sym.kind != pending_bond.kind:
                    raise SmilesError("conflicting ring-closure bonds", tok.pos)
                add_bond(other, prev, pending_bond or sym, tok.pos)
                order[other][slot] = prev
                order[prev].append(other)
            else:
                order[prev].append(-2)  # placeholder until closed
                rings[tok.number] = (prev, pending_bond, len(order[prev]) - 1)
            pending_bond = None
        elif isinstance(tok, BranchOpen):
            if prev is None:
                raise SmilesError("branch before any atom", tok.pos)
            stack.append(prev)
        elif isinstance(tok, BranchClose):
            if pending_bond is not None:
                raise SmilesError("dangling bond", tok.pos)
            prev = stack.pop()
        elif isinstance(tok, Dot):
            if pending_bond is not None:
                raise SmilesError("dangling bond", tok.pos)
            prev = None
    if pending_bond is not None:
        raise SmilesError("dangling bond", len(s))

    g = MolGraph(tuple(atoms), tuple(Bond(a, b, k) for (a, b), k in sorted(bonds.items())))
    # aromatic bonds must sit in rings
    ring_keys = ring_bond_keys(g)
    fixed = [
        Bond(b.a, b.b, BondType.SINGLE) if b.kind == BondType.AROMATIC and b.key not in ring_keys else b
        for b in g.bonds
    ]
    g = g.with_bonds(fixed)
    any_aromatic = any(b.kind == BondType.AROMATIC for b in g.bonds)
    if any(aromatic[i] and not g.is_aromatic_atom(i) for i in range(len(atoms))):
        raise SmilesError("aromatic atom outside an aromatic ring")
    if any_aromatic:
        g = kekulize(g)
    # chirality from lexical order to reference order
    new_atoms = list(g.atoms)
    for i, atom in enumerate(g.atoms):
        if atom.chirality is Chirality.UNSPECIFIED:
            continue
        lex = [i if v == _H_SLOT else v for v in order[i]]
        ref = reference_order(g, i)
        if sorted(lex) != sorted(ref) or len(lex) < 3:
            new_atoms[i] = replace(atom, chirality=Chirality.UNSPECIFIED)
            continue
        if permutation_parity(lex, ref):
            new_atoms[i] = replace(atom, chirality=atom.chirality.flipped())
    g = g.with_atoms(new_atoms)
    report = validate_graph(g)
    if not report.ok:
        raise ValenceError("; ".join(report.violations))
    if any_aromatic:
        g = perceive_aromaticity(g)
    return g


# ---------------------------------------------------------------- writing


def _reader_h(g: MolGraph, i: int) -> int:
    """Hydrogens a SMILES reader would infer for atom ``i`` written unbracketed."""
    probe = g.replace_atom(i, explicit_h=0, no_implicit=False)
    if g.is_aromatic_atom(i):
        return aromatic_implicit_h(probe, i)
    return implicit_hydrogens(probe, i)


def _superatom_text(label: str) -> str:
    m = RGROUP_RE.match(label)
    if m:
        return f"[{int(m.group(1))}*]"
    return "*"


def _atom_text(g: MolGraph, i: int, chir: Chirality) -> tuple[str, bool]:
    """SMILES text for atom ``i``; the flag tells whether an H is written in brackets."""
    a = g.atoms[i]
    if a.is_superatom:
        return _superatom_text(a.label), False
    arom = g.is_aromatic_atom(i)
    sym = a.label.lower() if arom else a.label
    h = total_hydrogens(g, i)
    organic = a.label in ORGANIC and allowed_valences(a.label, 0) is not None
    if organic and a.charge == 0 and chir is Chirality.UNSPECIFIED and h == _reader_h(g, i):
        return sym, False
    text = "[" + sym
    if chir is Chirality.CCW:
        text += "@"
    elif chir is Chirality.CW:
        text += "@@"
    if h:
        text += "H" if h == 1 else f"H{h}"
    if a.charge:
        sign = "+" if a.charge > 0 else "-"
        text += sign if abs(a.charge) == 1 else f"{sign}{abs(a.charge)}"
    return text + "]", h > 0


def _bond_text(g: MolGraph, b: Bond) -> str:
    if b.kind == BondType.DOUBLE:
        return "="
    if b.kind == BondType.TRIPLE:
        return "#"
    if b.kind == BondType.AROMATIC:
        return ""
    if g.is_aromatic_atom(b.a) and g.is_aromatic_atom(b.b):
        return "-"
    return ""


def stereo_eligible(g: MolGraph, classes: list[int] | None = None) -> set[int]:
    """Atoms whose chirality tag is meaningful: four distinct substituents."""
    from ..molgraph import remove_atoms

    out = set()
    for i, a in enumerate(g.atoms):
        if a.chirality is Chirality.UNSPECIFIED or a.is_superatom:
            continue
        h = total_hydrogens(g, i)
        nbrs = g.neighbors(i)
        if h > 1 or len(nbrs) + h != 4:
            continue
        sub, mapping = remove_atoms(g, [i])
        cls = symmetry_classes(sub)
        ranks = [cls[mapping[j]] for j in nbrs]
        if len(set(ranks)) == len(ranks):
            out.add(i)
    return out


def write_smiles(
    g: MolGraph,
    ranks: list[int],
    stereo_atoms: set[int] | None = None,
    order_out: list[int] | None = None,
) -> str:
    """Depth-first SMILES from the lowest-ranked atom, branches in rank order."""
    n = len(g.atoms)
    if stereo_atoms is None:
        stereo_atoms = {i for i, a in enumerate(g.atoms) if a.chirality is not Chirality.UNSPECIFIED}
    visited = [False] * n
    visit_index = [-1] * n
    children: list[list[int]] = [[] for _ in range(n)]
    parent = [-1] * n
    ring_open: list[list[int]] = [[] for _ in range(n)]
    ring_close: list[list[int]] = [[] for _ in range(n)]
    used_edges: set[tuple[int, int]] = set()
    counter = [0]
    nbr_sorted = [sorted(g.neighbors(i), key=lambda j: ranks[j]) for i in range(n)]

    def dfs(root: int):
        stack = [(root, iter(nbr_sorted[root]))]
        visited[root] = True
        visit_index[root] = counter[0]
        counter[0] += 1
        while stack:
            u, it = stack[-1]
            advanced = False
            for v in it:
                key = (u, v) if u < v else (v, u)
                if key in used_edges:
                    continue
                used_edges.add(key)
                if visited[v]:
                    ring_open[v].append(u)
                    ring_close[u].append(v)
                    continue
                visited[v] = True
                visit_index[v] = counter[0]
                counter[0] += 1
                parent[v] = u
                children[u].append(v)
                stack.append((v, iter(nbr_sorted[v])))
                advanced = True
                break
            if not advanced:
                stack.pop()

    roots = []
    for i in sorted(range(n), key=lambda j: ranks[j]):
        if not visited[i]:
            roots.append(i)
            dfs(i)

    free_digits = list(range(1, 100))
    digit_of: dict[tuple[int, int], int] = {}
    parts: list[str] = []

    def ring_token(d: int) -> str:
        return str(d) if d < 10 else f"%{d:02d}"

    def emit(u: int):
        ring_partners = []
        ring_text = ""
        for v in sorted(ring_close[u], key=lambda v: visit_index[v]):
            d = digit_of.pop((v, u))
            ring_text += ring_token(d)
            free_digits.append(d)
            free_digits.sort()
            ring_partners.append(v)
        for v in sorted(ring_open[u], key=lambda v: visit_index[v]):
            d = free_digits.pop(0)
            digit_of[(u, v)] = d
            ring_text += _bond_text(g, g.bond(u, v)) + ring_token(d)
            ring_partners.append(v)
        kids = children[u]
        chir = Chirality.UNSPECIFIED
        if u in stereo_atoms:
            # reader order: preceding atom, bracket H, ring digits, branches
            seq = [parent[u]] if parent[u] >= 0 else []
            if total_hydrogens(g, u) > 0:
                seq.append(u)
            seq += ring_partners + kids
            try:
                chir = chirality_for_order(g, u, seq)
            except ValueError:
                chir = Chirality.UNSPECIFIED
        text, _ = _atom_text(g, u, chir)
        parts.append(text + ring_text)
        if order_out is not None:
            order_out.append(u)
        for k, v in enumerate(kids):
            btxt = _bond_text(g, g.bond(u, v))
            if k < len(kids) - 1:
                parts.append("(" + btxt)
                emit(v)
                parts.append(")")
            else:
                parts.append(btxt)
                emit(v)

    pieces = []
    for r in roots:
        parts.clear()
        emit(r)
        pieces.append("".join(parts))
    return ".".join(pieces)


def prepare_for_output(g: MolGraph) -> MolGraph:
    """Normalise bonds for writing: wedges become single, aromaticity re-perceived."""
    if any(b.kind.is_wedge for b in g.bonds):
        g = g.with_bonds([Bond(b.a, b.b, BondType.SINGLE) if b.kind.is_wedge else b for b in g.bonds])
    return perceive_aromaticity(g)


def canonical_form(g: MolGraph, max_leaves: int = 512) -> tuple[str, list[int]]:
    """Canonical SMILES and the atom indices in the order they are written."""
    report = validate_graph(g)
    bad = [v for v in report.violations if not v.startswith("coord")]
    if bad:
        raise ValenceError("; ".join(bad))
    if not g.atoms:
        return "", []
    g = prepare_for_output(g)
    stereo = stereo_eligible(g)
    if len(stereo) < sum(a.chirality is not Chirality.UNSPECIFIED for a in g.atoms):
        g = g.with_atoms(
            [a if i in stereo else replace(a, chirality=Chirality.UNSPECIFIED) for i, a in enumerate(g.atoms)]
        )
    best, best_order = None, []
    for ranks in candidate_rankings(g, max_leaves=max_leaves, prune=not stereo):
        order: list[int] = []
        s = write_smiles(g, ranks, stereo, order)
        if best is None or (len(s), s) < (len(best), best):
            best, best_order = s, order
    return best, best_order


def canonical_smiles(g: MolGraph, max_leaves: int = 512) -> str:
    """Canonical SMILES: the smallest string over all tie-breaking choices."""
    return canonical_form(g, max_leaves)[0]


def canonicalize(s: str) -> str:
    return canonical_smiles(smiles_parse(s))
