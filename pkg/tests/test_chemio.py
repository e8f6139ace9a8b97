import itertools
from dataclasses import replace

import networkx as nx
import pytest

from molnex.chemio import (
    canonical_ranks,
    canonical_smiles,
    canonicalize,
    kekulize,
    molfile_parse,
    molfile_write,
    perceive_aromaticity,
    smiles_parse,
    smiles_tokenize,
    write_smiles,
)
from molnex.chemio.molfile import MalformedCountsLine, TruncatedBlock, normalize_coords
from molnex.chemio.tokenizer import AtomBracket, AtomOrganic, UnbalancedBracket, UnbalancedRing, UnknownSymbol
from molnex.depict import layout_2d
from molnex.molgraph import Atom, Bond, BondType, Chirality, MolGraph, permute_atoms


def as_nx(g):
    G = nx.Graph()
    for i, a in enumerate(g.atoms):
        G.add_node(i, label=a.label, charge=a.charge)
    for b in g.bonds:
        G.add_edge(b.a, b.b, kind=int(b.kind))
    return G


def isomorphic(g, h):
    return nx.is_isomorphic(
        as_nx(g), as_nx(h),
        node_match=lambda a, b: a == b,
        edge_match=lambda a, b: a == b,
    )


# ---------------------------------------------------------------- tokenizer


def test_tokenize_ethanol():
    toks = smiles_tokenize("CCO")
    assert [type(t) for t in toks] == [AtomOrganic] * 3
    assert [t.symbol for t in toks] == ["C", "C", "O"]


def test_tokenize_bracket():
    (tok,) = smiles_tokenize("[C@@H]")
    assert isinstance(tok, AtomBracket)
    assert (tok.symbol, tok.charge, tok.hcount, tok.chirality) == ("C", 0, 1, Chirality.CW)


def test_tokenize_charge_forms():
    assert smiles_tokenize("[NH4+]")[0].charge == 1
    assert smiles_tokenize("[O-2]")[0].charge == -2
    assert smiles_tokenize("[Fe++]")[0].charge == 2


@pytest.mark.parametrize("s, err", [("C1%12", UnbalancedRing), ("C[CH", UnbalancedBracket), ("CXq", UnknownSymbol)])
def test_tokenize_errors(s, err):
    with pytest.raises(err):
        smiles_parse(s)


# ---------------------------------------------------------------- parsing


def test_parse_ethanol():
    g = smiles_parse("CCO")
    assert len(g.atoms) == 3
    assert [b.kind for b in g.bonds] == [BondType.SINGLE] * 2


def test_parse_benzene():
    g = smiles_parse("c1ccccc1")
    assert len(g.atoms) == 6
    assert all(b.kind == BondType.AROMATIC for b in g.bonds) and len(g.bonds) == 6
    assert sorted(len(c) for c in nx.cycle_basis(as_nx(g))) == [6]


def test_parse_alanine_parity():
    g = smiles_parse("N[C@@H](C)C(=O)O")
    # neighbour order (N, implicit H, C, C) is the stored reference order
    assert g.atoms[1].chirality is Chirality.CW


def test_dot_disconnected():
    g = smiles_parse("[Na+].[Cl-]")
    assert len(g.components()) == 2


# ---------------------------------------------------------------- aromaticity


def test_kekule_benzene_perceived():
    g = perceive_aromaticity(smiles_parse("C1=CC=CC=C1"))
    assert all(b.kind == BondType.AROMATIC for b in g.bonds)


def test_cyclohexane_unchanged():
    g = smiles_parse("C1CCCCC1")
    assert perceive_aromaticity(g) == g


def test_pyridine_kekule_aromatic():
    g = perceive_aromaticity(smiles_parse("C1=CC=NC=C1"))
    assert all(b.kind == BondType.AROMATIC for b in g.bonds)


@pytest.mark.parametrize("s", ["c1ccc2[nH]ccc2c1", "c1ccsc1", "c1ccoc1", "Cn1ccnc1", "O=c1cc[nH]cc1"])
def test_kekulize_roundtrip(s):
    g = smiles_parse(s)
    k = kekulize(g)
    assert not any(b.kind == BondType.AROMATIC for b in k.bonds)
    assert canonical_smiles(perceive_aromaticity(k)) == canonical_smiles(g)


# ---------------------------------------------------------------- canonical form


def test_ethanol_oxygen_rank_unique():
    g = smiles_parse("CCO")
    r = canonical_ranks(g)
    assert r[2] not in (r[0], r[1])


def test_benzene_ranks_total_order():
    r = canonical_ranks(smiles_parse("c1ccccc1"))
    assert sorted(r) == list(range(6))


def test_neopentane_all_permutations():
    g = smiles_parse("C(C)(C)(C)C")
    want = canonical_smiles(g)
    outs = {canonical_smiles(permute_atoms(g, list(p))) for p in itertools.permutations(range(5))}
    assert outs == {want}


def test_same_molecule_same_string():
    assert canonicalize("OCC") == canonicalize("CCO")
    assert canonicalize("C1=CC=CC=C1") == canonicalize("c1ccccc1")


def test_alanine_parity_roundtrip_and_distinct():
    cw = canonicalize("N[C@@H](C)C(=O)O")
    ccw = canonicalize("N[C@H](C)C(=O)O")
    assert cw != ccw
    assert canonicalize(cw) == cw and canonicalize(ccw) == ccw
    assert canonicalize("N[C@@H](C)C(=O)O") == canonicalize("C[C@H](N)C(=O)O")


def test_write_smiles_uses_ranks():
    g = smiles_parse("CCO")
    s = write_smiles(g, canonical_ranks(g), set())
    assert canonicalize(s) == canonicalize("CCO")


def test_superatom_written_as_star():
    g = MolGraph((Atom("C"), Atom("Ph", is_superatom=True)), (Bond(0, 1),))
    assert canonical_smiles(g) == "C*"
    r1 = MolGraph((Atom("R1", is_superatom=True),))
    assert canonical_smiles(r1) == "[1*]"


# ---------------------------------------------------------------- MOLfile

ONE_C = """
  test

  1  0  0  0  0  0  0  0  0  0999 V2000
    0.0000    0.0000    0.0000 C   0  0  0  0  0  0  0  0  0  0  0  0
M  END
"""

WEDGED_PAIR = """
  test

  2  1  0  0  0  0  0  0  0  0999 V2000
    0.0000    0.0000    0.0000 C   0  0  0  0  0  0  0  0  0  0  0  0
    1.0000    0.0000    0.0000 O   0  0  0  0  0  0  0  0  0  0  0  0
  1  2  1  1
M  END
"""


def test_molfile_methane():
    g = molfile_parse(ONE_C)
    assert [a.label for a in g.atoms] == ["C"] and g.bonds == ()


def test_molfile_wedge_field():
    g = molfile_parse(WEDGED_PAIR)
    (b,) = g.bonds
    assert b.kind == BondType.SOLID_WEDGE and b.a == 0 and b.b == 1


def test_molfile_errors():
    with pytest.raises(TruncatedBlock):
        molfile_parse(ONE_C.replace("M  END\n", ""))
    with pytest.raises(MalformedCountsLine):
        molfile_parse(ONE_C.replace("  1  0  0", "  x  0  0"))


def test_molfile_roundtrip_alanine():
    g = smiles_parse("N[C@@H](C)C(=O)O")
    coords = normalize_coords(layout_2d(g, normalize=False))
    g = g.with_atoms([replace(a, coord=c) for a, c in zip(g.atoms, coords)])
    h = molfile_parse(molfile_write(g))
    assert isomorphic(g, h)
    for a, b in zip(g.atoms, h.atoms):
        assert abs(a.coord[0] - b.coord[0]) < 1e-4 and abs(a.coord[1] - b.coord[1]) < 1e-4


def test_molfile_charge_and_alias():
    g = smiles_parse("C[N+](C)(C)C")
    coords = normalize_coords(layout_2d(g, normalize=False))
    g = g.with_atoms([replace(a, coord=c) for a, c in zip(g.atoms, coords)])
    h = molfile_parse(molfile_write(g))
    assert canonical_smiles(h) == canonical_smiles(g)
    s = MolGraph((Atom("C", coord=(0.0, 0.5)), Atom("Ac", is_superatom=True, coord=(1.0, 0.5))), (Bond(0, 1),))
    back = molfile_parse(molfile_write(s))
    assert back.atoms[1].is_superatom and back.atoms[1].label == "Ac"


def test_ring_search_matches_networkx(corpus500):
    from molnex.chemio.aromaticity import ring_bond_keys, simple_cycles, to_networkx

    for s in corpus500[:150]:
        g = smiles_parse(s)
        G = to_networkx(g)
        ref = set()
        for c in nx.simple_cycles(G, length_bound=8):
            if len(c) < 3:
                continue
            k = c.index(min(c))
            c = c[k:] + c[:k]
            if c[1] > c[-1]:
                c = [c[0]] + c[1:][::-1]
            ref.add(tuple(c))
        assert set(simple_cycles(g, 8)) == ref, s
        bridges = {tuple(sorted(e)) for e in nx.bridges(G)}
        assert ring_bond_keys(g) == {b.key for b in g.bonds} - bridges
