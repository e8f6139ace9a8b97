import random

import pytest

from molnex.chemio import canonical_smiles, smiles_parse
from molnex.molgraph import (
    Atom,
    Bond,
    BondType,
    Chirality,
    MolGraph,
    implicit_hydrogens,
    permutation_parity,
    permute_atoms,
    reference_order,
    remove_atoms,
    total_hydrogens,
    validate_graph,
)


def chain(*labels, kind=BondType.SINGLE):
    atoms = [Atom(l) for l in labels]
    bonds = [Bond(i, i + 1, kind) for i in range(len(atoms) - 1)]
    return MolGraph(tuple(atoms), tuple(bonds))


def star(center, n, charge=0):
    atoms = [Atom(center, charge=charge)] + [Atom("C") for _ in range(n)]
    return MolGraph(tuple(atoms), tuple(Bond(0, k) for k in range(1, n + 1)))


def test_bond_type_has_seven_variants():
    assert [b.name for b in BondType] == [
        "NONE", "SINGLE", "DOUBLE", "TRIPLE", "AROMATIC", "SOLID_WEDGE", "DASHED_WEDGE",
    ]
    assert BondType.SOLID_WEDGE.is_wedge and not BondType.SINGLE.is_wedge


def test_methane_is_clean():
    assert validate_graph(MolGraph((Atom("C"),))).violations == []


def test_self_bond_reported():
    g = MolGraph((Atom("C"),), (Bond(0, 0),))
    assert any("self-bond" in v for v in validate_graph(g).violations)


def test_five_bonded_carbon_overflows():
    assert "valence overflow C: 5 > 4" in validate_graph(star("C", 5)).violations


def test_none_bond_not_storable():
    g = MolGraph((Atom("C"), Atom("C")), (Bond(0, 1, BondType.NONE),))
    assert validate_graph(g).violations


def test_bad_label_and_coords():
    assert validate_graph(MolGraph((Atom("Qq"),))).violations
    assert validate_graph(MolGraph((Atom("C", coord=(1.2, 0.5)),))).violations
    # superatoms may carry any label
    assert validate_graph(MolGraph((Atom("OTBS", is_superatom=True),))).violations == []


@pytest.mark.parametrize(
    "g, i, want",
    [
        (chain("C", "C"), 0, 3),
        (chain("C", "O", "C"), 1, 0),
        (star("N", 3, charge=1), 0, 1),
        (star("N", 4, charge=1), 0, 0),
        (chain("C", "O", kind=BondType.DOUBLE), 1, 0),
        (chain("S", "C"), 0, 1),
    ],
)
def test_implicit_hydrogens(g, i, want):
    assert implicit_hydrogens(g, i) == want


def test_no_implicit_pins_hydrogen_count():
    g = MolGraph((Atom("C", explicit_h=1, no_implicit=True),))
    assert total_hydrogens(g, 0) == 1


def test_permute_identity_and_inverse():
    g = smiles_parse("CC(=O)Nc1ccc(O)cc1")
    n = len(g.atoms)
    assert permute_atoms(g, list(range(n))) == g
    rng = random.Random(3)
    perm = list(range(n))
    rng.shuffle(perm)
    inv = [0] * n
    for old, new in enumerate(perm):
        inv[new] = old
    assert permute_atoms(permute_atoms(g, perm), inv) == g


def test_permute_ethanol_keeps_canonical_smiles():
    g = smiles_parse("CCO")
    assert canonical_smiles(permute_atoms(g, [2, 1, 0])) == canonical_smiles(g)


def test_permute_keeps_parity():
    g = smiles_parse("N[C@@H](C)C(=O)O")
    rng = random.Random(0)
    want = canonical_smiles(g)
    for _ in range(20):
        perm = list(range(len(g.atoms)))
        rng.shuffle(perm)
        assert canonical_smiles(permute_atoms(g, perm)) == want


def test_permutation_parity():
    assert permutation_parity([0, 1, 2], [0, 1, 2]) == 0
    assert permutation_parity([0, 1, 2], [1, 0, 2]) == 1
    assert permutation_parity([0, 1, 2, 3], [1, 2, 3, 0]) == 1


def test_reference_order_puts_hydrogen_at_centre_index():
    g = smiles_parse("N[C@@H](C)C(=O)O")
    assert reference_order(g, 1) == [0, 1, 2, 3]
    assert g.atoms[1].chirality is Chirality.CW


def test_remove_atoms_reindexes():
    g = chain("C", "N", "O")
    h, mapping = remove_atoms(g, [1])
    assert [a.label for a in h.atoms] == ["C", "O"]
    assert h.bonds == ()
    assert mapping == {0: 0, 2: 1}
