"""
Molecular graphs, SMILES and MOLfiles
=====================================

Parse a few SMILES, canonicalize them, write a MOLfile and read it back,
then expand some superatom labels.

    python notebooks/01_graphs_and_smiles.py
"""

from dataclasses import replace

from molnex.abbrev import default_dictionary, expand_superatom
from molnex.chemio import canonical_smiles, canonicalize, molfile_parse, molfile_write, smiles_parse
from molnex.depict import layout_2d
from molnex.stereo import assign_chirality, find_chiral_centers, wedge_bonds


def with_layout(g):
    """Attach a fresh 2D layout to every atom."""
    return g.with_atoms([replace(a, coord=tuple(map(float, c))) for a, c in zip(g.atoms, layout_2d(g))])


# the same molecule written three ways collapses to one canonical string
for s in ["OCC", "C(O)C", "CCO"]:
    print(f"{s:8s} -> {canonicalize(s)}")

# aromatic input is perceived and written back in lower case
print(canonicalize("C1=CC=CC=C1O"))

# a MolGraph is a plain immutable container of atoms and bonds
g = smiles_parse("CC(=O)Nc1ccc(O)cc1")
print(len(g.atoms), "atoms,", len(g.bonds), "bonds")

# MOLfile round trip needs coordinates; layout_2d supplies them in the unit square
g = with_layout(g)
block = molfile_write(g)
print(block.splitlines()[3])
print("round trip:", canonical_smiles(molfile_parse(block)))

# stereo lives on wedges in 2D; draw wedges for L-alanine and read them back
ala = smiles_parse("N[C@@H](C)C(=O)O")
ala = wedge_bonds(with_layout(ala))
print("centres:", find_chiral_centers(ala))
print("from wedges:", canonical_smiles(assign_chirality(ala)))

# superatom labels: dictionary hits, near misses and greedy assembly
d = default_dictionary()
for label in ["OMe", "Ph", "OTTBMS", "NHCOOH", "Qwxyz"]:
    r = expand_superatom(label, d)
    frag = canonical_smiles(r.fragment) if r.fragment is not None else "-"
    print(f"{label:8s} {r.provenance.value:10s} {frag}")
