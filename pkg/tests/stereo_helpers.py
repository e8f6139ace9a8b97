"""Random wedge-drawn fixtures for the stereo property checks."""
from dataclasses import replace

import numpy as np

from molnex.chemio import smiles_parse
from molnex.depict import layout_2d
from molnex.molgraph import Bond, BondType, Chirality
from molnex.stereo import find_chiral_centers, wedge_bonds

SEEDS = [
    "N[C@@H](C)C(=O)O",
    "C[C@@H](O)CC",
    "C[C@](O)(CC)C#N",
    "O[C@@H](C(=O)O)c1ccccc1",
    "C[C@H](Cl)Br",
    "CC[C@@](C)(Cl)Br",
    "C1CC[C@@H](C(=O)O)NC1",
    "C[C@@H](N)c1ccccc1",
    "OC[C@H](O)C=O",
    "C[C@]1(O)CCCC1=O",
]


def random_fixture(rng: np.random.Generator):
    """A single-centre molecule with one wedge, randomly rotated and scaled."""
    s = SEEDS[int(rng.integers(len(SEEDS)))]
    if rng.random() < 0.5:
        s = s.replace("@@", "!").replace("@", "@@").replace("!", "@")
    g = smiles_parse(s)
    coords = np.array(layout_2d(g, seed=int(rng.integers(1000))))
    ang = rng.uniform(0, 2 * np.pi)
    rot = np.array([[np.cos(ang), -np.sin(ang)], [np.sin(ang), np.cos(ang)]])
    coords = (coords - 0.5) @ rot.T * rng.uniform(0.6, 1.0) + 0.5
    coords = np.clip(coords, 0.0, 1.0)
    g = g.with_atoms([replace(a, coord=(float(x), float(y))) for a, (x, y) in zip(g.atoms, coords)])
    g = wedge_bonds(g)
    g = g.with_atoms([replace(a, chirality=Chirality.UNSPECIFIED) for a in g.atoms])
    assert find_chiral_centers(g)
    return g


def flip_wedges(g):
    swap = {BondType.SOLID_WEDGE: BondType.DASHED_WEDGE, BondType.DASHED_WEDGE: BondType.SOLID_WEDGE}
    return g.with_bonds([Bond(b.a, b.b, swap.get(b.kind, b.kind)) for b in g.bonds])


def mirror_x(g):
    return g.with_atoms([replace(a, coord=(1.0 - a.coord[0], a.coord[1])) for a in g.atoms])


def tags(g):
    return [a.chirality for a in g.atoms]


def flipped(ts):
    return [t.flipped() for t in ts]
