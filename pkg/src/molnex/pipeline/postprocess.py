"""Shared finishing steps: superatom expansion, stereo perception and output text."""
from __future__ import annotations

from ..abbrev import SIGMA, SuperatomDict, expand_all
from ..chemio import canonical_smiles, molfile_write
from ..chemio.smiles import RGROUP_LABELS
from ..molgraph import MolGraph
from ..stereo import assign_chirality

# R-group placeholders survive expansion and are written as (isotope-tagged) stars
KEEP_LABELS = frozenset(RGROUP_LABELS | {f"R{k}" for k in range(100)})


def finalize(g: MolGraph, dictionary: SuperatomDict | None = None, sigma: float = SIGMA) -> MolGraph:
    expanded, _ = expand_all(g, dictionary, sigma, keep=KEEP_LABELS)
    return assign_chirality(expanded)


def finalize_smiles(g: MolGraph, dictionary: SuperatomDict | None = None, sigma: float = SIGMA) -> str:
    return canonical_smiles(finalize(g, dictionary, sigma))


def outputs(g: MolGraph, name: str = "") -> tuple[str, str]:
    """(canonical SMILES, MOLfile) for an already finalized graph."""
    return canonical_smiles(g), molfile_write(g, name)
