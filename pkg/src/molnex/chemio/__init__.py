"""SMILES and MOLfile reading/writing, aromaticity and canonicalisation."""
from .aromaticity import KekulizeError, kekulize, perceive_aromaticity, simple_cycles
from .canon import canonical_ranks, symmetry_classes
from .molfile import MolfileError, molfile_parse, molfile_write
from .smiles import canonical_form, canonical_smiles, canonicalize, smiles_parse, write_smiles
from .tokenizer import (
    SmilesError,
    UnbalancedBracket,
    UnbalancedRing,
    UnknownSymbol,
    smiles_tokenize,
)
