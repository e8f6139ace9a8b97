"""Regenerate the frozen test fixtures under tests/data/.

Requires RDKit (``pip install rdkit``).  RDKit acts only as an independent
oracle here: it picks the molecules, draws wedges, and records the expected
stereo SMILES.  The test-suite itself never imports it.

    python tools/make_fixtures.py
"""
import json
import random
from pathlib import Path

from rdkit import Chem, RDConfig
from rdkit.Chem import AllChem

DATA = Path(__file__).resolve().parents[1] / "tests" / "data"
ALLOWED = {"B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I"}


def usable(mol, max_atoms):
    if mol is None or mol.GetNumAtoms() < 2 or mol.GetNumAtoms() > max_atoms:
        return False
    if len(Chem.GetMolFrags(mol)) != 1:
        return False
    for a in mol.GetAtoms():
        if a.GetSymbol() not in ALLOWED or a.GetIsotope() or a.GetNumRadicalElectrons():
            return False
        if abs(a.GetFormalCharge()) > 1:
            return False
    return True


def nci_smiles():
    path = Path(RDConfig.RDDataDir) / "NCI" / "first_5K.smi"
    for line in path.read_text().splitlines():
        s = line.split()[0]
        mol = Chem.MolFromSmiles(s)
        yield s, mol


def corpus(n=500, max_atoms=40, seed=7):
    rows = [Chem.MolToSmiles(m) for s, m in nci_smiles() if usable(m, max_atoms)]
    rows = sorted(set(rows))
    random.Random(seed).shuffle(rows)
    return rows[:n]


def learn_set(n=50, seed=11):
    rows = [
        Chem.MolToSmiles(m)
        for s, m in nci_smiles()
        if usable(m, 12) and m.GetNumAtoms() >= 4 and not any(a.GetFormalCharge() for a in m.GetAtoms())
    ]
    rows = sorted(set(rows))
    random.Random(seed).shuffle(rows)
    return rows[:n]


# each entry appears with both parities; 3- and 4-explicit-neighbour centres
CHIRAL = [
    "N[C@@H](C)C(=O)O",
    "C[C@@H](O)CC",
    "O[C@@H](C(=O)O)c1ccccc1",
    "C[C@H](Cl)Br",
    "N[C@@H](CC1=CC=CC=C1)C(=O)O",
    "C[C@@H](F)CCO",
    "OC[C@H](O)C=O",
    "C[C@](O)(CC)C#N",
    "C[C@@](N)(CO)C(=O)O",
    "CC[C@@](C)(Cl)Br",
    "C1CC[C@@H](C(=O)O)NC1",
    "C[C@@H]1CCCCO1",
    "O=C(O)C[C@H](N)C(=O)O",
    "CC(C)[C@H](N)C(=O)O",
    "C[C@H](O)c1ccncc1",
    "C[C@@H](N)c1ccccc1",
    "OC(=O)[C@@H]1CCCN1",
    "C[C@@](O)(c1ccccc1)CC",
    "COC(=O)[C@H](C)O",
    "C[C@H](S)C(=O)O",
    "CC[C@H](C)CO",
    "N#C[C@@H](O)c1ccccc1",
    "C[C@]1(O)CCCC1=O",
    "C[C@@H](Br)C(=O)OC",
]


def invert(smiles):
    return smiles.replace("@@", "!").replace("@", "@@").replace("!", "@")


def stereo_fixtures():
    out = []
    for base in CHIRAL:
        for smi in (base, invert(base)):
            mol = Chem.MolFromSmiles(smi)
            AllChem.Compute2DCoords(mol)
            block = Chem.MolToMolBlock(mol)
            oracle = Chem.MolFromMolBlock(block)
            Chem.AssignChiralTypesFromBondDirs(oracle)
            Chem.AssignStereochemistry(oracle, cleanIt=True, force=True)
            expected = Chem.MolToSmiles(oracle)
            out.append({"name": smi, "molfile": block, "expected": expected})
    # superatom neighbour: phenyl collapsed into a "Ph" label at its ipso position
    for smi in ("C[C@@H](O)c1ccccc1", "C[C@H](O)c1ccccc1"):
        mol = Chem.MolFromSmiles(smi)
        AllChem.Compute2DCoords(mol)
        block = Chem.MolToMolBlock(mol)
        oracle = Chem.MolFromMolBlock(block)
        Chem.AssignStereochemistry(oracle, cleanIt=True, force=True)
        expected = Chem.MolToSmiles(oracle)
        ipso = 3
        ring = [a.GetIdx() for a in mol.GetAtoms() if a.GetIsAromatic() and a.GetIdx() != ipso]
        out.append(
            {
                "name": smi + " (Ph superatom)",
                "molfile": collapse_block(block, ipso, ring, "Ph"),
                "expected": expected,
            }
        )
    return out


def collapse_block(block, keep, drop, label):
    lines = block.splitlines()
    n_atoms, n_bonds = int(lines[3][0:3]), int(lines[3][3:6])
    atom_lines = lines[4 : 4 + n_atoms]
    bond_lines = lines[4 + n_atoms : 4 + n_atoms + n_bonds]
    keep_idx = [i for i in range(n_atoms) if i not in drop]
    remap = {old: new for new, old in enumerate(keep_idx)}
    new_atoms = []
    for i in keep_idx:
        line = atom_lines[i]
        if i == keep:
            line = line[:31] + f"{'R#':<3}" + line[34:]
        new_atoms.append(line)
    new_bonds = []
    for line in bond_lines:
        a, b = int(line[0:3]) - 1, int(line[3:6]) - 1
        if a in drop or b in drop:
            continue
        new_bonds.append(f"{remap[a] + 1:3d}{remap[b] + 1:3d}" + line[6:])
    counts = f"{len(new_atoms):3d}{len(new_bonds):3d}" + lines[3][6:]
    tail = [f"A  {remap[keep] + 1:3d}", label, "M  END"]
    return "\n".join(lines[:3] + [counts] + new_atoms + new_bonds + tail) + "\n"


def main():
    DATA.mkdir(parents=True, exist_ok=True)
    (DATA / "corpus500.smi").write_text("\n".join(corpus()) + "\n")
    (DATA / "learn50.smi").write_text("\n".join(learn_set()) + "\n")
    fixtures = stereo_fixtures()
    (DATA / "stereo_fixtures.json").write_text(json.dumps(fixtures, indent=1))
    print(f"wrote {len(fixtures)} stereo fixtures")


if __name__ == "__main__":
    main()
