"""MOLfile (CTfile V2000) connection-table reader and writer."""
from __future__ import annotations

import statistics

from ..molgraph import ELEMENT_SET, Atom, Bond, BondType, MolGraph

_BOND_IN = {1: BondType.SINGLE, 2: BondType.DOUBLE, 3: BondType.TRIPLE, 4: BondType.AROMATIC}
_CHARGE_CODE = {1: 3, 2: 2, 3: 1, 5: -1, 6: -2, 7: -3}


class MolfileError(ValueError):
    pass


class MalformedCountsLine(MolfileError):
    pass


class TruncatedBlock(MolfileError):
    pass


class MissingCoordinates(MolfileError):
    pass


def normalize_coords(points: list[tuple[float, float]]) -> list[tuple[float, float]]:
    """Scale into [0,1]^2 keeping aspect ratio; the short side is centred."""
    if not points:
        return []
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    w, h = max(xs) - min(xs), max(ys) - min(ys)
    span = max(w, h)
    if span <= 1e-12:
        return [(0.5, 0.5)] * len(points)
    ox = min(xs) - (span - w) / 2
    oy = min(ys) - (span - h) / 2
    return [((x - ox) / span, (y - oy) / span) for x, y in points]


def _int(field: str, default: int = 0) -> int:
    field = field.strip()
    return int(field) if field else default


def molfile_parse(text: str) -> MolGraph:
    lines = text.splitlines()
    if len(lines) < 4:
        raise TruncatedBlock("header block shorter than 4 lines")
    counts = lines[3]
    try:
        n_atoms = _int(counts[0:3])
        n_bonds = _int(counts[3:6])
    except ValueError as exc:
        raise MalformedCountsLine(f"bad counts line {counts!r}") from exc
    if "V3000" in counts:
        raise MalformedCountsLine("V3000 is not supported")
    if len(lines) < 4 + n_atoms + n_bonds:
        raise TruncatedBlock(f"expected {n_atoms} atoms and {n_bonds} bonds")
    raw = []
    for k in range(n_atoms):
        line = lines[4 + k]
        try:
            x, y = float(line[0:10]), float(line[10:20])
            sym = line[31:34].strip()
            code = _int(line[36:39]) if len(line) >= 39 else 0
        except ValueError as exc:
            raise TruncatedBlock(f"bad atom line {k + 1}: {line!r}") from exc
        raw.append((x, -y, sym, _CHARGE_CODE.get(code, 0)))
    bonds = []
    for k in range(n_bonds):
        line = lines[4 + n_atoms + k]
        try:
            a, b, t = _int(line[0:3]), _int(line[3:6]), _int(line[6:9])
            st = _int(line[9:12]) if len(line) >= 12 else 0
        except ValueError as exc:
            raise TruncatedBlock(f"bad bond line {k + 1}: {line!r}") from exc
        kind = _BOND_IN.get(t, BondType.SINGLE)
        if kind == BondType.SINGLE and st == 1:
            kind = BondType.SOLID_WEDGE
        elif kind == BondType.SINGLE and st == 6:
            kind = BondType.DASHED_WEDGE
        bonds.append(Bond(a - 1, b - 1, kind))
    charges: dict[int, int] = {}
    aliases: dict[int, str] = {}
    k = 4 + n_atoms + n_bonds
    ended = False
    while k < len(lines):
        line = lines[k]
        if line.startswith("M  END"):
            ended = True
            break
        if line.startswith("M  CHG"):
            n = _int(line[6:9])
            fields = line[9:].split()
            if len(fields) < 2 * n:
                raise TruncatedBlock(f"short M  CHG line {line!r}")
            for j in range(n):
                charges[int(fields[2 * j]) - 1] = int(fields[2 * j + 1])
        elif line.startswith("A  "):
            if k + 1 >= len(lines):
                raise TruncatedBlock("alias line without label")
            aliases[_int(line[3:6]) - 1] = lines[k + 1].strip()
            k += 1
        k += 1
    if not ended:
        raise TruncatedBlock("missing M  END")
    coords = normalize_coords([(x, y) for x, y, _, _ in raw])
    atoms = []
    for i, ((_, _, sym, chg), xy) in enumerate(zip(raw, coords)):
        label = aliases.get(i, sym)
        charge = charges.get(i, chg)
        superatom = i in aliases or label not in ELEMENT_SET
        if label in ("R#", "A", "Q") and i not in aliases:
            label = "*"
        atoms.append(Atom(label, charge=charge, is_superatom=superatom, coord=xy))
    return MolGraph(tuple(atoms), tuple(bonds))


def _bond_fields(kind: BondType) -> tuple[int, int]:
    if kind == BondType.SOLID_WEDGE:
        return 1, 1
    if kind == BondType.DASHED_WEDGE:
        return 1, 6
    return {BondType.SINGLE: 1, BondType.DOUBLE: 2, BondType.TRIPLE: 3, BondType.AROMATIC: 4}[kind], 0


def molfile_write(g: MolGraph, name: str = "") -> str:
    pts = [a.coord for a in g.atoms]
    if len(pts) > 1 and len(set(pts)) == 1:
        raise MissingCoordinates("all atoms share one position; run layout first")
    lengths = [
        ((pts[b.a][0] - pts[b.b][0]) ** 2 + (pts[b.a][1] - pts[b.b][1]) ** 2) ** 0.5 for b in g.bonds
    ]
    lengths = [v for v in lengths if v > 1e-9]
    scale = 1.5 / statistics.median(lengths) if lengths else 10.0
    out = [name, "  molnex          2D", ""]
    out.append(f"{len(g.atoms):3d}{len(g.bonds):3d}  0  0  0  0  0  0  0  0999 V2000")
    aliases = []
    for i, a in enumerate(g.atoms):
        x, y = a.coord
        sym = a.label
        if a.is_superatom:
            sym = "R#" if sym.startswith("R") or sym == "*" else "A"
            aliases.append((i, a.label))
        code = {v: k for k, v in _CHARGE_CODE.items()}.get(a.charge, 0)
        out.append(f"{x * scale:10.4f}{-y * scale:10.4f}{0.0:10.4f} {sym:<3} 0{code:3d}  0  0  0  0  0  0  0  0  0  0")
    for b in g.bonds:
        t, st = _bond_fields(b.kind)
        out.append(f"{b.a + 1:3d}{b.b + 1:3d}{t:3d}{st:3d}  0  0  0")
    for i, label in aliases:
        out.append(f"A  {i + 1:3d}")
        out.append(label)
    charged = [(i, a.charge) for i, a in enumerate(g.atoms) if a.charge]
    for k in range(0, len(charged), 8):
        chunk = charged[k : k + 8]
        out.append(f"M  CHG{len(chunk):3d}" + "".join(f" {i + 1:3d} {c:3d}" for i, c in chunk))
    out.append("M  END")
    return "\n".join(out) + "\n"
