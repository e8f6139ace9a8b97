"""2D layout and a small anti-aliased rasterizer for structure diagrams."""
from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass
from functools import lru_cache

import networkx as nx
import numpy as np
from PIL import Image, ImageDraw, ImageFont

from .chemio.aromaticity import KekulizeError, kekulize, simple_cycles, to_networkx
from .molgraph import BondType, MolGraph, total_hydrogens

MIN_SEPARATION = 0.5  # bond units
MAX_RETRIES = 20
JITTER_DEG = 15.0
SPRING_ITERATIONS = 200
SUPERSAMPLE = 3
CANVAS = 384


class LayoutFailure(RuntimeError):
    pass


# ------------------------------------------------------------------ layout


def _rot(v, ang):
    c, s = math.cos(ang), math.sin(ang)
    return np.array([c * v[0] - s * v[1], s * v[0] + c * v[1]])


def _angle(v) -> float:
    return math.atan2(v[1], v[0])


def smallest_rings(g: MolGraph, max_len: int = 12) -> list[tuple[int, ...]]:
    """A smallest set of smallest rings, each as an ordered atom cycle."""
    G = to_networkx(g)
    need = G.number_of_edges() - G.number_of_nodes() + nx.number_connected_components(G)
    if need == 0:
        return []
    cycles = sorted(simple_cycles(g, max_len), key=lambda c: (len(c), c))
    edge_ids = {tuple(sorted(e)): k for k, e in enumerate(G.edges())}
    basis: dict[int, int] = {}  # pivot bit -> vector, GF(2) elimination
    chosen = []
    for cyc in cycles:
        vec = 0
        for a, b in zip(cyc, cyc[1:] + cyc[:1]):
            vec |= 1 << edge_ids[tuple(sorted((a, b)))]
        while vec:
            top = vec.bit_length() - 1
            if top not in basis:
                basis[top] = vec
                chosen.append(tuple(cyc))
                break
            vec ^= basis[top]
        if len(chosen) == need:
            break
    return chosen


def _ring_systems(rings):
    systems: list[list[int]] = []
    for k, r in enumerate(rings):
        hits = [s for s in systems if any(set(rings[j]) & set(r) for j in s)]
        merged = [k]
        for s in hits:
            merged += s
            systems.remove(s)
        systems.append(sorted(merged))
    return systems


def _polygon_on_edge(p, q, k, away_from):
    """Vertices of a regular k-gon containing edge p->q, on the side opposite ``away_from``."""
    mid = (p + q) / 2
    edge = q - p
    normal = np.array([-edge[1], edge[0]])
    normal /= np.linalg.norm(normal)
    apothem = 1.0 / (2 * math.tan(math.pi / k))
    c1, c2 = mid + normal * apothem, mid - normal * apothem
    center = c1 if np.linalg.norm(c1 - away_from) >= np.linalg.norm(c2 - away_from) else c2
    radius = 1.0 / (2 * math.sin(math.pi / k))
    a0 = _angle(p - center)
    a1 = _angle(q - center)
    step = 2 * math.pi / k
    d = (a1 - a0 + math.pi) % (2 * math.pi) - math.pi
    step = step if d > 0 else -step
    return [center + radius * np.array([math.cos(a0 + j * step), math.sin(a0 + j * step)]) for j in range(k)]


def _regular_polygon(k, start_angle=0.0):
    radius = 1.0 / (2 * math.sin(math.pi / k))
    return [radius * np.array([math.cos(start_angle + j * 2 * math.pi / k), math.sin(start_angle + j * 2 * math.pi / k)]) for j in range(k)]


def _place_system(g: MolGraph, rings, members, seed) -> dict[int, np.ndarray]:
    """Fused/spiro template placement; bridged systems relax with Kamada-Kawai."""
    order = sorted(members, key=lambda k: (-len(rings[k]), rings[k]))
    pos: dict[int, np.ndarray] = {}
    first = rings[order[0]]
    for v, xy in zip(first, _regular_polygon(len(first), math.pi / 2)):
        pos[v] = xy
    todo = order[1:]
    while todo:
        progressed = False
        for k in list(todo):
            ring = list(rings[k])
            shared = [v for v in ring if v in pos]
            if not shared:
                continue
            todo.remove(k)
            progressed = True
            if len(shared) == len(ring):
                continue
            ctr = np.mean([pos[v] for v in pos], axis=0)
            if len(shared) == 2:
                i, j = ring.index(shared[0]), ring.index(shared[1])
                n = len(ring)
                if (j - i) % n == 1:
                    start = i
                elif (i - j) % n == 1:
                    start = j
                else:
                    return _relaxed_system(g, rings, members, seed)
                seq = ring[start:] + ring[:start]
                verts = _polygon_on_edge(pos[seq[0]], pos[seq[1]], n, ctr)
                for v, xy in zip(seq, verts):
                    if v not in pos:
                        pos[v] = xy
            elif len(shared) == 1:
                s = shared[0]
                i = ring.index(s)
                seq = ring[i:] + ring[:i]
                out = pos[s] - ctr
                out = out / (np.linalg.norm(out) or 1.0)
                n = len(seq)
                radius = 1.0 / (2 * math.sin(math.pi / n))
                center = pos[s] + out * radius
                a0 = _angle(pos[s] - center)
                for j, v in enumerate(seq):
                    pos[v] = center + radius * np.array([math.cos(a0 + j * 2 * math.pi / n), math.sin(a0 + j * 2 * math.pi / n)])
            else:
                return _relaxed_system(g, rings, members, seed)
        if not progressed:
            break
    atoms = {v for k in members for v in rings[k]}
    if set(pos) != atoms or _bad_ring_geometry(g, pos):
        return _relaxed_system(g, rings, members, seed)
    return pos


def _bad_ring_geometry(g: MolGraph, pos) -> bool:
    pts = list(pos)
    for x in range(len(pts)):
        for y in range(x + 1, len(pts)):
            d = np.linalg.norm(pos[pts[x]] - pos[pts[y]])
            if g.bond(pts[x], pts[y]) is not None:
                if abs(d - 1.0) > 0.05:
                    return True
            elif d < MIN_SEPARATION:
                return True
    return False


def _relaxed_system(g, rings, members, seed):
    atoms = sorted({v for k in members for v in rings[k]})
    sub = to_networkx(g).subgraph(atoms)
    raw = nx.kamada_kawai_layout(sub)
    return _unit_bonds({v: np.asarray(raw[v], dtype=float) for v in atoms}, sub.edges())


def _unit_bonds(pos, edges):
    lengths = [np.linalg.norm(pos[a] - pos[b]) for a, b in edges]
    scale = 1.0 / float(np.median(lengths)) if lengths else 1.0
    return {v: p * scale for v, p in pos.items()}


def _is_linear(g: MolGraph, v: int) -> bool:
    kinds = [b.kind for b in g.incident(v)]
    return BondType.TRIPLE in kinds or kinds.count(BondType.DOUBLE) == 2


def _attempt(g: MolGraph, rings, systems, rng: random.Random | None, seed: int):
    n = len(g.atoms)
    ring_of = {}
    for s_idx, members in enumerate(systems):
        for k in members:
            for v in rings[k]:
                ring_of[v] = s_idx
    templates: dict[int, dict[int, np.ndarray]] = {}
    pos: dict[int, np.ndarray] = {}
    side: dict[int, int] = {}

    def jitter():
        return 0.0 if rng is None else math.radians(rng.uniform(-JITTER_DEG, JITTER_DEG))

    def template(s_idx):
        if s_idx not in templates:
            templates[s_idx] = _place_system(g, rings, systems[s_idx], seed)
        return templates[s_idx]

    def exterior(local, v):
        nbrs = [w for w in g.neighbors(v) if w in local]
        out = local[v] - np.mean([local[w] for w in nbrs], axis=0)
        if np.linalg.norm(out) < 1e-9:
            out = local[v] - np.mean(list(local.values()), axis=0)
        if np.linalg.norm(out) < 1e-9:
            out = np.array([1.0, 0.0])
        return out / np.linalg.norm(out)

    def place_system_at(s_idx, v, xy, toward):
        local = template(s_idx)
        ext = exterior(local, v)
        ang = _angle(toward) - _angle(ext) if toward is not None else 0.0
        for w, p in local.items():
            pos[w] = xy + _rot(p - local[v], ang)

    queue: list[tuple[int, int | None]] = []
    comps = sorted(nx.connected_components(to_networkx(g)), key=lambda c: min(c))
    x_off = 0.0
    for comp in comps:
        comp_systems = [s for s in range(len(systems)) if rings[systems[s][0]][0] in comp]
        if comp_systems:
            root_sys = max(comp_systems, key=lambda s: (len({v for k in systems[s] for v in rings[k]}), -s))
            root = min(v for k in systems[root_sys] for v in rings[k])
            place_system_at(root_sys, root, np.array([0.0, 0.0]), None)
            seeds = [v for v in pos if v in comp]
        else:
            root = max(comp, key=lambda v: (g.degree(v), -v))
            pos[root] = np.array([0.0, 0.0])
            side[root] = 1 if rng is None or rng.random() < 0.5 else -1
            seeds = [root]
        # shift component clear of previous ones
        xs = [pos[v][0] for v in comp if v in pos]
        shift = x_off - min(xs)
        for v in comp:
            if v in pos:
                pos[v] = pos[v] + np.array([shift, 0.0])
        queue.extend((v, None) for v in sorted(seeds))
        _grow(g, pos, side, queue, ring_of, place_system_at, template, exterior, jitter, rng)
        x_off = max(pos[v][0] for v in comp) + 2.0
    return [tuple(pos[i]) for i in range(n)]


def _grow(g, pos, side, queue, ring_of, place_system_at, template, exterior, jitter, rng):
    while queue:
        v, _ = queue.pop(0)
        kids = [w for w in g.neighbors(v) if w not in pos]
        if not kids:
            continue
        placed = [w for w in g.neighbors(v) if w in pos]
        kids.sort()
        if v in ring_of:
            local = {w: pos[w] for w in pos if ring_of.get(w) == ring_of[v]}
            out = exterior(local, v)
            base = _angle(out)
            spread = math.radians(60) if len(kids) == 2 else math.radians(45)
            angles = [base + (k - (len(kids) - 1) / 2) * spread for k in range(len(kids))]
        else:
            if placed:
                back = _angle(pos[placed[0]] - pos[v])
            else:
                back = math.pi
            deg = len(placed) + len(kids)
            if deg == 2 and placed:
                if _is_linear(g, v):
                    angles = [back + math.pi]
                else:
                    s = side.get(v, 1)
                    angles = [back + s * math.radians(120)]
            elif not placed:
                step = 2 * math.pi / len(kids)
                angles = [k * step for k in range(len(kids))] if len(kids) != 2 else [0.0, math.radians(120)]
            else:
                step = 2 * math.pi / deg
                taken = len(placed)
                angles = [back + (taken + k) * step for k in range(len(kids))]
                if taken > 1:
                    free = _free_directions(pos, v, placed, len(kids))
                    angles = free
        for w, a in zip(kids, angles):
            a += jitter()
            xy = pos[v] + np.array([math.cos(a), math.sin(a)])
            if w in ring_of:
                place_system_at(ring_of[w], w, xy, pos[v] - xy)
                for u in sorted(x for x in pos if ring_of.get(x) == ring_of[w]):
                    queue.append((u, None))
            else:
                pos[w] = xy
                side[w] = -side.get(v, 1) if rng is None or rng.random() > 0.1 else side.get(v, 1)
                queue.append((w, v))


def _free_directions(pos, v, placed, count):
    used = sorted(_angle(pos[w] - pos[v]) % (2 * math.pi) for w in placed)
    gaps = []
    for k, a in enumerate(used):
        b = used[(k + 1) % len(used)] + (2 * math.pi if k + 1 == len(used) else 0)
        gaps.append((b - a, a))
    gaps.sort(reverse=True)
    width, start = gaps[0]
    return [start + width * (k + 1) / (count + 1) for k in range(count)]


def _overlaps(g: MolGraph, coords) -> int:
    pts = np.asarray(coords)
    n = len(pts)
    if n < 2:
        return 0
    d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
    bad = 0
    for i in range(n):
        for j in range(i + 1, n):
            if d[i, j] < MIN_SEPARATION and g.bond(i, j) is None:
                bad += 1
    return bad


def normalize_layout(coords, lo: float = 0.1, hi: float = 0.9):
    """Fit into [lo, hi]^2 keeping aspect ratio, centred on the short side."""
    from .chemio.molfile import normalize_coords

    unit = normalize_coords([tuple(c) for c in coords])
    return [(lo + (hi - lo) * x, lo + (hi - lo) * y) for x, y in unit]


def layout_2d(g: MolGraph, seed: int = 0, normalize: bool = True):
    """Depiction coordinates with unit bond length, then mapped into [0.1, 0.9]^2."""
    if not g.atoms:
        return []
    rings = smallest_rings(g)
    G = to_networkx(g)
    if len(rings) < G.number_of_edges() - G.number_of_nodes() + nx.number_connected_components(G):
        coords = _spring(g, None, seed)
    else:
        systems = _ring_systems(rings)
        best, best_bad = None, None
        for k in range(MAX_RETRIES + 1):
            rng = None if k == 0 else random.Random(seed * 7919 + k)
            coords = _attempt(g, rings, systems, rng, seed)
            bad = _overlaps(g, coords)
            if best_bad is None or bad < best_bad:
                best, best_bad = coords, bad
            if bad == 0:
                break
        coords = best
        if best_bad:
            coords = _spring(g, best, seed)
    if _overlaps(g, coords):
        raise LayoutFailure("atoms overlap after retries and relaxation")
    return normalize_layout(coords) if normalize else [tuple(map(float, c)) for c in coords]


def _spring(g: MolGraph, init, seed: int):
    G = to_networkx(g)
    start = None if init is None else {i: np.asarray(init[i]) for i in range(len(g.atoms))}
    if start is None:
        start = {k: np.asarray(v) for k, v in nx.kamada_kawai_layout(G).items()}
        start = _unit_bonds(start, G.edges())
    raw = nx.spring_layout(G, pos=start, iterations=SPRING_ITERATIONS, seed=seed, k=1.0, scale=None)
    pos = _unit_bonds({v: np.asarray(p, dtype=float) for v, p in raw.items()}, G.edges())
    return [tuple(pos[i]) for i in range(len(g.atoms))]


# ------------------------------------------------------------------- style


class LabelMode(enum.Enum):
    HETERO_ONLY = "HeteroOnly"
    ALL_ATOMS = "AllAtoms"


FONT_VARIANTS = 2  # 0 regular, 1 bold


@dataclass(frozen=True)
class StyleParams:
    bond_length_px: float = 36.0
    line_width_px: int = 2
    double_bond_gap_px: float = 4.0
    font_size_px: int = 16
    font_variant: int = 0
    label_mode: LabelMode = LabelMode.HETERO_ONLY
    show_implicit_h: bool = True
    rotation_deg: float = 0.0
    image_size: tuple[int, int] = (CANVAS, CANVAS)
    aromatic_circle: bool = False

    def __post_init__(self):
        if min(self.bond_length_px, self.line_width_px, self.double_bond_gap_px, self.font_size_px) <= 0:
            raise ValueError("style dimensions must be positive")
        if min(self.image_size) <= 0:
            raise ValueError("image size must be positive")
        if self.double_bond_gap_px >= self.bond_length_px / 2:
            raise ValueError("double bond gap must be under half the bond length")


def sample_style(rng: np.random.Generator, image_size: tuple[int, int] = (CANVAS, CANVAS)) -> StyleParams:
    scale = min(image_size) / CANVAS
    return StyleParams(
        bond_length_px=float(rng.uniform(24, 44)) * scale,
        line_width_px=int(rng.integers(1, 5)),
        double_bond_gap_px=float(rng.uniform(2, 6)),
        font_size_px=int(rng.integers(10, 25)),
        font_variant=int(rng.integers(0, FONT_VARIANTS)),
        label_mode=LabelMode.ALL_ATOMS if rng.random() < 0.5 else LabelMode.HETERO_ONLY,
        show_implicit_h=bool(rng.random() < 0.5),
        rotation_deg=float(rng.uniform(0, 360)),
        image_size=tuple(image_size),
        aromatic_circle=bool(rng.random() < 0.2),
    )


def fit_to_canvas(g: MolGraph, coords, style: StyleParams, margin: float = 0.06):
    """Rotate and scale layout coordinates into normalized image space.

    The median bond is set to ``bond_length_px`` unless the drawing would
    then spill past ``margin``, in which case it is shrunk to fit.
    """
    w, h = style.image_size
    pts = np.asarray(coords, dtype=float).reshape(-1, 2) * np.array([w, h])
    ang = math.radians(style.rotation_deg)
    rot = np.array([[math.cos(ang), -math.sin(ang)], [math.sin(ang), math.cos(ang)]])
    pts = (pts - pts.mean(axis=0)) @ rot.T
    lengths = [np.linalg.norm(pts[b.a] - pts[b.b]) for b in g.bonds]
    lengths = [v for v in lengths if v > 1e-9]
    scale = style.bond_length_px / float(np.median(lengths)) if lengths else 1.0
    span = pts.max(axis=0) - pts.min(axis=0)
    room = np.array([w, h]) * (1 - 2 * margin)
    with np.errstate(divide="ignore"):
        limit = np.min(np.where(span > 1e-9, room / np.maximum(span, 1e-9), np.inf))
    scale = min(scale, float(limit))
    pts = pts * scale
    pts = pts - (pts.max(axis=0) + pts.min(axis=0)) / 2 + np.array([w, h]) / 2
    return [(float(x / w), float(y / h)) for x, y in pts]


# ------------------------------------------------------------------ render


@lru_cache(maxsize=64)
def get_font(size: int) -> ImageFont.FreeTypeFont:
    return ImageFont.load_default(size)


def _h_text(h: int) -> str:
    return "" if h == 0 else ("H" if h == 1 else f"H{h}")


def atom_labels(g: MolGraph, style: StyleParams) -> dict[int, tuple[str, int]]:
    """Atoms that get a text label, mapped to (text, charge)."""
    out = {}
    for i, a in enumerate(g.atoms):
        if a.is_superatom:
            out[i] = (a.label, a.charge)
            continue
        show = (
            style.label_mode is LabelMode.ALL_ATOMS
            or a.label != "C"
            or a.charge != 0
            or g.degree(i) == 0
        )
        if not show:
            continue
        text = a.label
        if style.show_implicit_h:
            text += _h_text(total_hydrogens(g, i))
        out[i] = (text, a.charge)
    return out


def _ring_centers(g: MolGraph, coords) -> dict[tuple[int, int], np.ndarray]:
    """Centroid of the smallest ring holding each ring bond."""
    pts = np.asarray(coords)
    best: dict[tuple[int, int], tuple[int, np.ndarray]] = {}
    for ring in smallest_rings(g):
        c = pts[list(ring)].mean(axis=0)
        for a, b in zip(ring, ring[1:] + ring[:1]):
            key = (min(a, b), max(a, b))
            if key not in best or len(ring) < best[key][0]:
                best[key] = (len(ring), c)
    return {k: v[1] for k, v in best.items()}


def _draw_text(draw: ImageDraw.ImageDraw, xy, text: str, size: int, variant: int, fill=0):
    font = get_font(size)
    stroke = max(1, size // 12) if variant == 1 else 0
    draw.text(xy, text, font=font, fill=fill, anchor="mm", stroke_width=stroke, stroke_fill=fill)


def render(g: MolGraph, coords, style: StyleParams) -> np.ndarray:
    """Rasterize to an (H, W, 3) uint8 array; coordinates are fractions of the image."""
    w, h = style.image_size
    S = SUPERSAMPLE
    canvas = Image.new("L", (w * S, h * S), 255)
    draw = ImageDraw.Draw(canvas)
    pts = np.asarray(coords, dtype=float).reshape(-1, 2) * np.array([w * S, h * S])
    lw = max(1, int(round(style.line_width_px * S)))
    gap = style.double_bond_gap_px * S

    drawn = g
    circle_rings: list[tuple[int, ...]] = []
    if any(b.kind == BondType.AROMATIC for b in g.bonds):
        if style.aromatic_circle:
            circle_rings = [r for r in smallest_rings(g) if all(
                (b := g.bond(x, y)) is not None and b.kind == BondType.AROMATIC for x, y in zip(r, r[1:] + r[:1])
            )]
        else:
            try:
                drawn = kekulize(g)
            except KekulizeError:
                circle_rings = smallest_rings(g)
    centers = _ring_centers(g, coords)
    bond_px = [np.linalg.norm(pts[b.a] - pts[b.b]) for b in g.bonds]
    blen = float(np.median(bond_px)) if bond_px else style.bond_length_px * S

    def line(p, q, width=lw):
        draw.line([tuple(p), tuple(q)], fill=0, width=width)

    for b in drawn.bonds:
        p, q = pts[b.a], pts[b.b]
        d = q - p
        length = np.linalg.norm(d)
        if length < 1e-6:
            continue
        u = d / length
        nrm = np.array([-u[1], u[0]])
        kind = b.kind
        if kind == BondType.SOLID_WEDGE:
            half = max(lw * 1.5, blen * 0.12)
            draw.polygon([tuple(p), tuple(q + nrm * half), tuple(q - nrm * half)], fill=0)
        elif kind == BondType.DASHED_WEDGE:
            half = max(lw * 1.5, blen * 0.12)
            hatches = 5
            for k in range(hatches):
                t = (k + 1) / hatches
                c = p + d * t
                line(c - nrm * half * t, c + nrm * half * t, max(1, lw // 2 + 1))
        elif kind == BondType.DOUBLE:
            key = (min(b.a, b.b), max(b.a, b.b))
            if key in centers:
                line(p, q)
                side = 1.0 if np.dot(centers[key] - p, nrm) > 0 else -1.0
                inset = 0.15 * length
                line(p + u * inset + nrm * gap * side, q - u * inset + nrm * gap * side)
            else:
                line(p + nrm * gap / 2, q + nrm * gap / 2)
                line(p - nrm * gap / 2, q - nrm * gap / 2)
        elif kind == BondType.TRIPLE:
            line(p, q)
            line(p + nrm * gap, q + nrm * gap)
            line(p - nrm * gap, q - nrm * gap)
        else:
            line(p, q)
    for ring in circle_rings:
        c = pts[list(ring)].mean(axis=0)
        r = 0.55 * float(np.min(np.linalg.norm(pts[list(ring)] - c, axis=1)))
        draw.ellipse([c[0] - r, c[1] - r, c[0] + r, c[1] + r], outline=0, width=lw)

    fs = style.font_size_px * S
    for i, (text, charge) in atom_labels(g, style).items():
        x, y = pts[i]
        font = get_font(fs)
        tw = draw.textlength(text, font=font)
        first = draw.textlength(text[0], font=font)
        cx = x - first / 2 + tw / 2  # first letter sits on the atom
        r = fs / 2
        draw.ellipse([x - r, y - r, x + r, y + r], fill=255)
        draw.rectangle([cx - tw / 2 - 1, y - r, cx + tw / 2 + 1, y + r], fill=255)
        _draw_text(draw, (cx, y), text, fs, style.font_variant)
        if charge:
            sign = "+" if charge > 0 else "−"
            mark = sign if abs(charge) == 1 else f"{abs(charge)}{sign}"
            _draw_text(draw, (cx + tw / 2 + fs * 0.3, y - fs * 0.45), mark, max(S, int(fs * 0.6)), style.font_variant)

    small = canvas.resize((w, h), Image.BOX)
    arr = np.asarray(small, dtype=np.uint8)
    return np.repeat(arr[:, :, None], 3, axis=2)


def save_png(img: np.ndarray, path) -> None:
    Image.fromarray(img).save(path, format="PNG", optimize=False)


def load_image(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)
