"""Stochastic augmentation: molecule edits, image transforms, contamination.

Every function takes an explicit ``numpy.random.Generator`` so that output is
a pure function of (input, config, seed).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

import networkx as nx
import numpy as np
from networkx.algorithms import isomorphism
from PIL import Image, ImageDraw, ImageFilter
from scipy import ndimage

from .abbrev import ATTACH, AbbrevError, SuperatomDict, greedy_assemble, split_superatom
from .chemio.aromaticity import perceive_aromaticity
from .chemio.smiles import smiles_parse
from .molgraph import (
    Atom,
    Bond,
    BondType,
    Chirality,
    MolGraph,
    remove_atoms,
    total_hydrogens,
    validate_graph,
)

RGROUP_CHOICES = ("R", "R1", "R2", "R'", "X", "Y", "Z", "*")
CHAIN_COMPONENTS = ("CH3", "CH2", "CH", "NH2", "NH", "OH", "O", "CO", "CO2", "S", "SO2", "CF3")
CHAIN_TERMINALS = ("CH3", "NH2", "OH", "CF3")
NOISE_LABELS = ("N", "O", "S", "Cl", "Br", "F", "OH", "NH2", "Me", "R", "R1", "Ar", "X", "(a)", "1", "2a", "3", "*")
NOISE_FRAGMENTS = ("CCC", "CC=O", "C1CCCCC1", "CCN", "c1ccccc1", "CC(C)O", "C=CC")


class ExhaustedRetries(RuntimeError):
    pass


@dataclass(frozen=True)
class AugmentConfig:
    # molecular edits
    p_replace_fg: float = 0.3
    p_add_chain_abbrev: float = 0.2
    p_add_c_bond: float = 0.2
    p_add_rgroup: float = 0.2
    # image transforms, applied in this order
    p_rotate: float = 0.3
    p_crop: float = 0.3
    p_pad: float = 0.3
    p_blur: float = 0.2
    p_downscale: float = 0.2
    p_aspect: float = 0.2
    p_noise: float = 0.2
    p_salt_pepper: float = 0.2
    rotate_deg: tuple[float, float] = (-30.0, 30.0)
    crop_frac: tuple[float, float] = (0.0, 0.08)
    pad_frac: tuple[float, float] = (0.0, 0.12)
    blur_sigma: tuple[float, float] = (0.5, 1.5)
    downscale: tuple[float, float] = (0.4, 0.9)
    aspect: tuple[float, float] = (-0.15, 0.15)
    noise_sigma: tuple[float, float] = (0.0, 12 / 255)
    salt_pepper: tuple[float, float] = (0.0, 0.02)
    # contamination
    p_atom_noise: float = 0.3
    p_bond_noise: float = 0.3
    p_struct_noise: float = 0.2
    p_line_noise: float = 0.2
    p_partial_atom_noise: float = 0.2
    p_arrow_noise: float = 0.2
    d_min_px: int = 30
    threshold: int = 200
    max_tries: int = 50
    output_size: tuple[int, int] = (128, 128)
    seed: int = 0

    def __post_init__(self):
        for f in fields(self):
            if f.name.startswith("p_"):
                v = getattr(self, f.name)
                if not 0.0 <= v <= 1.0:
                    raise ValueError(f"{f.name}={v} outside [0, 1]")
        if self.d_min_px < 0:
            raise ValueError("d_min_px must be non-negative")

    @classmethod
    def off(cls, **kw) -> "AugmentConfig":
        """Every probability zero; keyword overrides win."""
        zeros = {f.name: 0.0 for f in fields(cls) if f.name.startswith("p_")}
        zeros.update(kw)
        return cls(**zeros)

    def with_values(self, **kw) -> "AugmentConfig":
        return replace(self, **kw)


def _hit(rng: np.random.Generator, p: float) -> bool:
    # always draw, so later actions see the same stream whatever p is
    return bool(rng.random() < p)


def _uniform(rng: np.random.Generator, lohi) -> float:
    return float(rng.uniform(lohi[0], lohi[1])) if lohi[1] > lohi[0] else float(lohi[0])


# --------------------------------------------------------------- molecule


def _fragment_nx(frag: MolGraph) -> nx.Graph:
    G = nx.Graph()
    for i, a in enumerate(frag.atoms):
        G.add_node(i, label=a.label, charge=a.charge, marker=a.is_superatom and a.label == ATTACH, degree=frag.degree(i))
    for b in frag.bonds:
        G.add_edge(b.a, b.b, kind=b.kind)
    return G


def _graph_nx(g: MolGraph) -> nx.Graph:
    G = nx.Graph()
    for i, a in enumerate(g.atoms):
        G.add_node(i, label=a.label if not a.is_superatom else "#" + a.label, charge=a.charge, degree=g.degree(i))
    for b in g.bonds:
        G.add_edge(b.a, b.b, kind=BondType.SINGLE if b.kind.is_wedge else b.kind)
    return G


def _node_match(gn, fn):
    if fn["marker"]:
        return True
    return gn["label"] == fn["label"] and gn["charge"] == fn["charge"] and gn["degree"] == fn["degree"]


def _edge_match(ge, fe):
    return ge["kind"] == fe["kind"]


def find_fragment_sites(g: MolGraph, dictionary: SuperatomDict, labels=None):
    """All (label, head, anchor, matched atoms) where a dictionary group can collapse."""
    perceived = perceive_aromaticity(g)
    G = _graph_nx(perceived)
    counts: dict[str, int] = {}
    for a in g.atoms:
        counts[a.label] = counts.get(a.label, 0) + 1
    sites = []
    seen = set()
    for label in labels if labels is not None else dictionary.labels():
        frag = perceive_aromaticity(dictionary.fragment(label))
        need: dict[str, int] = {}
        for a in frag.atoms:
            if not a.is_superatom:
                need[a.label] = need.get(a.label, 0) + 1
        if any(counts.get(k, 0) < v for k, v in need.items()):
            continue
        F = _fragment_nx(frag)
        mark = next(i for i, a in enumerate(frag.atoms) if a.is_superatom and a.label == ATTACH)
        head_f = frag.neighbors(mark)[0]
        matcher = isomorphism.GraphMatcher(G, F, node_match=_node_match, edge_match=_edge_match)
        for mapping in matcher.subgraph_monomorphisms_iter():
            inv = {f: gi for gi, f in mapping.items()}
            anchor = inv[mark]
            if g.atoms[anchor].is_superatom:
                continue
            members = frozenset(gi for gi, f in mapping.items() if f != mark)
            key = (label, members)
            if key in seen:
                continue
            seen.add(key)
            if len(members) >= len(g.atoms) - 1:
                continue  # keep at least the anchor plus one more atom
            sites.append((label, inv[head_f], anchor, members))
    sites.sort(key=lambda s: (s[0], sorted(s[3])))
    return sites


def collapse_fragment(g: MolGraph, label: str, head: int, members) -> MolGraph:
    """Replace ``members`` by one superatom sitting at ``head``'s index."""
    sup = Atom(label, is_superatom=True, coord=g.atoms[head].coord)
    atoms = list(g.atoms)
    atoms[head] = sup
    bonds = []
    for b in g.bonds:
        if b.kind.is_wedge and (b.a in members) != (b.b in members):
            b = Bond(b.a, b.b, BondType.SINGLE)
        bonds.append(b)
    out = MolGraph(tuple(atoms), tuple(bonds))
    out, _ = remove_atoms(out, [m for m in members if m != head])
    return out


def _open_sites(g: MolGraph) -> list[int]:
    return [
        i
        for i, a in enumerate(g.atoms)
        if not a.is_superatom and a.chirality is Chirality.UNSPECIFIED and total_hydrogens(g, i) > 0
    ]


def attach_atom(g: MolGraph, i: int, atom: Atom) -> MolGraph:
    """Bond a new atom to ``i`` by a single bond, using up one of its hydrogens."""
    host = g.atoms[i]
    atoms = list(g.atoms)
    if host.no_implicit:
        atoms[i] = replace(host, explicit_h=host.explicit_h - 1)
    atoms.append(replace(atom, coord=host.coord))
    bonds = list(g.bonds) + [Bond(i, len(atoms) - 1, BondType.SINGLE)]
    return MolGraph(tuple(atoms), tuple(bonds))


def compose_chain_abbreviation(rng: np.random.Generator, tries: int = 10) -> tuple[str, MolGraph]:
    for _ in range(tries):
        k = int(rng.integers(2, 5))
        parts = [CHAIN_COMPONENTS[int(rng.integers(len(CHAIN_COMPONENTS)))] for _ in range(k - 1)]
        parts.append(CHAIN_TERMINALS[int(rng.integers(len(CHAIN_TERMINALS)))])
        label = "".join(parts)
        try:
            return label, greedy_assemble(split_superatom(label))
        except AbbrevError:
            continue
    raise ExhaustedRetries("no assemblable chain abbreviation sampled")


def augment_molecule(g: MolGraph, dictionary: SuperatomDict, cfg: AugmentConfig, rng: np.random.Generator) -> MolGraph:
    out = g
    if _hit(rng, cfg.p_replace_fg):
        sites = find_fragment_sites(out, dictionary)
        if sites:
            label, head, _, members = sites[int(rng.integers(len(sites)))]
            out = collapse_fragment(out, label, head, members)
    if _hit(rng, cfg.p_add_chain_abbrev):
        sites = _open_sites(out)
        try:
            label = compose_chain_abbreviation(rng)[0] if sites else None
        except ExhaustedRetries:
            label = None
        if label is not None:
            out = attach_atom(out, sites[int(rng.integers(len(sites)))], Atom(label, is_superatom=True))
    if _hit(rng, cfg.p_add_c_bond):
        sites = _open_sites(out)
        if sites:
            out = attach_atom(out, sites[int(rng.integers(len(sites)))], Atom("C"))
    if _hit(rng, cfg.p_add_rgroup):
        sites = _open_sites(out)
        if sites:
            label = RGROUP_CHOICES[int(rng.integers(len(RGROUP_CHOICES)))]
            out = attach_atom(out, sites[int(rng.integers(len(sites)))], Atom(label, is_superatom=True))
    if validate_graph(out).violations:
        return g
    return out


# ------------------------------------------------------------------ image


def _to_gray(img: np.ndarray) -> Image.Image:
    arr = np.asarray(img)
    if arr.ndim == 3:
        arr = arr[:, :, 0]
    return Image.fromarray(arr.astype(np.uint8), "L")


def _to_rgb(im: Image.Image) -> np.ndarray:
    arr = np.asarray(im, dtype=np.uint8)
    return np.repeat(arr[:, :, None], 3, axis=2)


def _translate(tx, ty):
    return np.array([[1, 0, tx], [0, 1, ty], [0, 0, 1]], dtype=float)


def _scale(sx, sy):
    return np.array([[sx, 0, 0], [0, sy, 0], [0, 0, 1]], dtype=float)


def letterbox(im: Image.Image, size: tuple[int, int]) -> tuple[Image.Image, np.ndarray]:
    """Resize keeping aspect ratio, centred on a white canvas."""
    w, h = im.size
    W, H = size
    s = min(W / w, H / h)
    nw, nh = max(1, round(w * s)), max(1, round(h * s))
    scaled = im.resize((nw, nh), Image.BILINEAR) if (nw, nh) != (w, h) else im
    out = Image.new("L", (W, H), 255)
    ox, oy = (W - nw) // 2, (H - nh) // 2
    out.paste(scaled, (ox, oy))
    return out, _translate(ox, oy) @ _scale(nw / w, nh / h)


def augment_image_tracked(img: np.ndarray, cfg: AugmentConfig, rng: np.random.Generator, out_size=None):
    """Like ``augment_image`` but also returns the 3x3 pixel-space affine map."""
    im = _to_gray(img)
    M = np.eye(3)
    if _hit(rng, cfg.p_rotate):
        ang = _uniform(rng, cfg.rotate_deg)
        w, h = im.size
        im = im.rotate(ang, resample=Image.BILINEAR, expand=True, fillcolor=255)
        nw, nh = im.size
        t = math.radians(ang)
        R = np.array([[math.cos(t), math.sin(t), 0], [-math.sin(t), math.cos(t), 0], [0, 0, 1]])
        M = _translate(nw / 2, nh / 2) @ R @ _translate(-w / 2, -h / 2) @ M
    if _hit(rng, cfg.p_crop):
        w, h = im.size
        l, t, r, b = (_uniform(rng, cfg.crop_frac) for _ in range(4))
        box = (int(l * w), int(t * h), w - int(r * w), h - int(b * h))
        im = im.crop(box)
        M = _translate(-box[0], -box[1]) @ M
    if _hit(rng, cfg.p_pad):
        w, h = im.size
        frac = _uniform(rng, cfg.pad_frac)
        side = int(rng.integers(4))
        pw, ph = (int(frac * w), 0) if side in (0, 1) else (0, int(frac * h))
        out = Image.new("L", (w + pw, h + ph), 255)
        ox = pw if side == 0 else 0
        oy = ph if side == 2 else 0
        out.paste(im, (ox, oy))
        im = out
        M = _translate(ox, oy) @ M
    if _hit(rng, cfg.p_blur):
        im = im.filter(ImageFilter.GaussianBlur(_uniform(rng, cfg.blur_sigma)))
    if _hit(rng, cfg.p_downscale):
        f = _uniform(rng, cfg.downscale)
        w, h = im.size
        im = im.resize((max(1, int(w * f)), max(1, int(h * f))), Image.BILINEAR).resize((w, h), Image.BILINEAR)
    if _hit(rng, cfg.p_aspect):
        f = 1.0 + _uniform(rng, cfg.aspect)
        w, h = im.size
        nw = max(1, int(round(w * f)))
        im = im.resize((nw, h), Image.BILINEAR)
        M = _scale(nw / w, 1.0) @ M
    if _hit(rng, cfg.p_noise):
        sigma = _uniform(rng, cfg.noise_sigma) * 255
        arr = np.asarray(im, dtype=float) + rng.normal(0.0, sigma, size=(im.size[1], im.size[0]))
        im = Image.fromarray(np.clip(np.round(arr), 0, 255).astype(np.uint8), "L")
    if _hit(rng, cfg.p_salt_pepper):
        im = Image.fromarray(salt_and_pepper(np.asarray(im), _uniform(rng, cfg.salt_pepper), rng), "L")
    im, fit = letterbox(im, tuple(out_size or cfg.output_size))
    return _to_rgb(im), fit @ M


def salt_and_pepper(gray: np.ndarray, density: float, rng: np.random.Generator) -> np.ndarray:
    """Flip a ``density`` fraction of pixels: light ones go black, dark ones white."""
    out = np.array(gray, dtype=np.uint8, copy=True)
    hit = rng.random(out.shape) < density
    out[hit] = np.where(out[hit] >= 128, 0, 255)
    return out


def augment_image(img: np.ndarray, cfg: AugmentConfig, rng: np.random.Generator, out_size=None) -> np.ndarray:
    return augment_image_tracked(img, cfg, rng, out_size)[0]


def map_coords(coords, M: np.ndarray, in_size, out_size):
    """Carry normalized coordinates through an affine pixel map, clamped to [0, 1]."""
    (w, h), (W, H) = in_size, out_size
    out = []
    for x, y in coords:
        p = M @ np.array([x * w, y * h, 1.0])
        out.append((min(max(p[0] / W, 0.0), 1.0), min(max(p[1] / H, 0.0), 1.0)))
    return out


# ---------------------------------------------------------- contamination


def effective_pixels(img: np.ndarray, threshold: int = 200) -> np.ndarray:
    """Boolean mask of pixels darker than ``threshold``."""
    arr = np.asarray(img, dtype=float)
    if arr.ndim == 3:
        lum = 0.299 * arr[:, :, 0] + 0.587 * arr[:, :, 1] + 0.114 * arr[:, :, 2]
    else:
        lum = arr
    return lum < threshold


def forbidden_zone(mask: np.ndarray, d_min: int) -> np.ndarray:
    """Pixels whose Chebyshev distance to ``mask`` is below ``d_min``."""
    if d_min <= 0 or not mask.any():
        return np.zeros_like(mask, dtype=bool)
    return ndimage.maximum_filter(mask.astype(np.uint8), size=2 * d_min - 1, mode="constant", cval=0).astype(bool)


def _font(size: int):
    from .depict import get_font

    return get_font(max(6, int(size)))


def _draw_atom_noise(d: ImageDraw.ImageDraw, rng, w, h):
    text = NOISE_LABELS[int(rng.integers(len(NOISE_LABELS)))]
    size = int(rng.integers(10, 25))
    d.text((float(rng.uniform(0, w)), float(rng.uniform(0, h))), text, font=_font(size), fill=0, anchor="mm")


def _draw_partial_atom_noise(d: ImageDraw.ImageDraw, rng, w, h):
    text = NOISE_LABELS[int(rng.integers(len(NOISE_LABELS)))]
    size = int(rng.integers(14, 30))
    x, y = float(rng.uniform(0, w)), float(rng.uniform(0, h))
    d.text((x, y), text, font=_font(size), fill=0, anchor="mm")
    # wipe a random half so only part of the glyph survives
    side = int(rng.integers(4))
    r = size
    box = [(x, y - r, x + r * 2, y + r), (x - r * 2, y - r, x, y + r), (x - r * 2, y, x + r * 2, y + r), (x - r * 2, y - r, x + r * 2, y)][side]
    d.rectangle(box, fill=255)


def _draw_bond_noise(d: ImageDraw.ImageDraw, rng, w, h):
    x, y = float(rng.uniform(0, w)), float(rng.uniform(0, h))
    width = int(rng.integers(1, 4))
    ang = float(rng.uniform(0, 2 * math.pi))
    for _ in range(int(rng.integers(1, 4))):
        length = float(rng.uniform(15, 40))
        nx_, ny_ = x + length * math.cos(ang), y + length * math.sin(ang)
        d.line([(x, y), (nx_, ny_)], fill=0, width=width)
        x, y = nx_, ny_
        ang += math.radians(float(rng.choice([-120, 120])))


def _draw_line_noise(d: ImageDraw.ImageDraw, rng, w, h):
    width = int(rng.integers(1, 4))
    p0 = np.array([rng.uniform(0, w), rng.uniform(0, h)])
    p2 = np.array([rng.uniform(0, w), rng.uniform(0, h)])
    if rng.random() < 0.5:
        d.line([tuple(p0), tuple(p2)], fill=0, width=width)
        return
    p1 = (p0 + p2) / 2 + rng.normal(0, max(w, h) * 0.15, size=2)
    ts = np.linspace(0, 1, 32)[:, None]
    curve = (1 - ts) ** 2 * p0 + 2 * (1 - ts) * ts * p1 + ts**2 * p2
    d.line([tuple(p) for p in curve], fill=0, width=width)


def _draw_arrow_noise(d: ImageDraw.ImageDraw, rng, w, h):
    width = int(rng.integers(1, 4))
    p0 = np.array([rng.uniform(0, w), rng.uniform(0, h)])
    length = float(rng.uniform(40, 120))
    ang = float(rng.uniform(0, 2 * math.pi))
    p2 = p0 + length * np.array([math.cos(ang), math.sin(ang)])
    if rng.random() < 0.5:
        pts = [p0, p2]
    else:
        bend = (p0 + p2) / 2 + np.array([-math.sin(ang), math.cos(ang)]) * length * float(rng.uniform(-0.4, 0.4))
        ts = np.linspace(0, 1, 24)[:, None]
        pts = list((1 - ts) ** 2 * p0 + 2 * (1 - ts) * ts * bend + ts**2 * p2)
    d.line([tuple(p) for p in pts], fill=0, width=width)
    tip, prev = pts[-1], pts[-2]
    u = (tip - prev) / (np.linalg.norm(tip - prev) or 1.0)
    n = np.array([-u[1], u[0]])
    head = 8 + 2 * width
    d.polygon([tuple(tip), tuple(tip - u * head + n * head / 2), tuple(tip - u * head - n * head / 2)], fill=0)


_FRAGMENT_CACHE: dict[str, tuple[MolGraph, list]] = {}


def _noise_fragment(smiles: str):
    if smiles not in _FRAGMENT_CACHE:
        from .depict import layout_2d

        g = smiles_parse(smiles)
        _FRAGMENT_CACHE[smiles] = (g, layout_2d(g, normalize=False))
    return _FRAGMENT_CACHE[smiles]


def _draw_struct_noise(d: ImageDraw.ImageDraw, rng, w, h):
    from .chemio.aromaticity import kekulize

    g, coords = _noise_fragment(NOISE_FRAGMENTS[int(rng.integers(len(NOISE_FRAGMENTS)))])
    if any(b.kind == BondType.AROMATIC for b in g.bonds):
        g = kekulize(g)
    scale = float(rng.uniform(18, 36))
    ang = float(rng.uniform(0, 2 * math.pi))
    c, s = math.cos(ang), math.sin(ang)
    pts = np.array([[c * x - s * y, s * x + c * y] for x, y in coords]) * scale
    pts += np.array([rng.uniform(0, w), rng.uniform(0, h)]) - pts.mean(axis=0)
    width = int(rng.integers(1, 4))
    for b in g.bonds:
        p, q = pts[b.a], pts[b.b]
        d.line([tuple(p), tuple(q)], fill=0, width=width)
        if b.kind == BondType.DOUBLE:
            u = (q - p) / (np.linalg.norm(q - p) or 1.0)
            off = np.array([-u[1], u[0]]) * 4
            d.line([tuple(p + off), tuple(q + off)], fill=0, width=width)
    # clip by a random half-plane mask so the fragment is incomplete
    ctr = pts.mean(axis=0)
    ang = float(rng.uniform(0, 2 * math.pi))
    u = np.array([math.cos(ang), math.sin(ang)])
    n = np.array([-u[1], u[0]])
    big = 4 * max(w, h)
    d.polygon([tuple(ctr + n * big), tuple(ctr + n * big + u * big), tuple(ctr - n * big + u * big), tuple(ctr - n * big)], fill=255)


NOISE_KINDS = (
    ("p_atom_noise", _draw_atom_noise),
    ("p_bond_noise", _draw_bond_noise),
    ("p_struct_noise", _draw_struct_noise),
    ("p_line_noise", _draw_line_noise),
    ("p_partial_atom_noise", _draw_partial_atom_noise),
    ("p_arrow_noise", _draw_arrow_noise),
)


def contaminate(img: np.ndarray, cfg: AugmentConfig, rng: np.random.Generator) -> np.ndarray:
    """Draw noise items only where they keep ``d_min_px`` clear of the molecule."""
    gray = np.array(_to_gray(img), dtype=np.uint8)
    h, w = gray.shape
    blocked = forbidden_zone(effective_pixels(gray, cfg.threshold), cfg.d_min_px)
    out = gray.copy()
    for key, draw_fn in NOISE_KINDS:
        if not _hit(rng, getattr(cfg, key)):
            continue
        if blocked.all():
            continue
        for _ in range(cfg.max_tries):
            layer = Image.new("L", (w, h), 255)
            draw_fn(ImageDraw.Draw(layer), rng, w, h)
            ink = np.asarray(layer)
            mask = ink < 255
            if not mask.any() or (mask & blocked).any():
                continue
            out = np.minimum(out, ink)
            break
    if np.array_equal(out, gray):
        return np.array(img, copy=True)
    return np.repeat(out[:, :, None], 3, axis=2)
