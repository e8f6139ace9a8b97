import numpy as np
import pytest
from scipy import ndimage

from molnex.abbrev import SuperatomDict, greedy_assemble, split_superatom, expand_all, load_dictionary, parse_fragment
from molnex.augment import (
    RGROUP_CHOICES,
    AugmentConfig,
    ExhaustedRetries,
    augment_image,
    augment_image_tracked,
    augment_molecule,
    collapse_fragment,
    compose_chain_abbreviation,
    contaminate,
    effective_pixels,
    find_fragment_sites,
    map_coords,
    salt_and_pepper,
)
from molnex.chemio import canonical_smiles, canonicalize, smiles_parse
from molnex.depict import StyleParams, fit_to_canvas, layout_2d, render
from molnex.molgraph import BondType, validate_graph


@pytest.fixture(scope="module")
def dictionary():
    return load_dictionary()


def _img(smi="CC", size=384, bond=36.0):
    g = smiles_parse(smi)
    style = StyleParams(bond_length_px=bond, image_size=(size, size))
    return render(g, fit_to_canvas(g, layout_2d(g), style), style)


# ------------------------------------------------------------------ molecule


def test_anisole_replace_fg():
    d = SuperatomDict({"OMe": ("*OC", parse_fragment("*OC"))})
    g = smiles_parse("COc1ccccc1")
    sites = find_fragment_sites(g, d)
    assert sites
    label, head, anchor, members = sites[0]
    h = collapse_fragment(g, label, head, members)
    sup = [a for a in h.atoms if a.is_superatom]
    assert [a.label for a in sup] == ["OMe"] and len(h.atoms) == 7
    back, _ = expand_all(h, d)
    assert canonical_smiles(back) == canonicalize("COc1ccccc1")


def test_all_off_is_identity(dictionary, corpus500):
    cfg = AugmentConfig.off()
    rng = np.random.default_rng(0)
    for smi in corpus500[:30]:
        g = smiles_parse(smi)
        assert augment_molecule(g, dictionary, cfg, rng) == g


def test_benzene_add_rgroup(dictionary):
    g = smiles_parse("c1ccccc1")
    h = augment_molecule(g, dictionary, AugmentConfig.off(p_add_rgroup=1.0), np.random.default_rng(2))
    assert len(h.atoms) == 7
    new = h.atoms[6]
    assert new.is_superatom and new.label in RGROUP_CHOICES
    (b,) = h.incident(6)
    assert b.kind == BondType.SINGLE


def test_add_c_bond(dictionary):
    g = smiles_parse("CO")
    h = augment_molecule(g, dictionary, AugmentConfig.off(p_add_c_bond=1.0), np.random.default_rng(0))
    assert len(h.atoms) == 3 and h.atoms[2].label == "C"


def test_augmented_molecules_valid_and_expandable(dictionary, corpus500):
    cfg = AugmentConfig(p_replace_fg=0.6, p_add_chain_abbrev=0.5, p_add_c_bond=0.5, p_add_rgroup=0.5)
    rng = np.random.default_rng(1)
    keep = frozenset(RGROUP_CHOICES)
    for smi in corpus500[:80]:
        h = augment_molecule(smiles_parse(smi), dictionary, cfg, rng)
        assert not validate_graph(h).violations
        full, results = expand_all(h, dictionary, keep=keep)
        assert all(r.fragment is not None for r in results), smi
        assert not validate_graph(full).violations


def test_augment_molecule_deterministic(dictionary, corpus500):
    cfg = AugmentConfig(p_replace_fg=0.5, p_add_chain_abbrev=0.5, p_add_c_bond=0.5, p_add_rgroup=0.5)
    for smi in corpus500[:20]:
        g = smiles_parse(smi)
        a = augment_molecule(g, dictionary, cfg, np.random.default_rng(9))
        b = augment_molecule(g, dictionary, cfg, np.random.default_rng(9))
        assert a == b


def test_chain_abbreviations():
    rng = np.random.default_rng(0)
    made = 0
    for _ in range(200):
        try:
            label, frag = compose_chain_abbreviation(rng)
        except ExhaustedRetries:
            continue
        made += 1
        assert not validate_graph(frag).violations
        assert frag == greedy_assemble(split_superatom(label))
    assert made > 150


@pytest.mark.parametrize("label,expected", [("CH2OH", "*CO"), ("CO2CH3", "*C(=O)OC")])
def test_chain_examples(label, expected):
    assert canonical_smiles(greedy_assemble(split_superatom(label))) == canonicalize(expected)


def test_chain_action_skips_when_sampling_exhausted(dictionary):
    cfg = AugmentConfig.off(p_add_chain_abbrev=1.0)
    g = smiles_parse("CCO")
    for seed in range(60):
        h = augment_molecule(g, dictionary, cfg, np.random.default_rng(seed))
        assert len(h.atoms) in (3, 4)
    a = compose_chain_abbreviation(np.random.default_rng(4))
    b = compose_chain_abbreviation(np.random.default_rng(4))
    assert a[0] == b[0] and a[1] == b[1]


# --------------------------------------------------------------------- image


def test_image_all_off_only_resizes():
    img = _img(size=128)
    out = augment_image(img, AugmentConfig.off(), np.random.default_rng(0), out_size=(128, 128))
    assert np.array_equal(out, img)


def test_image_deterministic():
    img = _img()
    cfg = AugmentConfig()
    a = augment_image(img, cfg, np.random.default_rng(3))
    b = augment_image(img, cfg, np.random.default_rng(3))
    assert a.shape == (128, 128, 3) and a.tobytes() == b.tobytes()


def test_salt_and_pepper_count():
    rng = np.random.default_rng(0)
    white = np.full((100, 100), 255, np.uint8)
    for _ in range(5):
        flipped = int((salt_and_pepper(white, 0.02, rng) != 255).sum())
        assert 140 <= flipped <= 260


def test_tracked_affine_follows_atoms():
    g = smiles_parse("CCCCCC")
    style = StyleParams()
    coords = fit_to_canvas(g, layout_2d(g), style)
    img = render(g, coords, style)
    cfg = AugmentConfig.off(p_rotate=1.0, p_crop=1.0, p_pad=1.0, p_aspect=1.0)
    out, M = augment_image_tracked(img, cfg, np.random.default_rng(5), (384, 384))
    for x, y in map_coords(coords, M, (384, 384), (384, 384)):
        r, c = int(round(y * 383)), int(round(x * 383))
        window = out[max(0, r - 3) : r + 4, max(0, c - 3) : c + 4, 0]
        assert window.min() < 160


# ------------------------------------------------------------- contamination


def test_effective_pixels():
    white = np.full((20, 20, 3), 255, np.uint8)
    assert not effective_pixels(white).any()
    white[4, 7] = 0
    assert list(zip(*np.nonzero(effective_pixels(white)))) == [(4, 7)]
    img = _img("CC", bond=80)
    mask = effective_pixels(img)
    ys, xs = np.nonzero(mask)
    assert mask.any() and np.ptp(ys) < 20 and np.ptp(xs) > 60


def test_contaminate_off_is_identity():
    img = _img()
    assert np.array_equal(contaminate(img, AugmentConfig.off(), np.random.default_rng(0)), img)


def _heavy_noise(d_min=30):
    return AugmentConfig.off(
        p_atom_noise=1.0, p_bond_noise=1.0, p_struct_noise=1.0,
        p_line_noise=1.0, p_partial_atom_noise=1.0, p_arrow_noise=1.0, d_min_px=d_min,
    )


@pytest.mark.parametrize("seed", range(8))
def test_contamination_keeps_distance(seed):
    img = _img("CCO", bond=30)
    out = contaminate(img, _heavy_noise(), np.random.default_rng(seed))
    eff = effective_pixels(img)
    changed = (out[:, :, 0] != img[:, :, 0])
    # chessboard distance from every pixel to the nearest effective pixel
    dist = ndimage.distance_transform_cdt(~eff, metric="chessboard")
    if changed.any():
        assert dist[changed].min() >= 30
    near = dist < 30
    assert np.array_equal(out[near], img[near])


def test_contamination_draws_something():
    img = _img("CCO", bond=30)
    hits = sum(
        not np.array_equal(contaminate(img, _heavy_noise(), np.random.default_rng(s)), img) for s in range(4)
    )
    assert hits == 4


def test_saturated_frame_unchanged():
    img = np.full((64, 64, 3), 255, np.uint8)
    img[::8, :] = 0
    img[:, ::8] = 0
    assert np.array_equal(contaminate(img, _heavy_noise(), np.random.default_rng(0)), img)


def test_contaminate_deterministic():
    img = _img()
    a = contaminate(img, _heavy_noise(), np.random.default_rng(7))
    b = contaminate(img, _heavy_noise(), np.random.default_rng(7))
    assert a.tobytes() == b.tobytes()
