"""
Drawing and augmenting structure images
=======================================

Render one molecule in the default style and in a few random styles, then
apply the molecule-level edits, image transforms and contamination used for
training data.  PNGs go to ``notebook_out/``.

    python notebooks/02_drawing_and_augmentation.py
"""
from pathlib import Path

import numpy as np

from molnex.abbrev import default_dictionary
from molnex.augment import AugmentConfig, augment_image, augment_molecule, contaminate
from molnex.chemio import canonical_smiles, smiles_parse
from molnex.depict import StyleParams, fit_to_canvas, layout_2d, render, sample_style, save_png

out = Path("notebook_out")
out.mkdir(exist_ok=True)

g = smiles_parse("COc1ccc(cc1)C(=O)N[C@@H](C)C(=O)O")
coords = layout_2d(g, seed=0)

# default style: 384 px canvas, black on white
img = render(g, fit_to_canvas(g, coords, StyleParams()), StyleParams())
save_png(img, out / "default.png")
print("default", img.shape, img.dtype)

# random styles vary line width, font, label mode and canvas size
rng = np.random.default_rng(7)
for k in range(3):
    style = sample_style(rng)
    save_png(render(g, fit_to_canvas(g, coords, style), style), out / f"style{k}.png")
    print(k, style.label_mode, style.line_width_px)

# molecule-level augmentation: collapse fragments into labels, add R groups
cfg = AugmentConfig()
d = default_dictionary()
for k in range(3):
    h = augment_molecule(g, d, cfg, np.random.default_rng(k))
    print("augmented:", canonical_smiles(h))

# image-level: rotation, blur, noise, then contamination kept away from the ink
rng = np.random.default_rng(1)
noisy = augment_image(img, cfg, rng)
dirty = contaminate(noisy, cfg, rng)
save_png(dirty, out / "augmented.png")
print("wrote", sorted(p.name for p in out.iterdir()))
