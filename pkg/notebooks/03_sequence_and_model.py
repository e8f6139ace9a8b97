"""
Graph sequences and the recognition model
=========================================

Turn a molecule into the token sequence plus bond matrix the decoder is
trained on, decode it back, and run an untrained tiny model once to see the
shapes involved.

    python notebooks/03_sequence_and_model.py
"""

from dataclasses import replace

import torch

from molnex.chemio import canonical_smiles, smiles_parse
from molnex.depict import layout_2d
from molnex.model import ModelConfig, OCSRModel
from molnex.seqcodec import GraphSequence, build_vocab, decode_graph_sequence, encode_targets

g = smiles_parse("c1ccccc1C(=O)O")
g = g.with_atoms([replace(a, coord=tuple(map(float, c))) for a, c in zip(g.atoms, layout_2d(g))])

# vocabulary: four specials, atom labels seen in the corpus, then coordinate bins
vocab = build_vocab([g])
print(len(vocab), "tokens:", vocab.tokens[:12], "...")

# each atom becomes (label, x bin, y bin); bonds go in a separate matrix
seq = encode_targets(g, vocab)
print([vocab.tokens[i] for i in seq.atom_tokens[:7]], "...")
print(seq.bond_matrix)

back = decode_graph_sequence(GraphSequence(seq.atom_tokens, seq.bond_matrix, seq.order), vocab)
print("decoded:", canonical_smiles(back))

# a narrow model so this runs in a few seconds on one core
cfg = ModelConfig(
    vocab_size=len(vocab),
    image_size=128,
    conv_channels=(16, 32, 32, 32),
    vit_width=32,
    vit_heads=2,
    vit_out_channels=8,
    decoder_layers=1,
    decoder_heads=2,
    decoder_dim=32,
    max_atoms=8,
)
torch.manual_seed(0)
model = OCSRModel(cfg).eval()
img = torch.rand(1, 3, 128, 128)
memory = model.encode(img)
print("memory", tuple(memory.shape))

# untrained, so the output is noise, but the grammar mask keeps it well formed
with torch.no_grad():
    gen = model.generate(memory, max_atoms=4)
    bonds = model.predict_bonds(gen.atom_hiddens[0])
print("tokens:", [vocab.tokens[i] for i in gen.tokens[0]])
print("bond logits", tuple(bonds.shape))
