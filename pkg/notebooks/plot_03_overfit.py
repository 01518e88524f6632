"""
Overfitting a small corpus
==========================

Generate the synthetic two-camera corpus, train the tiny network on it
and evaluate on the training identities. Takes about half a minute.
"""

import tempfile
from pathlib import Path

import numpy as np

from personnet.config import tiny_config
from personnet.data import load_manifest, synth_dataset
from personnet.evaluation import pair_accuracy, single_shot_protocol
from personnet.train import train

root = Path(tempfile.mkdtemp()) / "synth"
corpus = load_manifest(synth_dataset(root, 20, 4, 40, 20, seed=0))
print(len(corpus), "images of", len(corpus.identities), "identities")

cfg = tiny_config(seed=0)
result = train(cfg, corpus)
losses = result.losses
for start in range(0, len(losses), 1000):
    print(f"iterations {start + 1:>5}-{start + 1000:<5} mean loss {losses[start:start + 1000].mean():.3f}")

###############################################################################
# Balanced pair accuracy and the single-shot CMC on the same identities.

acc = pair_accuracy(result.params, cfg.network, corpus, 1000, np.random.default_rng(1))
res = single_shot_protocol(result.params, cfg.network, corpus, 10, np.random.default_rng(2))
print(f"pair accuracy {acc:.3f}")
print("rank-1/5/10:", [round(res.cmc.rank(k), 3) for k in (1, 5, 10)])
print(f"mAP {res.mean_ap:.3f}")
