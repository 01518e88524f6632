"""
SGD against RMSProp
===================

Twin runs from the same initialization and the same pair stream. Only
the update rule differs. A few seeds, short runs.
"""

import tempfile
from pathlib import Path

import numpy as np

from personnet.cli import compare_optimizers
from personnet.config import tiny_config
from personnet.data import load_manifest, synth_dataset
from personnet.train import iterations_to_threshold

corpus = load_manifest(synth_dataset(Path(tempfile.mkdtemp()) / "synth", 20, 4, 40, 20, seed=0))

for lr in (0.001, 0.01):
    cfg = tiny_config(max_iterations=1500)
    cfg.optimizer.learning_rate = lr
    curves = compare_optimizers(cfg, corpus, seeds=[0, 1, 2])
    for seed, (sgd, rms) in curves.items():
        print(f"lr {lr} seed {seed}: iterations to loss 0.3 "
              f"sgd {iterations_to_threshold(sgd, 0.3)}, "
              f"rmsprop {iterations_to_threshold(rms, 0.3)}")

###############################################################################
# The winner depends on the rate. At 0.001 RMSProp's normalized steps make
# progress while SGD crawls; at 0.01 SGD catches up and RMSProp's steps
# of roughly the learning rate per coordinate become too coarse.

m = np.mean([c[1][-200:] for c in curves.values()])
print(f"final rmsprop loss at lr 0.01: {m:.3f}")
