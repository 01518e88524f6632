"""
Checking gradients numerically
==============================

Central differences in double precision against the hand-written
backward pass, layer by layer and through the whole tiny network.
"""

import numpy as np

from personnet.crossnet import NetworkConfig
from personnet.gradcheck import network_check, run_all, sabotaged

cfg = NetworkConfig.tiny()
results = run_all(cfg, seed=0, max_coords=20)
for r in results:
    print(f"{r.block:<24} {r.error:.2e}")

###############################################################################
# Drop the 1.5 factor from the activation's backward formula and the
# check notices immediately.

with sabotaged():
    bad = network_check(cfg, np.random.default_rng(0), max_coords=5)
print("worst error with a broken backward:", f"{max(r.error for r in bad):.2f}")
