"""
Layer shapes and the building blocks
====================================

Walk the canonical network's shape plan, then push a random image
through the first convolution and pooling layers by hand.
"""

import numpy as np

from personnet import layers
from personnet.crossnet import NetworkConfig, build_network, parameter_shapes, shape_plan

cfg = NetworkConfig()
for name, shape in shape_plan(cfg):
    print(f"{name:>10}  {' x '.join(map(str, shape))}")

# parameter count, weights shared by both branches counted once
n = sum(int(np.prod(s)) for s in parameter_shapes(cfg).values())
print("parameters:", n)

###############################################################################
# One convolution followed by a ceil-mode pool. The pool keeps the argmax
# positions so the backward pass can route gradients.

rng = np.random.default_rng(0)
params, _ = build_network(cfg, rng)
img = rng.random((160, 60, 3)).astype(np.float32)
y = layers.scaled_tanh(layers.conv2d_forward(img, params["conv0.weight"], params["conv0.bias"]))
pooled, idx = layers.maxpool_forward(y, "ceil")
print(y.shape, "->", pooled.shape)

g = layers.maxpool_backward(idx, np.ones_like(pooled))
print("positions receiving gradient:", int((g != 0).sum()), "of", g.size)
