"""
The cross-input neighborhood difference
=======================================

Each position of one feature map is compared with the 3x3 neighborhood
around the same position of the other map. The result is tiled into
3x3 blocks, so a 4x3 map becomes 12x9.
"""

import numpy as np

from personnet.crossnet import neighborhood_difference, neighborhood_difference_backward

f = np.arange(1.0, 13.0).reshape(4, 3, 1)
h = np.zeros_like(f)
h[1, 1, 0] = 10.0

d = neighborhood_difference(f, h)
print(d[..., 0])

###############################################################################
# Block (1, 1) sees the spike at its centre; its neighbors see it off-centre.

blocks = d[..., 0].reshape(4, 3, 3, 3).transpose(0, 2, 1, 3)
print("block (1, 1):\n", blocks[1, 1])
print("block (0, 0):\n", blocks[0, 0])

###############################################################################
# Feeding the same map twice zeroes every block centre. Off-centre
# entries only cancel where the map is locally flat.

same = neighborhood_difference(f, f)[..., 0].reshape(4, 3, 3, 3).transpose(0, 2, 1, 3)
print("centres:", same[:, :, 1, 1].ravel())
print("largest off-centre entry:", np.abs(same).max())

###############################################################################
# Backward: the gradient for f sums each block, the gradient for h
# collects the negated entries back onto the positions they came from.

gf, gh = neighborhood_difference_backward(np.ones_like(d))
print("grad f:\n", gf[..., 0])
print("grad h:\n", gh[..., 0])
