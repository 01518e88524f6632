"""
CMC curves and mean average precision
=====================================

Ranking metrics on hand-made score matrices.
"""

import numpy as np

from personnet.evaluation import ScoreMatrix, average_precision, cmc_from_scores, mean_average_precision

# three probes whose true matches (the diagonal) land at ranks 1, 2, 1
scores = np.array([[0.9, 0.1, 0.2],
                   [0.1, 0.5, 0.8],
                   [0.3, 0.2, 0.7]])
print(cmc_from_scores(ScoreMatrix(scores, [0, 1, 2], [0, 1, 2])).rates)

###############################################################################
# A random scorer gives rank-k rate k/N on average.

rng = np.random.default_rng(0)
ids = np.arange(10)
curves = [cmc_from_scores(ScoreMatrix(rng.random((10, 10)), ids, ids)).rates for _ in range(500)]
print(np.round(np.mean(curves, axis=0), 2))

###############################################################################
# Average precision with two true matches at ranks 2 and 4 of four.

print(average_precision([0.9, 0.8, 0.7, 0.6], [False, True, False, True]))

gallery = np.array([0, 0, 1, 1, 2, 2])
m = ScoreMatrix(rng.random((3, 6)), [0, 1, 2], gallery)
print("mAP of a random scorer:", round(mean_average_precision(m), 3))
