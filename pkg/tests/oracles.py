"""Slow, obviously-correct reference implementations used only by the tests."""
import math

import numpy as np


def matmul_loops(a, b):
    m, k = a.shape
    n = b.shape[1]
    out = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            s = 0.0
            for t in range(k):
                s += a[i, t] * b[t, j]
            out[i, j] = s
    return out


def conv2d_loops(x, w, b, stride=1):
    h, wd, cin = x.shape
    cout, _, fh, fw = w.shape
    ho = (h - fh) // stride + 1
    wo = (wd - fw) // stride + 1
    out = np.zeros((ho, wo, cout))
    for i in range(ho):
        for j in range(wo):
            for k in range(cout):
                s = b[k]
                for c in range(cin):
                    for u in range(fh):
                        for v in range(fw):
                            s += w[k, c, u, v] * x[i * stride + u, j * stride + v, c]
                out[i, j, k] = s
    return out


def maxpool_loops(x, rounding):
    h, w, c = x.shape
    rnd = math.ceil if rounding == "ceil" else math.floor
    ho, wo = rnd(h / 2), rnd(w / 2)
    out = np.zeros((ho, wo, c))
    for i in range(ho):
        for j in range(wo):
            for k in range(c):
                vals = [x[2 * i + u, 2 * j + v, k]
                        for u in range(2) for v in range(2)
                        if 2 * i + u < h and 2 * j + v < w]
                out[i, j, k] = max(vals)
    return out


def neighborhood_difference_loops(f, h, n):
    """Block (x, y) entry (a, b) = f[x, y] - h[x + a - r, y + b - r] (zero outside)."""
    hf, wf, c = f.shape
    r = n // 2
    out = np.zeros((hf * n, wf * n, c))
    for ch in range(c):
        for x in range(hf):
            for y in range(wf):
                for a in range(n):
                    for b in range(n):
                        u, v = x + a - r, y + b - r
                        neighbor = h[u, v, ch] if 0 <= u < hf and 0 <= v < wf else 0.0
                        out[x * n + a, y * n + b, ch] = f[x, y, ch] - neighbor
    return out


def cmc_bruteforce(scores, probe_ids, gallery_ids):
    """Count, for each probe, how many gallery items outrank the true match."""
    n_g = len(gallery_ids)
    ranks = []
    for p, pid in enumerate(probe_ids):
        true = [g for g in range(n_g) if gallery_ids[g] == pid][0]
        better = 0
        for g in range(n_g):
            if scores[p][g] > scores[p][true] or (scores[p][g] == scores[p][true] and g < true):
                better += 1
        ranks.append(better + 1)
    return [sum(1 for r in ranks if r <= k) / len(ranks) for k in range(1, n_g + 1)]


def ap_bruteforce(scores, relevant):
    """AP as the mean over true matches of precision at that match's rank."""
    n = len(scores)
    precisions = []
    for g in range(n):
        if not relevant[g]:
            continue
        # rank of g: items strictly better, or tied with a lower index
        rank = 1 + sum(1 for o in range(n)
                       if scores[o] > scores[g] or (scores[o] == scores[g] and o < g))
        hits_up_to = sum(1 for o in range(n) if relevant[o] and
                         (scores[o] > scores[g] or (scores[o] == scores[g] and o <= g)))
        precisions.append(hits_up_to / rank)
    return sum(precisions) / len(precisions)
