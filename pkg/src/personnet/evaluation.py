"""Probe/gallery scoring, single-shot CMC curves and mean average precision."""
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import crossnet
from .data import sample_pair_indices
from .errors import ProtocolError, ShapeError
from .io_utils import atomic_write_text


@dataclass
class ScoreMatrix:
    """``scores[p, g]`` is the "same" probability of probe ``p`` vs gallery item ``g``."""
    scores: np.ndarray
    probe_ids: np.ndarray
    gallery_ids: np.ndarray

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        self.probe_ids = np.asarray(self.probe_ids)
        self.gallery_ids = np.asarray(self.gallery_ids)
        if self.scores.shape != (len(self.probe_ids), len(self.gallery_ids)):
            raise ShapeError(
                f"scores {self.scores.shape} vs {len(self.probe_ids)} probes x "
                f"{len(self.gallery_ids)} gallery items")
        if not np.all(np.isfinite(self.scores)):
            raise ValueError("score matrix contains non-finite values")


@dataclass
class CmcCurve:
    rates: np.ndarray   # rates[k-1] = fraction of probes matched within rank k
    trials: int = 1

    def rank(self, k):
        return float(self.rates[min(k, len(self.rates)) - 1])


def _features(params, cfg, images, workers=1):
    run = lambda img: crossnet.trunk_forward(params, cfg, img)[0]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(run, images))
    return [run(img) for img in images]


def _score_features(params, cfg, probe_feats, gallery_feats, workers=1):
    def row(f):
        return [crossnet.same_probability(crossnet.head_forward(params, cfg, f, h)[0])
                for h in gallery_feats]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return np.array(list(pool.map(row, probe_feats)))
    return np.array([row(f) for f in probe_feats])


def score_all(params, cfg, probes, gallery, probe_ids, gallery_ids, workers=1):
    """Score every probe image against every gallery image in eval mode."""
    pf = _features(params, cfg, probes, workers)
    gf = _features(params, cfg, gallery, workers)
    return ScoreMatrix(_score_features(params, cfg, pf, gf, workers), probe_ids, gallery_ids)


def _ranking(scores):
    # descending score, ties by ascending gallery index
    return np.argsort(-scores, kind="stable")


def match_ranks(m):
    """1-based rank of each probe's unique true match."""
    ranks = np.empty(len(m.probe_ids), dtype=np.int64)
    for p, pid in enumerate(m.probe_ids):
        hits = np.flatnonzero(m.gallery_ids == pid)
        if len(hits) != 1:
            raise ProtocolError(
                f"probe identity {pid} appears {len(hits)} times in the gallery; single-shot needs 1")
        ranks[p] = np.flatnonzero(_ranking(m.scores[p]) == hits[0])[0] + 1
    return ranks


def cmc_from_scores(m):
    ranks = match_ranks(m)
    k = np.arange(1, len(m.gallery_ids) + 1)
    rates = (ranks[None, :] <= k[:, None]).mean(axis=1)
    return CmcCurve(rates, 1)


def average_precision(scores, relevant):
    """Average of precision at each relevant position in the descending ranking."""
    hits = np.asarray(relevant)[_ranking(np.asarray(scores))]
    if not hits.any():
        return None
    positions = np.flatnonzero(hits) + 1
    return float(np.mean(np.arange(1, len(positions) + 1) / positions))


def mean_average_precision(m):
    """Mean AP over probes; probes without any true match are skipped with a warning."""
    aps = []
    for p, pid in enumerate(m.probe_ids):
        ap = average_precision(m.scores[p], m.gallery_ids == pid)
        if ap is not None:
            aps.append(ap)
    skipped = len(m.probe_ids) - len(aps)
    if skipped:
        warnings.warn(f"{skipped} probe(s) had no true match in the gallery and were excluded")
    if not aps:
        raise ProtocolError("no probe has a true match in the gallery")
    return float(np.mean(aps))


@dataclass
class ProtocolResult:
    cmc: CmcCurve
    mean_ap: float | None


def single_shot_protocol(params, cfg, manifest, trials=10, rng=None, workers=1):
    """Average CMC over ``trials`` random single-shot galleries.

    Probes are the first camera-A image of each identity and stay fixed; each
    trial draws one camera-B gallery image per identity. When some identity
    has several camera-B images, mAP over the full camera-B gallery is
    returned as well.
    """
    cams = manifest.cameras
    if len(cams) < 2:
        raise ProtocolError("evaluation needs images from two cameras")
    cam_a, cam_b = cams[0], cams[1]
    idents = manifest.identities
    for ident in idents:
        for cam in (cam_a, cam_b):
            if cam not in manifest.index[ident]:
                raise ProtocolError(f"identity {ident} has no image from camera {cam}")
    probe_idx = [manifest.index[i][cam_a][0] for i in idents]
    gallery_pool = [manifest.index[i][cam_b] for i in idents]
    all_gallery = [j for pool in gallery_pool for j in pool]

    feats = dict(zip(probe_idx + all_gallery,
                     _features(params, cfg, [manifest.image(j) for j in probe_idx + all_gallery], workers)))
    full = _score_features(params, cfg, [feats[j] for j in probe_idx],
                           [feats[j] for j in all_gallery], workers)
    column = {j: c for c, j in enumerate(all_gallery)}

    curves = []
    for _ in range(trials):
        chosen = [pool[rng.integers(len(pool))] for pool in gallery_pool]
        m = ScoreMatrix(full[:, [column[j] for j in chosen]], idents, idents)
        curves.append(cmc_from_scores(m).rates)
    curve = CmcCurve(np.mean(curves, axis=0), trials)

    mean_ap = None
    if any(len(pool) > 1 for pool in gallery_pool):
        gallery_ids = [manifest.records[j].identity for j in all_gallery]
        mean_ap = mean_average_precision(ScoreMatrix(full, idents, gallery_ids))
    return ProtocolResult(curve, mean_ap)


def pair_accuracy(params, cfg, manifest, n_pairs, rng):
    """Accuracy on ``n_pairs`` balanced cross-camera pairs (no augmentation)."""
    eligible = manifest.eligible_identities()
    correct = 0
    for k in range(n_pairs):
        positive = k % 2 == 0
        a, b = sample_pair_indices(manifest, rng, positive, eligible)
        logits, _ = crossnet.forward_pair(params, cfg, manifest.image(a), manifest.image(b))
        correct += int((logits[1] > logits[0]) == positive)
    return correct / n_pairs


def format_curve(curve, mean_ap=None):
    lines = ["k,rate"]
    lines += [f"{k},{r:.6f}" for k, r in enumerate(curve.rates, start=1)]
    if mean_ap is not None:
        lines.append(f"# mAP={mean_ap:.6f}")
    return "\n".join(lines) + "\n"


def write_curve(path, curve, mean_ap=None):
    atomic_write_text(path, format_curve(curve, mean_ap))


def read_curve(path):
    rates, mean_ap = [], None
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "k,rate":
            raise ValueError(f"{path}: bad header {header!r}")
        for line in fh:
            line = line.strip()
            if line.startswith("# mAP="):
                mean_ap = float(line.split("=", 1)[1])
            elif line:
                rates.append(float(line.split(",")[1]))
    return CmcCurve(np.array(rates)), mean_ap
