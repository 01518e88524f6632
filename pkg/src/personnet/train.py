"""Online-sampling training loop."""
import logging
from dataclasses import dataclass, field

import numpy as np

from . import crossnet
from .data import sample_balanced_pairs
from .errors import NumericError
from .evaluation import single_shot_protocol
from .optim import PlateauSchedule, apply_weight_decay, make_optimizer

log = logging.getLogger(__name__)

METRICS_HEADER = "iteration,loss,learning_rate,val_rank1"


@dataclass
class TrainResult:
    params: crossnet.ParameterStore
    rows: list = field(default_factory=list)   # (iteration, loss, rate, val rank-1 or None)
    stop_reason: str = "max_iterations"

    @property
    def losses(self):
        return np.array([r[1] for r in self.rows])


def seed_streams(seed):
    """Independent generators for init, pair sampling, dropout and validation."""
    ss = np.random.SeedSequence(seed)
    return dict(zip(("init", "sample", "dropout", "validation"),
                    (np.random.default_rng(s) for s in ss.spawn(4))))


def split_identities(manifest, fraction, rng):
    """Hold out ``fraction`` of the identities (at least 2 when non-zero).

    With ``fraction == 0`` (overfit runs) validation reuses the training set.
    """
    idents = manifest.identities
    if fraction <= 0:
        return manifest, manifest
    n_val = max(2, int(round(fraction * len(idents))))
    if len(idents) - n_val < 2:
        return manifest, manifest
    val = set(rng.choice(idents, size=n_val, replace=False).tolist())
    return manifest.subset([i for i in idents if i not in val]), manifest.subset(sorted(val))


def train_step(params, net, batch, optimizer, weight_decay, rng):
    """One optimizer step on ``batch``; returns the batch-mean loss."""
    n = batch.size
    loss = 0.0
    for img_a, img_b, label in batch.pairs:
        l, g, cache = crossnet.pair_loss(params, net, img_a, img_b, label, train=True, rng=rng)
        crossnet.backward_pair(params, net, cache, g / n)
        loss += l / n
    apply_weight_decay(params, weight_decay)
    optimizer.step(params)
    return loss


def train(cfg, manifest, params=None, progress=None):
    """Run ``cfg`` on ``manifest``. ``progress(row)`` is called after every iteration."""
    t, o = cfg.training, cfg.optimizer
    streams = seed_streams(t.seed)
    train_set, val_set = split_identities(manifest, t.validation_fraction, streams["validation"])
    if params is None:
        params, _ = crossnet.build_network(cfg.network, streams["init"])
    optimizer = make_optimizer(o.algorithm, o.learning_rate, o.smoothing)
    schedule = PlateauSchedule(o.learning_rate, o.drop_factor, o.patience, o.min_rate)
    result = TrainResult(params)
    best_window, stale_windows = np.inf, 0

    for it in range(1, t.max_iterations + 1):
        batch = sample_balanced_pairs(train_set, t.batch_size, streams["sample"],
                                      cfg.data.augment, cfg.data.reflect)
        try:
            loss = train_step(params, cfg.network, batch, optimizer, o.weight_decay,
                              streams["dropout"])
        except NumericError as exc:
            log.warning("iteration %d diverged: %s", it, exc)
            result.rows.append((it, float("nan"), optimizer.learning_rate, None))
            result.stop_reason = "diverged"
            break
        val = None
        if t.validation_interval and it % t.validation_interval == 0:
            val = single_shot_protocol(params, cfg.network, val_set, trials=1,
                                       rng=streams["validation"]).cmc.rank(1)
            optimizer.learning_rate = schedule.step(val)
        row = (it, loss, optimizer.learning_rate, val)
        result.rows.append(row)
        if progress:
            progress(row)
        if schedule.exhausted:
            result.stop_reason = "schedule_exhausted"
            break
        if t.early_stop and it % t.early_stop_window == 0:
            mean = float(np.mean([r[1] for r in result.rows[-t.early_stop_window:]]))
            if mean < 0.99 * best_window:
                best_window, stale_windows = mean, 0
            else:
                stale_windows += 1
                if stale_windows >= t.early_stop_patience:
                    result.stop_reason = "loss_plateau"
                    break
    return result


def format_metrics(rows):
    lines = [METRICS_HEADER]
    for it, loss, rate, val in rows:
        lines.append(f"{it},{loss:.6f},{rate:.6g},{'' if val is None else f'{val:.4f}'}")
    return "\n".join(lines) + "\n"


def iterations_to_threshold(losses, threshold, window=50):
    """First iteration at which the trailing ``window``-mean loss is <= threshold,
    or ``None`` if it never gets there."""
    losses = np.asarray(losses, dtype=np.float64)
    if len(losses) < window:
        return None
    smooth = np.convolve(losses, np.ones(window) / window, mode="valid")
    hits = np.flatnonzero(smooth <= threshold)
    return int(hits[0] + window) if len(hits) else None
