"""Command-line entry point: ``personnet {train,eval,gradcheck,compare-optimizers,synth}``."""
import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import checkpoint, data, evaluation, gradcheck
from .config import RunConfig, load_config
from .errors import PersonNetError
from .io_utils import atomic_write_text
from .train import format_metrics, iterations_to_threshold, train

log = logging.getLogger("personnet")

REPORTED_RANKS = (1, 5, 10, 20)


def _run_config(args):
    cfg = load_config(args.config) if args.config else RunConfig().validate()
    if getattr(args, "seed", None) is not None:
        cfg.training = replace(cfg.training, seed=args.seed)
    if getattr(args, "data", None):
        cfg.data = replace(cfg.data, manifest=str(args.data))
    return cfg


def _manifest(cfg):
    if not cfg.data.manifest:
        raise PersonNetError("no manifest given (use --data or data.manifest)")
    return data.load_manifest(cfg.data.manifest)


def cmd_train(args):
    cfg = _run_config(args)
    manifest = _manifest(cfg)
    every = max(1, cfg.training.max_iterations // 20)

    def progress(row):
        if row[0] % every == 0:
            log.info("iter %d loss %.4f lr %.3g", row[0], row[1], row[2])

    result = train(cfg, manifest, progress=progress)
    checkpoint.checkpoint_save(result.params, cfg, args.out)
    if args.metrics:
        atomic_write_text(args.metrics, format_metrics(result.rows))
    print(f"trained {len(result.rows)} iterations ({result.stop_reason}); "
          f"final loss {result.rows[-1][1]:.4f}; checkpoint {args.out}")
    return 0 if result.stop_reason != "diverged" else 1


def cmd_eval(args):
    params, cfg = checkpoint.checkpoint_load(args.checkpoint)
    manifest = data.load_manifest(args.data)
    seed = args.seed if args.seed is not None else cfg.training.seed
    result = evaluation.single_shot_protocol(params, cfg.network, manifest, args.trials,
                                             np.random.default_rng(seed), args.workers)
    if args.out:
        evaluation.write_curve(args.out, result.cmc, result.mean_ap)
    for k in REPORTED_RANKS:
        if k <= len(result.cmc.rates):
            print(f"rank-{k}: {result.cmc.rank(k):.4f}")
    if result.mean_ap is not None:
        print(f"mAP: {result.mean_ap:.4f}")
    return 0


def cmd_gradcheck(args):
    cfg = _run_config(args)
    seed = args.seed if args.seed is not None else 0
    results = gradcheck.run_all(cfg.network, seed, max_coords=args.max_coords,
                                sabotage=args.sabotage)
    failed = [r for r in results if not r.passed(args.tolerance)]
    width = max(len(r.block) for r in results)
    for r in results:
        mark = "ok" if r.passed(args.tolerance) else "FAIL"
        print(f"{r.block:<{width}}  {r.error:.3e}  ({r.checked} entries)  {mark}")
    worst = max(r.error for r in results)
    print(f"worst relative error {worst:.3e}, tolerance {args.tolerance:g}")
    if failed:
        print("exceeded tolerance: " + ", ".join(r.block for r in failed))
        return 1
    return 0


def compare_optimizers(cfg, manifest, seeds, progress=None):
    """Twin SGD / RMSProp runs per seed; returns ``{seed: (sgd losses, rmsprop losses)}``.

    The learning-rate schedule is disabled so the two runs differ only in
    the update rule.
    """
    n = cfg.training.max_iterations
    curves = {}
    for seed in seeds:
        pair = []
        for algorithm in ("sgd", "rmsprop"):
            run = replace(cfg, optimizer=replace(cfg.optimizer, algorithm=algorithm),
                          training=replace(cfg.training, seed=seed, validation_interval=0,
                                           early_stop=False))
            losses = np.full(n, np.nan)
            got = train(run, manifest).losses
            losses[:len(got)] = got
            pair.append(losses)
            if progress:
                progress(seed, algorithm, losses)
        curves[seed] = tuple(pair)
    return curves


def format_comparison(curves):
    lines = []
    for seed, (sgd, rms) in curves.items():
        lines.append(f"# seed={seed}")
        lines.append("iteration,sgd_loss,rmsprop_loss")
        lines += [f"{i},{a:.6f},{b:.6f}" for i, (a, b) in enumerate(zip(sgd, rms), start=1)]
    return "\n".join(lines) + "\n"


def cmd_compare_optimizers(args):
    cfg = _run_config(args)
    manifest = _manifest(cfg)
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else [cfg.training.seed]
    curves = compare_optimizers(
        cfg, manifest, seeds,
        progress=lambda s, a, l: log.info("seed %d %s final loss %.4f", s, a, l[-1]))
    atomic_write_text(args.out, format_comparison(curves))
    never = cfg.training.max_iterations + 1
    for name, col in (("sgd", 0), ("rmsprop", 1)):
        hits = [iterations_to_threshold(c[col], args.threshold) or never for c in curves.values()]
        print(f"{name}: median iterations to loss {args.threshold}: {np.median(hits):g}")
    return 0


def cmd_synth(args):
    manifest = data.synth_dataset(args.out, args.identities, args.per_view, args.height,
                                  args.width, args.seed if args.seed is not None else 0,
                                  force=args.force)
    print(f"wrote {args.identities * args.per_view * 2} images and {manifest}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="personnet", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a network on a manifest")
    t.add_argument("--config")
    t.add_argument("--data", help="manifest file (overrides data.manifest)")
    t.add_argument("--out", required=True, help="checkpoint path")
    t.add_argument("--metrics", help="CSV log: iteration,loss,learning_rate,val_rank1")
    t.add_argument("--seed", type=int)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="single-shot CMC evaluation of a checkpoint")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--trials", type=int, default=10)
    e.add_argument("--out", help="curve file (k,rate lines plus '# mAP=')")
    e.add_argument("--seed", type=int)
    e.add_argument("--workers", type=int, default=1)
    e.set_defaults(func=cmd_eval)

    g = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    g.add_argument("--config")
    g.add_argument("--tolerance", type=float, default=1e-4)
    g.add_argument("--seed", type=int)
    g.add_argument("--max-coords", type=int, default=None,
                   help="perturb at most this many entries per parameter block")
    g.add_argument("--sabotage", action="store_true",
                   help="break one backward formula (negative control)")
    g.set_defaults(func=cmd_gradcheck)

    c = sub.add_parser("compare-optimizers", help="twin SGD vs RMSProp loss curves")
    c.add_argument("--config")
    c.add_argument("--data")
    c.add_argument("--out", required=True)
    c.add_argument("--seeds", help="comma-separated seeds (default: training.seed)")
    c.add_argument("--seed", type=int)
    c.add_argument("--threshold", type=float, default=0.3)
    c.set_defaults(func=cmd_compare_optimizers)

    s = sub.add_parser("synth", help="generate a synthetic two-camera corpus")
    s.add_argument("--out", required=True)
    s.add_argument("--identities", type=int, default=20)
    s.add_argument("--per-view", type=int, default=4)
    s.add_argument("--height", type=int, default=40)
    s.add_argument("--width", type=int, default=20)
    s.add_argument("--seed", type=int)
    s.add_argument("--force", action="store_true")
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (PersonNetError, FileExistsError, OSError) as exc:
        print(f"personnet {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
