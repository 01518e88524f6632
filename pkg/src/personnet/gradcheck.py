"""Central finite-difference checks for every backward pass, in float64."""
import contextlib
from dataclasses import dataclass

import numpy as np

from . import crossnet, layers

DEFAULT_STEP = 1e-5
# gradients smaller than this are compared in absolute terms
DEFAULT_FLOOR = 1e-6


def numerical_gradient(fn, x, step=DEFAULT_STEP, coords=None):
    """Central differences of scalar ``fn()`` w.r.t. ``x``, perturbed in place.

    ``coords`` restricts the estimate to those flat indices; other entries are NaN.
    """
    flat = x.reshape(-1)
    grad = np.full(flat.shape, np.nan) if coords is not None else np.empty(flat.shape)
    for i in (range(flat.size) if coords is None else coords):
        orig = flat[i]
        flat[i] = orig + step
        hi = fn()
        flat[i] = orig - step
        lo = fn()
        flat[i] = orig
        grad[i] = (hi - lo) / (2.0 * step)
    return grad.reshape(x.shape)


def relative_error(analytic, numeric, floor=DEFAULT_FLOOR):
    """Worst elementwise ``|a - n| / max(|a|, |n|, floor)``, ignoring NaN entries."""
    a = np.asarray(analytic, dtype=np.float64).ravel()
    n = np.asarray(numeric, dtype=np.float64).ravel()
    keep = ~np.isnan(n)
    a, n = a[keep], n[keep]
    if a.size == 0:
        return 0.0
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return float(np.max(np.abs(a - n) / denom))


@dataclass
class CheckResult:
    block: str
    error: float
    checked: int

    def passed(self, tolerance):
        return self.error < tolerance


def _check(name, fn, x, analytic, step, floor, coords=None):
    num = numerical_gradient(fn, x, step, coords)
    return CheckResult(name, relative_error(analytic, num, floor),
                       x.size if coords is None else len(coords))


def _maxpool_input(rng, shape):
    # distinct values at least 1e-3 apart so a step of 1e-5 never flips an argmax
    n = int(np.prod(shape))
    return (rng.permutation(n) * 1e-3 + rng.uniform(-0.5, 0.5)).reshape(shape)


def layer_checks(rng, step=DEFAULT_STEP, floor=DEFAULT_FLOOR):
    """Check each layer against finite differences of ``sum(G * out)``."""
    results = []

    x = rng.normal(size=(7, 6, 3))
    w = rng.normal(size=(4, 3, 3, 2))
    b = rng.normal(size=4)
    for stride in (1, 2):
        g = rng.normal(size=layers.conv2d_forward(x, w, b, stride).shape)
        gx, gw, gb = layers.conv2d_backward(x, w, g, stride)
        obj = lambda: np.sum(g * layers.conv2d_forward(x, w, b, stride))
        results += [_check(f"conv2d[s={stride}].x", obj, x, gx, step, floor),
                    _check(f"conv2d[s={stride}].weight", obj, w, gw, step, floor),
                    _check(f"conv2d[s={stride}].bias", obj, b, gb, step, floor)]

    for rounding in ("ceil", "floor"):
        xp = _maxpool_input(rng, (7, 5, 3))
        out, idx = layers.maxpool_forward(xp, rounding)
        g = rng.normal(size=out.shape)
        gx = layers.maxpool_backward(idx, g)
        obj = lambda: np.sum(g * layers.maxpool_forward(xp, rounding)[0])
        results.append(_check(f"maxpool[{rounding}].x", obj, xp, gx, step, floor))

    xt = rng.normal(size=(5, 4))
    g = rng.normal(size=xt.shape)
    gx = layers.scaled_tanh_backward(layers.scaled_tanh(xt), g)
    results.append(_check("scaled_tanh.x", lambda: np.sum(g * layers.scaled_tanh(xt)), xt, gx, step, floor))

    xf = rng.normal(size=6)
    wf = rng.normal(size=(4, 6))
    bf = rng.normal(size=4)
    g = rng.normal(size=4)
    gx, gw, gb = layers.fc_backward(xf, wf, g)
    obj = lambda: np.sum(g * layers.fc_forward(xf, wf, bf))
    results += [_check("fc.x", obj, xf, gx, step, floor),
                _check("fc.weight", obj, wf, gw, step, floor),
                _check("fc.bias", obj, bf, gb, step, floor)]

    logits = rng.normal(size=2) * 3
    label = int(rng.integers(2))
    _, gl = layers.softmax_cross_entropy(logits, label)
    results.append(_check("softmax_xent.logits",
                          lambda: layers.softmax_cross_entropy(logits, label)[0],
                          logits, gl, step, floor))

    n = 3
    f = rng.normal(size=(5, 4, 2))
    h = rng.normal(size=(5, 4, 2))
    g = rng.normal(size=(15, 12, 2))
    gf, gh = crossnet.neighborhood_difference_backward(g, n)
    obj = lambda: np.sum(g * crossnet.neighborhood_difference(f, h, n))
    results += [_check("difference.f", obj, f, gf, step, floor),
                _check("difference.h", obj, h, gh, step, floor)]

    d = rng.normal(size=(15, 12, 2))
    ws = rng.normal(size=(3, 2, n, n)) * 0.3
    bs = rng.normal(size=3) * 0.3
    out = crossnet.patch_summary(d, ws, bs, n)
    g = rng.normal(size=out.shape)
    gz = layers.scaled_tanh_backward(out, g)
    gd, gw, gb = layers.conv2d_backward(d, ws, gz, stride=n)
    obj = lambda: np.sum(g * crossnet.patch_summary(d, ws, bs, n))
    results += [_check("summary.d", obj, d, gd, step, floor),
                _check("summary.weight", obj, ws, gw, step, floor),
                _check("summary.bias", obj, bs, gb, step, floor)]
    return results


def network_check(cfg, rng, step=DEFAULT_STEP, floor=DEFAULT_FLOOR, max_coords=None):
    """End-to-end check of d(loss)/d(param) for every parameter block.

    Runs in train mode with dropout masks held fixed across evaluations.
    ``max_coords`` caps how many entries of each block are perturbed.
    """
    params, _ = crossnet.build_network(cfg, rng, dtype=np.float64)
    img_a = rng.random((cfg.input_height, cfg.input_width, 3))
    img_b = rng.random((cfg.input_height, cfg.input_width, 3))
    label = int(rng.integers(2))
    mask_seed = int(rng.integers(2**31))

    def loss():
        logits, _ = crossnet.forward_pair(params, cfg, img_a, img_b, train=True,
                                          rng=np.random.default_rng(mask_seed))
        return layers.softmax_cross_entropy(logits, label)[0]

    logits, cache = crossnet.forward_pair(params, cfg, img_a, img_b, train=True,
                                          rng=np.random.default_rng(mask_seed))
    _, g = layers.softmax_cross_entropy(logits, label)
    params.zero_grad()
    crossnet.backward_pair(params, cfg, cache, g)

    results = []
    for name, value in params.items():
        coords = None
        if max_coords is not None and value.size > max_coords:
            coords = rng.choice(value.size, size=max_coords, replace=False)
        results.append(_check(name, loss, value, params.grad(name), step, floor, coords))
    return results


def _broken_tanh_backward(y, grad_out, scale=layers.ACTIVATION_SCALE):
    # drops the activation scale: wrong by a factor 1/scale everywhere
    return grad_out * (1.0 - y * y)


@contextlib.contextmanager
def sabotaged():
    """Temporarily swap in a wrong activation backward inside the network."""
    saved = crossnet._tanh_backward
    crossnet._tanh_backward = _broken_tanh_backward
    try:
        yield
    finally:
        crossnet._tanh_backward = saved


def run_all(cfg, seed=0, step=DEFAULT_STEP, floor=DEFAULT_FLOOR, max_coords=None, sabotage=False):
    rng = np.random.default_rng(seed)
    results = layer_checks(rng, step, floor)
    with sabotaged() if sabotage else contextlib.nullcontext():
        results += network_check(cfg, rng, step, floor, max_coords)
    return results
