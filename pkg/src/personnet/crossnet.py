"""Two-branch pair network with a cross-input neighborhood difference.

Both images run through the same (tied) convolutional trunk. The trunk
outputs meet in :func:`neighborhood_difference`, and a joint tail
(patch summary, one more convolution, pooling, fully connected layers and a
two-way head) turns the difference maps into same/different logits.
"""
from collections import OrderedDict
from dataclasses import dataclass, field, fields

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import layers
from .errors import ConfigError, ShapeError, UsageError

TRUNK_CONVS = ("conv0", "conv1", "conv2", "conv3")


@dataclass
class NetworkConfig:
    input_height: int = 160
    input_width: int = 60
    # conv0..conv3 (shared trunk) and conv4 (joint tail)
    channels: tuple = (32, 32, 32, 32, 32)
    filter_sizes: tuple = ((4, 4), (4, 4), (4, 4), (4, 4), (3, 3))
    # pool0, pool1, pool4
    pool_rounding: tuple = ("ceil", "floor", "floor")
    summary_channels: int = 32
    neighborhood: int = 3
    fc_sizes: tuple = (4096, 4096, 512)
    activation_scale: float = 1.5
    dropout_rate: float = 0.5

    def __post_init__(self):
        self.channels = tuple(int(c) for c in self.channels)
        self.filter_sizes = tuple(_filter_pair(f) for f in self.filter_sizes)
        self.pool_rounding = tuple(str(r) for r in self.pool_rounding)
        self.fc_sizes = tuple(int(s) for s in self.fc_sizes)

    @classmethod
    def tiny(cls):
        """Desk-scale variant: 40x20 input, 8 channels, fc 32/32/16."""
        return cls(
            input_height=40, input_width=20,
            channels=(8, 8, 8, 8, 8),
            filter_sizes=((3, 3), (3, 3), (1, 1), (1, 1), (2, 2)),
            pool_rounding=("ceil", "ceil", "ceil"),
            summary_channels=8,
            fc_sizes=(32, 32, 16),
        )

    def validate(self):
        if len(self.channels) != 5:
            raise ConfigError(f"channels needs 5 entries (conv0-conv4), got {len(self.channels)}")
        if len(self.filter_sizes) != 5:
            raise ConfigError(f"filter_sizes needs 5 entries, got {len(self.filter_sizes)}")
        if len(self.pool_rounding) != 3:
            raise ConfigError(f"pool_rounding needs 3 entries (pool0, pool1, pool4)")
        for r in self.pool_rounding:
            if r not in ("ceil", "floor"):
                raise ConfigError(f"pool rounding must be ceil or floor, got {r!r}")
        if len(self.fc_sizes) != 3:
            raise ConfigError(f"fc_sizes needs 3 entries, got {len(self.fc_sizes)}")
        if self.neighborhood < 1 or self.neighborhood % 2 == 0:
            raise ConfigError(f"neighborhood size must be odd, got {self.neighborhood}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"dropout_rate must lie in [0, 1), got {self.dropout_rate}")
        values = [self.input_height, self.input_width, self.summary_channels,
                  *self.channels, *self.fc_sizes, *(v for f in self.filter_sizes for v in f)]
        if any(v < 1 for v in values):
            raise ConfigError("extents, channel counts and filter sizes must be >= 1")
        shape_plan(self)
        return self


def _filter_pair(f):
    if isinstance(f, (int, np.integer)):
        return (int(f), int(f))
    fh, fw = f
    return (int(fh), int(fw))


# ---------------------------------------------------------------- shape plan

def shape_plan(cfg):
    """List of ``(layer name, output shape)`` from the input to the head.

    Raises :class:`ConfigError` naming the first layer whose output would be
    empty.
    """
    h, w, c = cfg.input_height, cfg.input_width, 3
    plan = [("input", (h, w, c))]

    def conv(name, filt, cout):
        nonlocal h, w, c
        fh, fw = filt
        h, w, c = h - fh + 1, w - fw + 1, cout
        if h < 1 or w < 1:
            raise ConfigError(f"layer {name}: filter {fh}x{fw} does not fit its input")
        plan.append((name, (h, w, c)))

    def pool(name, rounding):
        nonlocal h, w
        h = layers.pool_output_extent(h, rounding)
        w = layers.pool_output_extent(w, rounding)
        if h < 1 or w < 1:
            raise ConfigError(f"layer {name}: {rounding} pooling leaves an empty map")
        plan.append((name, (h, w, c)))

    fs, ch, pr = cfg.filter_sizes, cfg.channels, cfg.pool_rounding
    conv("conv0", fs[0], ch[0])
    pool("pool0", pr[0])
    conv("conv1", fs[1], ch[1])
    pool("pool1", pr[1])
    conv("conv2", fs[2], ch[2])
    conv("conv3", fs[3], ch[3])
    n = cfg.neighborhood
    plan.append(("difference", (h * n, w * n, c)))
    c = cfg.summary_channels
    plan.append(("summary", (h, w, c)))
    conv("conv4", fs[4], ch[4])
    pool("pool4", pr[2])
    size = h * w * c
    plan.append(("flatten", (size,)))
    for i, m in enumerate(cfg.fc_sizes, start=1):
        plan.append((f"fc{i}", (m,)))
    plan.append(("head", (2,)))
    return plan


def parameter_shapes(cfg):
    plan = dict(shape_plan(cfg))
    shapes = OrderedDict()
    cin = 3
    for i, name in enumerate(TRUNK_CONVS):
        fh, fw = cfg.filter_sizes[i]
        shapes[f"{name}.weight"] = (cfg.channels[i], cin, fh, fw)
        shapes[f"{name}.bias"] = (cfg.channels[i],)
        cin = cfg.channels[i]
    n = cfg.neighborhood
    shapes["summary.weight"] = (cfg.summary_channels, cin, n, n)
    shapes["summary.bias"] = (cfg.summary_channels,)
    fh, fw = cfg.filter_sizes[4]
    shapes["conv4.weight"] = (cfg.channels[4], cfg.summary_channels, fh, fw)
    shapes["conv4.bias"] = (cfg.channels[4],)
    fan_in = plan["flatten"][0]
    for i, m in enumerate(cfg.fc_sizes, start=1):
        shapes[f"fc{i}.weight"] = (m, fan_in)
        shapes[f"fc{i}.bias"] = (m,)
        fan_in = m
    shapes["head.weight"] = (2, fan_in)
    shapes["head.bias"] = (2,)
    return shapes


# ---------------------------------------------------------------- parameters

class ParameterStore:
    """Ordered name -> tensor map with a gradient buffer per entry.

    Both branches of the network read the same entries, so gradients from the
    two branches accumulate into one buffer.
    """

    def __init__(self, values=None):
        self._values = OrderedDict()
        self._grads = OrderedDict()
        self.version = 0
        for name, value in (values or {}).items():
            self.add(name, value)

    def add(self, name, value):
        if name in self._values:
            raise KeyError(f"duplicate parameter {name!r}")
        value = np.ascontiguousarray(value)
        self._values[name] = value
        self._grads[name] = np.zeros_like(value)

    def __getitem__(self, name):
        return self._values[name]

    def __contains__(self, name):
        return name in self._values

    def __iter__(self):
        return iter(self._values)

    def __len__(self):
        return len(self._values)

    def names(self):
        return list(self._values)

    def items(self):
        return self._values.items()

    def grad(self, name):
        return self._grads[name]

    def accumulate(self, name, g):
        self._grads[name] += g

    def detach_grads(self):
        """Swap in zeroed gradient buffers and return the previous ones."""
        old = self._grads
        self._grads = OrderedDict((n, np.zeros_like(g)) for n, g in old.items())
        return old

    def restore_grads(self, old):
        """Add the buffers from :meth:`detach_grads` back in."""
        for name, g in old.items():
            self._grads[name] += g

    def zero_grad(self):
        for g in self._grads.values():
            g.fill(0.0)

    def mark_updated(self):
        """Call after changing values in place; invalidates older caches."""
        self.version += 1

    def count(self):
        return sum(v.size for v in self._values.values())

    @property
    def dtype(self):
        return next(iter(self._values.values())).dtype

    def copy(self, dtype=None):
        out = ParameterStore()
        for name, v in self._values.items():
            out.add(name, v.astype(dtype or v.dtype, copy=True))
        return out


def build_network(cfg, rng, dtype=np.float32):
    """Initialise parameters for ``cfg``. Returns ``(ParameterStore, shape plan)``.

    Weights are uniform in +-sqrt(6 / (fan_in + fan_out)); biases start at zero.
    """
    cfg.validate()
    plan = shape_plan(cfg)
    params = ParameterStore()
    for name, shape in parameter_shapes(cfg).items():
        if name.endswith(".bias"):
            params.add(name, np.zeros(shape, dtype=dtype))
            continue
        if len(shape) == 4:
            receptive = shape[2] * shape[3]
            fan_in, fan_out = shape[1] * receptive, shape[0] * receptive
        else:
            fan_in, fan_out = shape[1], shape[0]
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-limit, limit, size=shape)
        params.add(name, w.astype(dtype))
    return params, plan


# ---------------------------------------------------------------- difference layer

def neighborhood_difference(f, h, n=3):
    """Cross-input neighborhood difference.

    Output block ``(x, y)`` of every channel is ``f[x, y]`` repeated over an
    ``n x n`` block minus the ``n x n`` neighborhood of ``h`` centred at
    ``(x, y)``; neighbors outside ``h`` read as zero. Blocks are tiled into a
    ``[Hf*n, Wf*n, C]`` map.
    """
    if f.shape != h.shape or f.ndim != 3:
        raise ShapeError(f"difference inputs must share a [H,W,C] shape: {f.shape} vs {h.shape}")
    if n < 1 or n % 2 == 0:
        raise ValueError(f"neighborhood size must be odd, got {n}")
    hf, wf, c = f.shape
    r = n // 2
    hp = np.pad(h, ((r, r), (r, r), (0, 0)))
    neigh = sliding_window_view(hp, (n, n), axis=(0, 1))  # [Hf, Wf, C, n, n]
    blocks = f[:, :, :, None, None] - neigh
    return blocks.transpose(0, 3, 1, 4, 2).reshape(hf * n, wf * n, c)


def neighborhood_difference_backward(grad_out, n=3):
    """Return ``(grad_f, grad_h)`` for :func:`neighborhood_difference`."""
    if grad_out.ndim != 3 or grad_out.shape[0] % n or grad_out.shape[1] % n:
        raise ShapeError(f"grad_out {grad_out.shape} is not a grid of {n}x{n} blocks")
    hf, wf, c = grad_out.shape[0] // n, grad_out.shape[1] // n, grad_out.shape[2]
    g = grad_out.reshape(hf, n, wf, n, c)
    grad_f = g.sum(axis=(1, 3))
    r = n // 2
    grad_hp = np.zeros((hf + 2 * r, wf + 2 * r, c), dtype=grad_out.dtype)
    for a in range(n):
        for b in range(n):
            grad_hp[a:a + hf, b:b + wf] -= g[:, a, :, b, :]
    return grad_f, grad_hp[r:r + hf, r:r + wf]


def patch_summary(d, weight, bias, n=3, scale=layers.ACTIVATION_SCALE):
    """Collapse each ``n x n`` difference block with a learned stride-``n``
    convolution followed by the scaled tanh."""
    if d.shape[0] % n or d.shape[1] % n:
        raise ShapeError(f"difference map {d.shape[:2]} is not divisible into {n}x{n} blocks")
    if weight.shape[2:] != (n, n):
        raise ShapeError(f"summary filters must be {n}x{n}, got {weight.shape[2:]}")
    return layers.scaled_tanh(layers.conv2d_forward(d, weight, bias, stride=n), scale)


# ---------------------------------------------------------------- forward / backward

# backward kernels looked up at call time so gradcheck can swap one out
_tanh_backward = layers.scaled_tanh_backward


def _conv_act_forward(params, name, x, stride, scale):
    y = layers.scaled_tanh(
        layers.conv2d_forward(x, params[f"{name}.weight"], params[f"{name}.bias"], stride),
        scale)
    return y, (name, x, y, stride)


def _conv_act_backward(params, entry, grad_y, scale):
    name, x, y, stride = entry
    grad_z = _tanh_backward(y, grad_y, scale)
    grad_x, grad_w, grad_b = layers.conv2d_backward(x, params[f"{name}.weight"], grad_z, stride)
    params.accumulate(f"{name}.weight", grad_w)
    params.accumulate(f"{name}.bias", grad_b)
    return grad_x


def trunk_forward(params, cfg, img):
    """Run one image through the shared convolutional trunk."""
    expected = (cfg.input_height, cfg.input_width, 3)
    if img.shape != expected:
        raise ShapeError(f"image shape {img.shape}, network expects {expected}")
    s = cfg.activation_scale
    x = np.asarray(img, dtype=params.dtype)
    cache = []
    x, e = _conv_act_forward(params, "conv0", x, 1, s); cache.append(("conv", e))
    x, idx = layers.maxpool_forward(x, cfg.pool_rounding[0]); cache.append(("pool", idx))
    x, e = _conv_act_forward(params, "conv1", x, 1, s); cache.append(("conv", e))
    x, idx = layers.maxpool_forward(x, cfg.pool_rounding[1]); cache.append(("pool", idx))
    x, e = _conv_act_forward(params, "conv2", x, 1, s); cache.append(("conv", e))
    x, e = _conv_act_forward(params, "conv3", x, 1, s); cache.append(("conv", e))
    return x, cache


def _sequential_backward(params, cfg, cache, grad):
    s = cfg.activation_scale
    for kind, entry in reversed(cache):
        if kind == "conv":
            grad = _conv_act_backward(params, entry, grad, s)
        elif kind == "pool":
            grad = layers.maxpool_backward(entry, grad)
        elif kind == "flatten":
            grad = grad.reshape(entry)
        elif kind == "dropout":
            grad = layers.dropout_backward(entry, grad)
        elif kind == "fc":
            name, x, y, act = entry
            if act:
                grad = _tanh_backward(y, grad, s)
            grad, gw, gb = layers.fc_backward(x, params[f"{name}.weight"], grad)
            params.accumulate(f"{name}.weight", gw)
            params.accumulate(f"{name}.bias", gb)
        else:  # pragma: no cover
            raise AssertionError(kind)
    return grad


def head_forward(params, cfg, f, h, train=False, rng=None):
    """Joint tail: difference, summary, conv4, pool4, fc1-fc3 and the 2-way head."""
    s, n = cfg.activation_scale, cfg.neighborhood
    d = neighborhood_difference(f, h, n)
    cache = []
    x, e = _conv_act_forward(params, "summary", d, n, s); cache.append(("conv", e))
    x, e = _conv_act_forward(params, "conv4", x, 1, s); cache.append(("conv", e))
    x, idx = layers.maxpool_forward(x, cfg.pool_rounding[2]); cache.append(("pool", idx))
    cache.append(("flatten", x.shape))
    x = x.reshape(-1)
    for i in range(1, 4):
        name = f"fc{i}"
        y = layers.scaled_tanh(layers.fc_forward(x, params[f"{name}.weight"], params[f"{name}.bias"]), s)
        cache.append(("fc", (name, x, y, True)))
        x = y
        if i < 3:
            x, mask = layers.dropout(x, cfg.dropout_rate, train, rng)
            cache.append(("dropout", mask))
    logits = layers.fc_forward(x, params["head.weight"], params["head.bias"])
    cache.append(("fc", ("head", x, logits, False)))
    return logits, cache


@dataclass
class PairCache:
    version: int
    trunk_a: list
    trunk_b: list
    tail: list
    difference: np.ndarray = field(repr=False)


def forward_pair(params, cfg, img_a, img_b, train=False, rng=None):
    """Return ``(logits, cache)`` for one image pair. Logit 1 means "same"."""
    if train and cfg.dropout_rate > 0 and rng is None:
        raise UsageError("train mode with dropout needs an rng")
    f, cache_a = trunk_forward(params, cfg, img_a)
    h, cache_b = trunk_forward(params, cfg, img_b)
    logits, tail = head_forward(params, cfg, f, h, train, rng)
    diff = tail[0][1][1]  # input of the summary conv
    return logits, PairCache(params.version, cache_a, cache_b, tail, diff)


def backward_pair(params, cfg, cache, grad_logits):
    """Accumulate d(loss)/d(param) into ``params`` gradient buffers."""
    if not isinstance(cache, PairCache):
        raise UsageError("backward_pair needs the cache returned by forward_pair")
    if cache.version != params.version:
        raise UsageError("cache is stale: parameters changed since the forward pass")
    # this call's gradient is summed in fresh buffers and added once, so
    # repeating a call adds exactly the same amount again
    previous = params.detach_grads()
    grad_d = _sequential_backward(params, cfg, cache.tail, np.asarray(grad_logits, dtype=params.dtype))
    grad_f, grad_h = neighborhood_difference_backward(grad_d, cfg.neighborhood)
    _sequential_backward(params, cfg, cache.trunk_a, grad_f)
    _sequential_backward(params, cfg, cache.trunk_b, grad_h)
    params.restore_grads(previous)


def pair_loss(params, cfg, img_a, img_b, label, train=False, rng=None):
    """Forward + softmax cross-entropy. Returns ``(loss, grad_logits, cache)``."""
    logits, cache = forward_pair(params, cfg, img_a, img_b, train, rng)
    loss, grad = layers.softmax_cross_entropy(logits, label)
    return loss, grad, cache


def same_probability(logits):
    return float(layers.softmax(logits)[1])


def config_fields():
    return [f.name for f in fields(NetworkConfig)]
