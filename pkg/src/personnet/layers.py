"""Forward and backward kernels for the generic layers.

Feature maps are single images laid out ``[height, width, channels]``.
Convolution weights are ``[out_channels, in_channels, fh, fw]`` and are
applied as cross-correlation (no kernel flip), valid padding only.
"""
import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import NumericError, ShapeError

ACTIVATION_SCALE = 1.5


# ---------------------------------------------------------------- convolution

def conv_output_extent(size, filt, stride=1):
    return (size - filt) // stride + 1


def _windows(x, fh, fw, stride):
    # [H', W', C, fh, fw] read-only view
    v = sliding_window_view(x, (fh, fw), axis=(0, 1))
    return v[::stride, ::stride]


def _check_conv(x, weight, bias, stride):
    if x.ndim != 3:
        raise ShapeError(f"conv input must be [H,W,C], got {x.shape}")
    if weight.ndim != 4:
        raise ShapeError(f"conv weights must be [Cout,Cin,fh,fw], got {weight.shape}")
    cout, cin, fh, fw = weight.shape
    if x.shape[2] != cin:
        raise ShapeError(f"input has {x.shape[2]} channels, filters expect {cin}")
    if bias.shape != (cout,):
        raise ShapeError(f"bias shape {bias.shape} does not match {cout} filters")
    if stride < 1:
        raise ShapeError(f"stride must be >= 1, got {stride}")
    if x.shape[0] < fh or x.shape[1] < fw:
        raise ShapeError(f"input {x.shape[:2]} smaller than filter {(fh, fw)}")


def conv2d_forward(x, weight, bias, stride=1):
    """Valid cross-correlation: ``out[i,j,k] = bias[k] + sum(weight[k] * window(i,j))``."""
    _check_conv(x, weight, bias, stride)
    win = _windows(x, weight.shape[2], weight.shape[3], stride)
    return np.tensordot(win, weight, axes=([2, 3, 4], [1, 2, 3])) + bias


def conv2d_backward(x, weight, grad_out, stride=1):
    """Return ``(grad_x, grad_weight, grad_bias)`` for :func:`conv2d_forward`."""
    cout, _, fh, fw = weight.shape
    ho = conv_output_extent(x.shape[0], fh, stride)
    wo = conv_output_extent(x.shape[1], fw, stride)
    if grad_out.shape != (ho, wo, cout):
        raise ShapeError(f"grad_out shape {grad_out.shape}, expected {(ho, wo, cout)}")
    win = _windows(x, fh, fw, stride)
    grad_w = np.tensordot(grad_out, win, axes=([0, 1], [0, 1]))
    grad_b = grad_out.sum(axis=(0, 1))
    grad_win = np.tensordot(grad_out, weight, axes=([2], [0]))  # [H',W',C,fh,fw]
    grad_x = np.zeros_like(x, dtype=np.result_type(x, grad_out))
    hspan = stride * (ho - 1) + 1
    wspan = stride * (wo - 1) + 1
    for i in range(fh):
        for j in range(fw):
            grad_x[i:i + hspan:stride, j:j + wspan:stride] += grad_win[:, :, :, i, j]
    return grad_x, grad_w, grad_b


# ---------------------------------------------------------------- max pooling

@dataclass(frozen=True)
class PoolIndices:
    """Flat input offsets of each pooled maximum, kept for the backward pass."""
    flat: np.ndarray
    input_shape: tuple


def pool_output_extent(size, rounding):
    if rounding == "ceil":
        return math.ceil(size / 2)
    if rounding == "floor":
        return size // 2
    raise ValueError(f"pool rounding must be 'ceil' or 'floor', got {rounding!r}")


def maxpool_forward(x, rounding="floor"):
    """2x2 max-pool with stride 2.

    In ``ceil`` mode a trailing odd row/column forms a truncated window (padded
    with -inf). Ties go to the first element in row-major window order.
    """
    if x.ndim != 3:
        raise ShapeError(f"pool input must be [H,W,C], got {x.shape}")
    h, w, c = x.shape
    ho, wo = pool_output_extent(h, rounding), pool_output_extent(w, rounding)
    if ho < 1 or wo < 1:
        raise ShapeError(f"pooling {x.shape[:2]} in {rounding} mode leaves no output")
    padded = np.full((2 * ho, 2 * wo, c), -np.inf, dtype=x.dtype)
    hh, ww = min(h, 2 * ho), min(w, 2 * wo)
    padded[:hh, :ww] = x[:hh, :ww]
    blocks = padded.reshape(ho, 2, wo, 2, c).transpose(0, 2, 4, 1, 3).reshape(ho, wo, c, 4)
    k = blocks.argmax(axis=-1)
    out = np.take_along_axis(blocks, k[..., None], axis=-1)[..., 0]
    rows = 2 * np.arange(ho)[:, None, None] + k // 2
    cols = 2 * np.arange(wo)[None, :, None] + k % 2
    flat = (rows * w + cols) * c + np.arange(c)[None, None, :]
    return out, PoolIndices(flat, x.shape)


def maxpool_backward(indices, grad_out):
    if grad_out.shape != indices.flat.shape:
        raise ShapeError(f"grad_out shape {grad_out.shape}, expected {indices.flat.shape}")
    grad_x = np.zeros(int(np.prod(indices.input_shape)), dtype=grad_out.dtype)
    # windows never overlap, so every input position is written at most once
    grad_x[indices.flat.ravel()] = grad_out.ravel()
    return grad_x.reshape(indices.input_shape)


# ---------------------------------------------------------------- activations

def scaled_tanh(x, scale=ACTIVATION_SCALE):
    return np.tanh(scale * x)


def scaled_tanh_backward(y, grad_out, scale=ACTIVATION_SCALE):
    """Gradient through ``y = tanh(scale * x)`` expressed with the output ``y``."""
    return grad_out * scale * (1.0 - y * y)


# ---------------------------------------------------------------- fully connected

def fc_forward(x, weight, bias):
    if x.ndim != 1 or weight.ndim != 2 or weight.shape[1] != x.shape[0]:
        raise ShapeError(f"fc: input {x.shape} incompatible with weights {weight.shape}")
    if bias.shape != (weight.shape[0],):
        raise ShapeError(f"fc: bias {bias.shape} does not match weights {weight.shape}")
    return weight @ x + bias


def fc_backward(x, weight, grad_out):
    if grad_out.shape != (weight.shape[0],):
        raise ShapeError(f"fc: grad_out {grad_out.shape}, expected {(weight.shape[0],)}")
    return weight.T @ grad_out, np.outer(grad_out, x), grad_out.copy()


# ---------------------------------------------------------------- dropout

def dropout(x, rate, train, rng=None):
    """Inverted dropout. Returns ``(output, mask)``; the mask already carries
    the ``1 / (1 - rate)`` survivor scaling so backward is ``grad * mask``."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
    if not train or rate == 0.0:
        return x, np.ones_like(x)
    keep = rng.random(x.shape) >= rate
    mask = keep.astype(x.dtype) / x.dtype.type(1.0 - rate)
    return x * mask, mask


def dropout_backward(mask, grad_out):
    return grad_out * mask


# ---------------------------------------------------------------- loss

def softmax(logits):
    z = logits - np.max(logits)
    e = np.exp(z)
    return e / e.sum()


def softmax_cross_entropy(logits, label):
    """Return ``(loss, grad_logits)`` for a single example."""
    if not np.all(np.isfinite(logits)):
        raise NumericError(f"non-finite logits {logits}")
    z = logits - np.max(logits)
    log_norm = np.log(np.exp(z).sum())
    loss = float(log_norm - z[label])
    grad = np.exp(z - log_norm)
    grad[label] -= 1.0
    return loss, grad
