"""Dense tensor helpers.

Tensors are plain row-major ``numpy.ndarray`` objects. The functions here add
the shape and finiteness checks the rest of the package relies on.
"""
import numpy as np

from .errors import NumericError, ShapeError

DEFAULT_DTYPE = np.float32


def create(shape, fill=0.0, dtype=DEFAULT_DTYPE):
    """Build a C-contiguous tensor of ``shape``.

    ``fill`` is either a scalar broadcast to every element or a flat sequence
    holding exactly ``prod(shape)`` values in row-major order.
    """
    shape = tuple(int(s) for s in shape)
    if not shape or any(s < 1 for s in shape):
        raise ShapeError(f"extents must all be >= 1, got {shape}")
    if np.isscalar(fill):
        return np.full(shape, fill, dtype=dtype)
    data = np.asarray(fill, dtype=dtype).ravel()
    if data.size != int(np.prod(shape)):
        raise ShapeError(
            f"data has {data.size} elements, shape {shape} needs {int(np.prod(shape))}")
    return np.ascontiguousarray(data.reshape(shape))


def flat_index(shape, index):
    """Row-major flat offset of a multi-index."""
    strides = np.cumprod((1,) + tuple(shape[:0:-1]))[::-1]
    return int(sum(i * s for i, s in zip(index, strides)))


def check_finite(x, what="tensor"):
    if not np.all(np.isfinite(x)):
        raise NumericError(f"{what} contains NaN or Inf")
    return x


_OPS = {
    "add": np.add,
    "sub": np.subtract,
    "mul": np.multiply,
}


def elementwise(op, a, b):
    """Apply ``add``, ``sub``, ``mul`` or ``scale`` without broadcasting."""
    a = np.asarray(a)
    if op == "scale":
        if not np.isscalar(b):
            raise ShapeError("scale takes a scalar second operand")
        return check_finite(a * b)
    if op not in _OPS:
        raise ValueError(f"unknown elementwise op {op!r}")
    if np.isscalar(b):
        return check_finite(_OPS[op](a, b))
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} differ")
    return check_finite(_OPS[op](a, b))


def matmul(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul needs rank-2 operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner extents differ: {a.shape} x {b.shape}")
    return check_finite(a @ b)
