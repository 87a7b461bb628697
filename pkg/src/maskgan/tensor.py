"""Rank-4 NCHW array primitives.

Tensors are plain ``numpy.ndarray`` objects of shape ``(n, c, h, w)`` in
C order. float32 is the training dtype; float64 is used for gradient checks.
Nothing here mutates its inputs and nothing broadcasts.
"""

from __future__ import annotations

import numpy as np

from .errors import AllocationError, ContractError
from .rng import Rng

DEFAULT_MAX_ELEMENTS = 1 << 28

_ZIP_OPS = {"add": np.add, "sub": np.subtract, "mul": np.multiply}


def tensor_create(shape, fill="zeros", *, value=0.0, mean=0.0, std=1.0,
                  rng: Rng | None = None, dtype=np.float32,
                  max_elements: int = DEFAULT_MAX_ELEMENTS) -> np.ndarray:
    """Allocate an ``(n, c, h, w)`` tensor.

    ``fill`` is one of ``"zeros"``, ``"constant"`` (uses ``value``) or
    ``"normal"`` (draws ``mean + std * N(0, 1)`` from ``rng``).
    """
    shape = tuple(int(d) for d in shape)
    if len(shape) != 4:
        raise ContractError(f"expected rank-4 shape, got {shape}")
    if any(d < 1 for d in shape):
        raise ContractError(f"all dimensions must be >= 1, got {shape}")
    count = 1
    for d in shape:
        count *= d
    if count > max_elements:
        raise AllocationError(
            f"shape {shape} needs {count} elements, limit is {max_elements}")
    if fill == "zeros":
        return np.zeros(shape, dtype=dtype)
    if fill == "constant":
        return np.full(shape, value, dtype=dtype)
    if fill == "normal":
        if rng is None:
            raise ContractError("normal fill needs an rng")
        return rng.normal(count, mean, std).reshape(shape).astype(dtype)
    raise ContractError(f"unknown fill {fill!r}")


def check_same_shape(a: np.ndarray, b: np.ndarray, what: str = "operands"):
    if a.shape != b.shape:
        raise ContractError(f"{what} shape mismatch: {a.shape} vs {b.shape}")


def zip_map(a: np.ndarray, b: np.ndarray, op: str) -> np.ndarray:
    check_same_shape(a, b)
    try:
        return _ZIP_OPS[op](a, b)
    except KeyError:
        raise ContractError(f"unknown elementwise op {op!r}") from None


def scalar_map(a: np.ndarray, op: str, s: float = 0.0) -> np.ndarray:
    if op == "add_s":
        return a + a.dtype.type(s)
    if op == "mul_s":
        return a * a.dtype.type(s)
    if op == "neg":
        return -a
    if op == "square":
        return a * a
    raise ContractError(f"unknown scalar op {op!r}")


def reduce_mean(t: np.ndarray) -> float:
    if t.size == 0:
        raise ContractError("mean of empty tensor")
    return t.mean(dtype=t.dtype)


def reduce_mean_per_channel(t: np.ndarray) -> np.ndarray:
    if t.size == 0:
        raise ContractError("mean of empty tensor")
    return t.mean(axis=(0, 2, 3), dtype=t.dtype)


def reduce_var_per_channel(t: np.ndarray, means: np.ndarray) -> np.ndarray:
    """Biased (divide-by-count) per-channel variance around ``means``."""
    d = t - means.reshape(1, -1, 1, 1)
    return (d * d).mean(axis=(0, 2, 3), dtype=t.dtype)


def conv_output_size(size: int, k: int, stride: int, pad: int) -> int:
    span = size + 2 * pad - k
    if span < 0 or span % stride:
        raise ContractError(
            f"non-integral output size: ({size} + 2*{pad} - {k}) / {stride} + 1")
    return span // stride + 1


def im2col(x: np.ndarray, kernel, stride: int = 1, pad: int = 0) -> np.ndarray:
    """Lower ``x`` to a ``(c*kh*kw, n*oh*ow)`` patch matrix.

    Row ``(ci*kh + u)*kw + v`` holds input channel ``ci`` at kernel offset
    ``(u, v)``; column ``(b*oh + i)*ow + j`` is output position ``(b, i, j)``.
    """
    kh, kw = kernel
    n, c, h, w = x.shape
    oh = conv_output_size(h, kh, stride, pad)
    ow = conv_output_size(w, kw, stride, pad)
    xc = np.zeros((c, n, h + 2 * pad, w + 2 * pad), dtype=x.dtype)
    xc[:, :, pad:pad + h, pad:pad + w] = x.transpose(1, 0, 2, 3)
    cols = np.empty((c, kh, kw, n, oh, ow), dtype=x.dtype)
    hi = stride * (oh - 1) + 1
    wi = stride * (ow - 1) + 1
    for u in range(kh):
        for v in range(kw):
            cols[:, u, v] = xc[:, :, u:u + hi:stride, v:v + wi:stride]
    return cols.reshape(c * kh * kw, n * oh * ow)


def col2im(cols: np.ndarray, shape, kernel, stride: int = 1, pad: int = 0) -> np.ndarray:
    """Adjoint of :func:`im2col`: scatter-add columns back into ``shape``."""
    kh, kw = kernel
    n, c, h, w = shape
    oh = conv_output_size(h, kh, stride, pad)
    ow = conv_output_size(w, kw, stride, pad)
    if cols.shape != (c * kh * kw, n * oh * ow):
        raise ContractError(
            f"column matrix {cols.shape} does not match image {tuple(shape)}")
    cols = cols.reshape(c, kh, kw, n, oh, ow)
    out = np.zeros((c, n, h + 2 * pad, w + 2 * pad), dtype=cols.dtype)
    hi = stride * (oh - 1) + 1
    wi = stride * (ow - 1) + 1
    for u in range(kh):
        for v in range(kw):
            out[:, :, u:u + hi:stride, v:v + wi:stride] += cols[:, u, v]
    return np.ascontiguousarray(out[:, :, pad:pad + h, pad:pad + w].transpose(1, 0, 2, 3))
