"""Differentiable layers: convolution, transposed convolution, batch norm,
Leaky ReLU, sigmoid and channel concatenation.

Every function takes and returns :class:`~maskgan.autodiff.Var` objects, so
the same code path serves training (inputs on a tape) and inference
(constant inputs, nothing recorded).
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .autodiff import Var, apply
from .errors import ContractError

LEAKY_SLOPE = 0.2
BN_EPS = 1e-5
BN_MOMENTUM = 0.1

_pattern_log: list | None = None


@contextmanager
def trace_activation_pattern():
    """Collect the ``x >= 0`` mask of every leaky_relu evaluated inside the block.

    Used by the gradient checker to notice finite differences that straddle
    a kink. Not thread-safe.
    """
    global _pattern_log
    prev, _pattern_log = _pattern_log, []
    try:
        yield _pattern_log
    finally:
        _pattern_log = prev


def _as_var(v) -> Var:
    return v if isinstance(v, Var) else Var.constant(v)


@dataclass
class Conv2dParams:
    """Kernel ``(out_c, in_c, kh, kw)`` plus bias.

    For :func:`conv_transpose2d` the same weight is read as the adjoint map,
    i.e. it consumes ``out_c`` channels and produces ``in_c`` channels, and
    the bias has length ``in_c``.
    """

    weight: Var | np.ndarray
    bias: Var | np.ndarray
    stride: int = 1
    pad: int = 0

    def __post_init__(self):
        self.weight = _as_var(self.weight)
        self.bias = _as_var(self.bias)
        if self.weight.value.ndim != 4:
            raise ContractError("conv weight must be rank 4")
        kh, kw = self.weight.value.shape[2:]
        if kh < 1 or kw < 1 or self.stride < 1 or self.pad < 0:
            raise ContractError(
                f"invalid conv geometry k=({kh},{kw}) stride={self.stride} pad={self.pad}")


@dataclass
class BatchNormParams:
    gamma: Var | np.ndarray
    beta: Var | np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = BN_MOMENTUM
    eps: float = BN_EPS

    def __post_init__(self):
        self.gamma = _as_var(self.gamma)
        self.beta = _as_var(self.beta)
        c = self.running_mean.shape[0]
        if self.gamma.value.shape != (c,) or self.beta.value.shape != (c,):
            raise ContractError("gamma/beta length must equal channel count")
        if np.any(self.running_var < 0):
            raise ContractError("running_var must be non-negative")


def conv2d(x: Var, p: Conv2dParams) -> Var:
    w, b = p.weight.value, p.bias.value
    o, c, kh, kw = w.shape
    n, cx, h, wd = x.value.shape
    if cx != c:
        raise ContractError(f"conv2d expects {c} input channels, got {cx}")
    if b.shape != (o,):
        raise ContractError(f"conv2d bias must have shape ({o},), got {b.shape}")
    s, pad = p.stride, p.pad
    oh = T.conv_output_size(h, kh, s, pad)
    ow = T.conv_output_size(wd, kw, s, pad)
    cols = T.im2col(x.value, (kh, kw), s, pad)
    wm = w.reshape(o, -1)
    out = (wm @ cols + b[:, None]).reshape(o, n, oh, ow).transpose(1, 0, 2, 3)
    out = np.ascontiguousarray(out)
    xshape = x.value.shape

    want_dx = x.tape is not None

    def backward(g):
        gm = g.transpose(1, 0, 2, 3).reshape(o, -1)
        dx = T.col2im(wm.T @ gm, xshape, (kh, kw), s, pad) if want_dx else None
        dw = (gm @ cols.T).reshape(w.shape)
        return dx, dw, gm.sum(axis=1)

    return apply("conv2d", (x, p.weight, p.bias), out, backward)


def conv_transpose2d(x: Var, p: Conv2dParams) -> Var:
    w, b = p.weight.value, p.bias.value
    ci, co, kh, kw = w.shape
    n, cx, h, wd = x.value.shape
    if cx != ci:
        raise ContractError(f"conv_transpose2d expects {ci} input channels, got {cx}")
    if b.shape != (co,):
        raise ContractError(f"conv_transpose2d bias must have shape ({co},), got {b.shape}")
    s, pad = p.stride, p.pad
    oh = (h - 1) * s - 2 * pad + kh
    ow = (wd - 1) * s - 2 * pad + kw
    if oh < 1 or ow < 1:
        raise ContractError(f"conv_transpose2d output size ({oh}, {ow}) is not positive")
    xm = x.value.transpose(1, 0, 2, 3).reshape(ci, -1)
    wm = w.reshape(ci, -1)
    out = T.col2im(wm.T @ xm, (n, co, oh, ow), (kh, kw), s, pad)
    out += b.reshape(1, co, 1, 1)

    def backward(g):
        gcols = T.im2col(g, (kh, kw), s, pad)
        dx = (wm @ gcols).reshape(ci, n, h, wd).transpose(1, 0, 2, 3)
        dw = (xm @ gcols.T).reshape(w.shape)
        return np.ascontiguousarray(dx), dw, g.sum(axis=(0, 2, 3))

    return apply("conv_transpose2d", (x, p.weight, p.bias), out, backward)


def batchnorm(x: Var, p: BatchNormParams, mode: str = "train",
              update_stats: bool = True) -> Var:
    """Per-channel batch normalization.

    In ``"train"`` mode the batch mean and biased variance normalize ``x``
    and, when ``update_stats`` is set, ``p.running_mean``/``p.running_var``
    are rebound to ``(1 - momentum) * running + momentum * batch``. In
    ``"infer"`` mode the running statistics are used and ``p`` is untouched.
    """
    xv = x.value
    n, c, h, w = xv.shape
    gamma, beta = p.gamma.value, p.beta.value
    if gamma.shape != (c,):
        raise ContractError(f"batchnorm has {gamma.shape[0]} channels, input has {c}")
    dt = xv.dtype
    count = n * h * w
    if mode == "train":
        if count < 2:
            raise ContractError("batchnorm in train mode needs n*h*w >= 2 per channel")
        mu = T.reduce_mean_per_channel(xv)
        var = T.reduce_var_per_channel(xv, mu)
        if update_stats:
            m = p.momentum
            p.running_mean = ((1 - m) * p.running_mean + m * mu).astype(p.running_mean.dtype)
            p.running_var = ((1 - m) * p.running_var + m * var).astype(p.running_var.dtype)
    elif mode == "infer":
        mu = p.running_mean.astype(dt)
        var = p.running_var.astype(dt)
    else:
        raise ContractError(f"unknown batchnorm mode {mode!r}")
    inv = (1.0 / np.sqrt(var + dt.type(p.eps))).astype(dt)
    xhat = (xv - mu.reshape(1, c, 1, 1)) * inv.reshape(1, c, 1, 1)
    out = xhat * gamma.reshape(1, c, 1, 1) + beta.reshape(1, c, 1, 1)

    def backward(g):
        dgamma = (g * xhat).sum(axis=(0, 2, 3))
        dbeta = g.sum(axis=(0, 2, 3))
        dxhat = g * gamma.reshape(1, c, 1, 1)
        if mode == "train":
            s1 = dxhat.sum(axis=(0, 2, 3)).reshape(1, c, 1, 1)
            s2 = (dxhat * xhat).sum(axis=(0, 2, 3)).reshape(1, c, 1, 1)
            dx = (inv.reshape(1, c, 1, 1) / count) * (count * dxhat - s1 - xhat * s2)
        else:
            dx = dxhat * inv.reshape(1, c, 1, 1)
        return dx.astype(dt), dgamma, dbeta

    return apply("batchnorm", (x, p.gamma, p.beta), out, backward)


def leaky_relu(x: Var, slope: float = LEAKY_SLOPE) -> Var:
    if not 0.0 <= slope < 1.0:
        raise ContractError(f"leaky_relu slope must lie in [0, 1), got {slope}")
    xv = x.value
    s = xv.dtype.type(slope)
    pos = xv >= 0
    if _pattern_log is not None:
        _pattern_log.append(pos)
    out = np.maximum(xv, xv * s)
    return apply("leaky_relu", (x,), out, lambda g: (np.where(pos, g, g * s),))


def sigmoid(x: Var) -> Var:
    xv = x.value
    e = np.exp(-np.abs(xv))
    out = np.where(xv >= 0, 1.0 / (1.0 + e), e / (1.0 + e)).astype(xv.dtype)
    return apply("sigmoid", (x,), out, lambda g: (g * out * (1 - out),))


def concat_channels(a: Var, b: Var) -> Var:
    av, bv = a.value, b.value
    if av.shape[0] != bv.shape[0] or av.shape[2:] != bv.shape[2:]:
        raise ContractError(f"cannot concatenate {av.shape} and {bv.shape} along channels")
    ca = av.shape[1]
    out = np.concatenate([av, bv], axis=1)
    return apply("concat", (a, b), out,
                 lambda g: (np.ascontiguousarray(g[:, :ca]), np.ascontiguousarray(g[:, ca:])))


def slice_channels(x: Var, start: int, stop: int) -> Var:
    xv = x.value
    c = xv.shape[1]
    if not 0 <= start < stop <= c:
        raise ContractError(f"channel slice [{start}:{stop}] out of range for {c} channels")

    def backward(g):
        dx = np.zeros_like(xv)
        dx[:, start:stop] = g
        return (dx,)

    return apply("slice", (x,), np.ascontiguousarray(xv[:, start:stop]), backward)
