"""The ``MFG1`` binary checkpoint.

Layout (all integers and floats little-endian)::

    b"MFG1"  u32 version  u32 tensor_count
    tensor_count x [u16 name_len, name (utf-8), u8 ndim, ndim x u32 dim, f32 payload]
    2 x optimizer  [f64 lr, f64 beta1, f64 beta2, f64 eps, u64 t,
                    u32 count, count x tensor (first moments),
                    u32 count, count x tensor (second moments)]
    rng            [u64 seed, u64 counter]
    u64 iteration
    ema            [u8 present, 4 x f64 (g_loss, d_loss, acc_real, acc_fake)]

Tensor names are prefixed ``G.`` / ``D.`` for parameters and ``G.buf.`` /
``D.buf.`` for batch-norm running statistics. Everything is stored as
float32, so a float32 training state round-trips bitwise.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from ..errors import (CheckpointError, CheckpointMagicError, CheckpointTruncatedError,
                      CheckpointVersionError)
from ..models import Discriminator, Generator
from ..optim import AdamState
from ..rng import Rng

MAGIC = b"MFG1"
VERSION = 1
EMA_KEYS = ("g_loss", "d_loss", "acc_real", "acc_fake")


@dataclass
class TrainState:
    """Everything needed to continue training bitwise."""

    g: Generator
    d: Discriminator
    opt_g: AdamState
    opt_d: AdamState
    rng: Rng
    iteration: int = 0
    ema: dict = field(default_factory=dict)


class _Writer:
    def __init__(self):
        self.parts = []

    def pack(self, fmt, *vals):
        self.parts.append(struct.pack("<" + fmt, *vals))

    def tensor(self, name: str, arr: np.ndarray):
        raw = name.encode("utf-8")
        arr = np.asarray(arr)
        self.pack("H", len(raw))
        self.parts.append(raw)
        self.pack("B", arr.ndim)
        self.pack(f"{arr.ndim}I", *arr.shape)
        self.parts.append(arr.astype("<f4").tobytes())

    def tensors(self, items: dict):
        self.pack("I", len(items))
        for k, v in items.items():
            self.tensor(k, v)


class _Reader:
    def __init__(self, data: bytes):
        self.data = memoryview(data)
        self.pos = 0

    def take(self, n: int, what: str) -> memoryview:
        if self.pos + n > len(self.data):
            raise CheckpointTruncatedError(
                f"checkpoint truncated while reading {what} at byte {self.pos}")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str, what: str):
        fmt = "<" + fmt
        vals = struct.unpack(fmt, self.take(struct.calcsize(fmt), what))
        return vals if len(vals) > 1 else vals[0]

    def tensor(self) -> tuple[str, np.ndarray]:
        name = bytes(self.take(self.unpack("H", "name length"), "name")).decode("utf-8")
        ndim = self.unpack("B", f"{name} rank")
        shape = self.unpack(f"{ndim}I", f"{name} dims") if ndim else ()
        shape = (shape,) if isinstance(shape, int) else tuple(shape)
        count = int(np.prod(shape, dtype=np.int64))
        payload = self.take(4 * count, f"{name} payload")
        return name, np.frombuffer(payload, dtype="<f4").astype(np.float32).reshape(shape)

    def tensors(self) -> dict:
        return dict(self.tensor() for _ in range(self.unpack("I", "tensor count")))


def save_checkpoint(state: TrainState) -> bytes:
    w = _Writer()
    w.parts.append(MAGIC)
    w.pack("I", VERSION)
    named = {}
    for tag, model in (("G", state.g), ("D", state.d)):
        named.update({f"{tag}.{k}": v for k, v in model.params.items()})
        named.update({f"{tag}.buf.{k}": v for k, v in model.buffers.items()})
    w.tensors(named)
    for opt in (state.opt_g, state.opt_d):
        w.pack("4dQ", opt.lr, opt.beta1, opt.beta2, opt.eps, opt.t)
        w.tensors(opt.m)
        w.tensors(opt.v)
    w.pack("QQ", *state.rng.state())
    w.pack("Q", state.iteration)
    if state.ema:
        w.pack("B4d", 1, *(state.ema[k] for k in EMA_KEYS))
    else:
        w.pack("B4d", 0, 0.0, 0.0, 0.0, 0.0)
    return b"".join(w.parts)


def read_tensors(data: bytes) -> dict:
    """Only the named tensor section (parameters and buffers of both models)."""
    r = _header(data)
    return r.tensors()


def _header(data: bytes) -> _Reader:
    if len(data) < 4:
        raise CheckpointTruncatedError("checkpoint is shorter than its magic")
    if bytes(data[:4]) != MAGIC:
        raise CheckpointMagicError(f"bad checkpoint magic {bytes(data[:4])!r}")
    r = _Reader(data)
    r.pos = 4
    version = r.unpack("I", "version")
    if version != VERSION:
        raise CheckpointVersionError(f"unsupported checkpoint version {version}")
    return r


def load_checkpoint(data: bytes, g: Generator, d: Discriminator) -> TrainState:
    """Decode ``data`` into copies of ``g`` and ``d`` (which supply the architecture).

    Raises distinct :class:`CheckpointError` subclasses for a bad magic, an
    unknown version and truncation; any tensor-name or shape mismatch with
    the given models is a plain :class:`CheckpointError`.
    """
    r = _header(data)
    named = r.tensors()
    models = []
    for tag, model in (("G", g), ("D", d)):
        params = _take_group(named, f"{tag}.", model.params)
        buffers = _take_group(named, f"{tag}.buf.", model.buffers)
        models.append(type(model)(model.cfg, params, buffers, model.slope,
                                  model.bn_momentum, model.bn_eps))
    if named:
        raise CheckpointError(f"unexpected tensors {sorted(named)[:5]}")
    opts = []
    for model in models:
        lr, b1, b2, eps, t = r.unpack("4dQ", "optimizer header")
        m = r.tensors()
        v = r.tensors()
        for name, group in (("first", m), ("second", v)):
            _check_shapes(group, model.params, f"{name} moments")
        opts.append(AdamState(lr, b1, b2, eps, t, m, v))
    seed, counter = r.unpack("QQ", "rng state")
    iteration = r.unpack("Q", "iteration")
    present, *ema = r.unpack("B4d", "ema")
    if r.pos != len(r.data):
        raise CheckpointError(f"{len(r.data) - r.pos} trailing bytes after checkpoint")
    return TrainState(models[0], models[1], opts[0], opts[1], Rng(seed, counter), iteration,
                      dict(zip(EMA_KEYS, ema)) if present else {})


def _take_group(named: dict, prefix: str, like: dict) -> dict:
    out = {}
    for k in like:
        key = prefix + k
        if key not in named:
            raise CheckpointError(f"checkpoint lacks tensor {key}")
        out[k] = named.pop(key)
    _check_shapes(out, like, prefix)
    return out


def _check_shapes(group: dict, like: dict, what: str):
    if group.keys() != like.keys():
        raise CheckpointError(f"{what}: tensor names do not match the model")
    for k, v in group.items():
        if v.shape != like[k].shape:
            raise CheckpointError(f"{what}{k}: shape {v.shape}, model expects {like[k].shape}")
