"""Reverse-mode differentiation on an explicit tape.

A :class:`Tape` is an append-only list of nodes. Each differentiable op
computes its forward value eagerly and, when any input lives on a tape,
appends a node holding the input ids and a closure mapping the output
gradient to one gradient per input. :meth:`Tape.backward` walks the nodes
once in reverse order and sums contributions from every use of a value.

Values that are not on a tape (``Var.constant``) flow through the same ops
without recording anything, which is how inference runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from . import tensor as T
from .errors import ContractError


@dataclass
class Node:
    op: str
    inputs: tuple
    backward: Callable | None


class Var:
    __slots__ = ("value", "tape", "id")

    def __init__(self, value, tape: Tape | None = None, id: int | None = None):
        self.value = value
        self.tape = tape
        self.id = id

    @classmethod
    def constant(cls, value) -> Var:
        return cls(np.asarray(value))

    @property
    def shape(self):
        return self.value.shape

    @property
    def dtype(self):
        return self.value.dtype

    def __repr__(self):
        where = f"node {self.id}" if self.tape is not None else "constant"
        return f"Var(shape={self.value.shape}, dtype={self.value.dtype}, {where})"

    def __add__(self, other):
        return add(self, other) if isinstance(other, Var) else add_scalar(self, other)

    def __radd__(self, other):
        return add_scalar(self, other)

    def __sub__(self, other):
        return sub(self, other) if isinstance(other, Var) else add_scalar(self, -other)

    def __rsub__(self, other):
        return add_scalar(neg(self), other)

    def __mul__(self, other):
        return mul(self, other) if isinstance(other, Var) else mul_scalar(self, other)

    def __rmul__(self, other):
        return mul_scalar(self, other)

    def __neg__(self):
        return neg(self)


class Gradients(Mapping):
    """Gradients keyed by :class:`Var`; unreached leaves read as zeros."""

    def __init__(self, tape: Tape, grads: list):
        self._tape = tape
        self._grads = grads

    def __getitem__(self, var: Var) -> np.ndarray:
        if var.tape is not self._tape:
            raise KeyError("variable was not recorded on this tape")
        g = self._grads[var.id]
        return np.zeros_like(var.value) if g is None else g

    def __iter__(self):
        return iter(range(len(self._grads)))

    def __len__(self):
        return len(self._grads)


class Tape:
    def __init__(self):
        self.nodes: list[Node] = []

    def __len__(self):
        return len(self.nodes)

    def leaf(self, value) -> Var:
        value = np.asarray(value)
        self.nodes.append(Node("leaf", (), None))
        return Var(value, self, len(self.nodes) - 1)

    def watch(self, params: Mapping[str, np.ndarray]) -> dict[str, Var]:
        return {k: self.leaf(v) for k, v in params.items()}

    def record(self, op: str, inputs, value, backward) -> Var:
        ids = []
        for v in inputs:
            if v.tape is not None and v.tape is not self:
                raise ContractError(f"{op}: inputs recorded on different tapes")
            ids.append(v.id if v.tape is self else None)
        self.nodes.append(Node(op, tuple(ids), backward))
        return Var(value, self, len(self.nodes) - 1)

    def backward(self, loss: Var) -> Gradients:
        """Gradients of the scalar ``loss`` with respect to every node."""
        if loss.tape is not self:
            raise ContractError("loss was not recorded on this tape")
        if loss.value.size != 1:
            raise ContractError(f"backward needs a scalar loss, got shape {loss.value.shape}")
        grads: list = [None] * len(self.nodes)
        grads[loss.id] = np.ones_like(loss.value)
        for i in range(loss.id, -1, -1):
            g = grads[i]
            node = self.nodes[i]
            if g is None or node.backward is None:
                continue
            for j, gj in zip(node.inputs, node.backward(g)):
                if j is None or gj is None:
                    continue
                grads[j] = gj if grads[j] is None else grads[j] + gj
        return Gradients(self, grads)


def _tape_of(inputs) -> Tape | None:
    for v in inputs:
        if v.tape is not None:
            return v.tape
    return None


def apply(op: str, inputs, value, backward) -> Var:
    """Wrap a forward result, recording ``backward`` if any input is taped."""
    tape = _tape_of(inputs)
    if tape is None:
        return Var(value)
    return tape.record(op, inputs, value, backward)


def detach(v: Var) -> Var:
    return Var(v.value)


# elementwise


def add(a: Var, b: Var) -> Var:
    return apply("add", (a, b), T.zip_map(a.value, b.value, "add"), lambda g: (g, g))


def sub(a: Var, b: Var) -> Var:
    return apply("sub", (a, b), T.zip_map(a.value, b.value, "sub"), lambda g: (g, -g))


def mul(a: Var, b: Var) -> Var:
    av, bv = a.value, b.value
    return apply("mul", (a, b), T.zip_map(av, bv, "mul"), lambda g: (g * bv, g * av))


def add_scalar(a: Var, s: float) -> Var:
    return apply("add_s", (a,), T.scalar_map(a.value, "add_s", s), lambda g: (g,))


def mul_scalar(a: Var, s: float) -> Var:
    s = a.value.dtype.type(s)
    return apply("mul_s", (a,), T.scalar_map(a.value, "mul_s", s), lambda g: (g * s,))


def neg(a: Var) -> Var:
    return apply("neg", (a,), -a.value, lambda g: (-g,))


def square(a: Var) -> Var:
    av = a.value
    return apply("square", (a,), av * av, lambda g: (g * (av + av),))


def absolute(a: Var) -> Var:
    av = a.value
    return apply("abs", (a,), np.abs(av), lambda g: (g * np.sign(av),))


def log(a: Var, floor: float = 0.0) -> Var:
    """Natural log of ``max(a, floor)``; zero gradient where clamped."""
    av = a.value
    clipped = np.maximum(av, av.dtype.type(floor))

    def backward(g):
        return (np.where(av > floor, g / clipped, 0).astype(av.dtype),)

    return apply("log", (a,), np.log(clipped), backward)


# reductions


def mean(a: Var) -> Var:
    av = a.value
    count = av.size
    if count == 0:
        raise ContractError("mean of empty tensor")

    def backward(g):
        return (np.full(av.shape, g / count, dtype=av.dtype),)

    return apply("mean", (a,), np.asarray(T.reduce_mean(av)), backward)


def sum_all(a: Var) -> Var:
    av = a.value

    def backward(g):
        return (np.full(av.shape, g, dtype=av.dtype),)

    return apply("sum", (a,), np.asarray(av.sum(dtype=av.dtype)), backward)


# shape ops


def reshape(a: Var, shape) -> Var:
    old = a.value.shape
    return apply("reshape", (a,), a.value.reshape(shape), lambda g: (g.reshape(old),))


def transpose(a: Var, axes) -> Var:
    inv = np.argsort(axes)
    value = np.ascontiguousarray(a.value.transpose(axes))
    return apply("transpose", (a,), value, lambda g: (np.ascontiguousarray(g.transpose(inv)),))
