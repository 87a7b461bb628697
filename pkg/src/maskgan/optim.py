"""Adam with bias correction over named parameter dictionaries."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, NonFiniteError


@dataclass
class AdamState:
    lr: float = 0.00013
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    @classmethod
    def for_params(cls, params, **hyper) -> AdamState:
        s = cls(**hyper)
        s.m = {k: np.zeros_like(p) for k, p in params.items()}
        s.v = {k: np.zeros_like(p) for k, p in params.items()}
        return s


def adam_step(params: dict, grads: dict, state: AdamState) -> tuple[dict, AdamState]:
    """One Adam update. Returns new ``(params, state)``; inputs are not modified.

    A non-finite gradient rejects the whole step with :class:`NonFiniteError`
    naming the parameter, leaving ``params`` and ``state`` as they were.
    """
    if params.keys() != grads.keys():
        raise ContractError("params and grads must have the same names")
    for k, g in grads.items():
        if g.shape != params[k].shape:
            raise ContractError(f"gradient for {k} has shape {g.shape}, expected {params[k].shape}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"non-finite gradient for {k}; step rejected", where=k)
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    new_params, new_m, new_v = {}, {}, {}
    for k, p in params.items():
        g = grads[k]
        dt = p.dtype.type
        m = state.m.get(k)
        v = state.v.get(k)
        if m is None:
            m = np.zeros_like(p)
            v = np.zeros_like(p)
        m = dt(b1) * m + dt(1.0 - b1) * g
        v = dt(b2) * v + dt(1.0 - b2) * (g * g)
        mhat = m / dt(c1)
        vhat = v / dt(c2)
        new_params[k] = p - dt(state.lr) * mhat / (np.sqrt(vhat) + dt(state.eps))
        new_m[k] = m
        new_v[k] = v
    return new_params, AdamState(state.lr, b1, b2, state.eps, t, new_m, new_v)
