"""Central finite-difference verification of tape gradients.

:func:`grad_check` compares analytic gradients against
``(f(theta + eps e_i) - f(theta - eps e_i)) / (2 eps)`` coordinate by
coordinate. :func:`run_suite` applies it to every differentiable layer and
loss over seeded random float64 instances; the ``gradcheck`` command and the
acceptance tests both use it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import autodiff as ad
from . import layers as L
from . import objectives as O
from .autodiff import Tape, Var
from .layers import trace_activation_pattern
from .models import (DiscriminatorConfig, GeneratorConfig, build_discriminator,
                     build_generator, discriminator_forward, extract_patches,
                     generator_forward, merge_patches)
from .rng import Rng

DEFAULT_EPS = 1e-4
DEFAULT_TOL = 1e-4


@dataclass
class GradCheckResult:
    max_error: float
    worst: tuple | None = None
    failures: list = field(default_factory=list)
    coords_checked: int = 0
    kinks_skipped: int = 0

    @property
    def ok(self) -> bool:
        return not self.failures and self.max_error < DEFAULT_TOL


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)


def _same_pattern(a, b) -> bool:
    return len(a) == len(b) and all(np.array_equal(x, y) for x, y in zip(a, b))


def grad_check(f: Callable[[dict], Var], params: dict, eps: float = DEFAULT_EPS,
               max_coords: int | None = 64, rng: Rng | None = None,
               skip_kinks: bool = True) -> GradCheckResult:
    """Max relative error between tape and central-difference gradients.

    ``f`` maps a dict of :class:`Var` (same keys as ``params``) to a scalar
    Var and must be deterministic. Parameters larger than ``max_coords``
    are checked on a seeded random subset of coordinates.

    With ``skip_kinks`` a coordinate whose +-eps evaluations change the sign
    pattern of any leaky_relu input is not scored (the central difference
    is not a derivative there); such coordinates are counted in
    ``kinks_skipped``.
    """
    params = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    tape = Tape()
    vs = tape.watch(params)
    with trace_activation_pattern() as base_pattern:
        loss = f(vs)
    grads = tape.backward(loss)
    rng = rng or Rng(0)

    def value(name, idx, delta):
        shifted = dict(params)
        p = params[name].copy()
        p.flat[idx] += delta
        shifted[name] = p
        with trace_activation_pattern() as pattern:
            out = float(f({k: Var(v) for k, v in shifted.items()}).value)
        return out, pattern

    result = GradCheckResult(0.0)
    for name, p in params.items():
        g = grads[vs[name]]
        if max_coords is None or p.size <= max_coords:
            idxs = range(p.size)
        else:
            idxs = np.sort(rng.permutation(p.size)[:max_coords])
        for idx in idxs:
            idx = int(idx)
            (hi, p_hi), (lo, p_lo) = value(name, idx, eps), value(name, idx, -eps)
            if skip_kinks and not (_same_pattern(p_hi, base_pattern)
                                   and _same_pattern(p_lo, base_pattern)):
                result.kinks_skipped += 1
                continue
            result.coords_checked += 1
            if not (math.isfinite(hi) and math.isfinite(lo)):
                result.failures.append((name, idx, "non-finite function value"))
                continue
            numeric = (hi - lo) / (2 * eps)
            analytic = float(g.flat[idx])
            if not math.isfinite(analytic):
                result.failures.append((name, idx, "non-finite analytic gradient"))
                continue
            err = relative_error(analytic, numeric)
            if err > result.max_error:
                result.max_error = err
                result.worst = (name, idx)
    if result.failures and result.worst is None:
        result.max_error = math.inf
        result.worst = result.failures[0][:2]
    return result


def _normal(rng, shape, std=1.0):
    return rng.normal(int(np.prod(shape)), 0.0, std).reshape(shape)


def _uniform(rng, shape, lo, hi):
    return lo + (hi - lo) * rng.uniform(int(np.prod(shape))).reshape(shape)


def _project(out: Var, proj: np.ndarray) -> Var:
    """Scalarize with a fixed random projection so every output matters."""
    return ad.mean(ad.mul(out, Var(proj)))


# Each case maps an instance rng to (f, params).


def _case_conv2d(rng):
    shape = tuple(int(v) for v in rng.integers(1, 4, 2))
    n, c = shape
    o = int(rng.integers(1, 4)[0])
    k, s, p, hw = [(3, 1, 1, 8), (4, 2, 1, 8), (2, 2, 0, 8), (3, 2, 1, 9)][int(rng.integers(0, 4)[0])]
    oh = (hw + 2 * p - k) // s + 1
    proj = _normal(rng, (n, o, oh, oh))
    params = {"x": _normal(rng, (n, c, hw, hw)), "w": _normal(rng, (o, c, k, k), 0.5),
              "b": _normal(rng, (o,))}
    return (lambda v: _project(L.conv2d(v["x"], L.Conv2dParams(v["w"], v["b"], s, p)), proj),
            params)


def _case_conv_transpose2d(rng):
    n, ci, co = (int(v) for v in rng.integers(1, 4, 3))
    k, s, p = [(4, 2, 1), (3, 1, 1), (2, 2, 0)][int(rng.integers(0, 3)[0])]
    hw = 4
    oh = (hw - 1) * s - 2 * p + k
    proj = _normal(rng, (n, co, oh, oh))
    params = {"x": _normal(rng, (n, ci, hw, hw)), "w": _normal(rng, (ci, co, k, k), 0.5),
              "b": _normal(rng, (co,))}
    return (lambda v: _project(L.conv_transpose2d(v["x"], L.Conv2dParams(v["w"], v["b"], s, p)),
                               proj), params)


def _case_batchnorm(rng, mode="train"):
    n, c = 2, 3
    proj = _normal(rng, (n, c, 3, 3))
    params = {"x": _normal(rng, (n, c, 3, 3)) * 2 + 0.5,
              "gamma": _uniform(rng, (c,), 0.5, 1.5), "beta": _normal(rng, (c,))}
    rm, rv = _normal(rng, (c,)), _uniform(rng, (c,), 0.5, 2.0)

    def f(v):
        bn = L.BatchNormParams(v["gamma"], v["beta"], rm, rv)
        return _project(L.batchnorm(v["x"], bn, mode, update_stats=False), proj)

    return f, params


def _case_leaky_relu(rng):
    x = _normal(rng, (2, 2, 3, 3))
    # keep samples away from the kink; the finite difference is undefined there
    x = np.where(np.abs(x) < 1e-2, x + 0.1, x)
    proj = _normal(rng, x.shape)
    return lambda v: _project(L.leaky_relu(v["x"], 0.2), proj), {"x": x}


def _case_sigmoid(rng):
    x = _normal(rng, (2, 2, 3, 3)) * 3
    proj = _normal(rng, x.shape)
    return lambda v: _project(L.sigmoid(v["x"]), proj), {"x": x}


def _case_concat(rng):
    a, b = _normal(rng, (2, 1, 3, 3)), _normal(rng, (2, 2, 3, 3))
    proj = _normal(rng, (2, 3, 3, 3))
    return lambda v: _project(L.concat_channels(v["a"], v["b"]), proj), {"a": a, "b": b}


def _case_patches(rng):
    x = _normal(rng, (2, 2, 8, 8))
    proj = _normal(rng, (8, 2, 4, 4))
    return lambda v: _project(extract_patches(v["x"], 4), proj), {"x": x}


def _case_merge_patches(rng):
    x = _normal(rng, (8, 2, 4, 4))
    proj = _normal(rng, (2, 2, 8, 8))
    return lambda v: _project(merge_patches(v["x"], 2, 8, 8), proj), {"x": x}


def _case_stack(rng):
    """conv -> batchnorm -> leaky relu.

    The conv bias is held fixed: train-mode normalization cancels it, so its
    true gradient is identically zero and a relative error only measures
    roundoff.
    """
    x = _normal(rng, (2, 2, 6, 6))
    params = {"x": x, "w": _normal(rng, (3, 2, 4, 4), 0.3),
              "gamma": _uniform(rng, (3,), 0.5, 1.5), "beta": _normal(rng, (3,))}
    bias = _normal(rng, (3,))
    proj = _normal(rng, (2, 3, 3, 3))
    rm, rv = np.zeros(3), np.ones(3)

    def f(v):
        h = L.conv2d(v["x"], L.Conv2dParams(v["w"], bias, 2, 1))
        h = L.batchnorm(h, L.BatchNormParams(v["gamma"], v["beta"], rm, rv), "train", False)
        return _project(L.leaky_relu(h, 0.2), proj)

    return f, params


def _case_lsgan(rng):
    params = {"d_real": _normal(rng, (6, 1, 1, 1)), "d_fake": _normal(rng, (6, 1, 1, 1))}
    return lambda v: O.lsgan_d_loss(v["d_real"], v["d_fake"]), params


def _case_generator_objective(rng):
    x = _uniform(rng, (2, 1, 4, 4), 0, 1)
    gx = _uniform(rng, (2, 1, 4, 4), 0, 1)
    gx = np.where(np.abs(gx - x) < 1e-2, gx + 0.05, gx)
    lam = float(_uniform(rng, (1,), 0.0, 1.0)[0])
    params = {"d_fake": _normal(rng, (8, 1, 1, 1)), "x": x, "gx": gx}
    w = O.ObjectiveWeights(lam)
    return lambda v: O.generator_objective(v["d_fake"], v["x"], v["gx"], w), params


def _case_bce_d(rng):
    params = {"d_real": _uniform(rng, (6, 1, 1, 1), 0.05, 0.95),
              "d_fake": _uniform(rng, (6, 1, 1, 1), 0.05, 0.95)}
    return lambda v: O.bce_gan_losses(v["d_real"], v["d_fake"])[0], params


def _case_bce_g(rng):
    params = {"d_real": _uniform(rng, (6, 1, 1, 1), 0.05, 0.95),
              "d_fake": _uniform(rng, (6, 1, 1, 1), 0.05, 0.95)}
    return lambda v: O.bce_gan_losses(v["d_real"], v["d_fake"])[1], params


def _case_mse(rng):
    params = {"x": _normal(rng, (2, 1, 4, 4)), "gx": _normal(rng, (2, 1, 4, 4))}
    return lambda v: O.mse(v["x"], v["gx"]), params


def _case_discriminator(rng):
    """Gradient of the summed patch scores w.r.t. a 32x32 image."""
    cfg = DiscriminatorConfig(channels=(4, 4, 4, 4, 1))
    d = build_discriminator(cfg, rng.fork(1), dtype=np.float64)
    # the 0.02 init shrinks activations to the scale of eps, where every
    # perturbation crosses leaky-relu kinks; check at O(1) activations instead
    for k in d.params:
        if k.endswith(".weight"):
            d.params[k] = d.params[k] * 25.0
    cond = _uniform(rng, (2, 1, 32, 32), 0, 1)
    params = {"image": _uniform(rng, (2, 1, 32, 32), 0, 1)}
    proj = _normal(rng, (2, 1, 1, 1))

    def f(v):
        return _project(discriminator_forward(d, v["image"], Var(cond), mode="infer"), proj)

    return f, params


def _case_l1(rng):
    x = _uniform(rng, (2, 1, 4, 4), 0, 1)
    gx = _uniform(rng, (2, 1, 4, 4), 0, 1)
    gx = np.where(np.abs(gx - x) < 1e-2, gx + 0.05, gx)
    return lambda v: O.l1_recon(v["x"], v["gx"]), {"x": x, "gx": gx}


def _case_generator(rng):
    """Small U-Net in train mode, gradients w.r.t. input and a few layers."""
    cfg = GeneratorConfig(depth=2, base_channels=3, channel_cap=4, image_size=8)
    g = build_generator(cfg, rng.fork(1), dtype=np.float64)
    for k in g.params:
        if k.endswith(".weight"):
            g.params[k] = g.params[k] * 25.0
    checked = ("enc0.conv.weight", "dec0.deconv.weight", "dec1.bn.gamma", "out.conv.weight",
               "out.conv.bias")
    params = {"y": _uniform(rng, (2, 1, 8, 8), 0, 1)}
    params.update({k: g.params[k] for k in checked})
    proj = _normal(rng, (2, 1, 8, 8))

    def f(v):
        weights = {k: v.get(k, Var(a)) for k, a in g.params.items()}
        return _project(generator_forward(g, v["y"], weights, "train", update_stats=False), proj)

    return f, params


CASES: dict[str, Callable] = {
    "conv2d": _case_conv2d,
    "conv_transpose2d": _case_conv_transpose2d,
    "batchnorm_train": _case_batchnorm,
    "batchnorm_infer": lambda rng: _case_batchnorm(rng, "infer"),
    "leaky_relu": _case_leaky_relu,
    "sigmoid": _case_sigmoid,
    "concat_channels": _case_concat,
    "extract_patches": _case_patches,
    "merge_patches": _case_merge_patches,
    "conv_bn_lrelu_stack": _case_stack,
    "lsgan_d_loss": _case_lsgan,
    "generator_objective": _case_generator_objective,
    "bce_d_loss": _case_bce_d,
    "bce_g_loss": _case_bce_g,
    "l1_recon": _case_l1,
    "mse": _case_mse,
    "discriminator_32x32": _case_discriminator,
    "generator_unet": _case_generator,
}


def run_suite(instances: int = 20, seed: int = 0, eps: float = DEFAULT_EPS,
              names=None) -> dict[str, GradCheckResult]:
    """Aggregate result per case over ``instances`` seeded random instances.

    ``max_error``/``worst`` come from the worst instance; coordinate and
    kink counts and failures are summed over all instances.
    """
    root = Rng(seed)
    out = {}
    for ci, (name, make) in enumerate(CASES.items()):
        if names is not None and name not in names:
            continue
        agg = GradCheckResult(0.0)
        case_rng = root.fork(ci)
        for i in range(instances):
            inst = case_rng.fork(i)
            f, params = make(inst)
            r = grad_check(f, params, eps=eps, max_coords=48, rng=inst.fork(99))
            if r.max_error >= agg.max_error:
                agg.max_error, agg.worst = r.max_error, (i,) + tuple(r.worst or ())
            agg.failures += [(i,) + tuple(fl) for fl in r.failures]
            agg.coords_checked += r.coords_checked
            agg.kinks_skipped += r.kinks_skipped
        out[name] = agg
    return out
