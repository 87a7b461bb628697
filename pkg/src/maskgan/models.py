"""U-Net generator and patch discriminator.

Both networks keep their trainable arrays in ``params`` and their batch-norm
running statistics in ``buffers``, each a flat ``dict`` keyed by dotted layer
names in construction order. Forward functions take optional ``weights``
(the same keys mapped to taped :class:`Var` objects); without them the stored
arrays are used as constants.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Var
from .errors import ContractError
from .layers import (BN_EPS, BN_MOMENTUM, LEAKY_SLOPE, BatchNormParams, Conv2dParams,
                     batchnorm, concat_channels, conv2d, conv_transpose2d, leaky_relu,
                     sigmoid)
from .rng import Rng
from .tensor import tensor_create

INIT_STD = 0.02


@dataclass(frozen=True)
class GeneratorConfig:
    depth: int = 7
    base_channels: int = 64
    channel_cap: int = 512
    in_channels: int = 1
    out_channels: int = 1
    image_size: int = 256
    kernel: int = 4
    out_kernel: int = 3

    def __post_init__(self):
        if min(self.depth, self.base_channels, self.channel_cap, self.in_channels,
               self.out_channels, self.image_size) < 1:
            raise ContractError("generator config values must be positive")
        if self.image_size % (1 << self.depth):
            raise ContractError(
                f"image_size {self.image_size} is not divisible by 2**{self.depth}")

    @property
    def bottleneck_size(self) -> int:
        return self.image_size >> self.depth

    def encoder_channels(self) -> list[int]:
        return [min(self.base_channels << i, self.channel_cap) for i in range(self.depth)]

    def decoder_channels(self) -> list[int]:
        enc = self.encoder_channels()
        return [enc[self.depth - 2 - i] for i in range(self.depth - 1)] + [self.base_channels]


@dataclass(frozen=True)
class DiscriminatorConfig:
    patch_size: int = 32
    layers: int = 5
    in_channels: int = 2
    channels: tuple = (64, 128, 256, 512, 1)

    def __post_init__(self):
        if len(self.channels) != self.layers:
            raise ContractError(
                f"{self.layers} layers need {self.layers} channel widths, got {len(self.channels)}")
        if self.layers < 2 or self.patch_size != 1 << self.layers:
            raise ContractError(
                f"patch_size {self.patch_size} is inconsistent with {self.layers} layers "
                f"(expected {1 << self.layers})")

    @property
    def final_kernel(self) -> int:
        return self.patch_size >> (self.layers - 1)


@dataclass
class Generator:
    cfg: GeneratorConfig
    params: dict = field(default_factory=dict)
    buffers: dict = field(default_factory=dict)
    slope: float = LEAKY_SLOPE
    bn_momentum: float = BN_MOMENTUM
    bn_eps: float = BN_EPS


@dataclass
class Discriminator:
    cfg: DiscriminatorConfig
    params: dict = field(default_factory=dict)
    buffers: dict = field(default_factory=dict)
    slope: float = LEAKY_SLOPE
    bn_momentum: float = BN_MOMENTUM
    bn_eps: float = BN_EPS


def param_count(model) -> int:
    return int(sum(v.size for v in model.params.values()))


def _add_conv(params, rng, name, shape, bias_len, dtype):
    params[f"{name}.weight"] = tensor_create(shape, "normal", mean=0.0, std=INIT_STD,
                                             rng=rng, dtype=dtype)
    params[f"{name}.bias"] = np.zeros(bias_len, dtype=dtype)


def _add_bn(params, buffers, name, c, dtype):
    params[f"{name}.gamma"] = np.ones(c, dtype=dtype)
    params[f"{name}.beta"] = np.zeros(c, dtype=dtype)
    buffers[f"{name}.running_mean"] = np.zeros(c, dtype=dtype)
    buffers[f"{name}.running_var"] = np.ones(c, dtype=dtype)


def build_generator(cfg: GeneratorConfig, rng: Rng, dtype=np.float32, **kw) -> Generator:
    g = Generator(cfg, **kw)
    k = cfg.kernel
    enc = cfg.encoder_channels()
    dec = cfg.decoder_channels()
    c_in = cfg.in_channels
    for i, c in enumerate(enc):
        _add_conv(g.params, rng, f"enc{i}.conv", (c, c_in, k, k), c, dtype)
        _add_bn(g.params, g.buffers, f"enc{i}.bn", c, dtype)
        c_in = c
    for i, c in enumerate(dec):
        c_in = enc[-1] if i == 0 else dec[i - 1] + enc[cfg.depth - 1 - i]
        # transposed-conv weights are stored (in, out, kh, kw)
        _add_conv(g.params, rng, f"dec{i}.deconv", (c_in, c, k, k), c, dtype)
        _add_bn(g.params, g.buffers, f"dec{i}.bn", c, dtype)
    ko = cfg.out_kernel
    _add_conv(g.params, rng, "out.conv", (cfg.out_channels, dec[-1], ko, ko),
              cfg.out_channels, dtype)
    return g


def build_discriminator(cfg: DiscriminatorConfig, rng: Rng, dtype=np.float32,
                        **kw) -> Discriminator:
    d = Discriminator(cfg, **kw)
    c_in = cfg.in_channels
    for i, c in enumerate(cfg.channels[:-1]):
        _add_conv(d.params, rng, f"layer{i}.conv", (c, c_in, 4, 4), c, dtype)
        _add_bn(d.params, d.buffers, f"layer{i}.bn", c, dtype)
        c_in = c
    kf = cfg.final_kernel
    _add_conv(d.params, rng, f"layer{cfg.layers - 1}.conv", (cfg.channels[-1], c_in, kf, kf),
              cfg.channels[-1], dtype)
    return d


class _Bound:
    """Resolves parameter names to Vars and applies batch norm with buffers."""

    def __init__(self, model, weights, mode, update_stats):
        self.model = model
        self.weights = weights
        self.mode = mode
        self.update_stats = (mode == "train") if update_stats is None else update_stats

    def __getitem__(self, name) -> Var:
        if self.weights is not None:
            return self.weights[name]
        return Var(self.model.params[name])

    def conv(self, x, name, stride, pad, transpose=False):
        p = Conv2dParams(self[f"{name}.weight"], self[f"{name}.bias"], stride, pad)
        return conv_transpose2d(x, p) if transpose else conv2d(x, p)

    def bn(self, x, name):
        buf = self.model.buffers
        p = BatchNormParams(self[f"{name}.gamma"], self[f"{name}.beta"],
                            buf[f"{name}.running_mean"], buf[f"{name}.running_var"],
                            self.model.bn_momentum, self.model.bn_eps)
        out = batchnorm(x, p, self.mode, self.update_stats)
        if self.mode == "train" and self.update_stats:
            buf[f"{name}.running_mean"] = p.running_mean
            buf[f"{name}.running_var"] = p.running_var
        return out


def _as_input(x) -> Var:
    return x if isinstance(x, Var) else Var.constant(x)


def generator_forward(g: Generator, y, weights=None, mode: str = "infer",
                      update_stats: bool | None = None) -> Var:
    """Map conditions ``(n, in_channels, S, S)`` to images in (0, 1).

    ``mode="train"`` normalizes with batch statistics (and updates the running
    buffers unless ``update_stats=False``); ``mode="infer"`` uses the buffers.
    """
    cfg = g.cfg
    y = _as_input(y)
    shape = y.value.shape
    if len(shape) != 4 or shape[1] != cfg.in_channels or shape[2:] != (cfg.image_size,) * 2:
        raise ContractError(
            f"generator expects (n, {cfg.in_channels}, {cfg.image_size}, {cfg.image_size}), "
            f"got {shape}")
    b = _Bound(g, weights, mode, update_stats)
    skips = []
    h = y
    for i in range(cfg.depth):
        h = b.conv(h, f"enc{i}.conv", 2, 1)
        h = leaky_relu(b.bn(h, f"enc{i}.bn"), g.slope)
        skips.append(h)
    for i in range(cfg.depth):
        if i > 0:
            h = concat_channels(h, skips[cfg.depth - 1 - i])
        h = b.conv(h, f"dec{i}.deconv", 2, 1, transpose=True)
        h = leaky_relu(b.bn(h, f"dec{i}.bn"), g.slope)
    h = b.conv(h, "out.conv", 1, cfg.out_kernel // 2)
    return sigmoid(h)


def extract_patches(t, patch: int) -> Var:
    """Tile ``(n, c, h, w)`` into ``(n * h/patch * w/patch, c, patch, patch)``.

    Tiles are sample-major, then row-major within a sample (top-left first).
    """
    t = _as_input(t)
    n, c, h, w = t.value.shape
    if patch < 1 or h % patch or w % patch:
        raise ContractError(f"spatial size {h}x{w} is not divisible by patch {patch}")
    th, tw = h // patch, w // patch
    x = ad.reshape(t, (n, c, th, patch, tw, patch))
    x = ad.transpose(x, (0, 2, 4, 1, 3, 5))
    return ad.reshape(x, (n * th * tw, c, patch, patch))


def merge_patches(p, n: int, h: int, w: int) -> Var:
    """Inverse of :func:`extract_patches`."""
    p = _as_input(p)
    total, c, ph, pw = p.value.shape
    th, tw = h // ph, w // pw
    if ph != pw or th * ph != h or tw * pw != w or total != n * th * tw:
        raise ContractError(f"cannot merge {p.value.shape} into ({n}, {c}, {h}, {w})")
    x = ad.reshape(p, (n, th, tw, c, ph, pw))
    x = ad.transpose(x, (0, 3, 1, 4, 2, 5))
    return ad.reshape(x, (n, c, h, w))


def discriminator_forward(d: Discriminator, image, condition, weights=None,
                          mode: str = "infer", update_stats: bool | None = None) -> Var:
    """Score every non-overlapping patch of ``image`` given ``condition``.

    Returns linear scores of shape ``(n * patches_per_sample, 1, 1, 1)``.
    """
    cfg = d.cfg
    image, condition = _as_input(image), _as_input(condition)
    if image.value.shape[0] != condition.value.shape[0] or \
            image.value.shape[2:] != condition.value.shape[2:]:
        raise ContractError(
            f"image {image.value.shape} and condition {condition.value.shape} do not align")
    x = concat_channels(image, condition)
    if x.value.shape[1] != cfg.in_channels:
        raise ContractError(
            f"discriminator expects {cfg.in_channels} channels, got {x.value.shape[1]}")
    h = extract_patches(x, cfg.patch_size)
    b = _Bound(d, weights, mode, update_stats)
    for i in range(cfg.layers - 1):
        h = b.conv(h, f"layer{i}.conv", 2, 1)
        h = leaky_relu(b.bn(h, f"layer{i}.bn"), d.slope)
    return b.conv(h, f"layer{cfg.layers - 1}.conv", 1, 0)
