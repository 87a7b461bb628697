"""Training hyperparameters; defaults are the full-scale profile."""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import ConfigError, ContractError
from ..models import DiscriminatorConfig, GeneratorConfig
from ..objectives import ObjectiveWeights

FULL_MILESTONES = (0, 10000, 25000, 50000, 75000, 100000)


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 100000
    batch_size: int = 16
    lr: float = 0.00013
    lam: float = 0.012
    patch_size: int = 32
    image_size: int = 256
    depth: int = 7
    seed: int = 0
    milestones: tuple = FULL_MILESTONES
    ema_decay: float = 0.99
    loss_mode: str = "lse"
    base_channels: int = 64
    channel_cap: int = 512
    disc_channels: tuple = (64, 128, 256, 512, 1)
    beta1: float = 0.5
    beta2: float = 0.999
    adam_eps: float = 1e-8
    bn_momentum: float = 0.1
    bn_eps: float = 1e-5
    leaky_slope: float = 0.2
    heldout_count: int = 8
    grid_samples: int = 4
    parallelism: int = 1

    def __post_init__(self):
        for name in ("iterations", "batch_size", "patch_size", "image_size", "depth",
                     "base_channels", "channel_cap", "parallelism", "grid_samples"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if not (self.lr > 0 and self.lam >= 0) or self.heldout_count < 0 or self.seed < 0:
            raise ConfigError("lr must be positive; lambda, heldout_count and seed non-negative")
        if not 0.0 <= self.ema_decay < 1.0:
            raise ConfigError(f"ema_decay must be in [0, 1), got {self.ema_decay}")
        if self.loss_mode not in ("lse", "bce"):
            raise ConfigError(f"loss_mode must be 'lse' or 'bce', got {self.loss_mode!r}")
        bad = [m for m in self.milestones if not 0 <= m <= self.iterations]
        if bad:
            raise ConfigError(f"milestones {bad} fall outside [0, {self.iterations}]")
        try:
            self.generator_config()
            self.discriminator_config()
        except ContractError as exc:
            raise ConfigError(str(exc)) from None

    def generator_config(self) -> GeneratorConfig:
        return GeneratorConfig(depth=self.depth, base_channels=self.base_channels,
                               channel_cap=self.channel_cap, image_size=self.image_size)

    def discriminator_config(self) -> DiscriminatorConfig:
        return DiscriminatorConfig(patch_size=self.patch_size, layers=len(self.disc_channels),
                                   channels=tuple(self.disc_channels))

    def weights(self) -> ObjectiveWeights:
        return ObjectiveWeights(self.lam)

    def adam_hyper(self) -> dict:
        return dict(lr=self.lr, beta1=self.beta1, beta2=self.beta2, eps=self.adam_eps)


def desk_config(**overrides) -> TrainConfig:
    """The scaled-down CPU profile: 64x64, depth 5, quarter width, 2000 iterations."""
    base = dict(iterations=2000, image_size=64, depth=5, base_channels=16, channel_cap=128,
                disc_channels=(16, 32, 64, 128, 1), milestones=(0, 250, 500, 1000, 1500, 2000),
                seed=7)
    base.update(overrides)
    return TrainConfig(**base)
