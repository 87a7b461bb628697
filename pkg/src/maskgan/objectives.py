"""Adversarial and reconstruction losses.

The least-squares pair is the training objective: the discriminator pushes
real scores to 1 and fake scores to 0, the generator minimizes
``lam * mean((1 - D(y, G(y)))**2) + mean(|x - G(y)|)``. The cross-entropy
pair is kept as a reference loss and expects scores already squashed into
[0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Var
from .errors import ContractError
from .tensor import check_same_shape

LOG_FLOOR = 1e-12


@dataclass(frozen=True)
class ObjectiveWeights:
    lam: float = 0.012

    def __post_init__(self):
        if self.lam < 0:
            raise ContractError(f"lambda must be non-negative, got {self.lam}")


def _v(x) -> Var:
    return x if isinstance(x, Var) else Var.constant(x)


def bce_gan_losses(d_real, d_fake) -> tuple[Var, Var]:
    """Return ``(d_loss, g_loss)`` for probabilities in [0, 1].

    ``d_loss = -mean(log d_real) - mean(log(1 - d_fake))`` and
    ``g_loss = mean(log(1 - d_fake))``; logs are clamped at 1e-12.
    """
    d_real, d_fake = _v(d_real), _v(d_fake)
    for name, s in (("d_real", d_real), ("d_fake", d_fake)):
        v = s.value
        if np.any(~np.isfinite(v)) or np.any(v < 0) or np.any(v > 1):
            raise ContractError(f"{name} scores must lie in [0, 1]")
    log_fake = ad.mean(ad.log(1.0 - d_fake, LOG_FLOOR))
    d_loss = ad.neg(ad.mean(ad.log(d_real, LOG_FLOOR))) - log_fake
    return d_loss, log_fake


def lsgan_d_loss(d_real, d_fake) -> Var:
    """``mean((1 - d_real)**2) + mean(d_fake**2)`` on linear scores."""
    d_real, d_fake = _v(d_real), _v(d_fake)
    return ad.mean(ad.square(1.0 - d_real)) + ad.mean(ad.square(d_fake))


def l1_recon(x, gx) -> Var:
    x, gx = _v(x), _v(gx)
    check_same_shape(x.value, gx.value, "reconstruction")
    return ad.mean(ad.absolute(x - gx))


def mse(x, gx) -> Var:
    x, gx = _v(x), _v(gx)
    check_same_shape(x.value, gx.value, "mse")
    return ad.mean(ad.square(x - gx))


def generator_objective(d_fake, x, gx, w: ObjectiveWeights = ObjectiveWeights()) -> Var:
    d_fake = _v(d_fake)
    recon = l1_recon(x, gx)
    if w.lam == 0:
        return recon
    return ad.mean(ad.square(1.0 - d_fake)) * w.lam + recon
