"""Mask-conditioned patch GAN for CT-like image synthesis, in plain numpy.

Subpackages: :mod:`maskgan.data` (NIfTI, preprocessing, phantoms, batching)
and :mod:`maskgan.training` (training loop, checkpoints, metrics). The
engine lives in :mod:`maskgan.tensor`, :mod:`maskgan.autodiff` and
:mod:`maskgan.layers`; networks in :mod:`maskgan.models`.
"""

from .autodiff import Tape, Var
from .errors import MaskGanError
from .models import (DiscriminatorConfig, GeneratorConfig, build_discriminator,
                     build_generator, discriminator_forward, generator_forward)
from .rng import Rng

__version__ = "0.1.0"

__all__ = [
    "DiscriminatorConfig", "GeneratorConfig", "MaskGanError", "Rng", "Tape", "Var",
    "build_discriminator", "build_generator", "discriminator_forward", "generator_forward",
]
