"""Objectives and the optimizer.

The discriminator is trained with a least-squares loss on linear patch
scores: real tiles are pushed towards 1 and generated tiles towards 0. The
generator minimises a small adversarial term (weight lambda = 0.012) plus
the L1 distance to the real image, so most of its signal comes from L1.
Both networks use Adam with bias correction.
"""

# %%
import numpy as np

from maskgan.objectives import (ObjectiveWeights, bce_gan_losses, generator_objective,
                                lsgan_d_loss)
from maskgan.optim import AdamState, adam_step

half = np.full((4, 1, 1, 1), 0.5)
print("LSGAN D loss at a coin-flip discriminator:", float(lsgan_d_loss(half, half).value))
print("BCE D loss at a coin-flip discriminator:  ", float(bce_gan_losses(half, half)[0].value),
      "(2 ln 2 =", 2 * np.log(2), ")")

# %%
# With D scoring every fake tile 0 the adversarial term is 1, so the
# generator objective is lambda + L1.
x = np.full((1, 1, 8, 8), 0.7)
print("lambda + L1 =", float(generator_objective(np.zeros((4, 1, 1, 1)), x, x - 0.1,
                                                  ObjectiveWeights(0.012)).value))

# %%
# Adam's first step moves every coordinate by about lr, whatever the gradient
# scale, because of the bias correction.
params = {"w": np.array([1.0, -2.0, 3.0])}
state = AdamState.for_params(params, lr=0.00013, beta1=0.5, beta2=0.999)
for scale in (1e-3, 1.0, 1e3):
    new, _ = adam_step(params, {"w": np.array([scale, -scale, scale])}, state)
    print(f"gradient scale {scale:>6}: step {new['w'] - params['w']}")
