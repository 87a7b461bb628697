"""The two networks: a U-Net generator and a patch discriminator.

The generator maps a single-channel mask to an image of the same size
through an encoder/decoder with skip connections. The discriminator never
sees the whole image: it cuts the (image, mask) pair into 32x32 tiles and
scores each tile on its own, so an edit inside one tile only moves that
tile's score.
"""

# %%
import numpy as np

from maskgan import (DiscriminatorConfig, GeneratorConfig, Rng, build_discriminator,
                     build_generator, discriminator_forward, generator_forward)
from maskgan.models import param_count

# A desk-sized profile: 64x64 images, depth 5, quarter widths.
gcfg = GeneratorConfig(image_size=64, depth=5, base_channels=16, channel_cap=128)
dcfg = DiscriminatorConfig(channels=(16, 32, 64, 128, 1))
g = build_generator(gcfg, Rng(1))
d = build_discriminator(dcfg, Rng(2))
print("generator params:    ", param_count(g))
print("discriminator params:", param_count(d))

# %%
mask = np.zeros((1, 1, 64, 64), np.float32)
mask[0, 0, 20:40, 16:48] = 0.5
image = generator_forward(g, mask).value
print("generated", image.shape, "range", image.min(), image.max())

# %%
# Four tiles -> four scores. Flip tile 3 (bottom right) and compare.
scores = discriminator_forward(d, image, mask).value.ravel()
edited = image.copy()
edited[0, 0, 32:, 32:] = 1 - edited[0, 0, 32:, 32:]
scores2 = discriminator_forward(d, edited, mask).value.ravel()
print("scores before:", scores)
print("scores after: ", scores2)
print("changed tiles:", np.flatnonzero(scores != scores2))
