"""Convolution as a matrix product, and its transpose as the adjoint.

``conv2d`` unrolls every receptive field into a column (im2col) so the whole
convolution is one matmul. ``conv_transpose2d`` reads the same kernel the
other way round: it is the adjoint map, so <conv(x), u> == <x, conv_T(u)>.
The U-Net decoder relies on that to double the spatial size with a 4x4,
stride-2, pad-1 kernel.
"""

# %%
import numpy as np

from maskgan import Rng, Var
from maskgan.layers import Conv2dParams, conv2d, conv_transpose2d
from maskgan.tensor import col2im, im2col

rng = Rng(0)
x = rng.normal(2 * 3 * 8 * 8).reshape(2, 3, 8, 8)
w = rng.normal(5 * 3 * 4 * 4).reshape(5, 3, 4, 4)

cols = im2col(x, (4, 4), 2, 1)
print("im2col columns:", cols.shape, "(in_c*kh*kw, n*out_h*out_w)")

# %%
# Downsampling by two, then back up again with the transposed kernel.
y = conv2d(Var(x), Conv2dParams(w, np.zeros(5), stride=2, pad=1)).value
u = rng.normal(y.size).reshape(y.shape)
z = conv_transpose2d(Var(u), Conv2dParams(w, np.zeros(3), stride=2, pad=1)).value
print("conv:", x.shape, "->", y.shape, "  transposed:", u.shape, "->", z.shape)

# %%
# Adjointness holds to rounding error.
print("<conv(x), u> =", np.sum(y * u))
print("<x, convT(u)> =", np.sum(x * z))

# %%
# col2im is the adjoint of im2col: overlapping windows are summed back.
back = col2im(np.ones_like(cols), x.shape, (4, 4), 2, 1)
print("how many windows cover each pixel (first row):", back[0, 0, 0])
