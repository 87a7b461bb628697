"""Independent reference implementations used only by the tests.

Each one is written from the textbook definition with explicit loops or
closed forms and shares no code with the package.
"""

import math

import numpy as np


def conv2d_direct(x, w, b, stride, pad):
    """out[n,o,i,j] = b[o] + sum_{c,u,v} w[o,c,u,v] * xpad[n,c,i*s+u,j*s+v]."""
    n, c, h, wd = x.shape
    o, _, kh, kw = w.shape
    xp = np.zeros((n, c, h + 2 * pad, wd + 2 * pad))
    xp[:, :, pad:pad + h, pad:pad + wd] = x
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (wd + 2 * pad - kw) // stride + 1
    out = np.zeros((n, o, oh, ow))
    for bi in range(n):
        for oc in range(o):
            for i in range(oh):
                for j in range(ow):
                    patch = xp[bi, :, i * stride:i * stride + kh, j * stride:j * stride + kw]
                    out[bi, oc, i, j] = b[oc] + np.sum(patch * w[oc])
    return out


def conv_transpose2d_direct(x, w, b, stride, pad):
    """Scatter form: every input pixel stamps its weighted kernel into the output."""
    n, ci, h, wd = x.shape
    _, co, kh, kw = w.shape
    oh = (h - 1) * stride - 2 * pad + kh
    ow = (wd - 1) * stride - 2 * pad + kw
    full = np.zeros((n, co, (h - 1) * stride + kh, (wd - 1) * stride + kw))
    for bi in range(n):
        for c in range(ci):
            for i in range(h):
                for j in range(wd):
                    full[bi, :, i * stride:i * stride + kh, j * stride:j * stride + kw] += \
                        x[bi, c, i, j] * w[c]
    out = full[:, :, pad:pad + oh, pad:pad + ow]
    return out + np.asarray(b).reshape(1, co, 1, 1)


def generator_param_count(depth, base, cap, k=4, out_k=3, cin=1, cout=1):
    """Closed-form parameter count of the U-Net generator."""
    enc = [min(base * 2 ** i, cap) for i in range(depth)]
    dec = [enc[depth - 2 - i] for i in range(depth - 1)] + [base]
    total = 0
    prev = cin
    for e in enc:
        total += prev * e * k * k + e + 2 * e   # conv weight + bias, bn gamma + beta
        prev = e
    for i, d in enumerate(dec):
        din = enc[-1] if i == 0 else dec[i - 1] + enc[depth - 1 - i]
        total += din * d * k * k + d + 2 * d
    total += base * cout * out_k * out_k + cout
    return total


def discriminator_param_count(channels, cin=2, k=4, final_k=2):
    total = 0
    prev = cin
    for i, c in enumerate(channels):
        kk = final_k if i == len(channels) - 1 else k
        total += prev * c * kk * kk + c
        if i < len(channels) - 1:
            total += 2 * c
        prev = c
    return total


def ssim_direct(a, b, win=8, c1=0.01 ** 2, c2=0.03 ** 2):
    """Literal per-window loop of the SSIM definition (population statistics)."""
    h, w = a.shape
    vals = []
    for i in range(h - win + 1):
        for j in range(w - win + 1):
            pa = a[i:i + win, j:j + win].ravel()
            pb = b[i:i + win, j:j + win].ravel()
            ma, mb = pa.sum() / pa.size, pb.sum() / pb.size
            va = ((pa - ma) ** 2).sum() / pa.size
            vb = ((pb - mb) ** 2).sum() / pb.size
            cov = ((pa - ma) * (pb - mb)).sum() / pa.size
            vals.append((2 * ma * mb + c1) * (2 * cov + c2)
                        / ((ma * ma + mb * mb + c1) * (va + vb + c2)))
    return sum(vals) / len(vals)


def adam_scalar(grad_fn, theta, steps, lr, b1=0.9, b2=0.999, eps=1e-8):
    """Pure-Python scalar Adam; returns the trajectory."""
    m = v = 0.0
    traj = [theta]
    for t in range(1, steps + 1):
        g = grad_fn(theta)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mhat = m / (1 - b1 ** t)
        vhat = v / (1 - b2 ** t)
        theta = theta - lr * mhat / (math.sqrt(vhat) + eps)
        traj.append(theta)
    return traj


def batchnorm_train_direct(x, gamma, beta, eps):
    n, c, h, w = x.shape
    out = np.empty_like(x, dtype=np.float64)
    for ch in range(c):
        vals = x[:, ch].ravel()
        mu = sum(vals) / len(vals)
        var = sum((v - mu) ** 2 for v in vals) / len(vals)
        out[:, ch] = (x[:, ch] - mu) / math.sqrt(var + eps) * gamma[ch] + beta[ch]
    return out
