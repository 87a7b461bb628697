"""Logged metrics, image-quality measures and PGM sample grids."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ContractError

SSIM_WINDOW = 8
SSIM_K1, SSIM_K2 = 0.01, 0.03


def discriminator_accuracy(scores, is_real: bool) -> float:
    """Fraction of patch scores on the correct side of 0.5 (real iff score > 0.5)."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    if scores.size == 0:
        raise ContractError("no scores to classify")
    said_real = scores > 0.5
    return float(np.mean(said_real if is_real else ~said_real))


def ema_update(prev: float | None, value: float, decay: float) -> float:
    """``decay * prev + (1 - decay) * value``; ``prev=None`` starts the average at ``value``."""
    if not 0.0 <= decay < 1.0:
        raise ContractError(f"ema decay must be in [0, 1), got {decay}")
    if prev is None:
        return float(value)
    return decay * prev + (1.0 - decay) * value


def mse(a, b) -> float:
    a, b = _pair(a, b)
    return float(np.mean((a - b) ** 2))


def l1(a, b) -> float:
    a, b = _pair(a, b)
    return float(np.mean(np.abs(a - b)))


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ContractError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def ssim(a, b, window: int = SSIM_WINDOW, data_range: float = 1.0) -> float:
    """Mean SSIM over all ``window x window`` windows (stride 1, uniform weights).

    Window statistics use biased (population) variance and covariance.
    """
    a, b = _pair(a, b)
    if a.ndim != 2:
        raise ContractError(f"ssim expects 2-D images, got shape {a.shape}")
    if min(a.shape) < window:
        raise ContractError(f"image {a.shape} is smaller than the {window}x{window} window")
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    wa = sliding_window_view(a, (window, window))
    wb = sliding_window_view(b, (window, window))
    mu_a = wa.mean(axis=(-2, -1))
    mu_b = wb.mean(axis=(-2, -1))
    # variances and covariance share one centred form so ssim(x, x) == 1 exactly
    da = wa - mu_a[..., None, None]
    db = wb - mu_b[..., None, None]
    var_a = (da * da).mean(axis=(-2, -1))
    var_b = (db * db).mean(axis=(-2, -1))
    cov = (da * db).mean(axis=(-2, -1))
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def to_bytes(v) -> np.ndarray:
    """Map [0, 1] to 0..255 with round-half-up."""
    return np.floor(np.asarray(v, dtype=np.float64) * 255.0 + 0.5).astype(np.uint8)


def sample_grid(conditions, generated, targets) -> np.ndarray:
    """Stack ``[condition | generated | target]`` rows, one row per sample."""
    c, g, t = (np.asarray(a, dtype=np.float64) for a in (conditions, generated, targets))
    if not c.shape == g.shape == t.shape:
        raise ContractError(f"grid inputs differ in shape: {c.shape}, {g.shape}, {t.shape}")
    if c.ndim == 4:
        if c.shape[1] != 1:
            raise ContractError("sample grids need single-channel images")
        c, g, t = c[:, 0], g[:, 0], t[:, 0]
    if c.ndim != 3 or len(c) == 0:
        raise ContractError(f"expected (n, h, w) images, got shape {c.shape}")
    for a in (c, g, t):
        if a.min() < 0 or a.max() > 1:
            raise ContractError("grid values must lie in [0, 1]")
    return np.concatenate([np.concatenate(row, axis=1) for row in zip(c, g, t)], axis=0)


def encode_pgm(img) -> bytes:
    img = to_bytes(img)
    h, w = img.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + img.tobytes()


def decode_pgm(data: bytes) -> np.ndarray:
    """Read a binary P5 file written by :func:`encode_pgm` (no comments)."""
    parts = data.split(maxsplit=4)
    if len(parts) < 4 or parts[0] != b"P5":
        raise ContractError("not a binary PGM")
    w, h, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    if maxval != 255:
        raise ContractError(f"unsupported maxval {maxval}")
    payload = data[len(data) - w * h:]
    return np.frombuffer(payload, dtype=np.uint8).reshape(h, w)


def export_sample_grid(conditions, generated, targets, path) -> Path:
    """Write the grid as a P5 PGM (maxval 255)."""
    path = Path(path)
    path.write_bytes(encode_pgm(sample_grid(conditions, generated, targets)))
    return path
