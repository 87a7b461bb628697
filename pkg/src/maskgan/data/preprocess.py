"""Intensity normalization, axial slicing, resizing and condition masks."""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import replace

import numpy as np

from ..errors import ConfigError, ContractError
from .nifti import Volume

STRUCTURES = ("Myo", "LA", "LV", "RA", "RV", "Ao", "PA")
WHOLE_HEART = "WH"


class LabelMap(OrderedDict):
    """Ordered ``structure name -> integer label`` for the seven substructures.

    Label values are dataset specific and always come from configuration.
    """

    def __init__(self, mapping):
        items = list(mapping.items()) if hasattr(mapping, "items") else list(mapping)
        names = [k for k, _ in items]
        if sorted(names) != sorted(STRUCTURES):
            missing = sorted(set(STRUCTURES) - set(names))
            extra = sorted(set(names) - set(STRUCTURES))
            raise ConfigError(f"label map must name exactly {STRUCTURES}; "
                              f"missing {missing}, unexpected {extra}")
        values = [int(v) for _, v in items]
        if any(v <= 0 for v in values) or len(set(values)) != len(values):
            raise ConfigError(f"labels must be positive and distinct, got {values}")
        super().__init__(sorted(((k, int(v)) for k, v in items),
                                key=lambda kv: STRUCTURES.index(kv[0])))


def normalize_volume(v: Volume) -> Volume:
    """Min-max rescale intensities to [0, 1]; constant volumes become zeros."""
    if v.kind != "intensity":
        raise ContractError("only intensity volumes can be normalized")
    lo, hi = v.voxels.min(), v.voxels.max()
    if hi > lo:
        out = (v.voxels - lo) / (hi - lo)
    else:
        out = np.zeros_like(v.voxels)
    return replace(v, voxels=out, datatype=16, scl_slope=0.0, scl_inter=0.0)


def extract_axial_slices(v: Volume) -> list[np.ndarray]:
    """Slice ``k`` is the z = k plane indexed ``[x, y]``."""
    arr = v.array()
    return [np.ascontiguousarray(arr[k].T) for k in range(arr.shape[0])]


def stack_slices(slices, like: Volume) -> Volume:
    arr = np.stack([s.T for s in slices])
    return replace(like, voxels=arr.reshape(-1))


def resize(img: np.ndarray, size: int, mode: str = "bilinear") -> np.ndarray:
    """Resize a 2-D array to ``size x size``.

    Both modes sample at pixel centres: output index ``i`` maps to source
    coordinate ``(i + 0.5) * in / size - 0.5``. ``"nearest"`` never creates
    values absent from the source, so it is the mode for label images.
    """
    if size <= 0:
        raise ContractError(f"target size must be positive, got {size}")
    img = np.asarray(img)
    if img.ndim != 2 or min(img.shape) < 1:
        raise ContractError(f"resize expects a non-empty 2-D array, got shape {img.shape}")
    if mode == "nearest":
        rows = _nearest_index(img.shape[0], size)
        cols = _nearest_index(img.shape[1], size)
        return img[np.ix_(rows, cols)]
    if mode != "bilinear":
        raise ContractError(f"unknown resize mode {mode!r}")
    r0, r1, wr = _linear_weights(img.shape[0], size)
    c0, c1, wc = _linear_weights(img.shape[1], size)
    img = img.astype(np.float64)
    top = img[r0] * (1 - wr)[:, None] + img[r1] * wr[:, None]
    return top[:, c0] * (1 - wc)[None, :] + top[:, c1] * wc[None, :]


def _nearest_index(n_in: int, n_out: int) -> np.ndarray:
    # integer form of floor((i + 0.5) * n_in / n_out), exact for all sizes
    return ((2 * np.arange(n_out) + 1) * n_in) // (2 * n_out)


def _linear_weights(n_in: int, n_out: int):
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0, n_in - 1)
    i0 = np.floor(src).astype(np.int64)
    i1 = np.minimum(i0 + 1, n_in - 1)
    return i0, i1, src - i0


def make_condition(label_slice: np.ndarray, selection, lm: LabelMap) -> np.ndarray:
    """Rank-scaled single-channel condition in [0, 1].

    The ``r``-th selected structure (1-based, label-map order) of ``K``
    selected maps to ``r / K``; background and unselected labels map to 0.
    ``"WH"`` selects all seven structures.
    """
    if isinstance(selection, str):
        selection = [selection]
    selection = list(selection)
    if not selection:
        raise ContractError("condition selection is empty")
    if WHOLE_HEART in selection:
        selection = list(lm)
    unknown = [s for s in selection if s not in lm]
    if unknown:
        raise ContractError(f"unknown structures {unknown}; label map has {list(lm)}")
    chosen = [name for name in lm if name in selection]
    k = len(chosen)
    out = np.zeros(label_slice.shape, dtype=np.float64)
    for r, name in enumerate(chosen, start=1):
        out[label_slice == lm[name]] = r / k
    return out
