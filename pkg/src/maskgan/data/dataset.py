"""Paired (condition, target) datasets and the seeded batch stream."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from ..errors import ContractError, DataError
from ..rng import Rng
from .nifti import parse_nifti
from .preprocess import (LabelMap, extract_axial_slices, make_condition, normalize_volume,
                         resize)


@dataclass
class TrainingPair:
    """Condition ``y`` and target ``x``, both ``(n, 1, H, W)`` in [0, 1]."""

    condition: np.ndarray
    target: np.ndarray

    def __post_init__(self):
        if self.condition.shape != self.target.shape:
            raise ContractError(
                f"condition {self.condition.shape} and target {self.target.shape} differ")
        for name, a in (("condition", self.condition), ("target", self.target)):
            if a.ndim != 4:
                raise ContractError(f"{name} must be rank 4, got shape {a.shape}")
            if a.size and (a.min() < 0 or a.max() > 1):
                raise ContractError(f"{name} values must lie in [0, 1]")


class PairDataset:
    def __init__(self, conditions: np.ndarray, targets: np.ndarray):
        conditions = np.asarray(conditions, dtype=np.float32)
        targets = np.asarray(targets, dtype=np.float32)
        TrainingPair(conditions, targets)
        self.conditions = conditions
        self.targets = targets

    def __len__(self):
        return len(self.conditions)

    def __getitem__(self, idx) -> TrainingPair:
        if isinstance(idx, (int, np.integer)):
            idx = [idx]
        return TrainingPair(self.conditions[idx], self.targets[idx])

    @property
    def image_size(self) -> int:
        return self.conditions.shape[-1]

    def split(self, n_last: int) -> tuple[PairDataset, PairDataset]:
        if not 0 < n_last < len(self):
            raise DataError(f"cannot hold out {n_last} of {len(self)} pairs")
        k = len(self) - n_last
        return (PairDataset(self.conditions[:k], self.targets[:k]),
                PairDataset(self.conditions[k:], self.targets[k:]))


def batches_per_epoch(n_items: int, batch_size: int) -> int:
    return n_items // batch_size


def batch_iterator(dataset: PairDataset, batch_size: int, rng: Rng,
                   start: int = 0) -> Iterator[TrainingPair]:
    """Endless stream of batches, reshuffled every epoch.

    Epoch ``e`` visits ``rng.fork(e).permutation(len(dataset))`` in order and
    drops the final short batch, so the order is a pure function of the seed
    and ``start`` (the number of batches to skip) resumes mid-stream.
    No augmentation is applied.
    """
    n = len(dataset)
    if n == 0:
        raise DataError("dataset is empty")
    if batch_size < 1 or n < batch_size:
        raise DataError(f"dataset of {n} pairs cannot fill a batch of {batch_size}")
    per_epoch = batches_per_epoch(n, batch_size)
    epoch, pos = divmod(start, per_epoch)
    while True:
        order = rng.fork(epoch).permutation(n)
        for b in range(pos, per_epoch):
            yield dataset[order[b * batch_size:(b + 1) * batch_size]]
        epoch, pos = epoch + 1, 0


def load_nifti_pairs(pairs, label_map: LabelMap, selection="WH", size: int = 256,
                     exclude_empty: bool = True) -> PairDataset:
    """Slice-level dataset from ``(image_path, label_path)`` NIfTI pairs.

    Intensities are min-max normalized per volume and resized bilinearly;
    labels are resized with nearest neighbour before the condition encoding.
    """
    conds, targets = [], []
    for image_path, label_path in pairs:
        img = parse_nifti(Path(image_path).read_bytes())
        lab = parse_nifti(Path(label_path).read_bytes(), kind="label")
        if img.dims != lab.dims:
            raise DataError(f"{image_path} and {label_path} have different dims")
        img = normalize_volume(img)
        for s_img, s_lab in zip(extract_axial_slices(img), extract_axial_slices(lab)):
            cond = make_condition(resize(s_lab, size, "nearest"), selection, label_map)
            if exclude_empty and not cond.any():
                continue
            conds.append(cond)
            targets.append(np.clip(resize(s_img, size, "bilinear"), 0.0, 1.0))
    if not conds:
        raise DataError("no usable slices in the given volumes")
    return PairDataset(np.stack(conds)[:, None], np.stack(targets)[:, None])
