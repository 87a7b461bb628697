"""Synthetic paired phantom data.

Each pair is a pure function of ``(PhantomSpec, index)``: one to four
non-overlapping axis-aligned ellipses carrying labels ``1..labels``. The
condition encodes label ``l`` as ``l / labels``. The target image is a
vertical background ramp with each region filled at ``0.3 + 0.1 * l`` plus
a fixed sinusoidal texture, clamped to [0, 1], so the image is a
deterministic function of the mask.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import DataError
from ..rng import Rng
from .dataset import PairDataset, TrainingPair

MANIFEST_NAME = "manifest.csv"


@dataclass(frozen=True)
class PhantomSpec:
    size: int = 64
    min_ellipses: int = 1
    max_ellipses: int = 4
    labels: int = 7
    seed: int = 0
    bg_top: float = 0.1
    bg_bottom: float = 0.3
    texture_amplitude: float = 0.05
    texture_period: float = 16.0
    max_attempts: int = 200

    def __post_init__(self):
        if self.size < 8 or self.labels < 1:
            raise DataError("phantom size must be >= 8 and labels >= 1")
        if not 0 <= self.min_ellipses <= self.max_ellipses:
            raise DataError("invalid ellipse count range")


def _place_ellipses(spec: PhantomSpec, rng: Rng, count: int):
    s = spec.size
    lo, hi = s / 12.0, s / 5.0
    boxes, shapes = [], []
    attempts = 0
    while len(shapes) < count and attempts < spec.max_attempts:
        attempts += 1
        a, b, fx, fy, fl = rng.uniform(5)
        a = lo + (hi - lo) * a
        b = lo + (hi - lo) * b
        cx = a + 1 + fx * (s - 3 - 2 * a)
        cy = b + 1 + fy * (s - 3 - 2 * b)
        box = (cx - a - 1, cx + a + 1, cy - b - 1, cy + b + 1)
        if any(box[0] < o[1] and o[0] < box[1] and box[2] < o[3] and o[2] < box[3]
               for o in boxes):
            continue
        label = 1 + min(int(fl * spec.labels), spec.labels - 1)
        boxes.append(box)
        shapes.append((cx, cy, a, b, label))
    return shapes


def render_labels(spec: PhantomSpec, index: int, n_ellipses: int | None = None) -> np.ndarray:
    """Integer label image ``(size, size)``; 0 is background."""
    rng = Rng(spec.seed).fork(index)
    if n_ellipses is None:
        n_ellipses = int(rng.integers(spec.min_ellipses, spec.max_ellipses + 1)[0])
    s = spec.size
    yy, xx = np.mgrid[0:s, 0:s].astype(np.float64)
    labels = np.zeros((s, s), dtype=np.int64)
    for cx, cy, a, b, label in _place_ellipses(spec, rng, n_ellipses):
        labels[((xx - cx) / a) ** 2 + ((yy - cy) / b) ** 2 <= 1.0] = label
    return labels


def render_image(spec: PhantomSpec, labels: np.ndarray) -> np.ndarray:
    s = spec.size
    yy, xx = np.mgrid[0:s, 0:s].astype(np.float64)
    img = spec.bg_top + (spec.bg_bottom - spec.bg_top) * yy / (s - 1)
    w = 2.0 * np.pi / spec.texture_period
    texture = spec.texture_amplitude * np.sin(w * xx) * np.sin(w * yy)
    inside = labels > 0
    img = np.where(inside, 0.3 + 0.1 * labels + texture, img)
    return np.clip(img, 0.0, 1.0)


def phantom_pair(spec: PhantomSpec, index: int, n_ellipses: int | None = None) -> TrainingPair:
    """Render pair ``index``; ``n_ellipses`` overrides the random count."""
    labels = render_labels(spec, index, n_ellipses)
    cond = labels / float(spec.labels)
    img = render_image(spec, labels)
    return TrainingPair(cond[None, None].astype(np.float32), img[None, None].astype(np.float32))


def phantom_dataset(spec: PhantomSpec, count: int, start: int = 0) -> PairDataset:
    if count < 1:
        raise DataError("phantom dataset needs at least one pair")
    pairs = [phantom_pair(spec, i) for i in range(start, start + count)]
    return PairDataset(np.concatenate([p.condition for p in pairs]),
                       np.concatenate([p.target for p in pairs]))


def write_phantom(spec: PhantomSpec, count: int, out_dir, start: int = 0) -> Path:
    """Materialize ``count`` pairs: ``manifest.csv`` plus ``conditions.npy``/``targets.npy``.

    Manifest lines are ``index,seed,size``; the arrays are a cache that can
    always be regenerated from the manifest.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ds = phantom_dataset(spec, count, start)
    lines = [f"{i},{spec.seed},{spec.size}" for i in range(start, start + count)]
    (out / MANIFEST_NAME).write_text("\n".join(lines) + "\n")
    np.save(out / "conditions.npy", ds.conditions)
    np.save(out / "targets.npy", ds.targets)
    return out / MANIFEST_NAME


def read_manifest(path) -> list[tuple[int, int, int]]:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    rows = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            index, seed, size = (int(v) for v in line.split(","))
        except ValueError:
            raise DataError(f"{path}:{lineno}: expected 'index,seed,size', got {line!r}") from None
        rows.append((index, seed, size))
    if not rows:
        raise DataError(f"{path} lists no pairs")
    return rows


def load_phantom(path) -> PairDataset:
    """Regenerate the pairs listed in a manifest."""
    pairs = [phantom_pair(PhantomSpec(size=size, seed=seed), index)
             for index, seed, size in read_manifest(path)]
    return PairDataset(np.concatenate([p.condition for p in pairs]),
                       np.concatenate([p.target for p in pairs]))
