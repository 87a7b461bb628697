"""Counter-based SplitMix64 random stream.

The generator is frozen so that weights, phantom data and batch orders are
bitwise identical across platforms and numpy versions:

* draw ``i`` (0-based, counting from the current ``counter``) is
  ``splitmix64_mix(seed + (counter + i + 1) * 0x9E3779B97F4A7C15)`` mod 2**64,
  i.e. exactly the i-th output of the reference SplitMix64 seeded with ``seed``;
* uniforms in [0, 1) are ``(u >> 11) * 2**-53``;
* normals use the cosine branch of Box-Muller on two consecutive draws
  ``(u1, u2)``: ``sqrt(-2 ln(1 - uniform(u1))) * cos(2 pi uniform(u2))``;
* ``fork(key)`` starts an independent stream whose seed is the mix of
  ``seed ^ mix(key)``.

The state is the pair ``(seed, counter)``; both are unsigned 64-bit integers.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def _mix_scalar(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * _M1) & _MASK
    z = ((z ^ (z >> 27)) * _M2) & _MASK
    return z ^ (z >> 31)


def _mix_array(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
        return z ^ (z >> np.uint64(31))


class Rng:
    def __init__(self, seed: int, counter: int = 0):
        self.seed = int(seed) & _MASK
        self.counter = int(counter) & _MASK

    def __repr__(self):
        return f"Rng(seed={self.seed}, counter={self.counter})"

    def state(self) -> tuple[int, int]:
        return self.seed, self.counter

    def fork(self, key: int) -> Rng:
        """Independent child stream; does not advance this one."""
        return Rng(_mix_scalar(self.seed ^ _mix_scalar(int(key) + _GOLDEN)))

    def next_u64(self, n: int) -> np.ndarray:
        idx = np.arange(1, n + 1, dtype=np.uint64) + np.uint64(self.counter)
        with np.errstate(over="ignore"):
            z = np.uint64(self.seed) + idx * np.uint64(_GOLDEN)
        self.counter = (self.counter + n) & _MASK
        return _mix_array(z)

    def uniform(self, n: int) -> np.ndarray:
        return (self.next_u64(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def normal(self, n: int, mean: float = 0.0, std: float = 1.0) -> np.ndarray:
        u = self.uniform(2 * n).reshape(n, 2)
        r = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
        return mean + std * (r * np.cos(2.0 * np.pi * u[:, 1]))

    def integers(self, low: int, high: int, n: int = 1) -> np.ndarray:
        """Uniform integers in ``[low, high)``."""
        if high <= low:
            raise ValueError("empty integer range")
        span = high - low
        return low + np.floor(self.uniform(n) * span).astype(np.int64)

    def permutation(self, n: int) -> np.ndarray:
        return np.argsort(self.next_u64(n), kind="stable")
