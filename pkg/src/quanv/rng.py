"""Counter-based SplitMix64 generator.

Every random draw in the package goes through this module so that a seed
fully determines circuits, initial weights, shuffles and synthetic data.

Algorithm (portable, no library-specific seeding):

* output ``i`` (``i = 1, 2, ...``) of a stream with seed ``s`` is
  ``mix64(s + i * 0x9E3779B97F4A7C15 mod 2**64)``;
* ``mix64(z)``: ``z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
  z ^= z >> 27; z *= 0x94D049BB133111EB; z ^= z >> 31`` (mod 2**64);
* a float in ``[0, 1)`` is ``(u >> 11) * 2**-53``;
* an integer in ``[0, k)`` is ``floor(float * k)``;
* ``split(key)`` starts a fresh stream seeded with
  ``mix64(s ^ mix64(key + 0x9E3779B97F4A7C15))``.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def derive_seed(seed: int, key: int) -> int:
    """Seed of the child stream ``key`` of ``seed``."""
    return mix64((seed & MASK64) ^ mix64(key + GAMMA))


class SplitMix64:
    def __init__(self, seed: int):
        if seed < 0 or seed > MASK64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
        self.seed = seed
        self.counter = 0

    def split(self, key: int) -> "SplitMix64":
        return SplitMix64(derive_seed(self.seed, key))

    def next_u64(self, n: int) -> np.ndarray:
        """The next ``n`` raw outputs as a ``uint64`` array."""
        idx = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        with np.errstate(over="ignore"):
            return _mix64_array(np.uint64(self.seed) + idx * np.uint64(GAMMA))

    def random(self, n: int) -> np.ndarray:
        """``n`` doubles uniform on ``[0, 1)``."""
        return (self.next_u64(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def uniform(self, low: float, high: float, n: int) -> np.ndarray:
        return low + (high - low) * self.random(n)

    def integers(self, k: int, n: int) -> np.ndarray:
        """``n`` integers uniform on ``[0, k)``."""
        return np.floor(self.random(n) * k).astype(np.int64)

    def permutation(self, n: int) -> np.ndarray:
        """Random permutation of ``range(n)``: stable argsort of ``n`` raw draws."""
        return np.argsort(self.next_u64(n), kind="stable")
