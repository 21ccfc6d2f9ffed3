"""
Portable seeded random numbers.

SplitMix64 integer core with Box-Muller gaussians, so that synthetic fixtures
are bit-identical on every platform and can be regenerated in other languages.
"""

import math
from typing import List, Optional, Sequence, TypeVar

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15

T = TypeVar("T")


def mix64(value: int) -> int:
    """The SplitMix64 finaliser."""
    z = value & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, *path: int) -> int:
    """Derive an independent stream seed from a base seed and an index path."""
    state = mix64(seed & MASK64)
    for part in path:
        state = mix64((state + GOLDEN_GAMMA * ((part & MASK64) + 1)) & MASK64)
    return state


class SplitMix64:
    """64-bit SplitMix generator."""

    def __init__(self, seed: int) -> None:
        self.state = seed & MASK64
        self._spare: Optional[float] = None

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN_GAMMA) & MASK64
        return mix64(self.state)

    def random(self) -> float:
        """Uniform double in [0, 1) built from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, low: float, high: float) -> float:
        return low + (high - low) * self.random()

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n) by multiply-shift."""
        if n <= 0:
            raise ValueError("n must be positive")
        return (self.next_u64() * n) >> 64

    def choice(self, items: Sequence[T]) -> T:
        if not items:
            raise ValueError("cannot choose from an empty sequence")
        return items[self.randbelow(len(items))]

    def gauss(self) -> float:
        """Standard normal deviate (Box-Muller, second value cached)."""
        if self._spare is not None:
            value, self._spare = self._spare, None
            return value
        u1 = self.random()
        while u1 <= 0.0:
            u1 = self.random()
        u2 = self.random()
        radius = math.sqrt(-2.0 * math.log(u1))
        theta = 2.0 * math.pi * u2
        self._spare = radius * math.sin(theta)
        return radius * math.cos(theta)

    def normal_vector(self, size: int) -> np.ndarray:
        return np.array([self.gauss() for _ in range(size)], dtype=np.float64)

    def unit_vector(self, size: int) -> np.ndarray:
        vector = self.normal_vector(size)
        norm = float(np.linalg.norm(vector))
        while norm == 0.0:
            vector = self.normal_vector(size)
            norm = float(np.linalg.norm(vector))
        return vector / norm

    def shuffle(self, items: List[T]) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]

    @classmethod
    def for_index(cls, seed: int, *path: int) -> "SplitMix64":
        """Generator for the sample addressed by ``path`` under ``seed``."""
        return cls(derive_seed(seed, *path))
