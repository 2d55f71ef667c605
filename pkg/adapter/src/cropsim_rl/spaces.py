"""Minimal space descriptors following the de-facto Gym API shape.

Only what agent libraries actually introspect: shape/dtype/bounds for the
observation box and ``n`` for the discrete action set, plus ``contains``
and seeded ``sample`` for smoke tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Box:
    low: float
    high: float
    shape: tuple[int, ...]
    dtype: str = "float64"

    def contains(self, x) -> bool:
        arr = np.asarray(x)
        return arr.shape == self.shape and bool(
            np.all(arr >= self.low) and np.all(arr <= self.high))

    def sample(self, rng: np.random.Generator | None = None) -> np.ndarray:
        rng = rng or np.random.default_rng()
        lo = max(self.low, -1e6)
        hi = min(self.high, 1e6)
        return rng.uniform(lo, hi, size=self.shape).astype(self.dtype)


@dataclass(frozen=True)
class Discrete:
    n: int

    def contains(self, x) -> bool:
        try:
            value = int(x)
        except (TypeError, ValueError):
            return False
        return 0 <= value < self.n

    def sample(self, rng: np.random.Generator | None = None) -> int:
        rng = rng or np.random.default_rng()
        return int(rng.integers(self.n))
