"""SplitMix64 pseudo-random streams.

The generator is counter based so any implementation can reproduce a stream
from its recurrence alone. For a seed ``s`` the i-th draw (i = 1, 2, ...) is::

    z = s + i * 0x9E3779B97F4A7C15            (mod 2**64)
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9  (mod 2**64)
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB  (mod 2**64)
    z = z ^ (z >> 31)

Uniform doubles are ``(z >> 11) * 2**-53``. Standard normals use Box-Muller on
consecutive uniform pairs ``(u1, u2)``::

    r = sqrt(-2 * ln(1 - u1))
    n1 = r * cos(2 * pi * u2),  n2 = r * sin(2 * pi * u2)
"""

import math

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX2)
    return z ^ (z >> np.uint64(31))


def derive_seed(seed: int, tag: int) -> int:
    """Derive an independent child seed for a named sub-stream.

    Args:
        seed: Parent seed.
        tag: Small integer naming the sub-stream.

    Returns:
        The first draw of SplitMix64(seed ^ (tag * gamma)).
    """
    child = (seed ^ ((tag * GOLDEN_GAMMA) & MASK64)) & MASK64
    return int(SplitMix64(child).next_u64(1)[0])


class SplitMix64:
    """Deterministic 64-bit stream; every draw advances an internal counter."""

    def __init__(self, seed: int) -> None:
        self.seed = seed & MASK64
        self._counter = 0

    def next_u64(self, count: int) -> np.ndarray:
        """Return the next ``count`` raw 64-bit outputs."""
        idx = np.arange(self._counter + 1, self._counter + count + 1, dtype=np.uint64)
        self._counter += count
        with np.errstate(over="ignore"):
            z = np.uint64(self.seed) + idx * np.uint64(GOLDEN_GAMMA)
            return _mix(z)

    def uniform(self, count: int) -> np.ndarray:
        """Return ``count`` doubles in [0, 1)."""
        bits = self.next_u64(count) >> np.uint64(11)
        return bits.astype(np.float64) * (2.0**-53)

    def normal(self, shape: int | tuple[int, ...]) -> np.ndarray:
        """Return standard normal draws of the given shape (row-major fill)."""
        dims = (shape,) if isinstance(shape, int) else tuple(shape)
        total = int(np.prod(dims)) if dims else 1
        pairs = (total + 1) // 2
        u = self.uniform(2 * pairs).reshape(pairs, 2)
        radius = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
        angle = 2.0 * math.pi * u[:, 1]
        out = np.empty(2 * pairs, dtype=np.float64)
        out[0::2] = radius * np.cos(angle)
        out[1::2] = radius * np.sin(angle)
        return out[:total].reshape(dims)

    def permutation(self, count: int) -> np.ndarray:
        """Return a permutation of ``range(count)`` ordered by fresh uniforms."""
        return np.argsort(self.uniform(count), kind="stable")
