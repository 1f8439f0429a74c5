"""Deterministic random generation for reproducible experiments.

The generator is splitmix64: output ``i`` of a stream seeded with ``s`` is
``mix64(s + (i+1) * GOLDEN)`` where ``mix64`` is the usual xor-shift /
multiply finalizer.  Because each output depends only on the seed and the
counter, sampling vectorizes over numpy uint64 arrays and the stream is
bit-identical across platforms, processes, and thread counts.  Child
streams are derived by hashing (seed, key), which keeps them statistically
independent of the parent.  Portability and reproducibility are the goals
here, not cryptographic strength.

Gaussians come from the Box-Muller transform applied to consecutive pairs
of 53-bit uniforms.
"""

from __future__ import annotations

import numpy as np

from .linalg import note_alloc

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U64_MASK = (1 << 64) - 1


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


class Rng:
    """Seeded splitmix64 stream with uniform and Gaussian sampling."""

    def __init__(self, seed: int):
        self._seed = np.uint64(seed & _U64_MASK)
        self._counter = 0

    @property
    def seed(self) -> int:
        return int(self._seed)

    def split(self, key: int) -> "Rng":
        """Derive an independent child stream for the given key."""
        base = np.array([key & _U64_MASK], dtype=np.uint64)
        base = (base ^ _GOLDEN) + self._seed
        return Rng(int(_mix64(base)[0]))

    def next_u64(self, n: int) -> np.ndarray:
        """Next ``n`` raw 64-bit outputs."""
        idx = np.arange(self._counter + 1, self._counter + n + 1,
                        dtype=np.uint64)
        self._counter += n
        return _mix64(self._seed + idx * _GOLDEN)

    def uniform(self, n: int) -> np.ndarray:
        """``n`` doubles uniform on [0, 1) with 53-bit resolution."""
        return (self.next_u64(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def gaussian(self, n: int) -> np.ndarray:
        """``n`` standard normal samples via Box-Muller."""
        pairs = (n + 1) // 2
        u = self.next_u64(2 * pairs)
        # u1 shifted into (0, 1] so the log never sees zero.
        u1 = ((u[:pairs] >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53
        u2 = (u[pairs:] >> np.uint64(11)).astype(np.float64) * 2.0**-53
        radius = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        z = np.concatenate([radius * np.cos(theta), radius * np.sin(theta)])
        return z[:n]


def rand_gaussian(rng: Rng, rows: int, cols: int, std: float = 1.0) -> np.ndarray:
    """Matrix of i.i.d. N(0, std^2) entries drawn from the seeded stream."""
    if std < 0:
        raise ValueError(f"std must be >= 0, got {std}")
    if std == 0.0:
        return note_alloc(np.zeros((rows, cols)))
    out = (std * rng.gaussian(rows * cols)).reshape(rows, cols)
    return note_alloc(out)
