"""Reference orthogonal parameterizations for cross-checks and benchmarks.

Two classic constructions bracket the low-rank rotation chain:

* block-diagonal rotations: independent ``b x b`` Cayley transforms on
  disjoint coordinate blocks, ``d (b - 1) / 2`` free parameters;
* Householder chains: a product of ``r`` reflections, ``d r`` parameters,
  determinant ``(-1)^r``.

Both are applied input-centrically here (per block / per reflector); the
dense composites exist only as test oracles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cayley import cayley_naive
from .errors import BlockMismatch, DimensionMismatch, ZeroReflector
from .linalg import as_matrix, blas_limit, note_alloc
from .rng import Rng, rand_gaussian


@dataclass
class BlockDiagonalRotation:
    """Per-block skew parameters; block i stores its strict lower triangle."""

    block_size: int
    blocks: list[np.ndarray]  # each of length b (b - 1) / 2

    def __post_init__(self):
        b = self.block_size
        if b < 1:
            raise BlockMismatch(f"block size must be >= 1, got {b}")
        want = b * (b - 1) // 2
        for i, params in enumerate(self.blocks):
            arr = np.ascontiguousarray(params, dtype=np.float64).ravel()
            if arr.size != want:
                raise DimensionMismatch(
                    f"block {i} has {arr.size} parameters, expected {want}"
                )
            self.blocks[i] = arr

    @property
    def dim(self) -> int:
        return self.block_size * len(self.blocks)

    def param_count(self) -> int:
        """d (b - 1) / 2 free entries across d / b blocks."""
        return self.dim * (self.block_size - 1) // 2

    def block_skew(self, i: int) -> np.ndarray:
        """Dense b x b skew matrix for one block."""
        b = self.block_size
        low = np.zeros((b, b))
        low[np.tril_indices(b, k=-1)] = self.blocks[i]
        return low - low.T


def random_block_rotation(rng: Rng, d: int, b: int,
                          std: float = 0.1) -> BlockDiagonalRotation:
    if b < 1 or d % b != 0:
        raise BlockMismatch(f"block size {b} does not divide dimension {d}")
    n_blocks = d // b
    params = rand_gaussian(rng, max(n_blocks, 1), max(b * (b - 1) // 2, 1), std)
    if b == 1:
        return BlockDiagonalRotation(b, [np.empty(0)] * n_blocks)
    return BlockDiagonalRotation(b, [params[i].copy() for i in range(n_blocks)])


def oft_apply(rot: BlockDiagonalRotation, xs: np.ndarray) -> np.ndarray:
    """Blockwise rotation of each row: block i acts on its coordinate slice."""
    xs = as_matrix(xs, "xs")
    d = rot.dim
    if xs.shape[1] != d:
        raise DimensionMismatch(f"input has {xs.shape[1]} columns, expected {d}")
    b = rot.block_size
    out = note_alloc(np.empty_like(xs))
    with blas_limit():
        for i in range(len(rot.blocks)):
            r_block = cayley_naive(rot.block_skew(i))
            sl = slice(i * b, (i + 1) * b)
            out[:, sl] = xs[:, sl] @ r_block.T
    return out


def materialize_blocks(rot: BlockDiagonalRotation) -> np.ndarray:
    """Dense block-diagonal composite (oracle path)."""
    full = np.zeros((rot.dim, rot.dim))
    b = rot.block_size
    for i in range(len(rot.blocks)):
        sl = slice(i * b, (i + 1) * b)
        full[sl, sl] = cayley_naive(rot.block_skew(i))
    return full


@dataclass
class HouseholderChain:
    """Reflection vectors; the transform is the ordered product of them."""

    reflectors: list[np.ndarray]  # each of length d, nonzero

    def __post_init__(self):
        dims = set()
        for i, u in enumerate(self.reflectors):
            arr = np.ascontiguousarray(u, dtype=np.float64).ravel()
            if not arr.any():
                raise ZeroReflector(f"reflector {i} is identically zero")
            dims.add(arr.size)
            self.reflectors[i] = arr
        if len(dims) != 1:
            raise DimensionMismatch(f"reflectors disagree on dimension: {dims}")

    @property
    def dim(self) -> int:
        return self.reflectors[0].size

    def param_count(self) -> int:
        """d entries per reflector."""
        return self.dim * len(self.reflectors)


def random_householder(rng: Rng, d: int, r: int) -> HouseholderChain:
    vecs = rand_gaussian(rng, r, d, 1.0)
    return HouseholderChain([vecs[i].copy() for i in range(r)])


def householder_apply(chain: HouseholderChain, xs: np.ndarray) -> np.ndarray:
    """Apply the reflections to each row, first reflector first, O(N d r)."""
    xs = as_matrix(xs, "xs")
    if xs.shape[1] != chain.dim:
        raise DimensionMismatch(
            f"input has {xs.shape[1]} columns, expected {chain.dim}"
        )
    out = note_alloc(xs.copy())
    with blas_limit():
        for u in chain.reflectors:
            coef = out @ u
            coef *= 2.0 / float(u @ u)
            out -= note_alloc(np.outer(coef, u))
    return out


def materialize_householder(chain: HouseholderChain) -> np.ndarray:
    """Dense reflection product with ``apply(xs) == xs @ H.T`` (oracle path).

    Each reflector is symmetric, so applying them to rows in order matches
    the column-convention product taken in reverse.
    """
    full = np.eye(chain.dim)
    for u in chain.reflectors:
        h = np.eye(chain.dim) - (2.0 / float(u @ u)) * np.outer(u, u)
        full = h @ full
    return full
