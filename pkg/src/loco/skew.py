"""Low-rank parameterization of skew-symmetric matrices.

A pair of tall factors ``(U, V)``, each ``d x r`` with ``r << d``, defines
``A = U V^T - V U^T``, which is skew-symmetric by construction.  The same
object admits the auxiliary form ``A = X Y^T`` with ``X = [U | -V]`` and
``Y = [V | U]``, both ``d x 2r``; the fast rotation path consumes only X
and Y and never touches the dense ``d x d`` matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidRank
from .linalg import as_matrix, note_alloc
from .rng import Rng, rand_gaussian

# Default scale for the Gaussian half of the factor init; adapters start
# close to the identity rotation.
DEFAULT_INIT_STD = 0.02


@dataclass
class LowRankSkewFactors:
    """Learnable factor pair (u, v), each d x r."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.u = as_matrix(self.u, "u")
        self.v = as_matrix(self.v, "v")
        if self.u.shape != self.v.shape:
            raise DimensionMismatch(
                f"u and v must share a shape: {self.u.shape} vs {self.v.shape}"
            )
        d, r = self.u.shape
        if not 1 <= r <= d:
            raise InvalidRank(f"rank must satisfy 1 <= r <= d, got r={r}, d={d}")

    @property
    def dim(self) -> int:
        return self.u.shape[0]

    @property
    def rank(self) -> int:
        return self.u.shape[1]

    def scaled(self, c: float) -> "LowRankSkewFactors":
        """New factors with both halves multiplied by ``c``."""
        return LowRankSkewFactors(c * self.u, c * self.v)


def build_skew(factors: LowRankSkewFactors) -> np.ndarray:
    """Materialize the dense skew matrix ``u v^T - (u v^T)^T``.

    The product is formed once and its transpose subtracted entrywise, so
    ``A[i, j] == -A[j, i]`` holds bitwise and the diagonal is exactly zero;
    no post-hoc symmetrization tolerance is involved.
    """
    m = note_alloc(factors.u @ factors.v.T)
    return note_alloc(m - m.T)


def auxiliary_xy(factors: LowRankSkewFactors) -> tuple[np.ndarray, np.ndarray]:
    """The d x 2r pair (X, Y) with ``X Y^T`` equal to the skew matrix."""
    x = note_alloc(np.hstack([factors.u, -factors.v]))
    y = note_alloc(np.hstack([factors.v, factors.u]))
    return x, y


def init_factors(rng: Rng, d: int, r: int,
                 std: float = DEFAULT_INIT_STD) -> LowRankSkewFactors:
    """Fresh factors: u Gaussian, v zero, so the rotation starts exactly at I.

    The asymmetric init mirrors common adapter practice: the zero half
    keeps the initial transform an exact identity while the Gaussian half
    lets gradients reach v from the first step.
    """
    if not 1 <= r <= d:
        raise InvalidRank(f"rank must satisfy 1 <= r <= d, got r={r}, d={d}")
    u = rand_gaussian(rng, d, r, std)
    v = np.zeros((d, r))
    return LowRankSkewFactors(u, v)
