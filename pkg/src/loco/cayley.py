"""Cayley transforms: dense oracle path and the low-rank fast path.

``cayley_naive`` maps a dense skew matrix to a proper rotation through a
full ``d x d`` inversion; it exists as the reference oracle and as the
baseline the fast path is measured against.  ``cayley_woodbury`` produces
the same rotation from the factors alone: with ``A = X Y^T`` the inverse
collapses to a ``2r x 2r`` core,

    R = I + 2 X (I - Y^T X)^{-1} Y^T,

so constructing and applying the rotation costs O(d r^2 + r^3) and
O(N d r) respectively, never touching a dense ``d x d`` intermediate.

Orientation convention, fixed once for the whole package: input batches
are ``N x d`` with one vector per row, and every apply computes the image
of each row under the rotation, i.e. ``xs @ R.T``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NotSkewSymmetric
from .linalg import as_matrix, blas_limit, lu_invert, note_alloc, require_square
from .skew import LowRankSkewFactors, auxiliary_xy

SKEW_ATOL = 1e-12


@dataclass(frozen=True)
class WoodburyCore:
    """Precomputed pieces of one low-rank rotation.

    ``x`` carries the temperature scaling, so the stored triple always
    satisfies ``core_inv @ (I - y.T @ x) == I`` regardless of the t it was
    built with.  Immutable; safe to reuse across many apply calls.
    """

    x: np.ndarray          # d x 2r, temperature folded in
    y: np.ndarray          # d x 2r
    core_inv: np.ndarray   # 2r x 2r inverse of (I - y^T x)

    @property
    def dim(self) -> int:
        return self.x.shape[0]


def cayley_naive(a: np.ndarray) -> np.ndarray:
    """Dense Cayley transform ``(I - A)^{-1} (I + A)`` of a skew matrix.

    This is the O(d^3) oracle path.  Raises NotSkewSymmetric when the
    symmetry residual exceeds tolerance; SingularMatrix cannot trigger for
    genuinely skew input (the spectrum of A is imaginary), so a trip there
    means the input was corrupted.
    """
    a = as_matrix(a, "a")
    require_square(a, "a")
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    residual = float(np.max(np.abs(a + a.T))) if a.size else 0.0
    if residual > SKEW_ATOL * scale:
        raise NotSkewSymmetric(
            f"symmetry residual {residual:.3e} exceeds {SKEW_ATOL * scale:.3e}"
        )
    eye = np.eye(a.shape[0])
    inv = lu_invert(note_alloc(eye - a))
    with blas_limit():
        r = inv @ note_alloc(eye + a)
    return note_alloc(r)


def cayley_woodbury(factors: LowRankSkewFactors, t: float = 1.0) -> WoodburyCore:
    """Build the low-rank core for the rotation of ``t * A``.

    Temperature enters by scaling X, so the core inverse becomes
    ``(I - t * Y^T X)^{-1}``.  Cost is O(d r^2 + r^3); the result can be
    applied to any batch without materializing the rotation.
    """
    if not np.isfinite(t):
        raise ValueError(f"temperature must be finite, got {t}")
    x, y = auxiliary_xy(factors)
    if t != 1.0:
        x = note_alloc(t * x)
    two_r = x.shape[1]
    with blas_limit():
        core = note_alloc(np.eye(two_r) - y.T @ x)
    core_inv = lu_invert(core)
    return WoodburyCore(x=x, y=y, core_inv=core_inv)


def apply_rotation(core: WoodburyCore, xs: np.ndarray) -> np.ndarray:
    """Rotate each row of ``xs``: returns ``xs @ R.T`` in O(N d r).

    Expands to ``xs + 2 (xs Y) K^T X^T`` with K the stored core inverse;
    the largest temporaries are N x 2r and the N x d output.
    """
    out = rotation_delta(core, xs)
    out += xs
    return out


def rotation_delta(core: WoodburyCore, xs: np.ndarray) -> np.ndarray:
    """The update part ``xs @ (R - I).T`` of an apply, as a fresh buffer."""
    xs = as_matrix(xs, "xs")
    if xs.shape[1] != core.dim:
        raise DimensionMismatch(
            f"input has {xs.shape[1]} columns, rotation expects {core.dim}"
        )
    with blas_limit():
        p = note_alloc(xs @ core.y)           # N x 2r
        q = note_alloc(p @ core.core_inv.T)   # N x 2r
        q *= 2.0
        delta = note_alloc(q @ core.x.T)      # N x d
    return delta


def materialize(core: WoodburyCore) -> np.ndarray:
    """Explicit dense rotation ``I + 2 X K Y^T`` (test/debug path only)."""
    with blas_limit():
        m = note_alloc(core.x @ core.core_inv)
        r = note_alloc(2.0 * (m @ core.y.T))
    r[np.diag_indices(core.dim)] += 1.0
    return r


def transpose_core(core: WoodburyCore) -> WoodburyCore:
    """Core of the inverse rotation R^T, reusing the same factor blocks.

    ``(I - Y^T X)^{-T} = (I - X^T Y)^{-1}``, so swapping the roles of X
    and Y and transposing the stored inverse yields exactly R^T.
    """
    return WoodburyCore(x=core.y, y=core.x, core_inv=core.core_inv.T)
