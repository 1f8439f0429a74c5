"""Dense matrix kernels: multiply, LU inversion/determinant, norms.

Matrices are plain two-dimensional C-contiguous ``float64`` numpy arrays;
the heavy lifting is delegated to BLAS/LAPACK.  Two pieces of machinery
live here because every other module depends on them:

* **Thread pinning.**  BLAS libraries may change their internal work split
  (and therefore accumulation order) with the thread count, which breaks
  bit-for-bit reproducibility.  All kernels in this package therefore run
  under a pinned BLAS thread count, one by default.  ``set_num_threads``
  raises the cap for throughput at the cost of cross-setting bit
  reproducibility; results remain deterministic run-to-run for any fixed
  setting.

* **Allocation tracking.**  Benchmarks account memory by counting every
  array the kernels allocate rather than sampling process RSS, which gives
  deterministic, platform-independent byte counts.  Kernels report their
  allocations through ``note_alloc``; ``track_allocations`` activates a
  collector.
"""

from __future__ import annotations

import contextlib
import threading
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from threadpoolctl import ThreadpoolController

from .errors import DimensionMismatch, DimensionTooLarge, SingularMatrix

# Pivots smaller than this fraction of the largest input entry are treated
# as exact zeros during LU elimination.
PIVOT_RTOL = 1e-12

# lu_det materializes the pivot product in a float; cap the size to the
# regime where proper-rotation checks actually run.
DET_MAX_DIM = 64

_controller = ThreadpoolController()
_num_threads: int | None = 1  # None = leave the ambient BLAS pool alone


def set_num_threads(n: int) -> None:
    """Set the BLAS thread cap used inside all kernels (0 = ambient/auto)."""
    global _num_threads
    if n < 0:
        raise ValueError(f"thread count must be >= 0, got {n}")
    _num_threads = None if n == 0 else n


def get_num_threads() -> int:
    """Current cap (0 means the ambient BLAS configuration is used)."""
    return 0 if _num_threads is None else _num_threads


def blas_limit() -> contextlib.AbstractContextManager:
    """Context manager pinning BLAS threads to the configured cap."""
    if _num_threads is None:
        return contextlib.nullcontext()
    return _controller.limit(limits=_num_threads, user_api="blas")


@dataclass
class AllocationTracker:
    """Collects (shape, nbytes) for every kernel allocation while active."""

    shapes: list[tuple[int, ...]] = field(default_factory=list)
    total_bytes: int = 0

    def record(self, arr: np.ndarray) -> None:
        self.shapes.append(arr.shape)
        self.total_bytes += arr.nbytes

    def square_allocations(self, dim: int) -> int:
        """Number of recorded dim x dim buffers."""
        return sum(1 for s in self.shapes if s == (dim, dim))


_tracking = threading.local()


@contextlib.contextmanager
def track_allocations():
    """Activate allocation accounting for kernels on this thread."""
    tracker = AllocationTracker()
    prev = getattr(_tracking, "tracker", None)
    _tracking.tracker = tracker
    try:
        yield tracker
    finally:
        _tracking.tracker = prev


def note_alloc(arr: np.ndarray) -> np.ndarray:
    """Report an array allocated by a kernel to the active tracker, if any."""
    tracker = getattr(_tracking, "tracker", None)
    if tracker is not None:
        tracker.record(arr)
    return arr


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Validate and coerce input to a 2-D C-contiguous float64 array.

    Raises DimensionMismatch for wrong dimensionality and ValueError for
    non-finite entries; returns the input unchanged when it already
    satisfies the layout (no copy).
    """
    arr = np.asarray(m, dtype=np.float64, order="C")
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got ndim={arr.ndim}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def require_square(m: np.ndarray, name: str = "matrix") -> None:
    if m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got {m.shape}")


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product ``a @ b`` under the pinned BLAS configuration."""
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise DimensionMismatch(
            f"inner dimensions differ: {a.shape} x {b.shape}"
        )
    with blas_limit():
        out = a @ b
    return note_alloc(out)


def lu_invert(m: np.ndarray) -> np.ndarray:
    """Invert a square matrix via LU factorization with partial pivoting.

    Pivots below ``PIVOT_RTOL * max|m|`` raise SingularMatrix: the Cayley
    construction never produces a singular ``I - A`` for skew ``A``, so a
    trip here indicates corrupted input rather than unlucky data.
    """
    m = as_matrix(m)
    require_square(m)
    d = m.shape[0]
    with blas_limit():
        lu, piv = scipy.linalg.lu_factor(m, check_finite=False)
        _check_pivots(lu, m)
        inv = scipy.linalg.lu_solve((lu, piv), np.eye(d), check_finite=False)
    note_alloc(lu)
    if not np.isfinite(inv).all():
        raise SingularMatrix("inversion produced non-finite entries")
    return note_alloc(inv)


def lu_det(m: np.ndarray) -> float:
    """Determinant as the signed product of LU pivots (small matrices only)."""
    m = as_matrix(m)
    require_square(m)
    if m.shape[0] > DET_MAX_DIM:
        raise DimensionTooLarge(
            f"lu_det supports dimensions up to {DET_MAX_DIM}, got {m.shape[0]}"
        )
    with blas_limit():
        lu, piv = scipy.linalg.lu_factor(m, check_finite=False)
    sign = 1.0
    for i, p in enumerate(piv):
        if p != i:
            sign = -sign
    return sign * float(np.prod(np.diag(lu)))


def _check_pivots(lu: np.ndarray, original: np.ndarray) -> None:
    scale = np.max(np.abs(original)) if original.size else 0.0
    threshold = PIVOT_RTOL * max(scale, 1.0e-300)
    pivots = np.abs(np.diag(lu))
    if pivots.size and pivots.min() < threshold:
        raise SingularMatrix(
            f"pivot {pivots.min():.3e} below threshold {threshold:.3e}"
        )


def frobenius_norm(m: np.ndarray) -> float:
    """Square root of the sum of squared entries."""
    arr = np.asarray(m, dtype=np.float64)
    return float(np.sqrt(np.sum(arr * arr)))
