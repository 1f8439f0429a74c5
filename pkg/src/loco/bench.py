"""Timing and allocation harness for the rotation kernels.

Each grid point times one full forward application: build the transform
from its parameters and rotate a batch.  Four methods are covered:

* ``LocoWoodbury`` - the low-rank first-order chain (production path);
* ``LocoNaive``    - dense Cayley per component, sequential d x d work;
* ``OftBlock``     - block-diagonal rotations (r_or_b is the block size);
* ``HouseholderSeq`` - sequential reflections (r_or_b is the count).

Timings are machine-relative: consumers should compare ratios and scaling
exponents, never absolute numbers.  Memory is accounted deterministically
by summing every buffer the kernels allocate during one application
(``peak_bytes``), not by sampling process RSS.  Before a config is timed,
its method output is checked against a dense materialized oracle, so a
benchmark can never time wrong code.
"""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass

import numpy as np

from .baselines import (BlockDiagonalRotation, HouseholderChain,
                        householder_apply, materialize_blocks,
                        materialize_householder, oft_apply,
                        random_block_rotation, random_householder)
from .cayley import cayley_naive
from .chain import MODE_FIRST_ORDER, RotationChain, chain_first_order, materialize_chain
from .errors import ConfigUnsupported
from .linalg import (blas_limit, get_num_threads, note_alloc, set_num_threads,
                     track_allocations)
from .rng import Rng, rand_gaussian
from .skew import LowRankSkewFactors, build_skew

METHODS = ("LocoWoodbury", "LocoNaive", "OftBlock", "HouseholderSeq")

MIN_REPEATS = 5
WARMUP = 2

# Oracle agreement threshold for the pre-timing equivalence check.
EQUIV_RTOL = 1e-9


@dataclass
class BenchRecord:
    """One timing row; wall times are nanoseconds over the kept repeats."""

    method: str
    d: int
    r_or_b: int
    n: int
    batch: int
    wall_ns_median: int
    wall_ns_min: int
    wall_ns_max: int
    peak_bytes: int


CSV_HEADER = "method,d,r_or_b,n,batch,wall_ns_median,wall_ns_min,wall_ns_max,peak_bytes"


def _loco_workload(rng: Rng, d: int, r: int, n: int, batch: int):
    comps = [
        LowRankSkewFactors(rand_gaussian(rng.split(2 * i), d, r, 0.02),
                           rand_gaussian(rng.split(2 * i + 1), d, r, 0.02))
        for i in range(n)
    ]
    chain = RotationChain(comps, mode=MODE_FIRST_ORDER)
    xs = rand_gaussian(rng.split(1000), batch, d, 1.0)
    return chain, xs


def _make_case(method: str, rng: Rng, d: int, r_or_b: int, n: int, batch: int):
    """Return (op, oracle_check) closures for one grid point."""
    if method == "LocoWoodbury":
        chain, xs = _loco_workload(rng, d, r_or_b, n, batch)

        def op():
            return chain_first_order(chain, xs)

        def check():
            dense = materialize_chain(chain)
            _assert_close(op(), xs @ dense.T, method)

    elif method == "LocoNaive":
        chain, xs = _loco_workload(rng, d, r_or_b, n, batch)

        def op():
            out = xs
            for factors in chain.components:
                rot = cayley_naive(build_skew(factors))
                with blas_limit():
                    out = note_alloc(out @ rot.T)
            return out

        def check():
            exact = RotationChain(chain.components, mode="exact")
            _assert_close(op(), xs @ materialize_chain(exact).T, method)

    elif method == "OftBlock":
        if r_or_b < 1 or d % r_or_b != 0:
            raise ConfigUnsupported(
                f"OftBlock needs the block size to divide d: got b={r_or_b}, d={d}"
            )
        rot = random_block_rotation(rng, d, r_or_b, 0.1)
        xs = rand_gaussian(rng.split(1000), batch, d, 1.0)

        def op():
            return oft_apply(rot, xs)

        def check():
            _assert_close(op(), xs @ materialize_blocks(rot).T, method)

    elif method == "HouseholderSeq":
        refl = random_householder(rng, d, r_or_b)
        xs = rand_gaussian(rng.split(1000), batch, d, 1.0)

        def op():
            return householder_apply(refl, xs)

        def check():
            _assert_close(op(), xs @ materialize_householder(refl).T, method)

    else:
        raise ConfigUnsupported(f"unknown method {method!r}")

    return op, check


def _assert_close(got: np.ndarray, want: np.ndarray, method: str) -> None:
    scale = max(float(np.linalg.norm(want)), 1.0)
    err = float(np.linalg.norm(got - want)) / scale
    if err > EQUIV_RTOL:
        raise AssertionError(
            f"{method} disagrees with its oracle (relative error {err:.3e}); "
            "refusing to benchmark wrong code"
        )


def time_case(op, check, repeats: int) -> tuple[int, int, int, int]:
    """Verify, then time: returns (median, min, max, accounted bytes).

    Allocation accounting happens inside the first warmup run, whose
    timing is discarded anyway.
    """
    if repeats < MIN_REPEATS:
        raise ValueError(f"repeats must be >= {MIN_REPEATS}, got {repeats}")
    check()
    with track_allocations() as tracker:
        op()
    samples = []
    for _ in range(WARMUP - 1):
        op()
    for _ in range(repeats):
        start = time.perf_counter_ns()
        op()
        samples.append(time.perf_counter_ns() - start)
    return (int(statistics.median(samples)), min(samples), max(samples),
            tracker.total_bytes)


def run_grid(methods, d_grid, r_grid, n_grid, batch: int, repeats: int = 5,
             seed: int = 0, parallel: bool = False) -> list[BenchRecord]:
    """Benchmark every (method, d, r_or_b, n) combination.

    Workload content is seed-deterministic; wall times are not.  Runs
    single-threaded unless ``parallel`` lifts the BLAS cap for the
    duration (giving up cross-setting bit reproducibility while it runs).
    """
    if not methods or not d_grid or not r_grid or not n_grid:
        raise ConfigUnsupported("benchmark grids must be nonempty")
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise ConfigUnsupported(f"unknown methods: {unknown}; valid: {METHODS}")

    previous_threads = get_num_threads()
    if parallel:
        set_num_threads(0)
    try:
        records = []
        root = Rng(seed)
        for method in methods:
            chained = method in ("LocoWoodbury", "LocoNaive")
            for d in d_grid:
                for r_or_b in r_grid:
                    for n in (n_grid if chained else [1]):
                        # stable across processes, unlike hash() on strings
                        key = (((METHODS.index(method) * 65536 + d) * 4096
                                + r_or_b) * 256 + n)
                        case_rng = root.split(key)
                        op, check = _make_case(method, case_rng, d, r_or_b, n, batch)
                        med, lo, hi, peak = time_case(op, check, repeats)
                        records.append(BenchRecord(
                            method=method, d=d, r_or_b=r_or_b, n=n,
                            batch=batch, wall_ns_median=med, wall_ns_min=lo,
                            wall_ns_max=hi, peak_bytes=peak))
        return records
    finally:
        set_num_threads(previous_threads)


def write_bench_csv(records: list[BenchRecord], fh) -> None:
    """CSV rows per the documented schema, LF line endings, no quoting."""
    fh.write(CSV_HEADER + "\n")
    for r in records:
        fh.write(f"{r.method},{r.d},{r.r_or_b},{r.n},{r.batch},"
                 f"{r.wall_ns_median},{r.wall_ns_min},{r.wall_ns_max},"
                 f"{r.peak_bytes}\n")
