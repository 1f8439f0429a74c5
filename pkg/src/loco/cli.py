"""Command-line entry point for the experiments.

Subcommands cover the desk-scale studies: the first-order norm-error
sweep, the orthogonality-deviation certificate, temperature sweeps on a
trained adapter, the rotation-recovery training demo, and the kernel
benchmarks.  Every run is fully determined by (subcommand, flags, seed)
apart from wall-clock fields; outputs are UTF-8 CSV with LF endings.

The ``LOCO_THREADS`` environment variable caps internal BLAS parallelism
(0 = auto); the default of one thread keeps results bit-reproducible.

Exit status is 0 only when all internal invariant checks pass; failures
emit one machine-readable ``error: <kind>: <detail>`` line on stderr.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from .adapter import mse_loss, rotation_recovery_demo, temperature_sweep
from .bench import METHODS, run_grid, write_bench_csv
from .chain import (MODE_EXACT, MODE_FIRST_ORDER, RotationChain,
                    deviation_report, factors_with_update_norm,
                    norm_error_sweep)
from .errors import LocoError
from .linalg import blas_limit, set_num_threads
from .rng import Rng

_F = "{:.17g}".format  # full-precision floats so reruns are byte-identical


def _parse_grid(spec: str, log: bool) -> np.ndarray:
    try:
        start_s, stop_s, points_s = spec.split(":")
        start, stop, points = float(start_s), float(stop_s), int(points_s)
    except ValueError as exc:
        raise LocoError(f"bad grid spec {spec!r}, want start:stop:points") from exc
    if points < 1:
        raise LocoError(f"grid needs at least one point, got {points}")
    if points == 1:
        return np.array([start])
    if log:
        if start <= 0 or stop <= 0:
            raise LocoError("log-spaced grid endpoints must be positive")
        return np.geomspace(start, stop, points)
    return np.linspace(start, stop, points)


def _parse_int_list(spec: str) -> list[int]:
    try:
        return [int(tok) for tok in spec.split(",") if tok]
    except ValueError as exc:
        raise LocoError(f"bad integer list {spec!r}") from exc


class _Output:
    """Write to --out path, or stdout when the path is '-'."""

    def __init__(self, path: str):
        self.path = path

    def __enter__(self):
        if self.path == "-":
            self._fh = None
            return sys.stdout
        self._fh = open(self.path, "w", encoding="utf-8", newline="\n")
        return self._fh

    def __exit__(self, *exc):
        if self._fh is not None:
            self._fh.close()


def cmd_error_analysis(args) -> int:
    eps_grid = _parse_grid(args.grid, log=True)
    rows = norm_error_sweep(Rng(args.seed), args.d, args.r, args.n,
                            list(eps_grid), args.trials)
    with _Output(args.out) as fh:
        fh.write("eps,mean_rel_err,std_rel_err\n")
        for eps, mean, std in rows:
            fh.write(f"{_F(eps)},{_F(mean)},{_F(std)}\n")
    return 0


def cmd_deviation(args) -> int:
    rng = Rng(args.seed)
    violations = 0
    with _Output(args.out) as fh:
        fh.write("n,d,r,gamma,deviation,bound,satisfied\n")
        case = 0
        for n in _parse_int_list(args.n_grid):
            for d in _parse_int_list(args.d_grid):
                for r in _parse_int_list(args.r_grid):
                    for _ in range(args.trials):
                        comps = [factors_with_update_norm(
                            rng.split(case * 64 + j), d, r, args.scale)
                            for j in range(n)]
                        case += 1
                        rep = deviation_report(RotationChain(comps))
                        violations += not rep.satisfied
                        fh.write(f"{n},{d},{r},{_F(rep.gamma)},"
                                 f"{_F(rep.deviation)},{_F(rep.bound)},"
                                 f"{'true' if rep.satisfied else 'false'}\n")
    if violations:
        print(f"error: deviation-bound-violated: {violations} rows exceed "
              "the certificate", file=sys.stderr)
        return 1
    return 0


def cmd_temperature_sweep(args) -> int:
    demo = rotation_recovery_demo(Rng(args.seed), k=args.k, d=args.d,
                                  r=args.r, n=args.n, steps=args.steps,
                                  lr=args.lr)
    ts = _parse_grid(args.grid, log=False)
    rows = temperature_sweep(demo.adapter, demo.xs, demo.ys, ts,
                             mode=args.mode)
    with blas_limit():
        pretrained_loss, _ = mse_loss(demo.xs @ demo.adapter.w0.T, demo.ys)
    with _Output(args.out) as fh:
        fh.write("t,loss,norm_dev\n")
        for t, loss, dev in rows:
            fh.write(f"{_F(t)},{_F(loss)},{_F(dev)}\n")
    zero_rows = [loss for t, loss, _ in rows if t == 0.0]
    if any(loss != pretrained_loss for loss in zero_rows):
        print("error: temperature-endpoint: loss at t=0 differs from the "
              "pretrained loss", file=sys.stderr)
        return 1
    return 0


def cmd_finetune_demo(args) -> int:
    demo = rotation_recovery_demo(Rng(args.seed), k=args.k, d=args.d,
                                  r=args.r, n=args.n, steps=args.steps,
                                  lr=args.lr)
    with _Output(args.out) as fh:
        fh.write("step,loss\n")
        for step, loss in enumerate(demo.losses):
            fh.write(f"{step},{_F(loss)}\n")
    if not np.isfinite(demo.losses).all():
        print("error: divergence: loss trace contains non-finite values",
              file=sys.stderr)
        return 1
    return 0


def cmd_bench(args) -> int:
    methods = [m for m in args.methods.split(",") if m]
    records = run_grid(methods, _parse_int_list(args.d_grid),
                       _parse_int_list(args.r_grid),
                       _parse_int_list(args.n_grid), args.batch,
                       repeats=args.repeats, seed=args.seed,
                       parallel=args.parallel)
    with _Output(args.out) as fh:
        write_bench_csv(records, fh)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="loco",
        description="Low-rank compositional orthogonal rotation experiments",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, d=32, r=2, n=2):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--d", type=int, default=d, help="feature dimension")
        p.add_argument("--r", type=int, default=r, help="factor rank")
        p.add_argument("--n", type=int, default=n, help="chain length")
        p.add_argument("--out", default="-", help="output CSV path ('-' = stdout)")

    p = sub.add_parser("error-analysis",
                       help="norm-preservation error of the first-order chain")
    common(p, d=32, r=2, n=4)
    p.add_argument("--grid", default="1e-6:0.31622776601683794:20",
                   help="log-spaced eps grid, start:stop:points")
    p.add_argument("--trials", type=int, default=50)
    p.set_defaults(func=cmd_error_analysis)

    p = sub.add_parser("deviation",
                       help="orthogonality deviation vs the certified bound")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--d-grid", default="16,64")
    p.add_argument("--r-grid", default="1,2,4")
    p.add_argument("--n-grid", default="1,2,4,8")
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--scale", type=float, default=0.1,
                   help="target per-component update norm")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_deviation)

    p = sub.add_parser("temperature-sweep",
                       help="loss vs adaptation strength on a trained adapter")
    common(p)
    p.add_argument("--k", type=int, default=16, help="output dimension")
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--lr", type=float, default=16.0)
    p.add_argument("--grid", default="0:2:9",
                   help="linear temperature grid, start:stop:points")
    p.add_argument("--mode", choices=[MODE_EXACT, MODE_FIRST_ORDER],
                   default=MODE_EXACT)
    p.set_defaults(func=cmd_temperature_sweep)

    p = sub.add_parser("finetune-demo",
                       help="rotation-recovery training run (loss trace)")
    common(p)
    p.add_argument("--k", type=int, default=16, help="output dimension")
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--lr", type=float, default=16.0)
    p.set_defaults(func=cmd_finetune_demo)

    p = sub.add_parser("bench", help="timing/memory grid over kernels")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--methods", default=",".join(METHODS))
    p.add_argument("--d-grid", default="256,1024")
    p.add_argument("--r-grid", default="4")
    p.add_argument("--n-grid", default="1")
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--parallel", action="store_true",
                   help="lift the single-thread BLAS cap while timing")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    env_threads = os.environ.get("LOCO_THREADS")
    if env_threads is not None:
        try:
            set_num_threads(int(env_threads))
        except ValueError:
            print(f"error: bad-threads: LOCO_THREADS={env_threads!r} is not "
                  "a non-negative integer", file=sys.stderr)
            return 2
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except LocoError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: IoError: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
