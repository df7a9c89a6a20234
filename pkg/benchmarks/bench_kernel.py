"""Compiled kernel core against the NumPy fallback.

Times the two hot paths (the per-node time integrand and the weighted sum
used by volume potentials) and one full ``gamma_batch`` evaluation, and
checks that both implementations agree.

    python3 benchmarks/bench_kernel.py [--repeat N] [--csv PATH]
"""

from __future__ import annotations

import argparse
import csv
import sys
import timeit

import numpy as np

from rotstokes import _kernel_py
from rotstokes.kernel import HAVE_COMPILED, PART_ALL, gamma_batch

if HAVE_COMPILED:
    from rotstokes import _kernelcore


def _cases(rng):
    x = np.array([3.0, 1.5])
    for m in (16, 256, 4096):
        Y = rng.uniform(-2.0, 2.0, size=(m, 2))
        W = rng.standard_normal((m, 12, 2))
        yield m, x, Y, W


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--csv", help="also write the table here")
    args = ap.parse_args(argv)
    if not HAVE_COMPILED:
        print("compiled core not built; only the fallback is available", file=sys.stderr)
        return 1
    rng = np.random.default_rng(7)
    t = np.geomspace(1e-3, 1e2, 15)
    a, lam = 0.1, 0.0
    rows = []
    for m, x, Y, W in _cases(rng):
        jobs = {
            "time_integrand": (
                lambda mod: mod.time_integrand(t, x, Y, a, lam, PART_ALL, True),
            ),
            "time_integrand_contracted": (
                lambda mod: mod.time_integrand_contracted(t, x, Y, a, lam, PART_ALL, True, W),
            ),
        }
        for name, (fn,) in jobs.items():
            ref = fn(_kernel_py)
            got = fn(_kernelcore)
            err = float(np.max(np.abs(ref - got)) / max(np.max(np.abs(ref)), 1e-300))
            tp = min(timeit.repeat(lambda: fn(_kernel_py), number=1, repeat=args.repeat))
            tc = min(timeit.repeat(lambda: fn(_kernelcore), number=1, repeat=args.repeat))
            rows.append([name, m, tp, tc, tp / tc, err])
    for m in (16, 256):
        Y = rng.uniform(-2.0, 2.0, size=(m, 2))
        x = np.array([3.0, 1.5])
        ref = gamma_batch(x, Y, a, grad=True, tol=1e-10, compiled=False)[0]
        got = gamma_batch(x, Y, a, grad=True, tol=1e-10, compiled=True)[0]
        err = float(np.max(np.abs(ref - got)) / np.max(np.abs(ref)))
        tp = min(timeit.repeat(lambda: gamma_batch(x, Y, a, grad=True, tol=1e-10, compiled=False), number=1, repeat=2))
        tc = min(timeit.repeat(lambda: gamma_batch(x, Y, a, grad=True, tol=1e-10, compiled=True), number=1, repeat=2))
        rows.append(["gamma_batch", m, tp, tc, tp / tc, err])
        W = rng.standard_normal((m, 12, 2))
        kw = dict(grad=True, tol=1e-10, weights=W)
        ref = gamma_batch(x, Y, a, compiled=False, **kw)[0]
        got = gamma_batch(x, Y, a, compiled=True, **kw)[0]
        err = float(np.max(np.abs(ref - got)) / np.max(np.abs(ref)))
        tp = min(timeit.repeat(lambda: gamma_batch(x, Y, a, compiled=False, **kw), number=1, repeat=2))
        tc = min(timeit.repeat(lambda: gamma_batch(x, Y, a, compiled=True, **kw), number=1, repeat=2))
        rows.append(["gamma_batch_weighted", m, tp, tc, tp / tc, err])

    header = ["path", "nodes", "numpy_s", "compiled_s", "speedup", "max_rel_diff"]
    print(f"{header[0]:28s}{header[1]:>7s}{header[2]:>12s}{header[3]:>12s}{header[4]:>9s}{header[5]:>14s}")
    for r in rows:
        print(f"{r[0]:28s}{r[1]:7d}{r[2]:12.4g}{r[3]:12.4g}{r[4]:9.2f}{r[5]:14.3g}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([r[0], r[1]] + [f"{v:.17g}" for v in r[2:]])
    return 0


if __name__ == "__main__":
    sys.exit(main())
