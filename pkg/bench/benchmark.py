"""Time the compiled kernels against the numpy fallback.

    python bench/benchmark.py [--n 200000] [--repeat 5]

Each kernel is run on the same seeded point cloud with both backends; the
outputs are checked for bitwise agreement before any timing is reported.
"""
import argparse
import timeit

import numpy as np

from unilearn import _pykernels

try:
    from unilearn import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def cases(n, rng):
    X2 = rng.random((n, 2))
    X4 = rng.random((n, 4))
    return [
        ("hat_values d=2 s=2", lambda impl: impl.hat_values(X2, np.array([0.3, 0.7]), 16.0, 2)),
        ("hat_values d=4 s=3", lambda impl: impl.hat_values(X4, np.array([0.3, 0.7, 0.5, 0.1]), 64.0, 3)),
        ("grid_cells d=2 K=64", lambda impl: impl.grid_cells(X2, 64)),
        ("grid_cells d=4 K=8", lambda impl: impl.grid_cells(X4, 8)),
        ("touched_cells d=2 s=2 k=8", lambda impl: impl.touched_cells(X2, 8, 2)),
        ("touched_cells d=4 s=1 k=256", lambda impl: impl.touched_cells(X4, 256, 1)),
    ]


def best_of(fn, impl, repeat):
    return min(timeit.repeat(lambda: fn(impl), number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=200_000, help="points per call")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    if _ckernels is None:
        print("compiled kernels not available; nothing to compare")
        return 1
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':32s} {'python ms':>10s} {'cython ms':>10s} {'speedup':>8s}")
    for name, fn in cases(args.n, rng):
        a, b = fn(_pykernels), fn(_ckernels)
        if not np.array_equal(np.asarray(a), np.asarray(b)):
            raise SystemExit(f"{name}: backends disagree")
        tp = best_of(fn, _pykernels, args.repeat)
        tc = best_of(fn, _ckernels, args.repeat)
        print(f"{name:32s} {1e3 * tp:10.2f} {1e3 * tc:10.2f} {tp / tc:7.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
