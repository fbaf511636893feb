"""Time the compiled stencil kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--n 65] [--repeat 5]

Prints the best-of-N wall time per kernel for both backends, their ratio,
and the max deviation between the two results.
"""
import argparse
import time

import numpy as np

from pxclda import _kernels_py

try:
    from pxclda import _kernels as compiled
except ImportError:
    compiled = None


def best_time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=65, help="points per axis")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if compiled is None:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation`")

    rng = np.random.default_rng(0)
    shape = (args.n,) * 3
    f = rng.standard_normal(shape)
    fc = f + 1j * rng.standard_normal(shape)
    v = rng.standard_normal(shape)
    h = 0.25
    cases = [
        ("second_diff z", lambda k: k.second_diff(f, 0, h)),
        ("first_diff x (complex)", lambda k: k.first_diff(fc, 2, h)),
        ("laplacian", lambda k: k.laplacian(f, h)),
        ("-lap/2 + v", lambda k: k.kinetic_plus_potential(f, v, h)),
        ("-lap/2 + v (complex)", lambda k: k.kinetic_plus_potential(fc, v, h)),
    ]
    print(f"grid {args.n}^3, best of {args.repeat}")
    print(f"{'kernel':<24}{'cython ms':>12}{'numpy ms':>12}{'speedup':>10}{'max diff':>12}")
    for name, call in cases:
        tc, oc = best_time(lambda: call(compiled), args.repeat)
        tp, op = best_time(lambda: call(_kernels_py), args.repeat)
        diff = float(np.max(np.abs(oc - op)))
        print(f"{name:<24}{tc * 1e3:>12.2f}{tp * 1e3:>12.2f}{tp / tc:>10.2f}{diff:>12.1e}")


if __name__ == "__main__":
    main()
