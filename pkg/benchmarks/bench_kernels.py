"""Time the numba kernels against the numpy fallback on the same inputs.

    python benchmarks/bench_kernels.py [--points 512] [--steps 4096] [--repeat 3]

Both backends are imported explicitly, so the QPCOCYCLE_DISABLE_NUMBA flag
does not matter here.  Each row reports the best of ``--repeat`` runs and the
largest difference between the two results.
"""

import argparse
import time

import numpy as np

from qpcocycle.core import Frequency, Potential, schrodinger_family
from qpcocycle.kernels import backend, split_frequency


def best_time(fn, repeat):
    out, best = None, float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _log_size(mats, logs):
    return np.log(np.max(np.abs(mats), axis=1)) + logs


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--points", type=int, default=512)
    p.add_argument("--steps", type=int, default=4096)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)

    fam = schrodinger_family(Potential.peaked(30.0), Frequency.golden_mean(), -2.2)
    cargs = fam.kernel_args()
    w = split_frequency(fam.omega)
    thetas = np.arange(args.points) / args.points
    n = args.steps
    cases = {
        "push_slopes": lambda m: m.push_slopes(thetas, n, np.inf, True, *cargs, *w)[0],
        "converge_slopes": lambda m: m.converge_slopes(thetas, 32, 200_000, 1e-10, np.inf, True, *cargs, *w)[0],
        # the two backends renormalise at different steps, so compare log |product|
        "scaled_product": lambda m: _log_size(*m.scaled_product(thetas[:64], n, *cargs, *w)),
        "log_stretch": lambda m: m.log_stretch(thetas[:8], 16 * n, 1000, *cargs, *w),
    }
    nb, npy = backend("numba"), backend("numpy")
    for fn in cases.values():  # JIT warm-up outside the timings
        fn(nb)
    print(f"{'kernel':<16}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}{'max |diff|':>14}")
    for name, fn in cases.items():
        t_nb, r_nb = best_time(lambda: fn(nb), args.repeat)
        t_np, r_np = best_time(lambda: fn(npy), args.repeat)
        diff = float(np.max(np.abs(np.asarray(r_nb) - np.asarray(r_np))))
        print(f"{name:<16}{t_nb:>12.4f}{t_np:>12.4f}{t_np / t_nb:>10.1f}{diff:>14.3e}")


if __name__ == "__main__":
    main()
