"""Timing of the numba kernels against their pure-numpy twins.

Both versions are imported directly, so the COCYCLE_LAB_NUMBA flag does not
matter here.  Each kernel is called once to compile before timing.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import time

import numpy as np

from cocycle_lab import analytic as an
from cocycle_lab import kernels as K
from cocycle_lab.cocycle import CocycleParams, grid_points
from cocycle_lab.freq import continued_fraction


def best_of(fn, repeat):
    fn()  # warm-up / compile
    ts = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        ts.append(time.perf_counter() - t)
    return min(ts)


def cases():
    P = CocycleParams(an.constant(1.0), an.amo_potential(5.0), 0.0, continued_fraction("golden", 20))
    args = (P.w, complex(P.E), *P.kernel_args())
    xs = grid_points(11)
    rng = np.random.default_rng(0)
    d = rng.normal(size=512)
    b2 = rng.random(511) + 0.1
    f = np.cos(2 * np.pi * grid_points(14))
    return [
        ("transfer_product n=512, 2^11 x",
         lambda: K.transfer_product_nb(xs, *args, 512, 1, 1),
         lambda: K.transfer_product_np(xs, *args, 512, 1, 1)),
        ("det_lastpair n=512, 2^11 x",
         lambda: K.det_lastpair_nb(xs, *args, 512),
         lambda: K.det_lastpair_np(xs, *args, 512)),
        ("bisect_eigs n=512",
         lambda: K.bisect_eigs_nb(d, b2, -6.0, 6.0, 1e-12),
         lambda: K.bisect_eigs_np(d, b2, -6.0, 6.0, 1e-12)),
        ("dyadic_oscillation 2^14, stride L/16",
         lambda: K.dyadic_oscillation_nb(f, 14, 16),
         lambda: K.dyadic_oscillation_np(f, 14, 16)),
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    print(f"{'kernel':40s} {'numba [s]':>10s} {'numpy [s]':>10s} {'speedup':>8s}")
    for name, nb, npf in cases():
        t_nb = best_of(nb, args.repeat)
        t_np = best_of(npf, args.repeat)
        print(f"{name:40s} {t_nb:10.4f} {t_np:10.4f} {t_np / t_nb:8.1f}x")


if __name__ == "__main__":
    main()
