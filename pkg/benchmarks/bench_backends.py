#!/usr/bin/env python3
"""Timing comparison of the compiled kernels against the pure-Python twins.

Run from the repository root:

    python3 benchmarks/bench_backends.py [--repeat 5]

The workloads mirror the hot paths of a simulation campaign: the analytic
ratio bisection and PSD bound search (one per observer per step) and the
ADMM node QP (dozens per constrained design step).
"""

import argparse
import time

import numpy as np

from zonofd import _kernels_py

try:
    from zonofd import _kernels
except ImportError:
    _kernels = None


def make_fractional_instance(rng, dim):
    N = rng.normal(size=(dim + 1, dim))
    n0 = rng.normal(size=dim + 1)
    M = rng.normal(size=(dim + 1, dim))
    m0 = rng.normal(size=dim + 1)
    return (N.T @ N, 2 * n0 @ N, float(n0 @ n0) + 0.5,
            M.T @ M, 2 * m0 @ M, float(m0 @ m0) + 0.5)


def make_admm_instance(rng, dim):
    q, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
    theta = np.abs(rng.normal(size=dim))
    lin = rng.normal(size=dim)
    box = 1.5 * np.ones(dim)
    half = dim // 2
    starts = np.array([0, half], dtype=np.int64)
    lens = np.array([half, dim - half], dtype=np.int64)
    kinds = np.array([0, 1], dtype=np.int64)
    radii = np.array([1.0, 0.8])
    centers = np.zeros(dim)
    Mmap = rng.normal(size=(dim - half, dim - half)) + 2 * np.eye(dim - half)
    U, s, Vt = np.linalg.svd(Mmap)
    b = rng.normal(scale=0.2, size=dim - half)
    centers[half:] = Vt.T @ ((U.T @ b) / s)
    vmats = [None, np.ascontiguousarray(Vt.T)]
    svals = [None, s.copy()]
    return (q, theta, lin, 0.3, -box, box, starts, lens, kinds, radii, centers, vmats, svals)


def bench(label, fn, instances, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        for inst in instances:
            fn(*inst)
        best = min(best, time.perf_counter() - t0)
    per_call = best / len(instances)
    print(f"  {label:>10s}: {per_call * 1e6:9.1f} us/call")
    return per_call


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if _kernels is None:
        print("compiled backend not built; rebuild with `pip install -e . --no-build-isolation`")
        return
    rng = np.random.default_rng(0)

    print("dinkelbach_bisect (dim 4, the per-observer design loop)")
    insts = [make_fractional_instance(rng, 4) for _ in range(200)]
    full = []
    for inst in insts:
        ok, hi = _kernels.psd_gamma_upper(inst[0], inst[3], 1e-9)
        full.append(inst + (0.0, hi, 1e-8, 200))
    t_py = bench("python", _kernels_py.dinkelbach_bisect, full, args.repeat)
    t_cy = bench("cython", _kernels.dinkelbach_bisect, full, args.repeat)
    print(f"  speedup: {t_py / t_cy:.1f}x")

    print("psd_gamma_upper (dim 14, the joint-design bound)")
    insts14 = [make_fractional_instance(rng, 14) for _ in range(50)]
    bounds = [(i[0], i[3], 1e-9) for i in insts14]
    t_py = bench("python", _kernels_py.psd_gamma_upper, bounds, args.repeat)
    t_cy = bench("cython", _kernels.psd_gamma_upper, bounds, args.repeat)
    print(f"  speedup: {t_py / t_cy:.1f}x")

    print("admm_qp (dim 14, the constrained node solve)")
    qps = [make_admm_instance(rng, 14) + (1.0, 1e-9, 20_000) for _ in range(20)]
    t_py = bench("python", _kernels_py.admm_qp, qps, args.repeat)
    t_cy = bench("cython", _kernels.admm_qp, qps, args.repeat)
    print(f"  speedup: {t_py / t_cy:.1f}x")


if __name__ == "__main__":
    main()
