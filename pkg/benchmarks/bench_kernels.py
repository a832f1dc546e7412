"""Compare the compiled and pure-Python kernel backends on typical workloads.

    python benchmarks/bench_kernels.py            # full sizes
    python benchmarks/bench_kernels.py --quick    # smaller sizes, a few seconds

Each row reports the best-of-``repeat`` wall time per backend, the speed-up
and the largest relative difference between the two results.
"""

import argparse
import timeit

import numpy as np

from bifurclab import kernels
from bifurclab.families import load
from bifurclab.grid import ScanGrid
from bifurclab.walk import letters_to_slots, sample_letter_block


def _slots(mu, n, trials, seed=0):
    return letters_to_slots(sample_letter_block(mu, n, trials, seed, "bench"))


def workloads(quick: bool):
    scale = 4 if quick else 1
    fam, mu = load("riley")
    grid = ScanGrid(-1, 1, -1, 1, 64 // scale, 64 // scale)
    images, _ = fam.slot_images(grid.nodes().ravel())
    walk = _slots(mu, 200 // scale, 64 // scale)

    sch, smu = load("schottky")
    one = sch.slot_images(np.array([2.5 + 0.5j]))[0]
    long_walk = _slots(smu, 2000 // scale, 100 // scale, 1)

    d3, mu3 = load("diag_rot3")
    one3 = d3.slot_images(np.array([2.5]))[0]
    walk3 = _slots(mu3, 2000 // scale, 50 // scale, 2)

    rng = np.random.default_rng(0)
    mats = rng.standard_normal((20000 // scale, 3, 3)) + 1j * rng.standard_normal((20000 // scale, 3, 3))
    atoms = one[0]
    chain = np.stack([rng.integers(0, atoms.shape[0], 4000 // scale) for _ in range(16)])
    e1 = np.array([1.0, 0.0], dtype=complex)

    return [
        ("scaled_products (grid x words)", lambda b: kernels.scaled_products(images, walk, backend=b)[1]),
        ("scaled_vector_products", lambda b: kernels.scaled_vector_products(images, walk, e1, backend=b)[1]),
        ("qr_exponents d=2", lambda b: kernels.qr_exponents(one, long_walk, 2, backend=b)),
        ("qr_exponents d=3", lambda b: kernels.qr_exponents(one3, walk3, 3, backend=b)),
        ("eigvals_batch 3x3", lambda b: kernels.eigvals_batch(mats, backend=b)),
        ("projective_chain", lambda b: kernels.projective_chain(atoms, chain, e1, 100, 8, 400 // scale,
                                                                backend=b)),
    ]


def _rel_diff(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    scale = max(np.abs(a).max(), 1e-300)
    return float(np.abs(a - b).max() / scale)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--quick", action="store_true")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    have = sorted(kernels.BACKENDS)
    print(f"backends: {', '.join(have)} (default {kernels.DEFAULT_BACKEND})")
    if "cython" not in have:
        print("compiled backend not built; timing the Python fallback only")
    print(f"{'kernel':34s} {'python s':>10s} {'cython s':>10s} {'speed-up':>9s} {'max rel diff':>13s}")
    for name, fn in workloads(args.quick):
        t_py = min(timeit.repeat(lambda: fn("python"), number=1, repeat=args.repeat))
        if "cython" in have:
            t_cy = min(timeit.repeat(lambda: fn("cython"), number=1, repeat=args.repeat))
            diff = _rel_diff(fn("python"), fn("cython"))
            print(f"{name:34s} {t_py:10.4f} {t_cy:10.4f} {t_py / t_cy:8.1f}x {diff:13.2e}")
        else:
            print(f"{name:34s} {t_py:10.4f} {'-':>10s} {'-':>9s} {'-':>13s}")


if __name__ == "__main__":
    main()
