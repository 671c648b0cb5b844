"""Time the compiled and NumPy kernels on the benchmark meshes.

    python3 benchmarks/bench_kernels.py [--nx 16 --ny 16 --repeat 200]
"""

import argparse
import timeit

import numpy as np

from plateflow import kernels
from plateflow.model import PlateProblem, make_benchmark


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--nx", type=int, default=16)
    ap.add_argument("--ny", type=int, default=16)
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args()

    P = PlateProblem(make_benchmark("bilayer"), args.nx, args.ny)
    sp = P.space
    rng = np.random.default_rng(0)
    yl = np.ascontiguousarray(sp.local(P.y0 + 0.1 * rng.standard_normal(sp.ndof)))
    calls = {
        "cubic_energy": lambda m: m.cubic_energy(sp.hess, sp.grad, sp.area, P.Z, yl),
        "cubic_gradient": lambda m: m.cubic_gradient(sp.hess, sp.grad, sp.area, P.Z, yl),
        "constraint_rows": lambda m: m.constraint_rows(sp.grad, sp.area, yl),
        "metric_defect": lambda m: m.metric_defect(sp.grad, sp.area, P.g, yl),
    }
    backends = {"python": kernels.get_backend("python")}
    try:
        backends["cython"] = kernels.get_backend("cython")
    except ImportError:
        print("compiled kernels not built; timing the NumPy path only")

    print(f"{sp.mesh.n_elements} elements, best of 5 x {args.repeat} calls, ms per call")
    print(f"{'kernel':<16}" + "".join(f"{b:>10}" for b in backends) + ("   speedup" if len(backends) == 2 else ""))
    for name, fn in calls.items():
        t = {}
        for b, mod in backends.items():
            t[b] = 1e3 * min(timeit.repeat(lambda: fn(mod), number=args.repeat, repeat=5)) / args.repeat
        row = f"{name:<16}" + "".join(f"{t[b]:>10.3f}" for b in backends)
        if len(t) == 2:
            row += f"{t['python'] / t['cython']:>10.1f}x"
        print(row)


if __name__ == "__main__":
    main()
