"""Compare the compiled and pure-numpy activation kernels.

    python benchmarks/bench_kernels.py --size 100000 --repeat 5
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from opau import kernels
from opau.bases import PolyBasis


def _best(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    parser = argparse.ArgumentParser(formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    parser.add_argument("--size", type=int, default=100_000)
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--k", type=int, default=5)
    parser.add_argument("--l", type=int, default=4)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    x = rng.uniform(-3, 3, args.size)
    up = rng.normal(size=args.size)
    c = rng.normal(size=args.k + 1)
    d = rng.normal(size=args.l)
    backends = kernels.available_backends()
    if "compiled" not in backends:
        print("compiled extension not built; timing the numpy fallback only")

    print(f"{'basis':6} {'op':9} " + " ".join(f"{b:>10}" for b in backends) + "   speedup")
    for basis in PolyBasis:
        for op in ("forward", "backward"):
            times = []
            for name in backends:  # pure first, then compiled
                mod = getattr(kernels, name)
                if op == "forward":
                    fn = lambda: mod.opau_forward(x, basis.code, c, d, True)
                else:
                    fn = lambda: mod.opau_backward(x, up, basis.code, c, d, True)
                times.append(_best(fn, args.repeat))
            ratio = f"{times[0] / times[1]:9.1f}x" if len(times) == 2 else ""
            print(f"{basis.value:6} {op:9} " + " ".join(f"{t * 1e3:8.2f}ms" for t in times) + f" {ratio}")


if __name__ == "__main__":
    main()
