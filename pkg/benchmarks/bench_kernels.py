"""Compiled core vs pure-Python fallback on the same workloads.

    python benchmarks/bench_kernels.py [--repeat 3] [--quick]

Each case is run on both backends, outputs are checked for equality, and
the best wall time of ``--repeat`` runs is reported.
"""

import argparse
import time

import numpy as np

from oilwater import kernels
from oilwater.lattice import crop_output

CASES = {
    "exact d=1 n=300 tracked": dict(n=300, dim=1, engine="exact", policy="leftmost", track=True),
    "exact d=1 n=300 uniform": dict(n=300, dim=1, engine="exact", policy="uniform", track=False),
    "batched d=1 n=3000": dict(n=3000, dim=1, engine="batched", policy="queue", track=False),
    "batched d=2 n=1024": dict(n=1024, dim=2, engine="batched", policy="queue", track=False),
}
QUICK = {"exact d=1 n=300 tracked", "batched d=1 n=3000"}


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def same_walk(a, b):
    return all(np.array_equal(x, y) for x, y in zip(a, b))


def same_run(a, b, dim):
    # raw windows differ in size between backends; compare the cropped fields
    lo_a, fa = crop_output(a, dim)
    lo_b, fb = crop_output(b, dim)
    if lo_a != lo_b or any(not np.array_equal(fa[k], fb[k]) for k in fa):
        return False
    scalars = ("status", "tau", "N", "returns_total", "sum_z", "p_final", "p_stride")
    return all(a[k] == b[k] for k in scalars) and np.array_equal(a["p_series"], b["p_series"])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--quick", action="store_true", help="two small cases only")
    args = ap.parse_args()
    if kernels.compiled is None:
        raise SystemExit("compiled core not built; run `pip install -e . --no-build-isolation`")
    rows = []
    cases = {k: v for k, v in CASES.items() if not args.quick or k in QUICK}
    for name, kw in cases.items():
        tc, oc = best_of(lambda: kernels.compiled.simulate(seed=7, **kw), args.repeat)
        tp, op = best_of(lambda: kernels.pure.simulate(seed=7, **kw), 1 if not args.quick else args.repeat)
        rows.append((name, oc["tau"], tc, tp, same_run(oc, op, kw["dim"])))
    walk = (2000, 200, 3)
    tc, oc = best_of(lambda: kernels.compiled.lazy_walk(*walk), args.repeat)
    tp, op = best_of(lambda: kernels.pure.lazy_walk(*walk), 1)
    rows.append((f"lazy walk t={walk[0]} x{walk[1]}", walk[0] * walk[1], tc, tp, same_walk(oc, op)))

    print(f"{'case':32} {'work':>10} {'compiled s':>11} {'python s':>10} {'speedup':>8}  equal")
    for name, work, tc, tp, eq in rows:
        print(f"{name:32} {work:>10} {tc:>11.4f} {tp:>10.4f} {tp / tc:>8.1f}  {eq}")
    if not all(r[-1] for r in rows):
        raise SystemExit("backends disagree")


if __name__ == "__main__":
    main()
