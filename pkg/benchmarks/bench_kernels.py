"""Time the numba kernels against their pure-numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 5]

Also times one end-to-end solve per backend.  The backend for a whole run can
be forced with ``ELLBB_NUMBA=0``; here both are selected in-process.
"""

import argparse
import time

import numpy as np

from ellbb import _kernels
from ellbb.bnb import solve
from ellbb.instances import complete_model, gen_q, gen_random_binary, gen_tsp, make_rng
from ellbb.oracles import _capacities


def best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def cases():
    rng = make_rng(7)
    for n in (20, 60):
        q = gen_q(n, rng)
        yield f"jacobi n={n}", "jacobi", (q, 1e-15 * np.linalg.norm(q), 100)
    for v in (10, 30):
        model = complete_model("tsp", v)
        x = rng.uniform(0.0, 1.0, model.n_edges)
        yield f"edmonds_karp |V|={v}", "edmonds_karp", (_capacities(model, x, 0), 0, v - 1)
    a = rng.integers(0, 11, size=(20000, 50)).astype(np.float64)
    b = np.floor(0.5 * a.sum(axis=1))
    yield "most_violated 20000x50", "most_violated", (a, b, rng.uniform(0, 1, 50))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not _kernels.NUMBA_AVAILABLE:
        print("numba is not installed; only the numpy path can run")
        return
    print(f"{'kernel':<26}{'numba [ms]':>12}{'numpy [ms]':>12}{'speedup':>10}")
    for name, kernel, inputs in cases():
        fast = _kernels.implementation(kernel, "numba")
        slow = _kernels.implementation(kernel, "numpy")
        fast(*inputs)  # compile
        tf = best_of(lambda: fast(*inputs), args.repeat)
        ts = best_of(lambda: slow(*inputs), args.repeat)
        print(f"{name:<26}{tf * 1e3:>12.3f}{ts * 1e3:>12.3f}{ts / tf:>10.1f}")

    print()
    for label, inst in (("random 25x1000", gen_random_binary(25, 1000, 0)), ("tsp |V|=7", gen_tsp(7, 0))):
        row = []
        for backend in ("numba", "numpy"):
            with _kernels.use_backend(backend):
                solve(inst)
                t = best_of(lambda: solve(inst), max(1, args.repeat // 2))
            row.append(t)
        print(f"solve {label:<20}{row[0]:>12.3f}s{row[1]:>11.3f}s{row[1] / row[0]:>10.1f}")


if __name__ == "__main__":
    main()
