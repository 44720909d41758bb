"""Time the numba kernels against the pure-numpy fallback.

Each backend runs in its own interpreter because the choice is made at import
time from ``BEXDEP_DISABLE_NUMBA``.  Usage::

    python3 benchmarks/bench_kernels.py [--n 128] [--repeat 200]
"""

import argparse
import json
import os
import subprocess
import sys
import timeit


def child(n, repeat):
    import numpy as np

    from bexdep import _kernels
    from bexdep.beret import beret_test
    from bexdep.binex import column_ranks
    from bexdep.multifit import multifit_test

    rng = np.random.default_rng(0)
    X, Y = rng.normal(size=(n, 2)), rng.normal(size=(n, 2))
    R = column_ranks(rng.normal(size=(n, 30)))
    xc = _kernels.cell_codes(R, n, 4)
    yc = _kernels.cell_codes(R[:, ::-1].copy(), n, 4)
    tabs = rng.integers(0, 40, size=(4, 500))

    cases = {
        "cell_codes (n x 30, depth 4)": lambda: _kernels.cell_codes(R, n, 4),
        "joint_counts (30 batches, 16x16)": lambda: _kernels.joint_counts(xc, yc, 16, 16),
        "fisher_2x2 (500 tables)": lambda: _kernels.fisher_2x2(*tabs),
        "multifit_test (p=q=2, R=4)": lambda: multifit_test(X, Y),
        "beret_test (m=30, d=4)": lambda: beret_test(X, Y),
    }
    out = {}
    for name, fn in cases.items():
        fn()  # compile / warm caches
        best = min(timeit.repeat(fn, number=1, repeat=repeat))
        out[name] = best
    print(json.dumps({"backend": _kernels.BACKEND, "times": out}))


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--n", type=int, default=128)
    ap.add_argument("--repeat", type=int, default=200)
    ap.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.child:
        child(args.n, args.repeat)
        return

    results = []
    for disable in ("0", "1"):
        env = dict(os.environ, BEXDEP_DISABLE_NUMBA=disable)
        proc = subprocess.run(
            [sys.executable, __file__, "--child", "--n", str(args.n), "--repeat", str(args.repeat)],
            env=env, capture_output=True, text=True, check=True,
        )
        results.append(json.loads(proc.stdout))
    nb, np_ = results
    print(f"n = {args.n}, best of {args.repeat}; backends: {nb['backend']} vs {np_['backend']}")
    print(f"{'kernel':36s} {'numba us':>10s} {'numpy us':>10s} {'ratio':>7s}")
    for name in nb["times"]:
        a, b = nb["times"][name] * 1e6, np_["times"][name] * 1e6
        print(f"{name:36s} {a:10.1f} {b:10.1f} {b / a:7.2f}")


if __name__ == "__main__":
    main()
