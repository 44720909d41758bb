"""Find per-shape noise multipliers giving a target power at the mid level.

    python scripts/calibrate_noise.py [--method multifit] [--target 0.5]

Prints a dict suitable for ``bexdep.sim.NOISE_SCALE``.
"""

import argparse

import numpy as np

from bexdep import sim


def power_at(method, name, scale, reps, seed):
    spec = sim.ScenarioSpec(name, noise_scale={name: scale})
    pv = sim.simulate_pvalues(method, spec, [sim.MID_LEVEL], reps, seed)[sim.MID_LEVEL]
    return sim.rejection_count(pv, 0.05) / reps


def calibrate(method, name, target, reps, seed, iters=12):
    lo, hi = 1e-3, 20.0
    for _ in range(iters):
        mid = float(np.sqrt(lo * hi))
        if power_at(method, name, mid, reps, seed) > target:
            lo = mid
        else:
            hi = mid
    return float(np.sqrt(lo * hi))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--method", default="multifit")
    ap.add_argument("--target", type=float, default=0.5)
    ap.add_argument("--reps", type=int, default=200)
    ap.add_argument("--seed", type=int, default=12345)
    args = ap.parse_args()
    out = {}
    for name in sim.SHAPES:
        out[name] = round(calibrate(args.method, name, args.target, args.reps, args.seed), 3)
        print(name, out[name], flush=True)
    print(out)


if __name__ == "__main__":
    main()
