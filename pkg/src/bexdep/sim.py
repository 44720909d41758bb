"""Scenario generators and Monte Carlo power / level estimation.

Signal pairs ``(x*, y*)`` are drawn on ``[-1, 1]`` scales:

======== ==============================================================
linear   ``y = x``
parabolic ``y = x**2``
circular ``(cos theta, sin theta)``, noise on both coordinates
sine     ``y = sin(4 pi u)`` with ``u = (x + 1) / 2``
checkerboard uniform over the dark cells of a 4x4 board
local    uniform on three quadrants; on the lower-right quadrant a
         Gaussian-copula blob (uniform margins inside the cell)
null     independent
======== ==============================================================

The noise sd at level ``L`` is ``0.05 * L * NOISE_SCALE[name]``.  Replicate
``r`` at level ``L`` always draws from the stream seeded by
``(seed, L, r)``, so curves do not depend on scheduling or thread count.
"""

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import ndtr

from .errors import InputError

SHAPES = ("linear", "parabolic", "circular", "sine", "checkerboard", "local")
SCENARIOS = SHAPES + ("null",)
PLACEMENTS = ("marginal", "spread")
NOISE_LEVELS = tuple(range(1, 21))
MID_LEVEL = 10

# per-shape noise multipliers; level 10 gives MultiFIT (R_max=4, n=128,
# p=q=2, marginal) roughly half power
NOISE_SCALE = {
    "linear": 2.023,
    "parabolic": 0.726,
    "circular": 0.377,
    "sine": 1.956,
    "checkerboard": 0.264,
    "local": 0.2,
    "null": 1.0,
}

LOCAL_PROB = 0.25
LOCAL_RHO = 0.99


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    placement: str = "marginal"
    dims: tuple = (2, 2)
    n: int = 128
    noise_level: float = 1
    seed: object = 0
    noise_scale: dict = field(default=None, compare=False, hash=False)

    def __post_init__(self):
        if self.name not in SCENARIOS:
            raise InputError(f"unknown scenario {self.name!r}")
        if self.placement not in PLACEMENTS:
            raise InputError(f"unknown placement {self.placement!r}")
        if self.noise_level < 0:
            raise InputError("noise level must be non-negative")
        if min(self.dims) < 1 or self.n < 8:
            raise InputError("invalid dimensions or sample size")

    def sigma(self):
        scales = self.noise_scale or NOISE_SCALE
        return 0.05 * self.noise_level * scales[self.name]


def signal_pair(name, n, sigma, rng):
    """Draw ``n`` noisy signal pairs of the named shape."""
    if name == "circular":
        theta = rng.uniform(0.0, 2 * np.pi, n)
        x = np.cos(theta) + sigma * rng.standard_normal(n)
        y = np.sin(theta) + sigma * rng.standard_normal(n)
        return x, y
    if name == "checkerboard":
        cell = rng.integers(0, 8, n)
        row = cell // 2
        col = 2 * (cell % 2) + (row % 2)
        x = -1.0 + 0.5 * (col + rng.uniform(size=n))
        y = -1.0 + 0.5 * (row + rng.uniform(size=n))
        return x, y + sigma * rng.standard_normal(n)
    if name == "local":
        x = rng.uniform(-1.0, 1.0, n)
        y = rng.uniform(-1.0, 1.0, n)
        blob = rng.uniform(size=n) < LOCAL_PROB
        k = int(blob.sum())
        z1 = rng.standard_normal(k)
        z2 = LOCAL_RHO * z1 + math.sqrt(1 - LOCAL_RHO**2) * rng.standard_normal(k)
        x[blob] = ndtr(z1)
        y[blob] = ndtr(z2) - 1.0
        # the other points fill the remaining three quadrants uniformly
        rest = ~blob
        while True:
            bad = rest & (x > 0) & (y <= 0)
            m = int(bad.sum())
            if not m:
                break
            x[bad] = rng.uniform(-1.0, 1.0, m)
            y[bad] = rng.uniform(-1.0, 1.0, m)
        return x, y + sigma * rng.standard_normal(n)
    x = rng.uniform(-1.0, 1.0, n)
    if name == "linear":
        y = x.copy()
    elif name == "parabolic":
        y = x**2
    elif name == "sine":
        y = np.sin(4 * np.pi * (x + 1) / 2)
    elif name == "null":
        y = rng.uniform(-1.0, 1.0, n)
    else:
        raise InputError(f"unknown scenario {name!r}")
    return x, y + sigma * rng.standard_normal(n)


def spread_rotation(dim):
    """Symmetric orthogonal map sending ``e_1`` to ``(1, ..., 1) / sqrt(dim)``."""
    if dim == 1:
        return np.ones((1, 1))
    target = np.full(dim, 1.0 / math.sqrt(dim))
    v = np.zeros(dim)
    v[0] = 1.0
    v -= target
    v /= np.linalg.norm(v)
    return np.eye(dim) - 2.0 * np.outer(v, v)


def generate_scenario(spec, rotation=None):
    """Draw ``(X, Y)`` for a scenario.

    ``rotation`` overrides the spread mixing as a pair of matrices
    ``(R_x, R_y)``; each row of the marginal design is multiplied by ``R^T``.
    """
    rng = np.random.default_rng(spec.seed)
    p, q = spec.dims
    if spec.placement == "spread" and (p < 2 or q < 2) and rotation is None:
        raise InputError("spread placement needs at least two coordinates per side")
    x, y = signal_pair(spec.name, spec.n, spec.sigma(), rng)
    X = rng.standard_normal((spec.n, p))
    Y = rng.standard_normal((spec.n, q))
    X[:, 0] = x
    Y[:, 0] = y
    if spec.placement == "spread":
        rx, ry = rotation if rotation is not None else (spread_rotation(p), spread_rotation(q))
        X = X @ np.asarray(rx).T
        Y = Y @ np.asarray(ry).T
    return X, Y


def rotation_2d(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


def rotated_circle_3d(n, noise_sd=0.05, seed=0):
    """Circle in ``(X_3, Y_3)`` rotated by ``pi / 4``; other coordinates are noise."""
    if n < 8:
        raise InputError("insufficient sample: need n >= 8")
    rng = np.random.default_rng(seed)
    theta = rng.uniform(0.0, 2 * np.pi, n)
    xy = np.column_stack(
        [
            np.cos(theta) + noise_sd * rng.standard_normal(n),
            np.sin(theta) + noise_sd * rng.standard_normal(n),
        ]
    )
    xy = xy @ rotation_2d(np.pi / 4).T
    X = np.column_stack([rng.standard_normal((n, 2)), xy[:, 0]])
    Y = np.column_stack([rng.standard_normal((n, 2)), xy[:, 1]])
    return X, Y


# --------------------------------------------------------------------------
# methods


def _multifit_p(X, Y, seed, **kw):
    from .multifit import multifit_pvalue

    return multifit_pvalue(X, Y, **kw)


def _beret_p(X, Y, seed, **kw):
    from .beret import beret_pvalue

    return beret_pvalue(X, Y, seed=seed, **kw)


METHODS = {"multifit": _multifit_p, "beret": _beret_p}


@dataclass(frozen=True)
class Method:
    """A named test returning a global p-value; ``params`` go to the test."""

    name: str
    params: tuple = ()

    def __call__(self, X, Y, seed):
        try:
            fn = METHODS[self.name]
        except KeyError:
            raise InputError(f"unknown method {self.name!r}") from None
        return fn(X, Y, seed, **dict(self.params))


def as_method(method):
    if isinstance(method, Method):
        return method
    if isinstance(method, str):
        if method not in METHODS:
            raise InputError(f"unknown method {method!r}")
        return Method(method)
    raise InputError("method must be a name or a Method")


# --------------------------------------------------------------------------
# Monte Carlo


@dataclass
class PowerCurve:
    method: str
    scenario: str
    placement: str
    alpha: float
    levels: list  # (noise_level, rejections, replicates)

    def power(self, level):
        for lv, rej, reps in self.levels:
            if lv == level:
                return rej / reps
        raise KeyError(level)

    @property
    def powers(self):
        return np.array([rej / reps for _, rej, reps in self.levels])

    def rows(self):
        return [
            [self.method, self.scenario, self.placement, lv, reps, rej, f"{rej / reps:.6f}"]
            for lv, rej, reps in self.levels
        ]


CSV_HEADER = ["method", "scenario", "placement", "noise_level", "replicates", "rejections", "power"]


def write_power_csv(path, curves):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for c in curves:
            w.writerows(c.rows())


def replicate_seed(seed, level, rep):
    """Integer seeds for (data, method) derived from the replicate key."""
    ss = np.random.SeedSequence([int(seed), int(round(level * 1000)), int(rep)])
    data, meth = ss.spawn(2)
    return data, int(meth.generate_state(1, dtype=np.uint32)[0])


def _run_block(args):
    method, spec, level, reps, seed = args
    pvals = np.empty(len(reps))
    for i, rep in enumerate(reps):
        data_seed, meth_seed = replicate_seed(seed, level, rep)
        X, Y = generate_scenario(replace(spec, noise_level=level, seed=data_seed))
        pvals[i] = method(X, Y, meth_seed)
    return level, pvals


def simulate_pvalues(method, spec, levels, replicates, seed=0, threads=1):
    """Global p-values ``{level: array of length replicates}``."""
    if replicates < 1:
        raise InputError("need at least one replicate")
    method = as_method(method)
    threads = resolve_threads(threads)
    chunk = max(1, min(replicates, 50))
    tasks = [
        (method, spec, lv, list(range(s, min(s + chunk, replicates))), seed)
        for lv in levels
        for s in range(0, replicates, chunk)
    ]
    out = {lv: [] for lv in levels}
    if threads <= 1 or len(tasks) == 1:
        results = map(_run_block, tasks)
    else:
        pool = ProcessPoolExecutor(max_workers=threads)
        results = pool.map(_run_block, tasks)
    for lv, p in results:
        out[lv].append(p)
    if threads > 1 and len(tasks) > 1:
        pool.shutdown()
    return {lv: np.concatenate(v) for lv, v in out.items()}


def rejection_count(pvals, alpha):
    if alpha <= 0:
        return 0
    return int(np.count_nonzero(np.asarray(pvals) <= alpha))


def estimate_power(method, spec, noise_levels=NOISE_LEVELS, replicates=200, alpha=0.05, seed=0, threads=1):
    method = as_method(method)
    pv = simulate_pvalues(method, spec, list(noise_levels), replicates, seed, threads)
    levels = [(lv, rejection_count(pv[lv], alpha), replicates) for lv in noise_levels]
    return PowerCurve(method.name, spec.name, spec.placement, alpha, levels)


def type_i_error(method, n=128, replicates=1000, alpha=0.05, seed=0, dims=(2, 2), threads=1):
    """Rejection rate over independent null replicates."""
    if replicates < 100:
        raise InputError("a level audit needs at least 100 replicates")
    spec = ScenarioSpec("null", "marginal", tuple(dims), n, 0, seed)
    pv = simulate_pvalues(method, spec, [0], replicates, seed, threads)[0]
    return rejection_count(pv, alpha) / replicates


def resolve_threads(threads):
    if threads is None or threads <= 0:
        return os.cpu_count() or 1
    return int(threads)
