"""Multiscale cuboid testing and its quadratic-form representation.

Every margin pair ``(j, k)`` of ``(X, Y)`` is copula-transformed and cut into
dyadic cuboids.  A cuboid at depths ``(k1, k2)`` is the set of points whose
first ``k1`` x-bits and first ``k2`` y-bits equal its prefixes; inside it the
next bit of each margin splits the points into a 2x2 table that is tested
with Fisher's exact test.  The global p-value is the smallest adjusted
p-value, with all ``g`` enumerated cuboids in the denominator.

The same statistic can be written with symmetry sums: for cuboid ``c`` with
split-bit agreement ``D_c = sum_{i in c} A_{1,k1+1,i} A_{2,k2+1,i}``,

    2**(k1+k2) * D_c**2 == S^T W_c S,   W_c = scale * w w^T,

where ``S`` stacks the unnormalized interaction sums (``S_0 = n``), ``w`` has
entries in ``{-1, 0, +1}`` and ``scale = 2**-(k1+k2)``.
"""

import functools
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from . import _kernels
from .binex import LambdaIndex, column_ranks, full_basis, symmetry_sums
from .exact import FISHER, PValue, Table2x2, adjust_array, fisher_pvalues
from .errors import InputError

MIN_SAMPLE = 8
DEFAULT_MIN_COUNT = 16
DEFAULT_P_EXPAND = 0.1


@dataclass(frozen=True)
class Cuboid:
    margin_pair: tuple
    depth: tuple
    prefix_x: tuple = ()
    prefix_y: tuple = ()

    def __post_init__(self):
        if len(self.prefix_x) != self.depth[0] or len(self.prefix_y) != self.depth[1]:
            raise InputError("prefix length must equal cuboid depth")

    @property
    def resolution(self):
        return self.depth[0] + self.depth[1]

    def bounds(self):
        """Copula-square rectangle ``((x_lo, x_hi), (y_lo, y_hi))`` in [-1, 1]."""
        return _interval(self.prefix_x), _interval(self.prefix_y)

    def to_dict(self):
        return {
            "margin_pair": list(self.margin_pair),
            "depth": list(self.depth),
            "prefix": {"x": list(self.prefix_x), "y": list(self.prefix_y)},
        }


def _interval(prefix):
    lo, width = -1.0, 2.0
    for b in prefix:
        width /= 2
        if b > 0:
            lo += width
    return lo, lo + width


def _prefix_code(prefix):
    code = 0
    for b in prefix:
        code = 2 * code + (b > 0)
    return code


def cuboids_per_pair(r_max):
    return sum((r + 1) * 2**r for r in range(r_max + 1))


@functools.lru_cache(maxsize=64)
def _enumeration(p, q, r_max):
    prefixes = {k: list(itertools.product((-1, 1), repeat=k)) for k in range(r_max + 1)}
    out = []
    for j in range(1, p + 1):
        for k in range(1, q + 1):
            for r in range(r_max + 1):
                for k1 in range(r + 1):
                    k2 = r - k1
                    for px in prefixes[k1]:
                        for py in prefixes[k2]:
                            out.append(Cuboid((j, k), (k1, k2), px, py))
    return tuple(out)


def enumerate_cuboids(p, q, r_max):
    if r_max < 0:
        raise InputError("r_max must be non-negative")
    return list(_enumeration(p, q, r_max))


@functools.lru_cache(maxsize=64)
def _index(p, q, r_max):
    return {c: i for i, c in enumerate(_enumeration(p, q, r_max))}


# --------------------------------------------------------------------------
# tables


def cuboid_table(xc, yc, c):
    """The 2x2 table of cuboid ``c`` for one margin pair.

    Rows are the x split bit (-1 then +1), columns the y split bit.
    """
    if xc.n != yc.n:
        raise InputError("samples have different sizes")
    k1, k2 = c.depth
    xcode = _kernels.cell_codes(xc.ranks, xc.n, k1 + 1)
    ycode = _kernels.cell_codes(yc.ranks, yc.n, k2 + 1)
    inside = ((xcode >> 1) == _prefix_code(c.prefix_x)) & (
        (ycode >> 1) == _prefix_code(c.prefix_y)
    )
    sx = xcode[inside] & 1
    sy = ycode[inside] & 1
    t = np.zeros((2, 2), dtype=np.int64)
    np.add.at(t, (sx, sy), 1)
    return Table2x2(int(t[0, 0]), int(t[0, 1]), int(t[1, 0]), int(t[1, 1]))


def _all_tables(xr, yr, n, r_max):
    """Tables of every cuboid, shape ``(p*q*g_pair, 2, 2)``, enumeration order."""
    p, q = xr.shape[1], yr.shape[1]
    depth = r_max + 1
    xcode = _kernels.cell_codes(xr, n, depth)
    ycode = _kernels.cell_codes(yr, n, depth)
    pairs_x = np.repeat(xcode, q, axis=1)
    pairs_y = np.tile(ycode, (1, p))
    size = 1 << depth
    hist = _kernels.joint_counts(pairs_x, pairs_y, size, size)
    npairs = p * q
    blocks = []
    for r in range(r_max + 1):
        for k1 in range(r + 1):
            k2 = r - k1
            coarse = hist.reshape(
                npairs, 2 ** (k1 + 1), 2 ** (r_max - k1), 2 ** (k2 + 1), 2 ** (r_max - k2)
            ).sum(axis=(2, 4))
            t = coarse.reshape(npairs, 2**k1, 2, 2**k2, 2).transpose(0, 1, 3, 2, 4)
            blocks.append(t.reshape(npairs, -1, 2, 2))
    return np.concatenate(blocks, axis=1).reshape(-1, 2, 2)


# --------------------------------------------------------------------------
# the test


@dataclass
class MultiFitReport:
    global_p: float
    alpha: float
    total_tests: int
    mode: str
    correction: str
    rejected: bool
    strongest: Optional[Cuboid]
    strongest_index: Optional[int]
    cuboids: tuple = field(repr=False)
    tables: np.ndarray = field(repr=False)
    pvalues: np.ndarray = field(repr=False)
    adjusted: np.ndarray = field(repr=False)

    @property
    def tested(self):
        return ~np.isnan(self.pvalues)

    @property
    def n_tested(self):
        return int(self.tested.sum())

    @property
    def tests(self):
        """``(Cuboid, Table2x2, PValue)`` for every cuboid actually tested."""
        out = []
        for i in np.flatnonzero(self.tested):
            (a, b), (c, d) = self.tables[i].tolist()
            pv = PValue(float(self.pvalues[i]), FISHER, float(self.adjusted[i]))
            out.append((self.cuboids[i], Table2x2(a, b, c, d), pv))
        return out

    def to_dict(self, full=False):
        out = {
            "method": "multifit",
            "global_p": self.global_p,
            "alpha": self.alpha,
            "mode": self.mode,
            "correction": self.correction,
            "total_tests": self.total_tests,
            "n_tested": self.n_tested,
            "rejected": self.rejected,
            "strongest": None,
        }
        if self.strongest is not None:
            i = self.strongest_index
            out["strongest"] = dict(
                self.strongest.to_dict(),
                table=self.tables[i].tolist(),
                p=float(self.pvalues[i]),
                p_adjusted=float(self.adjusted[i]),
            )
        if full:
            out["tests"] = [
                dict(c.to_dict(), table=t.as_list(), p=pv.value, p_adjusted=pv.adjusted)
                for c, t, pv in self.tests
            ]
        return out


def _as_matrix(a, name):
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise InputError(f"{name} must be a vector or a matrix")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"non-finite value in {name}")
    return arr


def check_pair(X, Y):
    X = _as_matrix(X, "X")
    Y = _as_matrix(Y, "Y")
    if X.shape[0] != Y.shape[0]:
        raise InputError(f"X has {X.shape[0]} rows but Y has {Y.shape[0]}")
    if X.shape[0] < MIN_SAMPLE:
        raise InputError(f"insufficient sample: need n >= {MIN_SAMPLE}")
    return X, Y


def _adaptive_visit(p, q, r_max, tables, tested_ok, p_expand):
    """Run Fisher tests breadth-first, expanding children of small-p cuboids."""
    index = _index(p, q, r_max)
    pvals = np.full(len(tables), np.nan)
    frontier = [
        index[Cuboid((j, k), (0, 0))] for j in range(1, p + 1) for k in range(1, q + 1)
    ]
    cuboids = _enumeration(p, q, r_max)
    while frontier:
        todo = [i for i in frontier if tested_ok[i]]
        if todo:
            pvals[todo] = fisher_pvalues(tables[todo])
        children = set()
        for i in todo:
            c = cuboids[i]
            if pvals[i] > p_expand or c.resolution >= r_max:
                continue
            k1, k2 = c.depth
            for b in (-1, 1):
                children.add(index[Cuboid(c.margin_pair, (k1 + 1, k2), c.prefix_x + (b,), c.prefix_y)])
                children.add(index[Cuboid(c.margin_pair, (k1, k2 + 1), c.prefix_x, c.prefix_y + (b,))])
        frontier = sorted(children)
    return pvals


def multifit_test(
    X,
    Y,
    r_max=4,
    alpha=0.05,
    mode="exhaustive",
    min_count=DEFAULT_MIN_COUNT,
    correction="bonferroni",
    p_expand=DEFAULT_P_EXPAND,
):
    """Multiscale Fisher independence test between ``X`` (n x p) and ``Y`` (n x q)."""
    X, Y = check_pair(X, Y)
    if r_max < 0:
        raise InputError("r_max must be non-negative")
    if not 0.0 < alpha < 1.0:
        raise InputError("alpha must lie in (0, 1)")
    if mode not in ("exhaustive", "adaptive"):
        raise InputError(f"unknown mode {mode!r}")
    n, p = X.shape
    q = Y.shape[1]

    tables = _all_tables(column_ranks(X), column_ranks(Y), n, r_max)
    counts = tables.sum(axis=(1, 2))
    tested_ok = counts >= max(min_count, 1)
    g = len(tables)

    if mode == "exhaustive":
        pvals = np.full(g, np.nan)
        if tested_ok.any():
            pvals[tested_ok] = fisher_pvalues(tables[tested_ok])
    else:
        pvals = _adaptive_visit(p, q, r_max, tables, tested_ok, p_expand)

    adjusted = np.full(g, np.nan)
    done = ~np.isnan(pvals)
    cuboids = _enumeration(p, q, r_max)
    if done.any():
        adjusted[done] = adjust_array(pvals[done], correction, g)
        idx = int(np.flatnonzero(done)[strongest_position(adjusted[done], pvals[done])])
        global_p = float(adjusted[idx])
        strongest = cuboids[idx]
    else:
        idx, global_p, strongest = None, 1.0, None

    return MultiFitReport(
        global_p=global_p,
        alpha=alpha,
        total_tests=g,
        mode=mode,
        correction=correction,
        rejected=bool(global_p <= alpha),
        strongest=strongest,
        strongest_index=idx,
        cuboids=cuboids,
        tables=tables,
        pvalues=pvals,
        adjusted=adjusted,
    )


def strongest_position(adjusted, raw):
    """Index of the smallest adjusted p; raw p, then position, break ties."""
    return int(np.lexsort((np.arange(len(raw)), raw, adjusted))[0])


def multifit_pvalue(X, Y, r_max=4, min_count=DEFAULT_MIN_COUNT):
    """Global p-value only; the Monte Carlo fast path."""
    X, Y = check_pair(X, Y)
    tables = _all_tables(column_ranks(X), column_ranks(Y), X.shape[0], r_max)
    ok = tables.sum(axis=(1, 2)) >= max(min_count, 1)
    if not ok.any():
        return 1.0
    return float(min(1.0, fisher_pvalues(tables[ok]).min() * len(tables)))


# --------------------------------------------------------------------------
# quadratic-form representation


@dataclass(frozen=True)
class WeightMatrix:
    """Rank-one weight ``scale * w w^T`` over the interaction basis."""

    d1: int
    d2: int
    w: np.ndarray
    scale: Fraction

    @property
    def basis(self):
        return full_basis(self.d1, self.d2)

    def matrix(self):
        return float(self.scale) * np.outer(self.w, self.w)

    def linear(self, S):
        return np.asarray(S) @ self.w

    def quadratic_form(self, S):
        """``S^T W S``; exact ``Fraction`` for integer ``S``."""
        S = np.asarray(S)
        if S.shape[-1] != len(self.w):
            raise InputError("basis mismatch")
        if np.issubdtype(S.dtype, np.integer):
            lin = sum(int(a) * int(b) for a, b in zip(S, self.w) if b)
            return self.scale * lin * lin
        lin = float(S @ self.w)
        return float(self.scale) * lin * lin

    def terms(self):
        """Nonzero coefficients as ``{LambdaIndex: coefficient}``."""
        nz = np.flatnonzero(self.w)
        ny = 1 << self.d2
        return {LambdaIndex(int(i) // ny, int(i) % ny): int(self.w[i]) for i in nz}


def basis_position(lam, d2):
    return lam.x_mask * (1 << d2) + lam.y_mask


def cuboid_weight_vector(c, d1, d2):
    """Weight of cuboid ``c`` in the basis over depths ``(d1, d2)``.

    The cuboid indicator is the product of ``(1 + prefix_d A_d) / 2`` over its
    prefix bits; expanding it and multiplying by the two split bits gives one
    signed term per pair of prefix subsets.
    """
    k1, k2 = c.depth
    if k1 + 1 > d1 or k2 + 1 > d2:
        raise InputError("depth overflow")
    w = np.zeros(1 << (d1 + d2), dtype=np.int64)
    for xs in range(1 << k1):
        sx = 1
        for d in range(k1):
            if xs >> d & 1:
                sx *= c.prefix_x[d]
        for ys in range(1 << k2):
            sy = 1
            for d in range(k2):
                if ys >> d & 1:
                    sy *= c.prefix_y[d]
            lam = LambdaIndex(xs | 1 << k1, ys | 1 << k2)
            w[basis_position(lam, d2)] = sx * sy
    return WeightMatrix(d1, d2, w, Fraction(1, 2 ** (k1 + k2)))


def symmetry_vector(X, Y, d1, d2, normalized=False):
    """Interaction sums of two univariate samples, flattened in basis order."""
    from .binex import rank_to_copula

    S = symmetry_sums(rank_to_copula(X), rank_to_copula(Y), d1, d2).ravel()
    return S / S[0] if normalized else S


def max_quadratic_statistic(S, weights):
    """``max_j S^T W_j S`` and the first index attaining it."""
    if not weights:
        raise InputError("no weight matrices")
    d1, d2 = weights[0].d1, weights[0].d2
    if any((w.d1, w.d2) != (d1, d2) for w in weights):
        raise InputError("basis mismatch")
    values = [w.quadratic_form(S) for w in weights]
    best = 0
    for i, v in enumerate(values):
        if v > values[best]:
            best = i
    return values[best], best


@dataclass(frozen=True)
class FavorabilityDiagnostic:
    mu: np.ndarray
    top_eigenvalue: float
    alignment: float
    degenerate: bool = False


def analyze_weight_favorability(weight, mu):
    """How well a mean symmetry vector lines up with a weight's top eigenvector."""
    mu = np.asarray(mu, dtype=np.float64)
    w = weight.w.astype(np.float64)
    if mu.shape != w.shape:
        raise InputError("basis mismatch")
    wn = float(w @ w)
    top = float(weight.scale) * wn
    mn = float(np.linalg.norm(mu))
    if mn == 0.0:
        return FavorabilityDiagnostic(mu, top, 0.0, degenerate=True)
    cos = float(mu @ w) / (mn * np.sqrt(wn))
    return FavorabilityDiagnostic(mu, top, float(np.clip(cos, -1.0, 1.0)))
