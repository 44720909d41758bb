"""Binary expansion randomized ensemble test (BERET).

Each of ``m`` random direction pairs ``(s, t)`` reduces ``(X, Y)`` to the
univariate pair ``(X s, Y t)``.  That pair is copula-transformed, expanded to
``d_max`` bits per side, and every cross interaction gets an exact binomial
symmetry test.  All ``m (2**d_max - 1)**2`` p-values are corrected together.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .binex import (
    LambdaIndex,
    SymmetryStat,
    all_cross_interactions,
    bits_from_codes,
    column_ranks,
    interaction_column,
    symmetry_sums_from_counts,
)
from .exact import BINOMIAL, PValue, adjust_array, binomial_pvalues
from .errors import InputError
from .multifit import check_pair, strongest_position

DEFAULT_M = 30
DEFAULT_D_MAX = 4


@dataclass(frozen=True)
class ProjectionPair:
    s: np.ndarray
    t: np.ndarray
    seed_id: int


def _unit(rng, dim):
    if dim == 1:
        return np.ones(1)
    v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    nz = np.flatnonzero(v)
    if len(nz) and v[nz[0]] < 0:
        v = -v
    return v


def sample_projections(p, q, m, seed=0):
    """``m`` direction pairs, uniform on the spheres, sign-canonicalized.

    Pair ``i`` is drawn from its own stream seeded by ``(seed, i)``, so any
    subset of pairs can be regenerated independently.
    """
    if m < 1:
        raise InputError("need at least one projection")
    out = []
    for i in range(m):
        rng = np.random.default_rng([int(seed), i])
        out.append(ProjectionPair(_unit(rng, p), _unit(rng, q), i))
    return out


@dataclass(frozen=True)
class BeretRecord:
    projection: ProjectionPair
    lam: LambdaIndex
    stat: SymmetryStat
    pvalue: PValue


@dataclass
class BeretReport:
    global_p: float
    alpha: float
    total_tests: int
    d_max: int
    rejected: bool
    correction: str
    projections: list = field(repr=False)
    s_sums: np.ndarray = field(repr=False)
    pvalues: np.ndarray = field(repr=False)
    adjusted: np.ndarray = field(repr=False)
    n: int = 0
    strongest_index: Optional[tuple] = None

    @property
    def m(self):
        return len(self.projections)

    def record(self, j, l):
        lams = all_cross_interactions(self.d_max, self.d_max)
        return BeretRecord(
            projection=self.projections[j],
            lam=lams[l],
            stat=SymmetryStat(lams[l], int(self.s_sums[j, l]), self.n),
            pvalue=PValue(float(self.pvalues[j, l]), BINOMIAL, float(self.adjusted[j, l])),
        )

    @property
    def records(self):
        return [
            self.record(j, l)
            for j in range(self.s_sums.shape[0])
            for l in range(self.s_sums.shape[1])
        ]

    @property
    def strongest(self):
        return self.record(*self.strongest_index)

    def to_dict(self, full=False):
        def rec(r):
            xs, ys = r.lam.bitstrings(self.d_max, self.d_max)
            return {
                "projection": r.projection.seed_id,
                "s": r.projection.s.tolist(),
                "t": r.projection.t.tolist(),
                "lambda": {"x_mask": xs, "y_mask": ys},
                "s_sum": r.stat.s_sum,
                "s_bar": r.stat.s_bar,
                "p": r.pvalue.value,
                "p_adjusted": r.pvalue.adjusted,
            }

        out = {
            "method": "beret" if self.m > 1 else "bet",
            "global_p": self.global_p,
            "alpha": self.alpha,
            "correction": self.correction,
            "d_max": self.d_max,
            "m": self.m,
            "total_tests": self.total_tests,
            "rejected": self.rejected,
            "strongest": rec(self.strongest),
        }
        if full:
            out["tests"] = [rec(r) for r in self.records]
        return out


def _projected(X, Y, projections):
    S = np.stack([pp.s for pp in projections], axis=1)
    T = np.stack([pp.t for pp in projections], axis=1)
    return X @ S, Y @ T


def _cross_sums(U, V, d_max):
    n = U.shape[0]
    xc = _kernels.cell_codes(column_ranks(U), n, d_max)
    yc = _kernels.cell_codes(column_ranks(V), n, d_max)
    size = 1 << d_max
    counts = _kernels.joint_counts(xc, yc, size, size)
    sums = symmetry_sums_from_counts(counts, d_max, d_max)
    return sums[:, 1:, 1:].reshape(len(counts), -1)


def beret_test(
    X, Y, m=DEFAULT_M, d_max=DEFAULT_D_MAX, alpha=0.05, seed=0, correction="bonferroni", projections=None
):
    """Ensemble test; ``projections`` overrides the sampled direction pairs."""
    X, Y = check_pair(X, Y)
    if d_max < 1:
        raise InputError("d_max must be at least 1")
    if not 0.0 < alpha < 1.0:
        raise InputError("alpha must lie in (0, 1)")
    n = X.shape[0]
    if projections is None:
        projections = sample_projections(X.shape[1], Y.shape[1], m, seed)
    U, V = _projected(X, Y, projections)
    s_sums = _cross_sums(U, V, d_max)
    pvals = binomial_pvalues(s_sums, n)
    total = s_sums.size
    adjusted = adjust_array(pvals.ravel(), correction, total).reshape(pvals.shape)
    j, l = np.unravel_index(strongest_position(adjusted.ravel(), pvals.ravel()), pvals.shape)
    global_p = float(adjusted[j, l])
    return BeretReport(
        global_p=global_p,
        alpha=alpha,
        total_tests=total,
        d_max=d_max,
        rejected=bool(global_p <= alpha),
        correction=correction,
        projections=projections,
        s_sums=s_sums,
        pvalues=pvals,
        adjusted=adjusted,
        n=n,
        strongest_index=(int(j), int(l)),
    )


def beret_pvalue(X, Y, m=DEFAULT_M, d_max=DEFAULT_D_MAX, seed=0):
    X, Y = check_pair(X, Y)
    U, V = _projected(X, Y, sample_projections(X.shape[1], Y.shape[1], m, seed))
    s_sums = _cross_sums(U, V, d_max)
    p = float(binomial_pvalues(np.abs(s_sums).max(), X.shape[0]))
    return min(1.0, p * s_sums.size)


def bet_test(x, y, d_max=DEFAULT_D_MAX, alpha=0.05, correction="bonferroni"):
    """Plain binary expansion test on two univariate samples."""
    X, Y = check_pair(x, y)
    if X.shape[1] != 1 or Y.shape[1] != 1:
        raise InputError("bet needs univariate x and y; use beret for vectors")
    return beret_test(X, Y, m=1, d_max=d_max, alpha=alpha, correction=correction)


def projection_points(X, Y, report, record=None):
    """Projected points of one finding with the sign of its interaction.

    Returns an ``(n, 3)`` array of ``(s^T X_i, t^T Y_i, A_Lambda,i)``; the sign
    column splits the points into the two regions the interaction contrasts.
    """
    X, Y = check_pair(X, Y)
    record = record or report.strongest
    u = X @ record.projection.s
    v = Y @ record.projection.t
    n = len(u)
    d = report.d_max
    xb = bits_from_codes(_kernels.cell_codes(column_ranks(u[:, None])[:, 0], n, d), d)
    yb = bits_from_codes(_kernels.cell_codes(column_ranks(v[:, None])[:, 0], n, d), d)
    sign = interaction_column(xb, record.lam.x_mask) * interaction_column(yb, record.lam.y_mask)
    return np.column_stack([u, v, sign])
