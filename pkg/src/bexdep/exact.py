"""Resampling-free p-values: Fisher's exact 2x2 test, the binomial symmetry
test and Bonferroni / Holm adjustment."""

import functools
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import _kernels
from .errors import InputError

FISHER = "fisher_two_sided"
BINOMIAL = "binomial_two_sided"


@dataclass(frozen=True)
class Table2x2:
    a: int
    b: int
    c: int
    d: int

    def __post_init__(self):
        if min(self.a, self.b, self.c, self.d) < 0:
            raise InputError("table counts must be non-negative")

    @property
    def total(self):
        return self.a + self.b + self.c + self.d

    def as_list(self):
        return [[self.a, self.b], [self.c, self.d]]


@dataclass(frozen=True)
class PValue:
    value: float
    method: str
    adjusted: Optional[float] = None


def fisher_exact_2x2(table):
    """Two-sided Fisher test by the minimum-likelihood rule.

    Sums the hypergeometric probabilities of every table with the observed
    margins whose probability does not exceed the observed one (relative
    slack ``1e-7``).  All arithmetic is in log space.
    """
    if not isinstance(table, Table2x2):
        (a, b), (c, d) = table
        table = Table2x2(int(a), int(b), int(c), int(d))
    if table.total < 1:
        raise InputError("empty table")
    p = _kernels.fisher_2x2(table.a, table.b, table.c, table.d)
    return PValue(float(p), FISHER)


def fisher_pvalues(tables):
    """Vectorized Fisher p-values for an ``(..., 2, 2)`` count array."""
    t = np.asarray(tables, dtype=np.int64)
    return _kernels.fisher_2x2(t[..., 0, 0], t[..., 0, 1], t[..., 1, 0], t[..., 1, 1])


@functools.lru_cache(maxsize=256)
def binomial_pvalue_table(n):
    """Two-sided binomial p-values indexed by ``|s_sum|`` for sample size n.

    Entries at the wrong parity are never used.  Read-only.
    """
    lf = _kernels.log_factorials(n)
    j = np.arange(n + 1)
    logpmf = lf[n] - lf[j] - lf[n - j] - n * math.log(2.0)
    pmf = np.exp(logpmf)
    # upper tail, accumulated from the smallest terms
    tail = np.cumsum(pmf[::-1])[::-1]
    s = np.arange(n + 1)
    k = (n + s) // 2
    p = np.minimum(1.0, 2.0 * tail[k])
    # the upper tail from the centre is at least 1/2 by symmetry
    p[:2] = 1.0
    p.flags.writeable = False
    return p


def binomial_pvalues(s_sums, n):
    return binomial_pvalue_table(int(n))[np.abs(np.asarray(s_sums, dtype=np.int64))]


def binomial_symmetry_pvalue(stat):
    """``min(1, 2 P(Bin(n, 1/2) >= (n + |S|)/2))`` for a symmetry statistic."""
    if stat.n < 1:
        raise InputError("empty sample")
    if (stat.s_sum - stat.n) % 2 or abs(stat.s_sum) > stat.n:
        raise InputError("symmetry sum inconsistent with sample size")
    return PValue(float(binomial_pvalues(stat.s_sum, stat.n)), BINOMIAL)


def adjust_array(p, method, total_tests):
    """Adjusted p-values for a float array, original order kept."""
    p = np.asarray(p, dtype=np.float64)
    if total_tests < p.size:
        raise InputError("total_tests smaller than the number of p-values")
    if method == "bonferroni":
        return np.minimum(1.0, p * total_tests)
    if method == "holm":
        order = np.argsort(p, kind="stable")
        factors = total_tests - np.arange(p.size)
        stepped = np.minimum(1.0, np.maximum.accumulate(p[order] * factors))
        out = np.empty_like(p)
        out[order] = stepped
        return out
    raise InputError(f"unknown correction {method!r}")


def adjust_pvalues(ps, method="bonferroni", total_tests=None):
    ps = list(ps)
    if total_tests is None:
        total_tests = len(ps)
    adj = adjust_array([pv.value for pv in ps], method, total_tests)
    return [replace(pv, adjusted=float(a)) for pv, a in zip(ps, adj)]
