"""Copula transform, binary expansion bits and symmetry statistics.

Conventions
-----------
* Copula values live in ``(-1, 1]``.  The rank transform maps rank ``r`` of
  ``n`` to ``2 r / (n + 1) - 1``; ties are ranked by first occurrence.
* Bit ``d`` of ``u`` is the ``d``-th digit of ``(u + 1) / 2`` written in base
  two, mapped to ``{-1, +1}``.  Dyadic rationals use the left-open convention
  (their expansion ends in repeating ones), so ``u = 1`` has all bits ``+1``.
* An interaction is indexed by a pair of bit masks; bit ``d - 1`` of
  ``x_mask`` selects depth ``d`` of the first variable.
"""

import csv
import functools
import itertools
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import InputError


@dataclass(frozen=True)
class CopulaSample:
    values: np.ndarray
    ranks: np.ndarray

    @property
    def n(self):
        return len(self.values)


@dataclass(frozen=True)
class LambdaIndex:
    x_mask: int = 0
    y_mask: int = 0

    @property
    def is_cross(self):
        return self.x_mask != 0 and self.y_mask != 0

    def x_depths(self):
        return _mask_depths(self.x_mask)

    def y_depths(self):
        return _mask_depths(self.y_mask)

    def bitstrings(self, d1, d2):
        """Masks as strings over depths ``1..d``, depth 1 leftmost."""
        return (
            "".join("1" if self.x_mask >> i & 1 else "0" for i in range(d1)),
            "".join("1" if self.y_mask >> i & 1 else "0" for i in range(d2)),
        )

    def __str__(self):
        return f"x{sorted(self.x_depths())}y{sorted(self.y_depths())}"


@dataclass(frozen=True)
class SymmetryStat:
    lam: LambdaIndex
    s_sum: int
    n: int

    @property
    def s_bar(self):
        return self.s_sum / self.n


def _mask_depths(mask):
    return [d + 1 for d in range(mask.bit_length()) if mask >> d & 1]


def _as_finite_vector(raw):
    arr = np.asarray(raw, dtype=np.float64)
    if arr.ndim != 1:
        raise InputError("expected a one-dimensional sample")
    if len(arr) < 2:
        raise InputError("insufficient sample")
    if not np.all(np.isfinite(arr)):
        raise InputError("non-finite value")
    return arr


def ranks(raw):
    """Ranks ``1..n`` with ties broken by order of first occurrence."""
    arr = _as_finite_vector(raw)
    order = np.argsort(arr, kind="stable")
    r = np.empty(len(arr), dtype=np.int64)
    r[order] = np.arange(1, len(arr) + 1)
    return r


def column_ranks(matrix):
    """Stable ranks of every column of an ``(n, k)`` array."""
    mat = np.asarray(matrix, dtype=np.float64)
    order = np.argsort(mat, axis=0, kind="stable")
    r = np.empty(mat.shape, dtype=np.int64)
    rows = np.arange(1, mat.shape[0] + 1)[:, None]
    np.put_along_axis(r, order, np.broadcast_to(rows, mat.shape), axis=0)
    return r


def rank_to_copula(raw):
    r = ranks(raw)
    n = len(r)
    return CopulaSample(values=2.0 * r / (n + 1) - 1.0, ranks=r)


def binary_bits(u, depth):
    """First ``depth`` bits of a copula value ``u`` in ``(-1, 1]``."""
    if depth < 1:
        raise InputError("depth must be at least 1")
    u = float(u)
    if not (-1.0 < u <= 1.0):
        raise InputError("copula value out of range")
    # a float is a dyadic rational, so (u + 1) / 2 = c / den exactly
    num, den = u.as_integer_ratio()
    c, den = num + den, 2 * den
    bits = []
    for _ in range(depth):
        b = 1 if 2 * c > den else 0
        c = 2 * c - b * den
        bits.append(2 * b - 1)
    return bits


def codes_from_ranks(r, n, depth):
    """Integer dyadic cell codes (depth-1 bit most significant)."""
    return _kernels.cell_codes(r, n, depth)


def bits_from_codes(codes, depth):
    """Expand cell codes into an ``(n, depth)`` matrix of -1/+1 bits."""
    codes = np.asarray(codes, dtype=np.int64)
    shifts = np.arange(depth - 1, -1, -1)
    return (2 * ((codes[:, None] >> shifts) & 1) - 1).astype(np.int8)


def bit_matrix(sample, depth):
    """``(n, depth)`` bit matrix for a :class:`CopulaSample`.

    Bits come from the integer ranks, so they are exact even where the float
    copula value sits on a dyadic boundary.
    """
    codes = codes_from_ranks(sample.ranks, sample.n, depth)
    return bits_from_codes(codes, depth)


def interaction_value(x_bits, y_bits, lam):
    if lam.x_mask >> len(x_bits) or lam.y_mask >> len(y_bits):
        raise InputError("depth overflow")
    v = 1
    for d in lam.x_depths():
        v *= int(x_bits[d - 1])
    for d in lam.y_depths():
        v *= int(y_bits[d - 1])
    return v


def interaction_column(bits, mask):
    """Row-wise product of the bit columns selected by ``mask``."""
    bits = np.asarray(bits)
    if mask >> bits.shape[1]:
        raise InputError("depth overflow")
    out = np.ones(bits.shape[0], dtype=np.int64)
    for d in _mask_depths(mask):
        out *= bits[:, d - 1]
    return out


def symmetry_statistic(x_bits, y_bits, lam):
    x_bits = np.asarray(x_bits)
    y_bits = np.asarray(y_bits)
    if x_bits.shape[0] != y_bits.shape[0]:
        raise InputError("bit matrices have different sample sizes")
    a = interaction_column(x_bits, lam.x_mask) * interaction_column(y_bits, lam.y_mask)
    return SymmetryStat(lam=lam, s_sum=int(a.sum()), n=x_bits.shape[0])


def all_cross_interactions(d1, d2):
    return [
        LambdaIndex(xm, ym)
        for xm in range(1, 1 << d1)
        for ym in range(1, 1 << d2)
    ]


def full_basis(d1, d2):
    """Every interaction over depths ``(d1, d2)``, including the constant."""
    return [LambdaIndex(xm, ym) for xm in range(1 << d1) for ym in range(1 << d2)]


@functools.lru_cache(maxsize=32)
def sign_table(depth):
    """``H[mask, code]`` = value of the interaction ``mask`` in cell ``code``.

    Cell codes carry depth 1 as their most significant bit while masks carry
    depth 1 as their least significant bit.
    """
    size = 1 << depth
    codes = np.arange(size)
    bits = 2 * ((codes[:, None] >> np.arange(depth - 1, -1, -1)) & 1) - 1
    h = np.ones((size, size), dtype=np.int64)
    for mask in range(size):
        for d in _mask_depths(mask):
            h[mask] *= bits[:, d - 1]
    h.flags.writeable = False
    return h


def symmetry_sums_from_counts(counts, d1, d2):
    """All ``S_Lambda`` from cell counts of shape ``(..., 2**d1, 2**d2)``.

    Returns an array indexed ``[..., x_mask, y_mask]``; entry ``[0, 0]`` is n.
    This is a Walsh-Hadamard transform of the joint cell counts.
    """
    hx = sign_table(d1)
    hy = sign_table(d2)
    return hx @ np.asarray(counts, dtype=np.int64) @ hy.T


def symmetry_sums(x_sample, y_sample, d1, d2):
    """Unnormalized sums for every interaction, ``[x_mask, y_mask]``."""
    if x_sample.n != y_sample.n:
        raise InputError("samples have different sizes")
    xc = codes_from_ranks(x_sample.ranks, x_sample.n, d1)
    yc = codes_from_ranks(y_sample.ranks, y_sample.n, d2)
    counts = _kernels.joint_counts(xc, yc, 1 << d1, 1 << d2)[0]
    return symmetry_sums_from_counts(counts, d1, d2)


def write_bits_csv(path, bits):
    """Debug dump: one row per observation, one column per depth."""
    bits = np.asarray(bits)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"d{d}" for d in range(1, bits.shape[1] + 1)])
        w.writerows(bits.tolist())


def read_bits_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return np.array([[int(v) for v in row] for row in rows[1:]], dtype=np.int8)


def prefix_product(depth):
    """All sign prefixes of length ``depth`` in ascending cell-code order."""
    return list(itertools.product((-1, 1), repeat=depth))
