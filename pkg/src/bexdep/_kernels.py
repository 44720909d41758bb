"""Hot numeric kernels, compiled with numba when available.

Every kernel has a pure-numpy twin.  The numba versions are used unless the
environment variable ``BEXDEP_DISABLE_NUMBA`` is set to a truthy value
(``1``, ``true``, ``yes``) or numba cannot be imported.  Both paths return
identical results; ``tests/test_kernels.py`` checks this and
``benchmarks/bench_kernels.py`` times them against each other.
"""

import math
import os
import threading

import numpy as np

_FLAG = os.environ.get("BEXDEP_DISABLE_NUMBA", "").strip().lower()

try:
    if _FLAG in ("1", "true", "yes", "on"):
        raise ImportError("numba disabled by BEXDEP_DISABLE_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

BACKEND = "numba" if HAVE_NUMBA else "numpy"

# relative slack when comparing table probabilities in the two-sided Fisher sum
FISHER_REL_TOL = 1e-7
_LOG_TIE = math.log1p(FISHER_REL_TOL)


# --------------------------------------------------------------------------
# log-factorial table

_lf_lock = threading.Lock()
_lf_table = np.array([0.0, 0.0])


def log_factorials(m):
    """Return an array ``lf`` with ``lf[k] = log(k!)`` for ``0 <= k <= m``.

    The shared table only ever grows by replacement, so readers always see a
    complete, immutable array.
    """
    global _lf_table
    table = _lf_table
    if len(table) > m:
        return table
    with _lf_lock:
        table = _lf_table
        if len(table) <= m:
            size = max(m + 1, 2 * len(table))
            table = np.array([math.lgamma(k + 1.0) for k in range(size)])
            table.flags.writeable = False
            _lf_table = table
    return table


# --------------------------------------------------------------------------
# numpy reference paths


def cell_codes_np(ranks, n, depth):
    """Dyadic cell index of ``rank/(n+1)`` at ``depth`` (left-open cells).

    The code's binary digits, most significant first, are the first ``depth``
    bits of the expansion (1 for an upper half).  Integer arithmetic only.
    """
    r = np.asarray(ranks, dtype=np.int64)
    return (r * (1 << depth) + n) // (n + 1) - 1


def joint_counts_np(xcodes, ycodes, nx, ny):
    """Batched 2-D histograms.

    ``xcodes`` and ``ycodes`` are ``(n, B)`` integer arrays; returns a
    ``(B, nx, ny)`` int64 array of cell counts, one table per column.
    """
    xcodes = np.asarray(xcodes, dtype=np.int64)
    ycodes = np.asarray(ycodes, dtype=np.int64)
    if xcodes.ndim == 1:
        xcodes = xcodes[:, None]
        ycodes = ycodes[:, None]
    batch = xcodes.shape[1]
    offset = np.arange(batch, dtype=np.int64) * (nx * ny)
    flat = (offset[None, :] + xcodes * ny + ycodes).ravel()
    counts = np.bincount(flat, minlength=batch * nx * ny)
    return counts.reshape(batch, nx, ny)


def fisher_2x2_np(a, b, c, d, lf):
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    c = np.asarray(c, dtype=np.int64)
    d = np.asarray(d, dtype=np.int64)
    out = np.ones(a.shape, dtype=np.float64)
    for i in np.ndindex(a.shape):
        ai, bi, ci, di = int(a[i]), int(b[i]), int(c[i]), int(d[i])
        r1, r2, c1 = ai + bi, ci + di, ai + ci
        m = r1 + r2
        if m == 0:
            continue
        const = lf[r1] + lf[r2] + lf[c1] + lf[m - c1] - lf[m]
        x = np.arange(max(0, c1 - r2), min(r1, c1) + 1)
        logp = const - lf[x] - lf[r1 - x] - lf[c1 - x] - lf[r2 - c1 + x]
        obs = const - lf[ai] - lf[bi] - lf[ci] - lf[di]
        p = np.exp(logp[logp <= obs + _LOG_TIE]).sum()
        out[i] = min(1.0, p)
    return out


# --------------------------------------------------------------------------
# numba paths

if HAVE_NUMBA:

    @njit(cache=True)
    def _cell_codes_nb(ranks, n, depth):
        flat = ranks.ravel()
        out = np.empty(flat.size, dtype=np.int64)
        scale = np.int64(1) << depth
        for i in range(flat.size):
            out[i] = (flat[i] * scale + n) // (n + 1) - 1
        return out.reshape(ranks.shape)

    @njit(cache=True)
    def _joint_counts_nb(xcodes, ycodes, nx, ny):
        n, batch = xcodes.shape
        out = np.zeros((batch, nx, ny), dtype=np.int64)
        for i in range(n):
            for j in range(batch):
                out[j, xcodes[i, j], ycodes[i, j]] += 1
        return out

    @njit(cache=True)
    def _fisher_one(a, b, c, d, lf, log_tie):
        r1 = a + b
        r2 = c + d
        c1 = a + c
        m = r1 + r2
        if m == 0:
            return 1.0
        const = lf[r1] + lf[r2] + lf[c1] + lf[m - c1] - lf[m]
        obs = const - lf[a] - lf[b] - lf[c] - lf[d]
        thresh = obs + log_tie
        lo = max(0, c1 - r2)
        hi = min(r1, c1)
        total = 0.0
        for x in range(lo, hi + 1):
            lp = const - lf[x] - lf[r1 - x] - lf[c1 - x] - lf[r2 - c1 + x]
            if lp <= thresh:
                total += math.exp(lp)
        return min(1.0, total)

    @njit(cache=True)
    def _fisher_2x2_nb(a, b, c, d, lf, log_tie):
        out = np.empty(a.size, dtype=np.float64)
        for i in range(a.size):
            out[i] = _fisher_one(a[i], b[i], c[i], d[i], lf, log_tie)
        return out


# --------------------------------------------------------------------------
# dispatch


def cell_codes(ranks, n, depth):
    if HAVE_NUMBA:
        r = np.ascontiguousarray(ranks, dtype=np.int64)
        return _cell_codes_nb(r, np.int64(n), np.int64(depth))
    return cell_codes_np(ranks, n, depth)


def joint_counts(xcodes, ycodes, nx, ny):
    if HAVE_NUMBA:
        xc = np.asarray(xcodes, dtype=np.int64)
        yc = np.asarray(ycodes, dtype=np.int64)
        if xc.ndim == 1:
            xc = xc[:, None]
            yc = yc[:, None]
        return _joint_counts_nb(np.ascontiguousarray(xc), np.ascontiguousarray(yc), nx, ny)
    return joint_counts_np(xcodes, ycodes, nx, ny)


def fisher_2x2(a, b, c, d):
    """Two-sided Fisher p-values for tables ``[[a, b], [c, d]]`` (broadcast)."""
    a, b, c, d = np.broadcast_arrays(
        *(np.asarray(v, dtype=np.int64) for v in (a, b, c, d))
    )
    m = int((a + b + c + d).max()) if a.size else 0
    lf = log_factorials(m)
    if HAVE_NUMBA:
        flat = [np.ascontiguousarray(v).ravel() for v in (a, b, c, d)]
        return _fisher_2x2_nb(*flat, lf, _LOG_TIE).reshape(a.shape)
    return fisher_2x2_np(a, b, c, d, lf)
