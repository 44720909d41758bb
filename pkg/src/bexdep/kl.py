"""Karhunen-Loeve projection of discretized curves.

A curve set holds ``n`` curves sampled on a common grid in ``[0, 1]`` plus
quadrature weights.  ``kl_fit`` estimates the mean curve and the leading
eigenfunctions of the covariance operator; ``lambdas`` are the square roots
of the operator eigenvalues, so each standardized score ``Z_j`` has unit
in-sample variance and a curve is rebuilt as ``mean + sum_j Z_j l_j phi_j``.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import InputError, RankError


def trapezoid_weights(grid):
    grid = np.asarray(grid, dtype=np.float64)
    if len(grid) == 1:
        return np.ones(1)
    h = np.diff(grid)
    w = np.zeros(len(grid))
    w[:-1] += h / 2
    w[1:] += h / 2
    return w


@dataclass(frozen=True)
class CurveSet:
    grid: np.ndarray
    curves: np.ndarray
    weights: np.ndarray = None

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=np.float64)
        curves = np.asarray(self.curves, dtype=np.float64)
        if curves.ndim == 1:
            curves = curves[None, :]
        if grid.ndim != 1 or curves.shape[1] != len(grid):
            raise InputError("curve values do not match the grid")
        if len(grid) > 1 and np.any(np.diff(grid) <= 0):
            raise InputError("grid must be strictly increasing")
        if grid[0] < 0 or grid[-1] > 1:
            raise InputError("grid must lie in [0, 1]")
        if not np.all(np.isfinite(curves)):
            raise InputError("non-finite curve value")
        w = trapezoid_weights(grid) if self.weights is None else np.asarray(self.weights, float)
        if w.shape != grid.shape or np.any(w <= 0):
            raise InputError("quadrature weights must be positive, one per grid point")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "curves", curves)
        object.__setattr__(self, "weights", w)

    @property
    def n(self):
        return self.curves.shape[0]

    def inner(self, f, g):
        return np.asarray(f) @ (self.weights * np.asarray(g))


@dataclass(frozen=True)
class KLModel:
    grid: np.ndarray
    weights: np.ndarray
    mean: np.ndarray
    lambdas: np.ndarray
    phis: np.ndarray  # (k, m)
    total_variance: float

    @property
    def k(self):
        return len(self.lambdas)

    @property
    def energy_fraction(self):
        if self.total_variance == 0:
            return 0.0
        return float(np.sum(self.lambdas**2) / self.total_variance)

    def summary(self):
        return {
            "k": self.k,
            "lambdas": self.lambdas.tolist(),
            "energy_fraction": self.energy_fraction,
            "total_variance": self.total_variance,
        }


def _spectrum(cs):
    """Mean, singular values and eigenfunctions of the weighted covariance."""
    mean = cs.curves.mean(axis=0)
    centered = cs.curves - mean
    root_w = np.sqrt(cs.weights)
    _, sv, vt = np.linalg.svd(centered * root_w / np.sqrt(cs.n), full_matrices=False)
    phis = vt / root_w
    tol = (sv[0] if len(sv) else 0.0) * max(cs.curves.shape) * np.finfo(float).eps
    rank = int(np.sum(sv > tol)) if len(sv) and sv[0] > 0 else 0
    # largest-magnitude entry of each eigenfunction made positive
    idx = np.argmax(np.abs(phis), axis=1)
    signs = np.sign(phis[np.arange(len(phis)), idx])
    signs[signs == 0] = 1.0
    return mean, sv, phis * signs[:, None], rank


def numerical_rank(cs):
    return _spectrum(cs)[3]


def kl_fit(cs, k):
    if k < 1:
        raise InputError("k must be at least 1")
    if cs.n < k + 1:
        raise InputError(f"need at least k + 1 = {k + 1} curves")
    mean, sv, phis, rank = _spectrum(cs)
    if rank == 0:
        raise RankError("zero variance: curves are constant across the sample", 0)
    if k > rank:
        raise RankError(f"k = {k} exceeds the numerical rank; attainable rank is {rank}", rank)
    return KLModel(
        grid=cs.grid,
        weights=cs.weights,
        mean=mean,
        lambdas=sv[:k].copy(),
        phis=phis[:k].copy(),
        total_variance=float(np.sum(sv**2)),
    )


def choose_k(cs, energy=0.95):
    """Smallest k whose leading components carry ``energy`` of the variance."""
    if not 0 < energy <= 1:
        raise InputError("energy fraction must lie in (0, 1]")
    _, sv, _, rank = _spectrum(cs)
    if rank == 0:
        raise RankError("zero variance: curves are constant across the sample", 0)
    frac = np.cumsum(sv[:rank] ** 2) / np.sum(sv**2)
    k = int(np.searchsorted(frac, energy * (1 - 1e-12)) + 1)
    return min(k, rank, cs.n - 1)


def _check_grid(cs, model):
    if cs.curves.shape[1] != len(model.grid) or not np.allclose(cs.grid, model.grid, rtol=0, atol=1e-12):
        raise InputError("curve grid does not match the model grid")


def kl_scores(cs, model):
    """Standardized scores ``<X_i - mean, phi_j>_w / lambda_j``, shape (n, k)."""
    _check_grid(cs, model)
    return ((cs.curves - model.mean) * model.weights) @ model.phis.T / model.lambdas


def kl_reconstruct(model, scores):
    scores = np.atleast_2d(np.asarray(scores, dtype=np.float64))
    if scores.shape[1] != model.k:
        raise InputError(f"scores have {scores.shape[1]} columns but the model has k = {model.k}")
    curves = model.mean + (scores * model.lambdas) @ model.phis
    return CurveSet(model.grid, curves, model.weights)


def weighted_norms(cs, other=None):
    """Per-curve ``||x||_w`` (or ``||x - other||_w``)."""
    diff = cs.curves if other is None else cs.curves - other.curves
    return np.sqrt(np.sum(diff**2 * cs.weights, axis=1))


@dataclass
class FunctionalReport:
    report: object
    k_x: int
    k_y: int = None

    @property
    def global_p(self):
        return self.report.global_p

    @property
    def rejected(self):
        return self.report.rejected

    def to_dict(self, full=False):
        out = self.report.to_dict(full=full)
        out["kl"] = {"k_x": self.k_x, "k_y": self.k_y}
        return out


def project(data, k=None, energy=None):
    """Scores of a curve set (fitting KL) or the matrix itself; returns (Z, k)."""
    if not isinstance(data, CurveSet):
        return np.asarray(data, dtype=np.float64), None
    if k is None:
        k = choose_k(data, 0.95 if energy is None else energy)
    model = kl_fit(data, k)
    return kl_scores(data, model), k


def functional_independence_test(cs_x, Y, k=None, k_y=None, method="multifit", energy=None, **params):
    """Test independence of functional ``cs_x`` and ``Y`` through KL scores.

    ``Y`` may be a matrix or another :class:`CurveSet` (truncated at ``k_y``).
    """
    from .beret import beret_test
    from .multifit import multifit_test

    Zx, kx = project(cs_x, k, energy)
    Zy, ky = project(Y, k_y, energy)
    if method == "multifit":
        rep = multifit_test(Zx, Zy, **params)
    elif method == "beret":
        rep = beret_test(Zx, Zy, **params)
    else:
        raise InputError(f"unknown method {method!r}")
    return FunctionalReport(rep, kx, ky)


# --------------------------------------------------------------------------
# files


def read_curves_csv(path):
    """CurveSet CSV: first row grid points, then one curve per row."""
    rows = _read_numeric_rows(path)
    if len(rows) < 2:
        raise InputError(f"{path}: need a grid row and at least one curve")
    return CurveSet(np.array(rows[0]), np.array(rows[1:]))


def _read_numeric_rows(path):
    out = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if out and len(row) != len(out[0]):
                raise InputError(f"{path}: row {lineno} has {len(row)} fields, expected {len(out[0])}")
            try:
                out.append([float(c) for c in row])
            except ValueError:
                raise InputError(f"{path}: row {lineno} has a non-numeric cell") from None
    return out


def write_curves_csv(path, cs):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([repr(float(v)) for v in cs.grid])
        w.writerows([[repr(float(v)) for v in row] for row in cs.curves])


def write_scores_csv(path, scores):
    scores = np.asarray(scores)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"Z{j}" for j in range(1, scores.shape[1] + 1)])
        w.writerows([[repr(float(v)) for v in row] for row in scores])
