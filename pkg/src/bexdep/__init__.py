"""Independence testing in the binary expansion framework.

MultiFIT-style cuboid tests, BET/BERET symmetry tests, a Monte Carlo power
harness and a Karhunen-Loeve front end for functional data.
"""

__version__ = "0.1.0"

from ._kernels import BACKEND
from .beret import bet_test, beret_test, sample_projections
from .binex import (
    LambdaIndex,
    SymmetryStat,
    all_cross_interactions,
    binary_bits,
    rank_to_copula,
    symmetry_statistic,
)
from .errors import BexdepError, InputError, RankError
from .exact import Table2x2, adjust_pvalues, binomial_symmetry_pvalue, fisher_exact_2x2
from .kl import CurveSet, functional_independence_test, kl_fit, kl_reconstruct, kl_scores
from .multifit import (
    Cuboid,
    analyze_weight_favorability,
    cuboid_weight_vector,
    enumerate_cuboids,
    max_quadratic_statistic,
    multifit_test,
)

__all__ = [
    "BACKEND",
    "BexdepError",
    "CurveSet",
    "Cuboid",
    "InputError",
    "LambdaIndex",
    "RankError",
    "SymmetryStat",
    "Table2x2",
    "adjust_pvalues",
    "all_cross_interactions",
    "analyze_weight_favorability",
    "bet_test",
    "beret_test",
    "binary_bits",
    "binomial_symmetry_pvalue",
    "cuboid_weight_vector",
    "enumerate_cuboids",
    "fisher_exact_2x2",
    "functional_independence_test",
    "kl_fit",
    "kl_reconstruct",
    "kl_scores",
    "max_quadratic_statistic",
    "multifit_test",
    "rank_to_copula",
    "sample_projections",
    "symmetry_statistic",
]
