import json

import numpy as np
import pytest

from bexdep.beret import (
    ProjectionPair,
    bet_test,
    beret_pvalue,
    beret_test,
    projection_points,
    sample_projections,
)
from bexdep.binex import all_cross_interactions, rank_to_copula, symmetry_sums
from bexdep.errors import InputError
from bexdep.exact import binomial_pvalues


def test_univariate_projection_is_identity():
    pp = sample_projections(1, 1, 5, seed=3)
    for pair in pp:
        assert pair.s.tolist() == [1.0] and pair.t.tolist() == [1.0]


def test_projections_deterministic_and_unit():
    a = sample_projections(4, 3, 10, seed=11)
    b = sample_projections(4, 3, 10, seed=11)
    c = sample_projections(4, 3, 10, seed=12)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.s, y.s)
        np.testing.assert_array_equal(x.t, y.t)
        assert np.linalg.norm(x.s) == pytest.approx(1.0)
        assert x.s[np.flatnonzero(x.s)[0]] > 0
    assert not np.allclose(a[0].s, c[0].s)
    # prefix stability: pair i does not depend on m
    np.testing.assert_array_equal(sample_projections(4, 3, 3, seed=11)[2].s, a[2].s)


def test_projection_directions_spread_over_sphere():
    # after sign canonicalization, coordinates other than the first are symmetric
    m = 4000
    pp = sample_projections(3, 3, m, seed=0)
    S = np.array([p.s for p in pp])
    assert np.all(np.abs(S[:, 1:].mean(axis=0)) < 4 / np.sqrt(m))
    np.testing.assert_allclose((S**2).mean(axis=0), 1 / 3, atol=4 / np.sqrt(m))


def test_bet_matches_binex_sums(rng):
    x, y = rng.normal(size=50), rng.normal(size=50)
    rep = bet_test(x, y, d_max=3)
    S = symmetry_sums(rank_to_copula(x), rank_to_copula(y), 3, 3)
    lams = all_cross_interactions(3, 3)
    expected = [S[l.x_mask, l.y_mask] for l in lams]
    np.testing.assert_array_equal(rep.s_sums[0], expected)
    np.testing.assert_array_equal(rep.pvalues[0], binomial_pvalues(np.array(expected), 50))
    assert rep.total_tests == 49
    assert rep.to_dict()["method"] == "bet"


def test_m1_univariate_equals_bet(rng):
    x, y = rng.normal(size=40), rng.normal(size=40)
    a = beret_test(x, y, m=1)
    b = bet_test(x, y)
    assert a.global_p == b.global_p
    np.testing.assert_array_equal(a.s_sums, b.s_sums)


def test_bet_rejects_vectors(rng):
    with pytest.raises(InputError, match="univariate"):
        bet_test(rng.normal(size=(20, 2)), rng.normal(size=20))


def test_identical_data_rejects(rng):
    X = rng.normal(size=(128, 2))
    rep = beret_test(X, X, m=10)
    assert rep.rejected and rep.global_p < 1e-6
    assert rep.total_tests == 10 * 15**2


def test_rotation_equivariance(rng):
    X, Y = rng.normal(size=(100, 2)), rng.normal(size=(100, 2))
    Y[:, 0] += X[:, 1] ** 2
    Q, _ = np.linalg.qr(rng.normal(size=(2, 2)))
    pp = sample_projections(2, 2, 8, seed=5)
    a = beret_test(X, Y, projections=pp)
    rotated = [ProjectionPair(Q.T @ p.s, p.t, p.seed_id) for p in pp]
    b = beret_test(X @ Q, Y, projections=rotated)
    np.testing.assert_array_equal(a.s_sums, b.s_sums)
    assert a.global_p == b.global_p


def test_pvalue_fast_path(rng):
    X, Y = rng.normal(size=(64, 2)), rng.normal(size=(64, 3))
    Y[:, 2] += np.abs(X[:, 0])
    assert beret_pvalue(X, Y, m=7, d_max=3, seed=2) == beret_test(X, Y, m=7, d_max=3, seed=2).global_p


def test_projection_points(rng):
    X = rng.normal(size=(64, 2))
    Y = X[:, ::-1] + 0.1 * rng.normal(size=(64, 2))
    rep = beret_test(X, Y, m=5, d_max=2)
    pts = projection_points(X, Y, rep)
    assert pts.shape == (64, 3)
    assert set(np.unique(pts[:, 2])) <= {-1.0, 1.0}
    assert int(pts[:, 2].sum()) == rep.strongest.stat.s_sum


def test_json_roundtrip(rng):
    X, Y = rng.normal(size=(32, 2)), rng.normal(size=(32, 2))
    rep = beret_test(X, Y, m=3, d_max=2)
    d = json.loads(json.dumps(rep.to_dict(full=True)))
    assert d["method"] == "beret" and d["m"] == 3
    assert len(d["tests"]) == rep.total_tests == 27
    assert d["strongest"]["p_adjusted"] == d["global_p"]


def test_invalid_arguments(rng):
    X = rng.normal(size=(20, 2))
    with pytest.raises(InputError):
        beret_test(X, X, m=0)
    with pytest.raises(InputError):
        beret_test(X, X, d_max=0)
