import numpy as np
import pytest
from scipy.linalg import subspace_angles

from bexdep.errors import InputError, RankError
from bexdep.kl import (
    CurveSet,
    choose_k,
    functional_independence_test,
    kl_fit,
    kl_reconstruct,
    kl_scores,
    numerical_rank,
    read_curves_csv,
    weighted_norms,
    write_curves_csv,
)
from bexdep.multifit import multifit_test

from curves import GRID, mean_curve, planted, second_component_pair, sine_basis


def test_constant_curves_rejected():
    cs = CurveSet(GRID, np.full((20, len(GRID)), 3.5))
    with pytest.raises(RankError, match="zero variance") as info:
        kl_fit(cs, 1)
    assert info.value.attainable == 0


def test_grid_validation():
    with pytest.raises(InputError):
        CurveSet([0.0, 0.5, 0.5], np.zeros((2, 3)))
    with pytest.raises(InputError):
        CurveSet([0.0, 1.5], np.zeros((2, 2)))
    with pytest.raises(InputError):
        CurveSet([0.0, 1.0], np.zeros((2, 3)))
    assert CurveSet(GRID, np.zeros((2, len(GRID)))).weights.sum() == pytest.approx(1.0)


def test_rank_error_lists_attainable(rng):
    cs, _, _ = planted(50, rng, scales=(1.0, 0.5))
    assert numerical_rank(cs) == 2
    with pytest.raises(RankError, match="attainable rank is 2"):
        kl_fit(cs, 3)


def test_planted_span_recovered(rng):
    cs, _, phis = planted(80, rng, scales=(1.5, 0.7))
    model = kl_fit(cs, 2)
    root_w = np.sqrt(cs.weights)
    angles = subspace_angles((model.phis * root_w).T, (phis * root_w).T)
    assert np.max(angles) <= 1e-6
    gram = (model.phis * cs.weights) @ model.phis.T
    np.testing.assert_allclose(gram, np.eye(2), atol=1e-8)
    assert np.all(np.diff(model.lambdas) <= 0)


def test_reconstruction_exact_at_planted_rank(rng):
    cs, _, _ = planted(60, rng)
    model = kl_fit(cs, 4)
    rebuilt = kl_reconstruct(model, kl_scores(cs, model))
    rel = weighted_norms(cs, rebuilt) / weighted_norms(cs)
    assert rel.max() <= 1e-8
    assert model.energy_fraction == pytest.approx(1.0, abs=1e-10)


def test_score_identities(rng):
    cs, _, _ = planted(200, rng)
    Z = kl_scores(cs, kl_fit(cs, 3))
    assert np.abs(Z.mean(axis=0)).max() <= 1e-8
    np.testing.assert_allclose(Z.var(axis=0), 1.0, atol=1e-6)
    corr = np.corrcoef(Z.T) - np.eye(3)
    assert np.abs(corr).max() <= 1e-6


def test_score_examples(rng):
    cs, _, _ = planted(100, rng)
    model = kl_fit(cs, 2)
    one = CurveSet(GRID, model.mean + model.lambdas[0] * model.phis[0])
    np.testing.assert_allclose(kl_scores(one, model), [[1.0, 0.0]], atol=1e-10)
    # the fitted eigenfunctions lie in the span of the first four sines
    orth = CurveSet(GRID, model.mean + sine_basis(GRID, 8)[7])
    np.testing.assert_allclose(kl_scores(orth, model), [[0.0, 0.0]], atol=1e-10)


def test_reconstruct_linear(rng):
    cs, _, _ = planted(40, rng)
    model = kl_fit(cs, 3)
    np.testing.assert_allclose(kl_reconstruct(model, np.zeros((2, 3))).curves, np.tile(model.mean, (2, 1)))
    z, z2 = rng.normal(size=(5, 3)), rng.normal(size=(5, 3))
    a, b = 1.7, -0.4
    lhs = kl_reconstruct(model, a * z + b * z2).curves - model.mean
    rhs = a * (kl_reconstruct(model, z).curves - model.mean) + b * (kl_reconstruct(model, z2).curves - model.mean)
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)
    with pytest.raises(InputError):
        kl_reconstruct(model, np.zeros((1, 2)))


def test_grid_mismatch(rng):
    cs, _, _ = planted(20, rng)
    model = kl_fit(cs, 1)
    with pytest.raises(InputError):
        kl_scores(CurveSet(GRID[::2], cs.curves[:, ::2]), model)


def test_reconstruction_error_monotone_and_energy(rng):
    cs, _, _ = planted(100, rng)
    noisy = CurveSet(GRID, cs.curves + 0.01 * rng.standard_normal(cs.curves.shape))
    errs = []
    total = None
    for k in range(1, 8):
        model = kl_fit(noisy, k)
        total = model.total_variance
        assert np.sum(model.lambdas**2) <= total * (1 + 1e-12)
        rebuilt = kl_reconstruct(model, kl_scores(noisy, model))
        errs.append(np.sum(weighted_norms(noisy, rebuilt) ** 2))
    assert all(b <= a + 1e-12 for a, b in zip(errs, errs[1:]))
    assert choose_k(noisy, 0.95) <= choose_k(noisy, 0.999)


def test_grid_refinement(rng):
    n = 100
    z = rng.standard_normal((n, 3)) * np.array([1.0, 0.6, 0.3])
    lams = []
    for m in (101, 201):
        grid = np.linspace(0, 1, m)
        basis = np.array([np.exp(-grid), grid * (1 - grid) * 4, np.cos(3 * grid)])
        lams.append(kl_fit(CurveSet(grid, mean_curve(grid) + z @ basis), 3).lambdas)
    np.testing.assert_allclose(lams[1], lams[0], rtol=0.01)


def test_functional_test_matches_direct(rng):
    cs, y = second_component_pair(128, rng)
    rep = functional_independence_test(cs, y, k=2, r_max=3)
    Z = kl_scores(cs, kl_fit(cs, 2))
    assert rep.global_p == multifit_test(Z, y, r_max=3).global_p
    assert rep.to_dict()["kl"] == {"k_x": 2, "k_y": None}


def test_functional_strong_dependence(rng):
    y = rng.uniform(size=(256, 1))
    curves = mean_curve(GRID) + np.sin(np.pi * GRID) * y + np.cos(2 * np.pi * GRID) * y**2
    rep = functional_independence_test(CurveSet(GRID, curves), y, k=1)
    assert rep.global_p < 1e-4


def test_functional_pair_of_curve_sets(rng):
    cs, z, _ = planted(128, rng)
    other = CurveSet(GRID, mean_curve(GRID) + np.outer(z[:, 0] ** 2, sine_basis(GRID, 1)[0]))
    rep = functional_independence_test(cs, other, k=2, k_y=1, method="beret", m=5)
    assert rep.rejected and rep.k_y == 1


def test_curves_csv_roundtrip(tmp_path, rng):
    cs, _, _ = planted(5, rng)
    path = tmp_path / "c.csv"
    write_curves_csv(path, cs)
    back = read_curves_csv(path)
    np.testing.assert_array_equal(back.curves, cs.curves)
    np.testing.assert_array_equal(back.grid, cs.grid)
    path.write_text("0,0.5,1\n1,2,3\n1,x,3\n")
    with pytest.raises(InputError, match="row 3"):
        read_curves_csv(path)
