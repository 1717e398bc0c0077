import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from otil.ot_core import (
    BarycentricWeights,
    DiscreteMeasure,
    ProjectionSet,
    build_alignment,
    mw_squared_1d,
    project_and_sort,
    sample_projections,
    sliced_mw_squared,
    sliced_w2_squared,
    w2_squared_1d,
)


def brute_w2(x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    return min(np.mean((x - y[list(p)]) ** 2) for p in itertools.permutations(range(len(y))))


finite = st.floats(-100, 100, allow_nan=False, allow_infinity=False)


# --- types -------------------------------------------------------------------


def test_measure_validates_shape_and_finiteness():
    assert DiscreteMeasure([1.0, 2.0]).dim == 1
    with pytest.raises(ValueError):
        DiscreteMeasure(np.zeros((0, 2)))
    with pytest.raises(ValueError):
        DiscreteMeasure([[np.inf, 0.0]])


def test_weights_must_be_on_simplex():
    BarycentricWeights([0.25, 0.75])
    with pytest.raises(ValueError):
        BarycentricWeights([0.5, 0.6])
    with pytest.raises(ValueError):
        BarycentricWeights([1.5, -0.5])


def test_projection_set_requires_unit_directions():
    with pytest.raises(ValueError):
        ProjectionSet([[1.0, 1.0]])


# --- sample_projections ------------------------------------------------------


def test_projections_in_one_dimension_are_signs():
    proj = sample_projections(1, 4, seed=11)
    assert set(np.abs(proj.directions).ravel()) == {1.0}


def test_projection_second_moment_is_isotropic():
    # E[theta theta^T] = I/d under the uniform sphere measure
    proj = sample_projections(3, 10_000, seed=5)
    second = proj.directions.T @ proj.directions / proj.count
    np.testing.assert_allclose(np.diag(second), 1 / 3, atol=0.02)
    assert np.max(np.abs(second - np.diag(np.diag(second)))) < 0.02


def test_projections_are_deterministic_and_unit():
    a = sample_projections(5, 100, seed=3)
    b = sample_projections(5, 100, seed=3)
    assert np.array_equal(a.directions, b.directions)
    np.testing.assert_allclose(np.linalg.norm(a.directions, axis=1), 1.0, atol=1e-12)


@pytest.mark.parametrize("dim,count", [(0, 3), (2, 0)])
def test_projections_reject_empty(dim, count):
    with pytest.raises(ValueError):
        sample_projections(dim, count, 0)


# --- project_and_sort --------------------------------------------------------


def test_project_and_sort_examples():
    vals, rank = project_and_sort(DiscreteMeasure([[0, 1], [1, 0]]), [1, 0])
    assert vals.tolist() == [0, 1] and rank.tolist() == [0, 1]
    vals, rank = project_and_sort(DiscreteMeasure([3, 1, 2]), [1])
    assert vals.tolist() == [1, 2, 3] and rank.tolist() == [2, 0, 1]
    vals, rank = project_and_sort(DiscreteMeasure([3, 1, 2]), [-1])
    assert vals.tolist() == [-3, -2, -1] and rank.tolist() == [0, 2, 1]


def test_project_and_sort_breaks_ties_by_index():
    _, rank = project_and_sort(DiscreteMeasure([1, 1, 0, 1]), [1])
    assert rank.tolist() == [1, 2, 0, 3]


def test_project_and_sort_dimension_mismatch():
    with pytest.raises(ValueError):
        project_and_sort(DiscreteMeasure([[0, 1]]), [1, 0, 0])


# --- w2_squared_1d -----------------------------------------------------------


def test_w2_examples():
    assert w2_squared_1d([0], [1]) == 1.0
    # brute force: identity pairing (1+1)/2 = 1, swapped (9+1)/2 = 5
    assert brute_w2([1, 3], [2, 4]) == 1.0
    assert w2_squared_1d([1, 3], [2, 4]) == 1.0
    assert w2_squared_1d([-1, 0.5, 7], [-1, 0.5, 7]) == 0.0


def test_w2_rejects_unequal_lengths():
    with pytest.raises(ValueError):
        w2_squared_1d([0, 1], [0])


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 6).flatmap(lambda T: st.tuples(st.lists(finite, min_size=T, max_size=T), st.lists(finite, min_size=T, max_size=T))))
def test_w2_matches_assignment_brute_force(xy):
    x, y = xy
    assert abs(w2_squared_1d(np.sort(x), np.sort(y)) - brute_w2(x, y)) <= 1e-9 * max(1.0, brute_w2(x, y))


# --- sliced_w2_squared -------------------------------------------------------


def test_sliced_w2_identical_is_zero():
    rng = np.random.default_rng(0)
    mu = rng.normal(size=(20, 3))
    assert sliced_w2_squared(mu, mu, sample_projections(3, 7, 1)) == 0.0


def test_sliced_w2_one_dimension_equals_closed_form():
    for seed in range(5):
        assert sliced_w2_squared([1, 3], [2, 4], sample_projections(1, 9, seed)) == pytest.approx(1.0, abs=1e-12)


def test_sliced_w2_point_masses():
    # E <a-b, theta>^2 = |a-b|^2 / d
    rng = np.random.default_rng(8)
    a, b = rng.normal(size=3), rng.normal(size=3)
    val = sliced_w2_squared([a], [b], sample_projections(3, 10_000, 2))
    assert val == pytest.approx(np.sum((a - b) ** 2) / 3, rel=0.05)


def test_sliced_w2_errors():
    proj = sample_projections(2, 3, 0)
    with pytest.raises(ValueError):
        sliced_w2_squared(np.zeros((3, 2)), np.zeros((4, 2)), proj)
    with pytest.raises(ValueError):
        sliced_w2_squared(np.zeros((3, 2)), np.zeros((3, 3)), proj)
    with pytest.raises(ValueError):
        sliced_w2_squared(np.zeros((3, 3)), np.zeros((3, 3)), proj)


def test_sliced_w2_symmetric_and_permutation_invariant():
    rng = np.random.default_rng(1)
    mu, nu = rng.normal(size=(15, 4)), rng.normal(size=(15, 4)) + 1
    proj = sample_projections(4, 30, 9)
    assert sliced_w2_squared(mu, nu, proj) == sliced_w2_squared(nu, mu, proj)
    assert sliced_w2_squared(mu[rng.permutation(15)], nu[rng.permutation(15)], proj) == pytest.approx(
        sliced_w2_squared(mu, nu, proj), abs=1e-12
    )


def test_monte_carlo_error_shrinks_with_projection_count():
    rng = np.random.default_rng(4)
    mu, nu = rng.normal(size=(30, 3)), rng.normal(size=(30, 3)) * 2 + 1

    def spread(K):
        return np.std([sliced_w2_squared(mu, nu, sample_projections(3, K, 1000 * K + r)) for r in range(50)])

    # 1/sqrt(K) scaling predicts a ratio of ~0.316; allow sampling noise
    assert spread(1000) < 0.5 * spread(100) * 1.3


# --- mw_squared_1d / sliced_mw_squared ---------------------------------------


def test_mw_examples():
    half = BarycentricWeights.uniform(2)
    assert mw_squared_1d([[1, 2, 5]] * 3, BarycentricWeights.uniform(3)) == 0.0
    # per-rank barycenters 1 and 3, each marginal contributes 1/2 per rank
    assert mw_squared_1d([[0, 2], [2, 4]], half) == 1.0
    assert mw_squared_1d([[0, 2], [2, 4]], half) == w2_squared_1d([0, 2], [2, 4]) / 4
    assert mw_squared_1d([[0, 2], [5, 9]], BarycentricWeights([1.0, 0.0])) == 0.0


def test_mw_errors():
    with pytest.raises(ValueError):
        mw_squared_1d([[0, 1], [0, 1]], BarycentricWeights.uniform(3))


def test_mw_translation_invariant():
    rng = np.random.default_rng(2)
    x = np.sort(rng.normal(size=(4, 10)), axis=1)
    w = BarycentricWeights(rng.dirichlet(np.ones(4)))
    assert mw_squared_1d(x + 3.7, w) == pytest.approx(mw_squared_1d(x, w), abs=1e-9)


def test_sliced_mw_two_marginal_reduction():
    rng = np.random.default_rng(3)
    mu, nu = rng.normal(size=(12, 3)), rng.normal(size=(12, 3)) + 2
    proj = sample_projections(3, 11, 4)
    assert sliced_mw_squared([mu, nu], BarycentricWeights.uniform(2), proj) == pytest.approx(
        sliced_w2_squared(mu, nu, proj) / 4, abs=1e-12
    )


def test_sliced_mw_identical_and_order_invariance():
    rng = np.random.default_rng(6)
    ms = [rng.normal(size=(9, 2)) * (i + 1) for i in range(3)]
    proj = sample_projections(2, 13, 0)
    assert sliced_mw_squared([ms[0]] * 3, BarycentricWeights.uniform(3), proj) == 0.0
    w = BarycentricWeights([0.2, 0.3, 0.5])
    perm = [2, 0, 1]
    assert sliced_mw_squared([ms[i] for i in perm], BarycentricWeights(w.values[perm]), proj) == pytest.approx(
        sliced_mw_squared(ms, w, proj), abs=1e-12
    )


def test_sliced_mw_errors():
    proj = sample_projections(2, 3, 0)
    with pytest.raises(ValueError):
        sliced_mw_squared([np.zeros((3, 2))], BarycentricWeights.uniform(1), proj)
    with pytest.raises(ValueError):
        sliced_mw_squared([np.zeros((3, 2)), np.zeros((2, 2))], BarycentricWeights.uniform(2), proj)
    with pytest.raises(ValueError):
        sliced_mw_squared([np.zeros((3, 2))] * 2, BarycentricWeights.uniform(3), proj)


# --- build_alignment ---------------------------------------------------------


def test_alignment_example():
    al = build_alignment([DiscreteMeasure([3, 1, 2]), DiscreteMeasure([1, 2, 3])], ProjectionSet([[1.0]]))
    assert al.ranks[0, 0].tolist() == [2, 0, 1]
    assert al.ranks[0, 1].tolist() == [0, 1, 2]
    # agent atom 0 (value 3) is matched with expert atom 2 (value 3)
    assert al.aligned_index(0, 0, 1, 0) == 2


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 20), st.integers(1, 4), st.integers(1, 5), st.integers(0, 2**32))
def test_alignment_is_bijective(T, d, P, seed):
    rng = np.random.default_rng(seed)
    ms = [rng.normal(size=(T, d)) for _ in range(P)]
    al = build_alignment(ms, sample_projections(d, 3, seed))
    for k in range(3):
        for p in range(P):
            assert sorted(al.ranks[k, p].tolist()) == list(range(T))
            assert np.array_equal(al.order[k, p][al.ranks[k, p]], np.arange(T))
            assert np.array_equal(al.ranks[k, p][al.order[k, p]], np.arange(T))


def test_alignment_identical_measures():
    rng = np.random.default_rng(0)
    m = rng.normal(size=(10, 3))
    al = build_alignment([m, m, m], sample_projections(3, 4, 0))
    assert (al.ranks == al.ranks[:, :1]).all()
