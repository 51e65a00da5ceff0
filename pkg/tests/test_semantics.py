import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from artifact.semantics import build_affinity, constraint_matrix, dissimilarity_diag, jaccard


def random_tag_sets(rng, n, n_labels=6):
    out = []
    for _ in range(n):
        k = rng.integers(1, n_labels + 1)
        out.append(frozenset(rng.choice(n_labels, size=k, replace=False).tolist()))
    return out


def test_jaccard_values():
    assert jaccard({1, 2}, {2, 3}) == pytest.approx(1 / 3)
    assert jaccard({4, 5}, {5, 4}) == 1.0
    assert jaccard({1}, {2}) == 0.0
    with pytest.raises(ValueError):
        jaccard(set(), {1})


@given(st.frozensets(st.integers(0, 8), min_size=1), st.frozensets(st.integers(0, 8), min_size=1))
def test_jaccard_symmetric_and_bounded(a, b):
    assert jaccard(a, b) == jaccard(b, a)
    assert 0.0 <= jaccard(a, b) <= 1.0
    assert jaccard(a, a) == 1.0


def test_single_image_affinity():
    aff = build_affinity([{0, 1}])
    np.testing.assert_array_equal(aff.S, [[1.0]])
    np.testing.assert_allclose(aff.laplacian, [[0.0]], atol=1e-15)


def test_identical_pair_laplacian():
    aff = build_affinity([{0}, {0}])
    np.testing.assert_allclose(aff.laplacian, [[0.5, -0.5], [-0.5, 0.5]], atol=1e-15)


def test_matrix_form_matches_pair_sum(rng):
    sets = random_tag_sets(rng, 7)
    aff = build_affinity(sets)
    S = np.array([[jaccard(a, b) for b in sets] for a in sets])
    A = S.sum(axis=1)
    for _ in range(20):
        x = rng.normal(size=len(sets))
        pair_sum = 0.5 * sum(S[i, j] * (x[i] / np.sqrt(A[i]) - x[j] / np.sqrt(A[j])) ** 2
                             for i in range(len(sets)) for j in range(len(sets)))
        assert x @ aff.laplacian @ x == pytest.approx(pair_sum, rel=1e-10, abs=1e-12)


def test_random_laplacian_is_psd(rng):
    aff = build_affinity(random_tag_sets(rng, 6))
    for _ in range(100):
        x = rng.normal(size=6)
        assert x @ aff.laplacian @ x >= -1e-12


def test_affinity_structure(rng):
    aff = build_affinity(random_tag_sets(rng, 12))
    np.testing.assert_array_equal(aff.S, aff.S.T)
    np.testing.assert_array_equal(np.diag(aff.S), 1.0)
    assert np.all((aff.S >= 0) & (aff.S <= 1))
    np.testing.assert_allclose(aff.A, aff.S.sum(axis=1))
    np.testing.assert_allclose(aff.laplacian @ np.sqrt(aff.A), 0.0, atol=1e-12)
    ev = np.linalg.eigvalsh(aff.laplacian)
    assert ev.min() >= -1e-8 and ev.max() <= 2 + 1e-8


def test_dissimilarity_values():
    sets = [{1, 2, 3}, {1}, {4}]
    np.testing.assert_allclose(dissimilarity_diag({1, 2, 3}, sets), [0.0, 2 / 3, 1.0])
    with pytest.raises(ValueError):
        dissimilarity_diag(set(), sets)


def test_constraint_matrix_cases(rng):
    aff = build_affinity(random_tag_sets(rng, 5))
    d = rng.uniform(size=5)
    np.testing.assert_allclose(constraint_matrix(aff, d, 0.0), 2 * aff.laplacian)
    one = build_affinity([{0}])
    np.testing.assert_allclose(constraint_matrix(one, [0.5], 1.0), [[1.0]])
    with pytest.raises(ValueError):
        constraint_matrix(aff, d, -0.1)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 15), st.floats(0, 5), st.integers(0, 2**31 - 1))
def test_constraint_matrix_psd(n, lam, seed):
    rng = np.random.default_rng(seed)
    sets = random_tag_sets(rng, n)
    aff = build_affinity(sets)
    Lam = constraint_matrix(aff, dissimilarity_diag(sets[0], sets), lam)
    np.testing.assert_allclose(Lam, Lam.T)
    assert np.linalg.eigvalsh(Lam).min() >= -1e-8
