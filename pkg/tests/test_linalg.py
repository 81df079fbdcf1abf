import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from app.core.errors import RankError
from app.core.linalg import (
    SymMatrix,
    canonical_index,
    canonical_size,
    eigen_profile,
    is_p_matrix,
    numerical_rank,
    rank_one_factor,
    spectral_norm,
)

from .conftest import finite


def test_canonical_index_is_symmetric_and_dense():
    dim = 4
    seen = sorted({canonical_index(i, j) for i in range(dim) for j in range(dim)})
    assert seen == list(range(canonical_size(dim)))
    assert canonical_index(1, 3) == canonical_index(3, 1) == 3 * 4 // 2 + 1


def test_sym_matrix_uses_lower_triangle():
    S = SymMatrix([[1.0, 99.0], [2.0, 3.0]])
    assert np.array_equal(S.array, [[1.0, 2.0], [2.0, 3.0]])
    assert np.array_equal(S.lower(), [1.0, 2.0, 3.0])
    assert not S.array.flags.writeable
    assert np.array_equal(SymMatrix.from_lower(S.lower(), 2).array, S.array)


def test_sym_matrix_rejects_non_square():
    with pytest.raises(ValueError):
        SymMatrix(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        SymMatrix.from_lower([1.0, 2.0], 2)


def test_spectral_norm_examples():
    assert spectral_norm(np.eye(3)) == pytest.approx(1.0)
    assert spectral_norm([[0.0, 2.0], [0.0, 0.0]]) == pytest.approx(2.0)
    assert spectral_norm(np.zeros((2, 2))) == 0.0


def test_numerical_rank_of_outer_products():
    u = np.array([1.0, -2.0, 0.5])
    v = np.array([0.0, 1.0, 1.0])
    assert numerical_rank(np.outer(u, u)) == 1
    assert numerical_rank(np.outer(u, u) + np.outer(v, v)) == 2
    assert numerical_rank(np.outer(u, u) + 1e-9 * np.eye(3)) == 1
    assert numerical_rank(np.zeros((3, 3))) == 0
    with pytest.raises(ValueError):
        numerical_rank(np.eye(2), rel_tol=0.0)


def test_eigen_profile_is_descending():
    prof = eigen_profile(np.diag([1.0, 5.0, 3.0]), k=2)
    assert prof == [5.0, 3.0]


@given(arrays(np.float64, 4, elements=finite).filter(lambda v: np.linalg.norm(v) > 1e-3))
@settings(max_examples=50, deadline=None)
def test_rank_one_factor_recovers_vector_up_to_sign(v):
    got = rank_one_factor(np.outer(v, v))
    assert min(np.linalg.norm(got - v), np.linalg.norm(got + v)) <= 1e-8 * max(1.0, np.linalg.norm(v))


def test_rank_one_factor_errors():
    with pytest.raises(RankError):
        rank_one_factor(np.eye(2))
    with pytest.raises(RankError):
        rank_one_factor(-np.outer([1.0, 1.0], [1.0, 1.0]))
    with pytest.raises(RankError):
        rank_one_factor(np.zeros((2, 2)))


def test_is_p_matrix():
    assert is_p_matrix(np.eye(3))
    assert is_p_matrix([[2.0, -1.0], [1.0, 2.0]])
    assert not is_p_matrix([[1.0, 2.0], [2.0, 1.0]])
    assert not is_p_matrix([[-1.0]])


def test_stable_fixture_feedthrough_is_not_contractive_but_well_posed(stable_sys):
    assert spectral_norm(stable_sys.D) > 1.0
    assert is_p_matrix(np.eye(5) - stable_sys.D)
    assert not stable_sys.contractive


@given(st.integers(1, 4), st.integers(0, 1000))
@settings(max_examples=30, deadline=None)
def test_contraction_implies_p_matrix(m, seed):
    rng = np.random.default_rng(seed)
    D = rng.uniform(-1.0, 1.0, (m, m))
    D *= 0.95 / np.linalg.norm(D, 2)
    assert is_p_matrix(np.eye(m) - D)
