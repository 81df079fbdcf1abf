import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from app.core.errors import BasisTooLarge
from app.modules.moments.polynomials import (
    build_polynomial_sets,
    evaluate_terms,
    monomial_basis,
    poly_terms,
    variable_symbols,
)
from app.modules.moments.schemas import MomentStatus, MomentVector, MonomialIndex
from app.modules.moments.service import (
    build_moment_lmi,
    check_flat_extension,
    extract_minimizer,
    moment_count,
    moment_ranks,
    run_moment_hierarchy,
    solve_moment_relaxation,
)
from app.modules.oracle.service import min_unstable_lambda
from app.modules.system.schemas import RayWitness
from app.modules.system.service import resolve_loop, validate_witness

from .conftest import contractive_systems, scalar_system


# ------------------ 다항식 ------------------ #

def test_scalar_polynomial_sets():
    sets = build_polynomial_sets(scalar_system(1.0))
    assert [str(g) for g in sets.gens] == ["x1", "w1", "lam"]
    terms = sets.equality_terms()
    assert terms[0] == {(1, 0, 0): 1.0, (1, 0, 1): -1.0}
    assert terms[1] == {(0, 2, 0): -1.0}
    assert terms[2] == {(2, 0, 0): 1.0, (0, 2, 0): 1.0, (0, 0, 0): -1.0}
    # 세 종류의 부호 조건이 모두 w1^2 로 겹친다
    assert sets.inequality_terms() == [{(0, 2, 0): 1.0}]


def test_polynomial_counts(feedthrough_sys):
    sets = build_polynomial_sets(feedthrough_sys)
    assert len(sets.E) == feedthrough_sys.n + feedthrough_sys.m + 1
    assert 0 < len(sets.G) <= 3 * feedthrough_sys.m ** 2
    assert all(p.total_degree() <= 2 for p in sets.E + sets.G)


@given(contractive_systems(max_n=2, max_m=3), st.integers(0, 10_000), st.floats(0.0, 3.0))
@settings(max_examples=20, deadline=None)
def test_polynomials_hold_on_relu_graph(sys, seed, lam):
    x = np.random.default_rng(seed).normal(size=sys.n)
    _, w = resolve_loop(sys, x)
    scale = np.sqrt(x @ x + w @ w)
    point = np.concatenate([x / scale, w / scale, [lam]])
    e, g = build_polynomial_sets(sys).evaluate(point)
    assert np.all(g >= -1e-10)
    # w z - w^2 = 0 과 단위 노름 조건
    assert np.allclose(e[sys.n:], 0.0, atol=1e-10)


def test_evaluate_terms():
    assert evaluate_terms({(2, 1): 3.0, (0, 0): -1.0}, [2.0, 0.5]) == pytest.approx(5.0)
    x1, w1, lam = variable_symbols(1, 1)
    assert poly_terms(sp.Poly(2 * x1 * lam - w1, x1, w1, lam)) == {(1, 0, 1): 2.0, (0, 1, 0): -1.0}


# ------------------ 기저 / 모멘트 벡터 ------------------ #

def test_graded_lex_basis():
    assert monomial_basis(2, 2) == [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
    assert len(monomial_basis(4, 3)) == 35
    assert len(monomial_basis(5, 4)) == moment_count(5, 2)
    assert (MonomialIndex(exponents=(1, 0)) + MonomialIndex(exponents=(1, 2))).degree == 4


def test_moment_matrix_is_hankel():
    rng = np.random.default_rng(0)
    y = MomentVector(order=2, n=1, m=1, values=rng.normal(size=moment_count(3, 2)))
    basis = monomial_basis(3, 2)
    H = y.moment_matrix(2)
    for i, a in enumerate(basis):
        for j, b in enumerate(basis):
            assert H[i, j] == y.value(tuple(p + q for p, q in zip(a, b)))


def test_moment_vector_length_is_checked():
    with pytest.raises(ValueError):
        MomentVector(order=1, n=1, m=1, values=np.ones(4))


def test_dirac_measure_is_flat_and_recovered():
    p = [0.6, 0.8, 0.25]
    y = MomentVector.from_atoms([p], [1.0], n=1, m=1, order=2)
    assert moment_ranks(y) == [1, 1, 1]
    assert check_flat_extension(y) == 1
    point = extract_minimizer(y)
    assert point is not None
    assert point.x == pytest.approx([0.6]) and point.w == pytest.approx([0.8])
    assert point.lambda_ == pytest.approx(0.25)


def test_two_atoms_flatten_at_order_two():
    y = MomentVector.from_atoms([[1.0, 0.0, 1.0], [-1.0, 0.0, 1.0]], [0.5, 0.5], n=1, m=1, order=2)
    assert moment_ranks(y) == [1, 2, 2]
    assert check_flat_extension(y) == 2
    assert extract_minimizer(y) is None
    with pytest.raises(ValueError):
        check_flat_extension(y, N=3)


def test_localizing_matrix_of_dirac():
    p = np.array([0.5, -1.0, 2.0])
    y = MomentVector.from_atoms([p], [1.0], n=1, m=1, order=2)
    g = {(1, 0, 0): 2.0, (0, 1, 1): -1.0}
    value = evaluate_terms(g, p)
    assert np.allclose(y.localizing_matrix(g, 1), value * y.moment_matrix(1))
    with pytest.raises(ValueError):
        y.localizing_matrix({(2, 1, 0): 1.0}, 1)


def test_extraction_checks_constraints():
    sets = build_polynomial_sets(scalar_system(1.0))
    ray = MomentVector.from_atoms([[1.0, 0.0, 1.0]], [1.0], n=1, m=1, order=1)
    assert extract_minimizer(ray, sets) is not None
    off_ray = MomentVector.from_atoms([[1.0, 0.0, 0.5]], [1.0], n=1, m=1, order=1)
    assert extract_minimizer(off_ray, sets) is None


# ------------------ LMI ------------------ #

def test_moment_lmi_structure():
    sys = scalar_system(1.0)
    rel = build_moment_lmi(sys, N=2)
    assert rel.n_entries == moment_count(3, 2) == 35
    assert rel.problem.free_scalars == 35
    assert rel.problem.block_dim("M") == 10
    assert rel.problem.block_dim("L_lambda") == 4
    assert rel.objective == {(0, 0, 1): 1.0}


def test_moment_lmi_guards():
    sys = scalar_system(1.0)
    with pytest.raises(BasisTooLarge):
        build_moment_lmi(sys, N=2, max_entries=10)
    with pytest.raises(ValueError):
        build_moment_lmi(sys, N=0)
    lam = variable_symbols(1, 1)[-1]
    with pytest.raises(ValueError):
        build_moment_lmi(sys, f=sp.Poly(lam ** 3, *variable_symbols(1, 1)), N=1)


def test_large_system_hits_basis_guard(third_order_sys):
    with pytest.raises(BasisTooLarge) as info:
        build_moment_lmi(third_order_sys, N=5)
    assert info.value.entries == moment_count(8, 5)


def test_scalar_unstable_bounds_increase():
    report = run_moment_hierarchy(scalar_system(1.0), 2)
    first, second = report.outcomes
    assert first.status == second.status == MomentStatus.OPTIMAL
    assert first.bound <= 1.0 + 1e-6
    assert second.bound >= first.bound - 1e-6
    assert second.bound == pytest.approx(1.0, abs=1e-6)
    assert report.best_bound == second.bound
    assert len(second.ranks) == 3
    assert first.dual_norm is not None and first.dual_norm >= 0.0


def test_scalar_stable_relaxation_becomes_infeasible():
    report = run_moment_hierarchy(scalar_system(-1.0), 3)
    assert [o.status for o in report.outcomes] == [MomentStatus.OPTIMAL, MomentStatus.INFEASIBLE]
    assert report.outcomes[1].bound is None


def test_solve_reports_moment_count(toy_sys):
    outcome = solve_moment_relaxation(toy_sys, 1)
    assert outcome.n_moments == moment_count(4, 1)
    assert outcome.status == MomentStatus.OPTIMAL
    assert outcome.bound <= 1.0 + 1e-6


def test_extracted_point_is_a_valid_witness(first_order_sys):
    lam, ray = min_unstable_lambda(first_order_sys)
    p = np.concatenate([ray.stacked_unit(), [lam]])
    y = MomentVector.from_atoms([p], [1.0], n=first_order_sys.n, m=first_order_sys.m, order=1)
    point = extract_minimizer(y, build_polynomial_sets(first_order_sys))
    assert point is not None
    assert point.lambda_ == pytest.approx(lam, abs=1e-12)

    wit = RayWitness(x=point.x, w=np.maximum(point.w, 0.0), lambda_=point.lambda_).normalized()
    assert validate_witness(first_order_sys, wit, 1e-9).passed
