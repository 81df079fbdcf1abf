import warnings

import numpy as np
import pytest
from pydantic import ValidationError

from app.core.errors import EnumerationCapExceeded
from app.modules.oracle.schemas import ActivationPattern, OracleReport, RayRecord
from app.modules.oracle.service import (
    all_patterns,
    build_FJ,
    build_oracle_report,
    enumerate_rays,
    feasible_rays,
    match_witness,
    min_unstable_lambda,
    oracle_exit_code,
)
from app.modules.system.schemas import RayWitness, ReluSystem
from app.modules.system.service import validate_witness


@pytest.fixture(scope="module")
def first_order_rays(first_order_sys):
    return enumerate_rays(first_order_sys)


def _record(lam, sign_feasible=True, nonneg=True):
    return RayRecord(pattern=[], lambda_=lam, x=[1.0], w=[0.0], sign_feasible=sign_feasible, lambda_nonneg=nonneg)


# ------------------ 패턴 ------------------ #

def test_patterns_are_canonical():
    assert ActivationPattern(J=(3, 1)).J == (1, 3)
    with pytest.raises(ValidationError):
        ActivationPattern(J=(1, 1))
    with pytest.raises(ValidationError):
        ActivationPattern(J=(-1,))
    assert ActivationPattern.from_mask([False, True, True]).J == (1, 2)
    with pytest.raises(ValueError):
        ActivationPattern(J=(4,)).mask(2)


def test_pattern_order():
    assert [p.J for p in all_patterns(2)] == [(), (0,), (1,), (0, 1)]
    assert len(all_patterns(5)) == 32


def test_pattern_gain_without_feedthrough(first_order_sys):
    F = build_FJ(first_order_sys, ActivationPattern(J=(1, 3)))
    assert np.array_equal(F, np.diag([0.0, 1.0, 0.0, 1.0, 0.0]))
    assert not np.any(build_FJ(first_order_sys, ActivationPattern()))


def test_pattern_gain_inverts_loop_block(feedthrough_sys):
    J = ActivationPattern(J=(0, 2, 4))
    F = build_FJ(feedthrough_sys, J)
    idx = list(J.J)
    block = np.eye(3) - feedthrough_sys.D[np.ix_(idx, idx)]
    assert np.allclose(F[np.ix_(idx, idx)] @ block, np.eye(3), atol=1e-12)
    assert not np.any(F[[1, 3], :]) and not np.any(F[:, [1, 3]])


# ------------------ 열거 ------------------ #

def test_toy_system_has_single_ray(toy_sys):
    rays = feasible_rays(enumerate_rays(toy_sys))
    assert len(rays) == 1
    ray = rays[0]
    assert ray.lambda_ == pytest.approx(1.0)
    assert ray.pattern.J == ()
    assert abs(ray.x[0]) == pytest.approx(1.0)
    assert ray.mirror_feasible

    lam, wit = min_unstable_lambda(toy_sys)
    assert lam == pytest.approx(1.0)
    assert validate_witness(toy_sys, wit, 1e-12).passed


def test_repeated_eigenvalues_give_independent_rays():
    sys = ReluSystem(A=np.eye(2), B=np.zeros((2, 1)), C=np.zeros((1, 2)), D=np.zeros((1, 1)))
    report = build_oracle_report(sys)
    assert len(report.rays) == 2
    first = report.diagnostics[0]
    assert first.real_eigenvalues == 2
    assert first.degenerate
    xs = np.array([r.x for r in report.rays])
    assert abs(xs[0] @ xs[1]) <= 1e-10


def test_distinct_eigenvalues_are_recognized(toy_sys):
    with warnings.catch_warnings():
        warnings.simplefilter("error", RuntimeWarning)
        report = build_oracle_report(toy_sys)
    assert all(d.distinct for d in report.diagnostics)


def test_stable_fixture_has_no_ray(stable_sys):
    report = build_oracle_report(stable_sys)
    assert report.rays == []
    assert report.lambda_min is None
    assert report.patterns_checked == 32
    assert oracle_exit_code(report) == 0
    assert min_unstable_lambda(stable_sys) is None


def test_first_order_fixture_ray(first_order_sys, first_order_rays):
    witness = RayWitness(x=[-0.6282, -0.7780], w=[0.0, 0.3414, 0.0, 0.0, 0.0], lambda_=0.1037)
    match = match_witness(first_order_rays, witness, vec_tol=5e-3, lambda_tol=1e-3)
    assert match is not None
    assert match.pattern.J == (1,)
    lam, _ = min_unstable_lambda(first_order_sys, first_order_rays)
    assert 0.0 < lam <= match.lambda_
    assert oracle_exit_code(build_oracle_report(first_order_sys)) == 10


def test_feedthrough_fixture_ray(feedthrough_sys):
    rays = enumerate_rays(feedthrough_sys)
    witness = RayWitness(x=[0.6119, 0.7909], w=[0.0, 0.0, 0.0, 0.0, 0.2932], lambda_=0.0807)
    match = match_witness(rays, witness, vec_tol=5e-3, lambda_tol=1e-3)
    assert match is not None
    assert match.pattern.J == (4,)


def test_third_order_fixture_ray(third_order_sys):
    rays = enumerate_rays(third_order_sys)
    witness = RayWitness(x=[-0.1831, 0.9831], w=[0.0, 0.2799, 0.0, 0.0, 0.5462], lambda_=0.4858)
    match = match_witness(rays, witness, vec_tol=5e-3, lambda_tol=1e-3)
    assert match is not None
    assert match.pattern.J == (1, 4)


@pytest.mark.parametrize("name", ["first_order_sys", "feedthrough_sys", "third_order_sys"])
def test_feasible_rays_are_exact_solutions(request, name):
    sys = request.getfixturevalue(name)
    for ray in feasible_rays(enumerate_rays(sys)):
        F = build_FJ(sys, ray.pattern)
        assert np.linalg.norm(np.concatenate([ray.x, ray.w])) == pytest.approx(1.0)
        assert np.allclose(ray.w, F @ sys.C @ ray.x, atol=1e-12)
        residual = (sys.A + sys.B @ F @ sys.C) @ ray.x - ray.lambda_ * ray.x
        assert np.linalg.norm(residual) <= 1e-9
        unscaled = RayWitness.model_construct(x=ray.x, w=ray.w, lambda_=max(ray.lambda_, 0.0))
        assert validate_witness(sys, unscaled, 1e-9).passed


def test_match_ignores_sign(first_order_rays):
    ray = feasible_rays(first_order_rays)[0]
    flipped = RayWitness.model_construct(x=-ray.x, w=-ray.w, lambda_=max(ray.lambda_, 0.0))
    assert match_witness(first_order_rays, flipped) is ray
    shifted = RayWitness.model_construct(x=ray.x, w=ray.w, lambda_=ray.lambda_ + 0.5)
    assert match_witness(first_order_rays, shifted) is None


def test_enumeration_is_deterministic(feedthrough_sys):
    first = build_oracle_report(feedthrough_sys).model_dump()
    second = build_oracle_report(feedthrough_sys).model_dump()
    assert first == second


def test_enumeration_cap(toy_sys):
    with pytest.raises(EnumerationCapExceeded) as info:
        enumerate_rays(toy_sys, m_cap=0)
    assert info.value.m == 1
    wide = ReluSystem(A=[[-1.0]], B=np.zeros((1, 17)), C=np.zeros((17, 1)), D=np.zeros((17, 17)))
    with pytest.raises(EnumerationCapExceeded):
        build_oracle_report(wide)


def test_exit_codes():
    assert oracle_exit_code(OracleReport(n=1, m=1, patterns_checked=2, expected_complex_solutions=4)) == 0
    zero = OracleReport(
        n=1, m=1, patterns_checked=2, expected_complex_solutions=4, rays=[_record(0.0)], lambda_min=0.0
    )
    assert oracle_exit_code(zero) == 11
    positive = zero.model_copy(update={"rays": [_record(0.0), _record(0.3)]})
    assert oracle_exit_code(positive) == 10


def test_report_serializes_lambda_alias(toy_sys):
    dumped = build_oracle_report(toy_sys).model_dump(by_alias=True)
    assert dumped["witness"]["lambda"] == pytest.approx(1.0)
    assert dumped["expected_complex_solutions"] == 2 * 2 * 2
