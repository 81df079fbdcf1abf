"""랜덤 시스템 sweep. 시간이 걸려서 slow 로 표시 (pytest -m slow)"""
import logging

import numpy as np
import pytest

from app.modules.certificates.service import extract_witness, run_primal, solve_dual
from app.modules.hierarchy.service import run_hierarchy
from app.modules.moments.schemas import MomentStatus
from app.modules.moments.service import run_moment_hierarchy
from app.modules.oracle.service import enumerate_rays, match_witness, min_unstable_lambda
from app.modules.system.schemas import RayWitness
from app.modules.system.service import random_system, simulate, validate_witness

logger = logging.getLogger(__name__)

pytestmark = pytest.mark.slow


def _shape(seed):
    rng = np.random.default_rng(seed)
    return int(rng.integers(2, 4)), int(rng.integers(2, 5))


def test_certificate_and_witness_never_coexist():
    inconclusive = 0
    for seed in range(200):
        n, m = _shape(seed)
        sys = random_system(seed, n, m)
        primal = run_primal(sys)
        dual = solve_dual(sys)
        witness = extract_witness(sys, dual.solution) if dual.feasible else None
        if witness is not None:
            assert validate_witness(sys, witness, 1e-6).passed
        assert not (primal.strictly_feasible and witness is not None), f"seed={seed}"
        inconclusive += int(not primal.strictly_feasible and witness is None)
    logger.info("inconclusive: %d / 200", inconclusive)


def test_trajectories_scale_with_initial_state():
    for seed in range(100):
        n, m = _shape(seed)
        sys = random_system(seed, n, m, hurwitz=True)
        x0 = np.random.default_rng(seed).normal(size=n)
        base = simulate(sys, x0, 2.0, 1e-2)
        for alpha in (0.5, 2.0):
            scaled = simulate(sys, alpha * x0, 2.0, 1e-2)
            assert np.allclose(scaled.states, alpha * base.states, rtol=1e-8, atol=1e-12), f"seed={seed}"


def test_hierarchy_orders_are_monotone():
    for seed in range(50):
        n, m = _shape(seed)
        sys = random_system(seed, n, m)
        outcomes = run_hierarchy(sys, 3, stop_early=False)
        assert not any(o.anomaly for o in outcomes), f"seed={seed}"


def test_moment_bounds_are_monotone_and_below_oracle():
    for seed in range(30):
        sys = random_system(seed, 2, 2)
        report = run_moment_hierarchy(sys, 2)
        bounds = [o.bound for o in report.outcomes if o.status == MomentStatus.OPTIMAL]
        for lower, upper in zip(bounds, bounds[1:]):
            assert upper >= lower - 1e-6, f"seed={seed}"

        lowest = min_unstable_lambda(sys)
        if lowest is not None:
            for bound in bounds:
                assert bound <= lowest[0] + 1e-6, f"seed={seed}"

        rays = enumerate_rays(sys)
        for outcome in report.outcomes:
            point = outcome.minimizer
            if point is None or point.lambda_ < 0.0:
                continue
            wit = RayWitness(x=point.x, w=np.maximum(point.w, 0.0), lambda_=point.lambda_)
            assert validate_witness(sys, wit.normalized(), 1e-4).passed, f"seed={seed}"
            assert match_witness(rays, wit, vec_tol=1e-4, lambda_tol=1e-4) is not None, f"seed={seed}"
