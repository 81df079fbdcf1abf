# app/modules/hierarchy/service.py
"""
N 차 블록 Hankel LMI 완화.

변수 H_0 .. H_{2N-2} (각각 (n+m) 정방 PSD) 와 조립 행렬 [H_{i+j}] 의 PSD 조건,
shift 조건 [A B] H_i = I_u H_{i+1}, 마지막 블록의 He 조건, 블록별 ReLU 조건.
rank one 해는 (x; w; lambda x; lambda w; ...) 구조를 가진다.
"""
import logging
from typing import List, Optional

import numpy as np

from app.config import HANKEL_TOL, RANK_TOL
from app.core.conic import LinearMatrix, ProblemBuilder, SdpProblem, SdpSolution, SdpStatus, SolverSettings, solve_sdp
from app.core.errors import RankError
from app.core.linalg import eigen_profile, numerical_rank, rank_one_factor
from app.modules.certificates.service import (
    add_relu_constraints,
    finalize_witness,
    orient_pair,
    rayleigh_rate,
)
from app.modules.system.schemas import RayWitness, ReluSystem

from .schemas import HankelRelaxation, HierarchyOutcome, OrderStatus

logger = logging.getLogger(__name__)


def _selectors(sys: ReluSystem):
    n, m = sys.n, sys.m
    Iu = np.hstack([np.eye(n), np.zeros((n, m))])
    return np.hstack([sys.A, sys.B]), Iu


def build_relaxation(sys: ReluSystem, N: int) -> SdpProblem:
    if N < 1:
        raise ValueError("차수 N 은 1 이상이어야 합니다.")
    d = sys.n + sys.m
    AB, Iu = _selectors(sys)

    b = ProblemBuilder()
    H = [b.psd_block(f"H{i}", d) for i in range(2 * N - 1)]
    if N > 1:
        assembled = LinearMatrix.block([[H[i + j] for j in range(N)] for i in range(N)])
        b.constrain_psd(assembled, "Hankel")
    else:
        assembled = H[0]

    for i in range(2 * N - 2):
        b.constrain_equal(AB @ H[i] - Iu @ H[i + 1], 0.0)
    b.constrain_psd((AB @ H[-1] @ Iu.T).he(), "He")
    for i, Hi in enumerate(H):
        add_relu_constraints(b, sys, Hi, f"H{i}")

    b.constrain_equal((Iu @ H[0] @ Iu.T).trace(), 1.0)
    b.minimize(assembled.trace())
    return b.build()


def relaxation_from_solution(sys: ReluSystem, N: int, sol: SdpSolution) -> HankelRelaxation:
    return HankelRelaxation(
        order=N,
        n=sys.n,
        m=sys.m,
        blocks=[sol.blocks[f"H{i}"].array for i in range(2 * N - 1)],
    )


def extract_witness_from_hankel(
    sys: ReluSystem,
    rel: HankelRelaxation,
    rank_tol: float = RANK_TOL,
    hankel_tol: float = HANKEL_TOL,
) -> Optional[RayWitness]:
    M = rel.assembled
    if numerical_rank(M, rank_tol) != 1:
        return None
    try:
        v = rank_one_factor(M, rank_tol)
    except RankError as exc:
        logger.info("Hankel 변수 rank-one 분해 실패: %s", exc)
        return None

    d = rel.block_dim
    parts = [v[k * d:(k + 1) * d] for k in range(rel.order)]
    b0 = parts[0]
    norm0 = float(np.linalg.norm(b0))
    if norm0 == 0.0:
        return None

    x, w = orient_pair(sys, b0[: sys.n], b0[sys.n:])
    if rel.order >= 2:
        lam = float(parts[1] @ b0 / (b0 @ b0))
    else:
        lam = rayleigh_rate(sys, x, w)

    for k, bk in enumerate(parts):
        if np.linalg.norm(bk - lam ** k * b0) > hankel_tol * norm0:
            logger.info("Hankel 블록 %d 이 lambda^k b0 와 맞지 않음", k)
            return None
    return finalize_witness(sys, x, w, lam)


def solve_order(
    sys: ReluSystem,
    N: int,
    rank_tol: float = RANK_TOL,
    settings: Optional[SolverSettings] = None,
) -> HierarchyOutcome:
    sol = solve_sdp(build_relaxation(sys, N), settings or SolverSettings())

    if sol.status == SdpStatus.INFEASIBLE:
        return HierarchyOutcome(order=N, status=OrderStatus.INFEASIBLE, solve_time=sol.solve_time)
    if not sol.ok:
        logger.warning("차수 %d 완화 풀이 실패 (%s)", N, sol.status.value)
        return HierarchyOutcome(order=N, status=OrderStatus.NUMERICAL_FAILURE, solve_time=sol.solve_time)

    rel = relaxation_from_solution(sys, N, sol)
    rank = numerical_rank(rel.assembled, rank_tol)
    witness = extract_witness_from_hankel(sys, rel, rank_tol) if rank == 1 else None
    return HierarchyOutcome(
        order=N,
        status=OrderStatus.FEASIBLE,
        rank_estimate=rank,
        eigen_profile=eigen_profile(rel.assembled),
        objective=sol.objective_value,
        witness=witness,
        solve_time=sol.solve_time,
        relaxation=rel,
    )


def run_hierarchy(
    sys: ReluSystem,
    N_max: int,
    rank_tol: float = RANK_TOL,
    settings: Optional[SolverSettings] = None,
    stop_early: bool = True,
) -> List[HierarchyOutcome]:
    """
    1..N_max 차를 차례로 푼다. 검증된 witness 가 나오거나 infeasible 이 나오면 멈춘다
    (상위 차수는 하위 차수보다 제약이 많다). stop_early=False 면 끝까지 푼다.
    낮은 차수가 infeasible 인데 높은 차수가 feasible 이면 anomaly 로 표시한다.
    """
    if N_max < 1:
        raise ValueError("N_max 는 1 이상이어야 합니다.")
    outcomes: List[HierarchyOutcome] = []
    infeasible_below = False

    for N in range(1, N_max + 1):
        outcome = solve_order(sys, N, rank_tol, settings)
        if outcome.status == OrderStatus.FEASIBLE and infeasible_below:
            logger.warning("단조성 위반: 낮은 차수가 infeasible 인데 차수 %d 가 feasible", N)
            outcome = outcome.model_copy(update={"anomaly": True})
        outcomes.append(outcome)
        logger.info(
            "hierarchy order %d: %s rank=%s witness=%s",
            N, outcome.status.value, outcome.rank_estimate, outcome.witness is not None,
        )

        if outcome.status == OrderStatus.INFEASIBLE:
            infeasible_below = True
            if stop_early:
                break
        if outcome.witness is not None and stop_early:
            break
    return outcomes
