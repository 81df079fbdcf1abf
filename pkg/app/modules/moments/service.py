# app/modules/moments/service.py
"""
조밀(dense) 모멘트 완화.

  min L_y(f)  s.t.  y_0 = 1,  H_N(y) >= 0,  H_{N-1}(e y) = 0 (e in E),
                    H_{N-1}(lambda y) >= 0,  H_{N-1}(g y) >= 0 (g in G)

y 는 차수 <= 2N 인 모든 단항식에 하나씩 붙는 자유 스칼라.
"""
import logging
from math import comb
from typing import List, Optional

import numpy as np
import sympy as sp

from app.config import MOMENT_MAX_ENTRIES, RANK_TOL
from app.core.conic import LinearMatrix, ProblemBuilder, SdpStatus, SolverSettings, solve_sdp
from app.core.errors import BasisTooLarge
from app.core.linalg import numerical_rank
from app.modules.system.schemas import ReluSystem

from .polynomials import PolynomialSet, Terms, build_polynomial_sets, lambda_objective, poly_terms
from .schemas import MinimizerPoint, MomentOutcome, MomentRelaxation, MomentReport, MomentStatus, MomentVector

logger = logging.getLogger(__name__)

EXTRACTION_TOL = 1e-5


def moment_count(n_vars: int, N: int) -> int:
    return comb(n_vars + 2 * N, 2 * N)


def _localizer(y: LinearMatrix, rel: MomentRelaxation, terms: Terms, s: int) -> LinearMatrix:
    expr: Optional[LinearMatrix] = None
    for idx, coef in rel.localizing_index(terms, s):
        piece = y.gather(idx) * coef
        expr = piece if expr is None else expr + piece
    return expr


def build_moment_lmi(
    sys: ReluSystem,
    f: Optional[sp.Poly] = None,
    N: int = 1,
    sets: Optional[PolynomialSet] = None,
    max_entries: int = MOMENT_MAX_ENTRIES,
) -> MomentRelaxation:
    if N < 1:
        raise ValueError("차수 N 은 1 이상이어야 합니다.")
    n_vars = sys.n + sys.m + 1
    entries = moment_count(n_vars, N)
    if entries > max_entries:
        raise BasisTooLarge(entries, max_entries)

    f = lambda_objective(sys.n, sys.m) if f is None else f
    if f.total_degree() > 2 * N:
        raise ValueError(f"목적 다항식 차수 {f.total_degree()} 가 2N = {2 * N} 를 넘습니다.")
    sets = sets or build_polynomial_sets(sys)
    objective = poly_terms(f)
    equalities = sets.equality_terms()
    inequalities = sets.inequality_terms()

    b = ProblemBuilder()
    y = b.free_scalars(entries, "y")
    # 문제 조립 전에 인덱스 계산용 껍데기를 먼저 만든다
    shell = MomentRelaxation.model_construct(order=N, n=sys.n, m=sys.m)

    b.constrain_equal(y.gather([[0]]), 1.0)
    b.constrain_psd(y.gather(shell.moment_index(N)), "M")
    for e in equalities:
        b.constrain_equal(_localizer(y, shell, e, N - 1), 0.0, symmetric=True)
    lam = tuple([0] * (n_vars - 1) + [1])
    b.constrain_psd(_localizer(y, shell, {lam: 1.0}, N - 1), "L_lambda")
    for k, g in enumerate(inequalities):
        b.constrain_psd(_localizer(y, shell, g, N - 1), f"L_g{k}")

    cost = np.zeros(entries)
    pos = shell.positions()
    for alpha, coef in objective.items():
        cost[pos[alpha]] += coef
    b.minimize(cost[None, :] @ y)

    logger.debug("moment LMI N=%d: y %d 개, G %d 개", N, entries, len(inequalities))
    return MomentRelaxation(
        order=N,
        n=sys.n,
        m=sys.m,
        objective=objective,
        equalities=equalities,
        inequalities=inequalities,
        problem=b.build(),
    )


def moment_ranks(y: MomentVector, rank_tol: float = RANK_TOL) -> List[int]:
    """rank H_0(y) .. rank H_N(y)"""
    ranks = []
    for s in range(y.order + 1):
        ranks.append(numerical_rank(y.moment_matrix(s), rank_tol))
    return ranks


def check_flat_extension(y: MomentVector, N: Optional[int] = None, rank_tol: float = RANK_TOL) -> Optional[int]:
    """rank H_s = rank H_{s-1} 인 가장 작은 s (1 <= s <= N)"""
    N = y.order if N is None else N
    if not 1 <= N <= y.order:
        raise ValueError(f"N 은 1..{y.order} 범위여야 합니다.")
    ranks = moment_ranks(y, rank_tol)
    for s in range(1, N + 1):
        if ranks[s] == ranks[s - 1]:
            return s
    return None


def extract_minimizer(
    y: MomentVector,
    sets: Optional[PolynomialSet] = None,
    rank_tol: float = RANK_TOL,
    tol: float = EXTRACTION_TOL,
) -> Optional[MinimizerPoint]:
    """
    flat extension 이 rank 1 일 때 1차 모멘트에서 점을 읽는다.
    sets 가 주어지면 |e| <= tol, g >= -tol 을 확인하고 어긋나면 None.
    """
    s = check_flat_extension(y, rank_tol=rank_tol)
    if s is None or moment_ranks(y, rank_tol)[s] != 1:
        return None
    y0 = y.value((0,) * y.n_vars)
    if y0 <= 0.0:
        return None
    point = np.array([y.value(tuple(int(k == i) for k in range(y.n_vars))) for i in range(y.n_vars)]) / y0

    residual = None
    lowest = None
    if sets is not None:
        e, g = sets.evaluate(point)
        residual = float(np.max(np.abs(e))) if e.size else 0.0
        lowest = float(np.min(g)) if g.size else 0.0
        if residual > tol or lowest < -tol:
            logger.info("moment 추출점 검증 실패: |e|=%.2e, min g=%.2e", residual, lowest)
            return None
    return MinimizerPoint(
        x=point[: y.n].tolist(),
        w=point[y.n: y.n + y.m].tolist(),
        lambda_=float(point[-1]),
        max_equality_residual=residual,
        min_inequality=lowest,
    )


def solve_moment_relaxation(
    sys: ReluSystem,
    N: int,
    f: Optional[sp.Poly] = None,
    rank_tol: float = RANK_TOL,
    settings: Optional[SolverSettings] = None,
    sets: Optional[PolynomialSet] = None,
) -> MomentOutcome:
    sets = sets or build_polynomial_sets(sys)
    rel = build_moment_lmi(sys, f, N, sets)
    sol = solve_sdp(rel.problem, settings or SolverSettings())

    if sol.status == SdpStatus.INFEASIBLE:
        return MomentOutcome(order=N, status=MomentStatus.INFEASIBLE, n_moments=rel.n_entries, solve_time=sol.solve_time)
    if not sol.ok:
        logger.warning("moment 완화 N=%d 풀이 실패 (%s)", N, sol.status.value)
        return MomentOutcome(
            order=N, status=MomentStatus.NUMERICAL_FAILURE, n_moments=rel.n_entries, solve_time=sol.solve_time
        )

    y = MomentVector(order=N, n=sys.n, m=sys.m, values=sol.scalars("y"))
    ranks = moment_ranks(y, rank_tol)
    flat = check_flat_extension(y, rank_tol=rank_tol)
    minimizer = extract_minimizer(y, sets, rank_tol)
    logger.info("moment N=%d: bound=%.6g ranks=%s flat=%s", N, sol.objective_value, ranks, flat)
    return MomentOutcome(
        order=N,
        status=MomentStatus.OPTIMAL,
        bound=sol.objective_value,
        ranks=ranks,
        flat_extension=flat,
        minimizer=minimizer,
        dual_norm=float(np.linalg.norm(sol.dual_values)) if sol.dual_values.size else None,
        n_moments=rel.n_entries,
        solve_time=sol.solve_time,
    )


def run_moment_hierarchy(
    sys: ReluSystem,
    N_max: int,
    f: Optional[sp.Poly] = None,
    rank_tol: float = RANK_TOL,
    settings: Optional[SolverSettings] = None,
) -> MomentReport:
    """1..N_max 차 bound. infeasible 이 나오면 그 위 차수는 풀지 않는다"""
    if N_max < 1:
        raise ValueError("N_max 는 1 이상이어야 합니다.")
    sets = build_polynomial_sets(sys)
    report = MomentReport(n=sys.n, m=sys.m)
    for N in range(1, N_max + 1):
        outcome = solve_moment_relaxation(sys, N, f, rank_tol, settings, sets)
        report.outcomes.append(outcome)
        if outcome.status == MomentStatus.INFEASIBLE:
            break
    return report
