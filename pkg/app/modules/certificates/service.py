# app/modules/certificates/service.py
"""
1차 primal / dual LMI.

primal:  [[PA + A^T P, PB], [B^T P, 0]] + M^T Pi M  <=  t I,   P >= eps I,   min t
         M = [[C, D], [0, I]],  Pi 는 NN 멀티플라이어
dual:    H >= 0,  He{A H11 + B H12^T} >= 0,
         [[-C, I - D], [0, I]] H [...]^T >= 0 (엔트리별),  diag(-C H12 + (I - D) H22) = 0,
         trace(H11) = 1,  min trace(H)
"""
import logging
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import null_space

from app.config import FEAS_TOL, RANK_TOL, SIGN_TOL, SNAP_TOL, SUPPORT_TOL, WITNESS_TOL
from app.core.conic import (
    LinearMatrix,
    ProblemBuilder,
    SdpProblem,
    SdpStatus,
    SolverSettings,
    solve_sdp,
)
from app.core.errors import RankError, SolverFailure
from app.core.linalg import SymMatrix, canonical_size, numerical_rank, rank_one_factor
from app.modules.system.schemas import RayWitness, ReluSystem
from app.modules.system.service import pattern_gain, relu, validate_witness

from .schemas import (
    Alternative,
    DualResult,
    DualSolutionH,
    NNMultiplier,
    PrimalCertificate,
    PrimalResult,
)

logger = logging.getLogger(__name__)


# ============================================================
# 멀티플라이어
# ============================================================

def structure_matrix(m: int) -> np.ndarray:
    I = np.eye(m)
    return np.block([[-I, I], [np.zeros((m, m)), I]])


def assemble_multiplier(mult: NNMultiplier) -> SymMatrix:
    m = mult.m
    Jd = np.diag(mult.J)
    Z = np.zeros((m, m))
    E = structure_matrix(m)
    return SymMatrix(E.T @ (mult.Q + np.block([[Z, Jd], [Jd, Z]])) @ E)


def quadratic_constraint_value(Pi, zeta) -> float:
    """(zeta, relu(zeta)) 에서의 2차 형식 값. Pi 가 유효한 멀티플라이어면 >= 0"""
    zeta = np.asarray(zeta, dtype=float)
    v = np.concatenate([zeta, relu(zeta)])
    return float(v @ np.asarray(Pi, dtype=float) @ v)


def _loop_map(sys: ReluSystem) -> np.ndarray:
    """(x, w) -> (C x + D w, w)"""
    return np.block([[sys.C, sys.D], [np.zeros((sys.m, sys.n)), np.eye(sys.m)]])


def primal_lhs(sys: ReluSystem, P: np.ndarray, mult: NNMultiplier) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    top = np.block([
        [P @ sys.A + sys.A.T @ P, P @ sys.B],
        [sys.B.T @ P, np.zeros((sys.m, sys.m))],
    ])
    M = _loop_map(sys)
    return top + M.T @ assemble_multiplier(mult).array @ M


def default_eps_margin(sys: ReluSystem) -> float:
    return 1e-6 * (1.0 + float(np.linalg.norm(sys.A, 2)))


# ============================================================
# primal
# ============================================================

def build_primal_lmi(sys: ReluSystem, eps_margin: Optional[float] = None) -> SdpProblem:
    eps = default_eps_margin(sys) if eps_margin is None else eps_margin
    if eps <= 0:
        raise ValueError("eps_margin 은 양수여야 합니다.")
    n, m = sys.n, sys.m

    b = ProblemBuilder()
    P = b.psd_block("P", n) + eps * np.eye(n)
    Q = LinearMatrix.symmetric_from(b.nonneg_scalars(canonical_size(2 * m), "Q"), 2 * m)
    Jd = b.free_scalars(m, "J").diag_matrix()
    t = b.free_scalars(1, "t")

    Z = np.zeros((m, m))
    E = structure_matrix(m)
    Pi = E.T @ (Q + LinearMatrix.block([[Z, Jd], [Jd, Z]])) @ E
    M = _loop_map(sys)
    top = LinearMatrix.block([
        [P @ sys.A + sys.A.T @ P, P @ sys.B],
        [sys.B.T @ P, Z],
    ])
    lhs = top + M.T @ Pi @ M

    b.constrain_psd(t.times(np.eye(n + m)) - lhs, "S")
    # 동차 문제라 t 가 아래로 무한히 내려가지 않게 막는다
    b.constrain_nonneg(t + 1.0, "t_floor")
    b.minimize(t)
    return b.build()


def run_primal(
    sys: ReluSystem,
    eps_margin: Optional[float] = None,
    settings: Optional[SolverSettings] = None,
) -> PrimalResult:
    settings = settings or SolverSettings()
    eps = default_eps_margin(sys) if eps_margin is None else eps_margin
    sol = solve_sdp(build_primal_lmi(sys, eps), settings)

    if sol.status == SdpStatus.NUMERICAL_FAILURE:
        raise SolverFailure("primal LMI 풀이 실패", status=sol.status.value)
    if not sol.ok:
        return PrimalResult(status=sol.status, solve_time=sol.solve_time)

    t = float(sol.scalars("t")[0])
    certificate = None
    if t < -10 * settings.feas_tol:
        certificate = _reverify(sys, sol.blocks["P"].array + eps * np.eye(sys.n), sol.scalars("Q"), sol.scalars("J"), t, eps)
    logger.info("primal LMI: t=%.3e, certificate=%s", t, certificate is not None)
    return PrimalResult(status=sol.status, t=t, certificate=certificate, solve_time=sol.solve_time)


def _reverify(
    sys: ReluSystem, P: np.ndarray, q: np.ndarray, J: np.ndarray, t: float, eps: float
) -> Optional[PrimalCertificate]:
    """솔버 값을 dense 고유값 분해로 다시 확인한다"""
    if q.size and q.min() < -SIGN_TOL:
        logger.warning("primal 해의 Q 최소 엔트리 %.2e 가 음수", q.min())
        return None
    Q = SymMatrix.from_lower(np.maximum(q, 0.0), 2 * sys.m).array
    mult = NNMultiplier(Q=Q, J=J)
    lam_max = float(np.linalg.eigvalsh(primal_lhs(sys, P, mult))[-1])
    lam_min_P = float(np.linalg.eigvalsh(SymMatrix(P).array)[0])
    if lam_max >= 0.0 or lam_min_P <= 0.0:
        logger.warning("primal 재검증 실패: lambda_max=%.3e, lambda_min(P)=%.3e", lam_max, lam_min_P)
        return None
    return PrimalCertificate(
        P=SymMatrix(P).array,
        multiplier=mult,
        margin=-lam_max,
        margin_P=lam_min_P,
        t=t,
        eps_margin=eps,
    )


def check_stability(
    sys: ReluSystem,
    eps_margin: Optional[float] = None,
    settings: Optional[SolverSettings] = None,
) -> Optional[PrimalCertificate]:
    return run_primal(sys, eps_margin, settings).certificate


# ============================================================
# dual
# ============================================================

def add_relu_constraints(b: ProblemBuilder, sys: ReluSystem, H: LinearMatrix, tag: str) -> None:
    """(x, w) 2차 모멘트 블록 H 에 ReLU 부호/상보성 조건을 건다"""
    n, m = sys.n, sys.m
    Il = np.hstack([np.zeros((m, n)), np.eye(m)])
    L = np.hstack([-sys.C, np.eye(m) - sys.D])
    N = np.vstack([L, Il])
    b.constrain_nonneg(N @ H @ N.T, f"{tag}_sign", symmetric=True)
    b.constrain_equal((L @ H @ Il.T).diag(), 0.0)


def build_dual_lmi(sys: ReluSystem) -> SdpProblem:
    n = sys.n
    b = ProblemBuilder()
    H = b.psd_block("H", n + sys.m)
    H11, H12 = H[:n, :n], H[:n, n:]
    b.constrain_psd((sys.A @ H11 + sys.B @ H12.T).he(), "He")
    add_relu_constraints(b, sys, H, "H")
    b.constrain_equal(H11.trace(), 1.0)
    b.minimize(H.trace())
    return b.build()


def solve_dual(
    sys: ReluSystem,
    rank_tol: float = RANK_TOL,
    settings: Optional[SolverSettings] = None,
) -> DualResult:
    sol = solve_sdp(build_dual_lmi(sys), settings or SolverSettings())
    if not sol.ok:
        return DualResult(status=sol.status, solve_time=sol.solve_time)
    H = sol.blocks["H"]
    rank = numerical_rank(H, rank_tol)
    if rank != 1:
        logger.warning("dual LMI feasible 이지만 rank(H) = %d", rank)
    return DualResult(
        status=sol.status,
        objective=sol.objective_value,
        solution=DualSolutionH(H=H.array, n=sys.n, m=sys.m, rank_estimate=rank),
        solve_time=sol.solve_time,
    )


def classify_alternative(
    primal: PrimalResult, dual: DualResult, feas_tol: float = FEAS_TOL
) -> Alternative:
    if primal.t is not None and abs(primal.t) <= 10 * feas_tol:
        return Alternative.INCONCLUSIVE
    if primal.strictly_feasible and not dual.feasible:
        return Alternative.STABLE
    if dual.feasible and not primal.strictly_feasible:
        return Alternative.DUAL
    return Alternative.INCONCLUSIVE


# ============================================================
# witness 추출
# ============================================================

def orient_pair(sys: ReluSystem, x: np.ndarray, w: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(w - (Cx + Dw); w) 의 최소 엔트리가 커지는 쪽으로 전체 부호를 고른다"""
    stacked = np.concatenate([w - (sys.C @ x + sys.D @ w), w])
    if np.min(-stacked) > np.min(stacked):
        return -x, -w
    return x, w


def snap_to_pattern(
    sys: ReluSystem,
    x: np.ndarray,
    w: np.ndarray,
    lam: float,
    support_tol: float = SUPPORT_TOL,
    snap_tol: float = SNAP_TOL,
) -> Optional[Tuple[np.ndarray, np.ndarray, float]]:
    """
    내점법 해 (x, w, lambda) 를 w 의 support J 위의 정확한 ray 로 옮긴다.

    J 를 고정하면 w = F_J C x,  (A + B F_J C) x = lambda x 이므로
    lambda 에 가장 가까운 실수 고유값의 고유공간에 x 를 사영한다.
    """
    scale = float(np.linalg.norm(np.concatenate([x, w])))
    if scale == 0.0:
        return None
    F = pattern_gain(sys, w > support_tol * scale)
    M = sys.A + sys.B @ F @ sys.C
    vals, vecs = np.linalg.eig(M)
    real = np.flatnonzero(np.abs(vals.imag) <= 1e-10 * np.maximum(1.0, np.abs(vals)))
    if real.size == 0:
        return None
    k = real[np.argmin(np.abs(vals.real[real] - lam))]
    mu = float(vals.real[k])
    if abs(mu - lam) > snap_tol * max(1.0, abs(lam)):
        return None

    basis = null_space(M - mu * np.eye(sys.n), rcond=1e-8)
    if basis.shape[1] == 0:
        v = vecs[:, k].real
        basis = (v / np.linalg.norm(v))[:, None]
    x_snap = basis @ (basis.T @ x)
    if np.linalg.norm(x_snap) == 0.0:
        return None
    return x_snap, F @ (sys.C @ x_snap), mu


def _as_witness(x: np.ndarray, w: np.ndarray, lam: float, tol: float) -> Optional[RayWitness]:
    nx = float(np.linalg.norm(x))
    if nx == 0.0 or lam < -SIGN_TOL:
        return None
    x, w = x / nx, w / nx
    w = np.where((w < 0.0) & (w >= -tol), 0.0, w)
    if w.min() < -SIGN_TOL:
        return None
    return RayWitness(x=x, w=w, lambda_=max(float(lam), 0.0))


def finalize_witness(
    sys: ReluSystem, x: np.ndarray, w: np.ndarray, lam: float, tol: float = WITNESS_TOL
) -> Optional[RayWitness]:
    """
    패턴에 맞춘 ray 를 먼저, 원래 해를 다음으로 검증해서 통과한 것을 돌려준다.
    ||x|| = 1, lambda 는 0 근처에서 clamp.
    """
    if np.linalg.norm(x) == 0.0 or lam < -SIGN_TOL:
        return None
    candidates = []
    snapped = snap_to_pattern(sys, x, w, lam)
    if snapped is not None:
        candidates.append(snapped)
    candidates.append((x, w, lam))

    report = None
    for cx, cw, clam in candidates:
        wit = _as_witness(cx, cw, clam, tol)
        if wit is None:
            continue
        report = validate_witness(sys, wit, tol)
        if report.passed:
            return wit
    if report is not None:
        logger.info(
            "witness 검증 실패: eig=%.2e sign=%.2e comp=%.2e",
            report.residual_eig, report.min_sign_entry, report.max_complementarity,
        )
    return None


def rayleigh_rate(sys: ReluSystem, x: np.ndarray, w: np.ndarray) -> float:
    """(A x + B w) = lambda x 의 최소제곱 해"""
    return float(x @ (sys.A @ x + sys.B @ w) / (x @ x))


def extract_witness(
    sys: ReluSystem, H: DualSolutionH, rank_tol: float = RANK_TOL
) -> Optional[RayWitness]:
    if numerical_rank(H.H, rank_tol) != 1:
        return None
    try:
        v = rank_one_factor(H.H, rank_tol)
    except RankError as exc:
        logger.info("dual H rank-one 분해 실패: %s", exc)
        return None
    x, w = orient_pair(sys, v[: sys.n], v[sys.n:])
    if not np.any(x):
        return None
    return finalize_witness(sys, x, w, rayleigh_rate(sys, x, w))
