# app/modules/oracle/service.py
"""
활성 패턴 전수 조사.

패턴 J 를 고정하면 loop 가 선형이 된다: w = F_J C x,  (A + B F_J C) x = lambda x.
각 J 의 실수 고유쌍을 양/음 부호로 검사해서 ray 후보를 만든다.
"""
import logging
from itertools import combinations
from typing import List, Optional, Tuple

import numpy as np
from scipy.linalg import null_space

from app.config import M_CAP, ORACLE_TOL, SIGN_TOL
from app.core.errors import EnumerationCapExceeded
from app.modules.system.schemas import RayWitness, ReluSystem
from app.modules.system.service import pattern_gain

from .schemas import ActivationPattern, CandidateRay, OracleReport, PatternDiagnostics

logger = logging.getLogger(__name__)

_IMAG_TOL = 1e-10
_CLUSTER_TOL = 1e-8
_DEDUP_TOL = 1e-8


def build_FJ(sys: ReluSystem, J: ActivationPattern) -> np.ndarray:
    return pattern_gain(sys, J.mask(sys.m))


def all_patterns(m: int) -> List[ActivationPattern]:
    """(|J|, J 사전순) 순서"""
    return [ActivationPattern(J=c) for k in range(m + 1) for c in combinations(range(m), k)]


# ============================================================
# 고유쌍
# ============================================================

def _real_eigenpairs(M: np.ndarray) -> Tuple[List[Tuple[float, np.ndarray]], int, bool]:
    """
    (실수 고유쌍 목록, 건너뛴 복소 고유값 수, generic 여부).
    중복 고유값은 고유공간의 정규직교 기저 벡터를 하나씩 돌려준다.
    """
    vals, vecs = np.linalg.eig(M)
    is_real = np.abs(vals.imag) <= _IMAG_TOL * np.maximum(1.0, np.abs(vals))
    complex_skipped = int(np.count_nonzero(~is_real))

    gaps = np.abs(vals[:, None] - vals[None, :])
    np.fill_diagonal(gaps, np.inf)
    distinct = bool(np.all(gaps > _CLUSTER_TOL) and np.all(np.abs(vals) > _IMAG_TOL))

    idx = np.flatnonzero(is_real)
    idx = idx[np.argsort(vals.real[idx], kind="stable")]
    pairs: List[Tuple[float, np.ndarray]] = []
    k = 0
    while k < len(idx):
        group = [idx[k]]
        while k + len(group) < len(idx) and (
            vals.real[idx[k + len(group)]] - vals.real[group[0]]
            <= _CLUSTER_TOL * (1.0 + abs(vals.real[group[0]]))
        ):
            group.append(idx[k + len(group)])
        k += len(group)

        if len(group) == 1:
            lam = float(vals.real[group[0]])
            v = vecs[:, group[0]].real
            pairs.append((lam, v / np.linalg.norm(v)))
            continue

        lam = float(np.mean(vals.real[group]))
        basis = null_space(M - lam * np.eye(M.shape[0]), rcond=_CLUSTER_TOL)
        if basis.shape[1] == 0:
            # 결손(defective) 고유값: eig 가 준 벡터를 그대로 쓴다
            basis = np.column_stack([vecs[:, g].real for g in group])
        for j in range(basis.shape[1]):
            v = basis[:, j]
            pairs.append((lam, v / np.linalg.norm(v)))
    return pairs, complex_skipped, distinct


def _sign_feasible(sys: ReluSystem, mask: np.ndarray, x: np.ndarray, w: np.ndarray, tol: float) -> bool:
    z = sys.C @ x + sys.D @ w
    return bool(np.all(w[mask] >= -tol) and np.all(z[~mask] <= tol))


# ============================================================
# 열거
# ============================================================

def _enumerate(
    sys: ReluSystem, tol: float, m_cap: int
) -> Tuple[List[CandidateRay], List[PatternDiagnostics]]:
    if sys.m > m_cap:
        raise EnumerationCapExceeded(sys.m, m_cap)

    rays: List[CandidateRay] = []
    diagnostics: List[PatternDiagnostics] = []
    for J in all_patterns(sys.m):
        mask = J.mask(sys.m)
        F = build_FJ(sys, J)
        pairs, complex_skipped, distinct = _real_eigenpairs(sys.A + sys.B @ F @ sys.C)

        near_zero_first = False
        feasible_count = 0
        for lam, x in pairs:
            w = F @ (sys.C @ x)
            scale = float(np.linalg.norm(np.concatenate([x, w])))
            x, w = x / scale, w / scale
            near_zero_first = near_zero_first or abs(x[0]) <= _DEDUP_TOL

            plus = _sign_feasible(sys, mask, x, w, tol)
            minus = _sign_feasible(sys, mask, -x, -w, tol)
            nonneg = lam >= -SIGN_TOL
            for sign, ok, mirror in ((1.0, plus, minus), (-1.0, minus, plus)):
                rays.append(CandidateRay(
                    pattern=J,
                    lambda_=lam,
                    x=sign * x,
                    w=sign * w,
                    sign_feasible=ok,
                    lambda_nonneg=nonneg,
                    mirror_feasible=ok and mirror,
                ))
                feasible_count += int(ok and nonneg)

        diagnostics.append(PatternDiagnostics(
            pattern=list(J.J),
            real_eigenvalues=len(pairs),
            complex_skipped=complex_skipped,
            distinct=distinct,
            near_zero_first=near_zero_first,
            feasible=feasible_count,
        ))
        logger.debug("pattern %s: real=%d complex=%d feasible=%d", J.J, len(pairs), complex_skipped, feasible_count)

    rays.sort(key=lambda r: (r.pattern.sort_key, r.lambda_))
    return _dedup(rays), diagnostics


def _dedup(rays: List[CandidateRay]) -> List[CandidateRay]:
    """sign feasible 후보 중 부호를 무시하고 겹치는 것은 먼저 나온 (작은 패턴) 것만 남긴다"""
    kept: List[CandidateRay] = []
    seen: List[CandidateRay] = []
    for r in rays:
        if not r.sign_feasible:
            kept.append(r)
            continue
        v = r.stacked()
        duplicate = any(
            abs(r.lambda_ - s.lambda_) < _DEDUP_TOL
            and min(np.linalg.norm(v - s.stacked()), np.linalg.norm(v + s.stacked())) < _DEDUP_TOL
            for s in seen
        )
        if not duplicate:
            seen.append(r)
            kept.append(r)
    return kept


def enumerate_rays(sys: ReluSystem, tol: float = ORACLE_TOL, m_cap: int = M_CAP) -> List[CandidateRay]:
    rays, _ = _enumerate(sys, tol, m_cap)
    return rays


def feasible_rays(rays: List[CandidateRay]) -> List[CandidateRay]:
    return [r for r in rays if r.feasible]


def _lowest_ray(rays: List[CandidateRay]) -> Optional[CandidateRay]:
    best: Optional[CandidateRay] = None
    for r in feasible_rays(rays):
        if best is None or r.lambda_ < best.lambda_:
            best = r
    return best


def min_unstable_lambda(
    sys: ReluSystem,
    rays: Optional[List[CandidateRay]] = None,
    tol: float = ORACLE_TOL,
    m_cap: int = M_CAP,
) -> Optional[Tuple[float, RayWitness]]:
    if rays is None:
        rays = enumerate_rays(sys, tol, m_cap)
    best = _lowest_ray(rays)
    if best is None:
        return None
    return max(best.lambda_, 0.0), best.to_witness()


def match_witness(
    rays: List[CandidateRay],
    witness: RayWitness,
    vec_tol: float = 1e-4,
    lambda_tol: float = 1e-5,
) -> Optional[CandidateRay]:
    """부호와 스케일을 무시하고 witness 와 같은 feasible ray 를 찾는다"""
    target = witness.stacked_unit()
    for r in feasible_rays(rays):
        v = r.stacked() / np.linalg.norm(r.stacked())
        close = min(np.linalg.norm(v - target), np.linalg.norm(v + target)) <= vec_tol
        if close and abs(max(r.lambda_, 0.0) - witness.lambda_) <= lambda_tol:
            return r
    return None


# ============================================================
# 리포트
# ============================================================

def build_oracle_report(sys: ReluSystem, tol: float = ORACLE_TOL, m_cap: int = M_CAP) -> OracleReport:
    rays, diagnostics = _enumerate(sys, tol, m_cap)
    feasible = feasible_rays(rays)
    best = _lowest_ray(rays)

    degenerate = sum(d.degenerate for d in diagnostics)
    if degenerate:
        logger.info("non-generic 패턴 %d 개 (중복/0 고유값 또는 첫 좌표 0)", degenerate)
    logger.info("oracle: %d 패턴, feasible ray %d 개, lambda_min=%s", len(diagnostics), len(feasible), best and best.lambda_)
    return OracleReport(
        n=sys.n,
        m=sys.m,
        patterns_checked=len(diagnostics),
        expected_complex_solutions=2 * sys.n * 2 ** sys.m,
        rays=[r.to_record() for r in feasible],
        diagnostics=diagnostics,
        lambda_min=None if best is None else max(best.lambda_, 0.0),
        witness=None if best is None else best.to_record(),
    )


def oracle_exit_code(report: OracleReport) -> int:
    """10: lambda > sign_tol 인 ray, 11: lambda ~ 0 ray 만, 0: 없음"""
    if report.lambda_min is None:
        return 0
    return 10 if report.has_positive_ray else 11
