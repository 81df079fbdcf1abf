# app/modules/system/service.py
import hashlib
import logging
from itertools import product
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np

from app.config import DIVERGENCE_NORM, LOOP_MAX_ITER, LOOP_TOL, RK4_STEP
from app.core.errors import IntegrationOverflow, NonConvergence

from .schemas import RayWitness, ReluSystem, SystemFingerprint, Trajectory, ValidationReport

logger = logging.getLogger(__name__)


# ============================================================
# ReLU
# ============================================================

def relu(q) -> np.ndarray:
    return np.maximum(np.asarray(q, dtype=float), 0.0)


def relu_encoding_residuals(p, q) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """p = relu(q) <=> 앞의 두 개가 >= 0, 마지막이 == 0"""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    return p - q, p, (p - q) * p


# ============================================================
# loop 해 z = C x + D relu(z)
# ============================================================

def pattern_gain(sys: ReluSystem, mask: np.ndarray) -> np.ndarray:
    """활성 패턴 mask 에 대해 J x J 블록이 (I - D_JJ)^-1 이고 나머지는 0 인 m x m 행렬"""
    mask = np.asarray(mask, dtype=bool)
    F = np.zeros((sys.m, sys.m))
    idx = np.flatnonzero(mask)
    if idx.size:
        block = np.eye(idx.size) - sys.D[np.ix_(idx, idx)]
        F[np.ix_(idx, idx)] = np.linalg.inv(block)
    return F


def _pattern_solve(sys: ReluSystem, mask: np.ndarray, cx: np.ndarray) -> np.ndarray:
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return cx.copy()
    w_j = np.linalg.solve(np.eye(idx.size) - sys.D[np.ix_(idx, idx)], cx[idx])
    return cx + sys.D[:, idx] @ w_j


def _consistent(z: np.ndarray, mask: np.ndarray) -> bool:
    return bool(np.all(z[mask] >= 0.0) and np.all(z[~mask] <= 0.0))


def _loop_residual(sys: ReluSystem, z: np.ndarray, cx: np.ndarray) -> float:
    return float(np.linalg.norm(z - (cx + sys.D @ relu(z))))


def resolve_loop(
    sys: ReluSystem,
    x,
    tol: float = LOOP_TOL,
    max_iter: int = LOOP_MAX_ITER,
    method: Literal["auto", "picard"] = "auto",
    residuals: Optional[List[float]] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    z = C x + D relu(z) 를 풀어 (z, relu(z)) 를 돌려준다.

    auto: 부호 패턴을 추정해 선형계로 정확히 풀고, 안 맞으면 Picard 반복으로 패턴을 갱신한다.
          ||D|| >= 1 (P-matrix) 이면 Picard 대신 패턴 전체를 본다.
    picard: 순수 Picard 반복. residuals 에 반복별 잔차를 쌓는다.
    tol 은 max(1, ||C x||) 에 대한 상대값.
    """
    if tol <= 0:
        raise ValueError("tol 은 양수여야 합니다.")
    x = np.asarray(x, dtype=float)
    cx = sys.C @ x
    scale = max(1.0, float(np.linalg.norm(cx)))

    if not np.any(sys.D):
        if residuals is not None:
            residuals.append(0.0)
        return cx, relu(cx)

    if method == "picard":
        return _picard(sys, cx, tol * scale, max_iter, residuals)

    mask = cx > 0.0
    z = _pattern_solve(sys, mask, cx)
    if _consistent(z, mask):
        return z, relu(z)

    if sys.contractive:
        z = cx
        for _ in range(max_iter):
            z = cx + sys.D @ relu(z)
            mask = z > 0.0
            candidate = _pattern_solve(sys, mask, cx)
            if _consistent(candidate, mask):
                return candidate, relu(candidate)
            if _loop_residual(sys, z, cx) <= tol * scale:
                return z, relu(z)
        raise NonConvergence(
            f"loop 해가 {max_iter} 회 안에 수렴하지 않았습니다.", _loop_residual(sys, z, cx)
        )

    for bits in product((False, True), repeat=sys.m):
        mask = np.array(bits)
        candidate = _pattern_solve(sys, mask, cx)
        if _consistent(candidate, mask):
            return candidate, relu(candidate)
    raise NonConvergence("모든 활성 패턴에서 loop 해를 찾지 못했습니다.")


def _picard(
    sys: ReluSystem, cx: np.ndarray, tol: float, max_iter: int, residuals: Optional[List[float]]
) -> Tuple[np.ndarray, np.ndarray]:
    z = cx.copy()
    residual = np.inf
    for _ in range(max_iter):
        z_next = cx + sys.D @ relu(z)
        residual = float(np.linalg.norm(z_next - z))
        if residuals is not None:
            residuals.append(residual)
        z = z_next
        if residual <= tol:
            return z, relu(z)
    raise NonConvergence(f"Picard 반복이 {max_iter} 회 안에 수렴하지 않았습니다.", residual)


def vector_field(sys: ReluSystem, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    _, w = resolve_loop(sys, x)
    return sys.A @ x + sys.B @ w


class ClosedLoop:
    """
    시뮬레이션용 vector field. 패턴별 선형 이득 (z = Z x, dx/dt = K x) 을 캐시하고
    직전 패턴이 여전히 맞으면 선형계 풀이 없이 바로 쓴다.
    """

    def __init__(self, sys: ReluSystem):
        self.sys = sys
        self._gains: Dict[bytes, Tuple[np.ndarray, np.ndarray]] = {}
        self._mask: Optional[np.ndarray] = None

    def _gain(self, mask: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        key = mask.tobytes()
        if key not in self._gains:
            W = pattern_gain(self.sys, mask) @ self.sys.C
            self._gains[key] = (self.sys.C + self.sys.D @ W, self.sys.A + self.sys.B @ W)
        return self._gains[key]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        if self._mask is not None:
            Z, K = self._gain(self._mask)
            if _consistent(Z @ x, self._mask):
                return K @ x
        z, _ = resolve_loop(self.sys, x)
        self._mask = z > 0.0
        _, K = self._gain(self._mask)
        return K @ x


# ============================================================
# 시뮬레이션
# ============================================================

def simulate(sys: ReluSystem, x0, t_end: float, h: float = RK4_STEP) -> Trajectory:
    """고정 스텝 RK4. 상태 노름이 DIVERGENCE_NORM 을 넘으면 잘린 궤적과 함께 IntegrationOverflow."""
    if t_end <= 0:
        raise ValueError("t_end 는 양수여야 합니다.")
    if not 0 < h <= t_end:
        raise ValueError("0 < h <= t_end 이어야 합니다.")
    x = np.asarray(x0, dtype=float)
    if x.shape != (sys.n,):
        raise ValueError(f"x0 차원이 {sys.n} 이 아닙니다.")

    steps = int(np.ceil(t_end / h - 1e-9))
    if steps * h < t_end:
        steps += 1
    times = h * np.arange(steps + 1)
    states = np.empty((steps + 1, sys.n))
    states[0] = x
    f = ClosedLoop(sys)

    for k in range(steps):
        k1 = f(x)
        k2 = f(x + 0.5 * h * k1)
        k3 = f(x + 0.5 * h * k2)
        k4 = f(x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)) or np.linalg.norm(x) > DIVERGENCE_NORM:
            partial = Trajectory(times=times[: k + 1], states=states[: k + 1], diverged=True)
            logger.warning("궤적 발산: t=%.4g 에서 노름 한계 초과", times[k + 1])
            raise IntegrationOverflow(f"t={times[k + 1]:.6g} 에서 상태 노름이 {DIVERGENCE_NORM:g} 를 넘었습니다.", partial)
        states[k + 1] = x

    return Trajectory(times=times, states=states)


def ray_deviation(sys: ReluSystem, wit: RayWitness, t_end: float = 5.0, h: float = 1e-4) -> float:
    """x 에서 시작한 궤적과 exp(lambda t) x 의 최대 상대 오차"""
    traj = simulate(sys, wit.x, t_end, h)
    expected = np.exp(wit.lambda_ * traj.times)[:, None] * wit.x[None, :]
    err = np.linalg.norm(traj.states - expected, axis=1) / np.linalg.norm(expected, axis=1)
    return float(err.max())


def field_grid(
    sys: ReluSystem, xmin: float, xmax: float, ymin: float, ymax: float, steps: int
) -> np.ndarray:
    """2차원 시스템의 vector field 격자: 행마다 (x1, x2, f1, f2)"""
    if sys.n != 2:
        raise ValueError("field grid 는 2차원 시스템에서만 만들 수 있습니다.")
    if steps < 2 or xmin >= xmax or ymin >= ymax:
        raise ValueError("격자 범위/개수가 잘못되었습니다.")
    rows = []
    for x1 in np.linspace(xmin, xmax, steps):
        for x2 in np.linspace(ymin, ymax, steps):
            f = vector_field(sys, [x1, x2])
            rows.append((x1, x2, f[0], f[1]))
    return np.asarray(rows)


# ============================================================
# witness 검증
# ============================================================

def validate_witness(sys: ReluSystem, wit: RayWitness, tol: float) -> ValidationReport:
    x, w, lam = wit.x, wit.w, float(wit.lambda_)
    slack, _, comp = relu_encoding_residuals(w, sys.C @ x + sys.D @ w)
    residual_eig = float(np.linalg.norm(sys.A @ x + sys.B @ w - lam * x))
    min_sign = float(np.min(np.concatenate([slack, w])))
    max_comp = float(np.max(np.abs(comp)))
    passed = residual_eig <= tol and min_sign >= -tol and max_comp <= tol and lam >= -tol
    return ValidationReport(
        residual_eig=residual_eig,
        min_sign_entry=min_sign,
        max_complementarity=max_comp,
        lambda_=lam,
        tol=tol,
        passed=passed,
    )


# ============================================================
# 기타
# ============================================================

def fingerprint(sys: ReluSystem, label: Optional[str] = None) -> SystemFingerprint:
    digest = hashlib.sha256()
    for M in (sys.A, sys.B, sys.C, sys.D):
        digest.update(np.ascontiguousarray(M, dtype="<f8").tobytes())
    return SystemFingerprint(
        n=sys.n,
        m=sys.m,
        sha256=digest.hexdigest(),
        d_norm=sys.d_norm,
        contractive=sys.contractive,
        hurwitz=sys.hurwitz,
        label=label,
    )


def random_system(
    seed: int,
    n: int,
    m: int,
    d_norm: Optional[float] = None,
    hurwitz: bool = False,
) -> ReluSystem:
    """시드 고정 랜덤 시스템. ||D|| 는 d_norm (기본: (0, 0.9) 균등)."""
    rng = np.random.default_rng(seed)
    A = rng.uniform(-1.0, 1.0, (n, n))
    B = rng.uniform(-1.0, 1.0, (n, m))
    C = rng.uniform(-1.0, 1.0, (m, n))
    D = rng.uniform(-1.0, 1.0, (m, m))
    target = d_norm if d_norm is not None else 0.9 * rng.uniform(0.05, 1.0)
    if target >= 1.0:
        raise ValueError("d_norm 은 1 미만이어야 합니다.")
    D *= target / np.linalg.norm(D, 2)
    if hurwitz:
        shift = np.max(np.linalg.eigvals(A).real)
        if shift >= 0:
            A -= (shift + rng.uniform(0.1, 1.0)) * np.eye(n)
    return ReluSystem(A=A, B=B, C=C, D=D)

