# app/core/conic.py
"""
솔버 중립적인 SDP 모델과 cvxpy 어댑터.

변수 그룹
  - PSD 블록: 이름별 대칭 행렬 변수, 엔트리는 하삼각 canonical 인덱스로 참조
  - NONNEG: 엔트리별 비음 스칼라
  - FREE: 부호 제약 없는 스칼라

등식 제약은 그룹별 희소 행렬 A_g 와 우변 b 로 저장한다 (행 하나 = 선형 범함수 하나).
off-diagonal 엔트리 계수는 canonical 엔트리 하나에 그대로 붙는다 (값은 한 번만 센다).
"""
import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import cvxpy as cp
import numpy as np
import scipy.sparse as sp
from pydantic import BaseModel, ConfigDict, Field
from tenacity import Retrying, before_sleep_log, retry_if_exception_type, stop_after_attempt

from app.config import (
    FEAS_TOL,
    SDP_FALLBACK_SOLVERS,
    SCS_MAX_ITERS,
    SDP_SOLVER,
    SOLVER_MAX_ITERS,
    SOLVER_TOL,
)
from app.core.linalg import SymMatrix, canonical_size

logger = logging.getLogger(__name__)

NONNEG = "__nonneg__"
FREE = "__free__"

VarRef = Tuple[str, int]


class SdpStatus(str, Enum):
    OPTIMAL = "Optimal"
    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    NUMERICAL_FAILURE = "NumericalFailure"


class SolverSettings(BaseModel):
    model_config = ConfigDict(frozen=True)

    solver: str = SDP_SOLVER
    fallback: Tuple[str, ...] = Field(default_factory=lambda: tuple(SDP_FALLBACK_SOLVERS))
    feas_tol: float = Field(default=FEAS_TOL, gt=0)
    solver_tol: float = Field(default=SOLVER_TOL, gt=0)
    max_iters: int = Field(default=SOLVER_MAX_ITERS, gt=0)
    scs_max_iters: int = Field(default=SCS_MAX_ITERS, gt=0)
    verbose: bool = False

    def solver_chain(self) -> List[str]:
        chain: List[str] = []
        for name in (self.solver, *self.fallback):
            if name and name.upper() not in chain:
                chain.append(name.upper())
        return chain


# ============================================================
# 희소 계수 헬퍼
# ============================================================

def _pad(c: sp.csr_matrix, k: int) -> sp.csr_matrix:
    """열 개수를 k 로 늘린다 (새 변수는 계수 0)"""
    if c.shape[1] == k:
        return c
    if c.shape[1] > k:
        raise ValueError("계수 행렬을 줄일 수는 없습니다.")
    return sp.csr_matrix((c.data, c.indices, c.indptr), shape=(c.shape[0], k))


def _scatter(c: sp.csr_matrix, targets: np.ndarray, total: int) -> sp.csr_matrix:
    n = len(targets)
    S = sp.csr_matrix((np.ones(n), (np.asarray(targets), np.arange(n))), shape=(total, n))
    return (S @ c).tocsr()


def _rows(c: sp.csr_matrix, rows: np.ndarray) -> sp.csr_matrix:
    return c[np.asarray(rows, dtype=int)].tocsr()


class LinearMatrix:
    """
    변수에 대해 affine 인 p x q 행렬식.

    coeffs[g] 는 (p*q, |g|) 희소 행렬이고, 행 인덱스는 row-major 엔트리 i*q + j.
    numpy 상수 행렬과의 @, +, - 만 지원한다 (변수끼리의 곱은 없음).
    """

    __array_ufunc__ = None
    __slots__ = ("shape", "coeffs", "const")

    def __init__(
        self,
        shape: Tuple[int, int],
        coeffs: Optional[Mapping[str, sp.spmatrix]] = None,
        const: Optional[np.ndarray] = None,
    ):
        p, q = int(shape[0]), int(shape[1])
        self.shape = (p, q)
        self.coeffs: Dict[str, sp.csr_matrix] = {
            g: sp.csr_matrix(c) for g, c in (coeffs or {}).items()
        }
        for g, c in self.coeffs.items():
            if c.shape[0] != p * q:
                raise ValueError(f"그룹 {g} 계수 행 수 {c.shape[0]} != {p * q}")
        self.const = (
            np.zeros((p, q)) if const is None else np.asarray(const, dtype=float).reshape(p, q)
        )

    def __repr__(self) -> str:
        return f"LinearMatrix(shape={self.shape}, groups={sorted(self.coeffs)})"

    # ------------------ 생성 ------------------ #
    @classmethod
    def constant(cls, value) -> "LinearMatrix":
        arr = np.atleast_2d(np.asarray(value, dtype=float))
        return cls(arr.shape, None, arr)

    @classmethod
    def lift(cls, value, shape: Optional[Tuple[int, int]] = None) -> "LinearMatrix":
        if isinstance(value, LinearMatrix):
            return value
        arr = np.asarray(value, dtype=float)
        if arr.ndim == 0 and shape is not None:
            arr = np.full(shape, float(arr))
        return cls.constant(arr)

    @classmethod
    def block(cls, grid: Sequence[Sequence[Union["LinearMatrix", np.ndarray]]]) -> "LinearMatrix":
        pieces = [[cls.lift(x) for x in row] for row in grid]
        heights = [row[0].shape[0] for row in pieces]
        widths = [x.shape[1] for x in pieces[0]]
        P, Q = sum(heights), sum(widths)

        const = np.zeros((P, Q))
        parts: Dict[str, List[Tuple[np.ndarray, sp.csr_matrix]]] = {}
        r0 = 0
        for bi, row in enumerate(pieces):
            if len(row) != len(widths):
                raise ValueError("블록 행마다 열 블록 개수가 같아야 합니다.")
            c0 = 0
            for bj, piece in enumerate(row):
                p, q = piece.shape
                if p != heights[bi] or q != widths[bj]:
                    raise ValueError(f"블록 ({bi}, {bj}) 크기 불일치: {piece.shape}")
                const[r0:r0 + p, c0:c0 + q] = piece.const
                targets = ((r0 + np.arange(p))[:, None] * Q + (c0 + np.arange(q))[None, :]).ravel()
                for g, c in piece.coeffs.items():
                    parts.setdefault(g, []).append((targets, c))
                c0 += q
            r0 += p

        coeffs = {}
        for g, items in parts.items():
            k = max(c.shape[1] for _, c in items)
            total = sp.csr_matrix((P * Q, k))
            for targets, c in items:
                total = total + _scatter(_pad(c, k), targets, P * Q)
            coeffs[g] = total
        return cls((P, Q), coeffs, const)

    # ------------------ 산술 ------------------ #
    def _combine(self, other, sign: float) -> "LinearMatrix":
        other = self.lift(other, self.shape)
        if other.shape != self.shape:
            raise ValueError(f"shape 불일치: {self.shape} vs {other.shape}")
        coeffs: Dict[str, sp.csr_matrix] = {}
        for g in set(self.coeffs) | set(other.coeffs):
            a = self.coeffs.get(g)
            b = other.coeffs.get(g)
            if a is None:
                coeffs[g] = sign * b
            elif b is None:
                coeffs[g] = a
            else:
                k = max(a.shape[1], b.shape[1])
                coeffs[g] = _pad(a, k) + sign * _pad(b, k)
        return LinearMatrix(self.shape, coeffs, self.const + sign * other.const)

    def __add__(self, other):
        return self._combine(other, 1.0)

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __rsub__(self, other):
        return (-self)._combine(other, 1.0)

    def __neg__(self):
        return self * -1.0

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        s = float(scalar)
        return LinearMatrix(self.shape, {g: s * c for g, c in self.coeffs.items()}, s * self.const)

    __rmul__ = __mul__

    def __matmul__(self, other):
        K = np.atleast_2d(np.asarray(other, dtype=float))
        p, q = self.shape
        if K.shape[0] != q:
            raise ValueError(f"행렬곱 shape 불일치: {self.shape} @ {K.shape}")
        R = sp.kron(sp.identity(p), sp.csr_matrix(K.T), format="csr")
        return LinearMatrix(
            (p, K.shape[1]), {g: R @ c for g, c in self.coeffs.items()}, self.const @ K
        )

    def __rmatmul__(self, other):
        K = np.atleast_2d(np.asarray(other, dtype=float))
        p, q = self.shape
        if K.shape[1] != p:
            raise ValueError(f"행렬곱 shape 불일치: {K.shape} @ {self.shape}")
        L = sp.kron(sp.csr_matrix(K), sp.identity(q), format="csr")
        return LinearMatrix(
            (K.shape[0], q), {g: L @ c for g, c in self.coeffs.items()}, K @ self.const
        )

    # ------------------ 구조 연산 ------------------ #
    @property
    def T(self) -> "LinearMatrix":
        p, q = self.shape
        perm = (np.arange(p)[None, :] * q + np.arange(q)[:, None]).ravel()
        return LinearMatrix((q, p), {g: _rows(c, perm) for g, c in self.coeffs.items()}, self.const.T)

    def __getitem__(self, key) -> "LinearMatrix":
        rows, cols = key
        ri = np.atleast_1d(np.arange(self.shape[0])[rows])
        ci = np.atleast_1d(np.arange(self.shape[1])[cols])
        flat = (ri[:, None] * self.shape[1] + ci[None, :]).ravel()
        return LinearMatrix(
            (len(ri), len(ci)),
            {g: _rows(c, flat) for g, c in self.coeffs.items()},
            self.const[np.ix_(ri, ci)],
        )

    def he(self) -> "LinearMatrix":
        return self + self.T

    def trace(self) -> "LinearMatrix":
        p, q = self.shape
        if p != q:
            raise ValueError("trace 는 정방 행렬에만 정의됩니다.")
        rows = np.arange(p) * (p + 1)
        coeffs = {g: sp.csr_matrix(_rows(c, rows).sum(axis=0)) for g, c in self.coeffs.items()}
        return LinearMatrix((1, 1), coeffs, [[np.trace(self.const)]])

    def diag(self) -> "LinearMatrix":
        """대각 성분을 p x 1 열로"""
        p, q = self.shape
        if p != q:
            raise ValueError("diag 는 정방 행렬에만 정의됩니다.")
        rows = np.arange(p) * (p + 1)
        return LinearMatrix(
            (p, 1), {g: _rows(c, rows) for g, c in self.coeffs.items()}, np.diag(self.const)[:, None]
        )

    def diag_matrix(self) -> "LinearMatrix":
        """p x 1 열을 대각 행렬로"""
        p, q = self.shape
        if q != 1:
            raise ValueError("diag_matrix 는 열 벡터에만 정의됩니다.")
        targets = np.arange(p) * (p + 1)
        return LinearMatrix(
            (p, p),
            {g: _scatter(c, targets, p * p) for g, c in self.coeffs.items()},
            np.diag(self.const[:, 0]),
        )

    def times(self, K) -> "LinearMatrix":
        """1 x 1 식에 상수 행렬 K 를 곱한다 (t * I 같은 것)"""
        if self.shape != (1, 1):
            raise ValueError("times 는 1 x 1 식에만 정의됩니다.")
        K = np.atleast_2d(np.asarray(K, dtype=float))
        col = sp.csr_matrix(K.reshape(-1, 1))
        return LinearMatrix(
            K.shape,
            {g: sp.kron(col, c, format="csr") for g, c in self.coeffs.items()},
            K * self.const[0, 0],
        )

    def gather(self, index) -> "LinearMatrix":
        """열 벡터 엔트리를 정수 인덱스 행렬 모양으로 모은다"""
        if self.shape[1] != 1:
            raise ValueError("gather 는 열 벡터에만 정의됩니다.")
        idx = np.asarray(index, dtype=int)
        if idx.ndim == 1:
            idx = idx[:, None]
        return LinearMatrix(
            idx.shape,
            {g: _rows(c, idx.ravel()) for g, c in self.coeffs.items()},
            self.const[idx, 0],
        )

    def entries(self, symmetric: bool = False) -> "LinearMatrix":
        """엔트리들을 열 벡터로 (symmetric 이면 하삼각만)"""
        p, q = self.shape
        if symmetric:
            if p != q:
                raise ValueError("symmetric 엔트리는 정방 행렬에만 정의됩니다.")
            ri, ci = np.tril_indices(p)
        else:
            ri, ci = (a.ravel() for a in np.indices((p, q)))
        flat = ri * q + ci
        return LinearMatrix(
            (len(flat), 1),
            {g: _rows(c, flat) for g, c in self.coeffs.items()},
            self.const[ri, ci][:, None],
        )

    @classmethod
    def symmetric_from(cls, vec: "LinearMatrix", dim: int) -> "LinearMatrix":
        """하삼각 canonical 순서의 열 벡터로부터 대칭 행렬"""
        ri, ci = np.indices((dim, dim))
        hi, lo = np.maximum(ri, ci), np.minimum(ri, ci)
        return vec.gather(hi * (hi + 1) // 2 + lo)

    def value(self, values: Mapping[str, np.ndarray]) -> np.ndarray:
        """그룹별 canonical 값 벡터를 넣어 행렬 값을 계산"""
        out = self.const.ravel().copy()
        for g, c in self.coeffs.items():
            v = np.asarray(values[g], dtype=float)
            out += c @ v[: c.shape[1]]
        return out.reshape(self.shape)


# ============================================================
# 문제 / 해
# ============================================================

@dataclass(frozen=True)
class SdpProblem:
    psd_blocks: Tuple[Tuple[str, int], ...]
    nonneg_scalars: int
    free_scalars: int
    equality_matrices: Mapping[str, sp.csr_matrix]
    equality_rhs: np.ndarray
    objective: Mapping[str, np.ndarray]
    objective_offset: float = 0.0
    labels: Mapping[str, Tuple[str, int, int]] = field(default_factory=dict)

    def __post_init__(self):
        names = [name for name, _ in self.psd_blocks]
        if len(set(names)) != len(names):
            raise ValueError("PSD 블록 이름이 중복됩니다.")
        for name, dim in self.psd_blocks:
            if dim < 1:
                raise ValueError(f"블록 {name} 의 dim 이 1 미만입니다.")
        sizes = self.group_sizes()
        n_eq = len(self.equality_rhs)
        for g, A in self.equality_matrices.items():
            if g not in sizes:
                raise ValueError(f"선언되지 않은 변수 그룹 참조: {g}")
            if A.shape != (n_eq, sizes[g]):
                raise ValueError(f"그룹 {g} 등식 행렬 shape {A.shape} != {(n_eq, sizes[g])}")
        for g, c in self.objective.items():
            if g not in sizes or len(c) != sizes[g]:
                raise ValueError(f"목적함수가 잘못된 그룹을 참조합니다: {g}")
        for label, (g, start, stop) in self.labels.items():
            if g not in sizes or not 0 <= start <= stop <= sizes[g]:
                raise ValueError(f"라벨 {label} 범위가 잘못되었습니다.")

    def group_sizes(self) -> Dict[str, int]:
        sizes = {name: canonical_size(dim) for name, dim in self.psd_blocks}
        sizes[NONNEG] = self.nonneg_scalars
        sizes[FREE] = self.free_scalars
        return sizes

    def block_dim(self, name: str) -> int:
        return dict(self.psd_blocks)[name]

    @property
    def n_equalities(self) -> int:
        return len(self.equality_rhs)

    def is_feasibility(self) -> bool:
        return all(not np.any(c) for c in self.objective.values())

    def equalities(self) -> Iterator[Tuple[Dict[VarRef, float], float]]:
        """등식 제약을 (선형 범함수, 우변) 쌍으로 풀어서 돌려준다"""
        by_group = {g: A.tocsr() for g, A in self.equality_matrices.items()}
        for row in range(self.n_equalities):
            terms: Dict[VarRef, float] = {}
            for g, A in by_group.items():
                lo, hi = A.indptr[row], A.indptr[row + 1]
                for idx, coef in zip(A.indices[lo:hi], A.data[lo:hi]):
                    if coef != 0.0:
                        terms[(g, int(idx))] = float(coef)
            yield terms, float(self.equality_rhs[row])


@dataclass(frozen=True)
class SdpSolution:
    status: SdpStatus
    objective_value: float
    blocks: Dict[str, SymMatrix]
    nonneg: np.ndarray
    free: np.ndarray
    dual_values: np.ndarray
    labels: Mapping[str, Tuple[str, int, int]] = field(default_factory=dict)
    solver: Optional[str] = None
    solve_time: float = 0.0
    max_residual: float = float("nan")
    min_eig: float = float("nan")

    @property
    def ok(self) -> bool:
        return self.status in (SdpStatus.OPTIMAL, SdpStatus.FEASIBLE)

    def scalars(self, label: str) -> np.ndarray:
        group, start, stop = self.labels[label]
        source = self.nonneg if group == NONNEG else self.free
        return source[start:stop]

    def values(self) -> Dict[str, np.ndarray]:
        vals = {name: block.lower() for name, block in self.blocks.items()}
        vals[NONNEG] = self.nonneg
        vals[FREE] = self.free
        return vals


# ============================================================
# 빌더
# ============================================================

class ProblemBuilder:
    def __init__(self):
        self._blocks: List[Tuple[str, int]] = []
        self._counts = {NONNEG: 0, FREE: 0}
        self._labels: Dict[str, Tuple[str, int, int]] = {}
        self._eq_parts: List[Tuple[Dict[str, sp.csr_matrix], np.ndarray]] = []
        self._objective: Optional[LinearMatrix] = None

    def psd_block(self, name: str, dim: int) -> LinearMatrix:
        if name in (NONNEG, FREE) or any(name == b for b, _ in self._blocks):
            raise ValueError(f"블록 이름 중복: {name}")
        if dim < 1:
            raise ValueError("dim >= 1 이어야 합니다.")
        self._blocks.append((name, dim))
        ri, ci = np.indices((dim, dim))
        hi, lo = np.maximum(ri, ci), np.minimum(ri, ci)
        cols = (hi * (hi + 1) // 2 + lo).ravel()
        c = sp.csr_matrix(
            (np.ones(dim * dim), (np.arange(dim * dim), cols)),
            shape=(dim * dim, canonical_size(dim)),
        )
        return LinearMatrix((dim, dim), {name: c})

    def _scalars(self, group: str, k: int, label: Optional[str]) -> LinearMatrix:
        start = self._counts[group]
        self._counts[group] += k
        if label is not None:
            if label in self._labels:
                raise ValueError(f"라벨 중복: {label}")
            self._labels[label] = (group, start, start + k)
        c = sp.csr_matrix((np.ones(k), (np.arange(k), start + np.arange(k))), shape=(k, start + k))
        return LinearMatrix((k, 1), {group: c})

    def nonneg_scalars(self, k: int, label: Optional[str] = None) -> LinearMatrix:
        return self._scalars(NONNEG, k, label)

    def free_scalars(self, k: int, label: Optional[str] = None) -> LinearMatrix:
        return self._scalars(FREE, k, label)

    def constrain_equal(self, expr: LinearMatrix, rhs=0.0, symmetric: bool = False) -> None:
        col = expr.entries(symmetric)
        target = np.broadcast_to(np.asarray(rhs, dtype=float), expr.shape)
        if symmetric:
            b = target[np.tril_indices(expr.shape[0])]
        else:
            b = target.ravel()
        b = b - col.const[:, 0]

        has_terms = np.zeros(len(b), dtype=bool)
        for c in col.coeffs.values():
            has_terms |= np.asarray(abs(c).sum(axis=1)).ravel() > 0
        keep = np.flatnonzero(has_terms | (np.abs(b) > 0))
        if len(keep) == 0:
            return
        self._eq_parts.append(({g: _rows(c, keep) for g, c in col.coeffs.items()}, b[keep]))

    def constrain_psd(self, expr: LinearMatrix, name: str) -> LinearMatrix:
        """expr ⪰ 0 을 새 PSD 블록 S 와 S = expr 등식으로 표현"""
        p, q = expr.shape
        if p != q:
            raise ValueError("PSD 제약은 정방 행렬에만 걸 수 있습니다.")
        S = self.psd_block(name, p)
        self.constrain_equal(S - expr, 0.0, symmetric=True)
        return S

    def constrain_nonneg(
        self, expr: LinearMatrix, label: Optional[str] = None, symmetric: bool = False
    ) -> LinearMatrix:
        col = expr.entries(symmetric)
        s = self.nonneg_scalars(col.shape[0], label)
        self.constrain_equal(col - s)
        return s

    def minimize(self, expr: LinearMatrix) -> None:
        if expr.shape != (1, 1):
            raise ValueError("목적함수는 스칼라(1 x 1)여야 합니다.")
        self._objective = expr

    def build(self) -> SdpProblem:
        sizes = {name: canonical_size(dim) for name, dim in self._blocks}
        sizes.update(self._counts)

        rhs = np.concatenate([b for _, b in self._eq_parts]) if self._eq_parts else np.zeros(0)
        equality_matrices = {}
        for g, size in sizes.items():
            if size == 0:
                continue
            mats = []
            for part, b in self._eq_parts:
                c = part.get(g)
                mats.append(sp.csr_matrix((len(b), size)) if c is None else _pad(c, size))
            A = sp.vstack(mats, format="csr") if mats else sp.csr_matrix((0, size))
            A.eliminate_zeros()
            equality_matrices[g] = A

        objective: Dict[str, np.ndarray] = {}
        offset = 0.0
        if self._objective is not None:
            offset = float(self._objective.const[0, 0])
            for g, c in self._objective.coeffs.items():
                objective[g] = np.asarray(_pad(c, sizes[g]).todense()).ravel()

        return SdpProblem(
            psd_blocks=tuple(self._blocks),
            nonneg_scalars=self._counts[NONNEG],
            free_scalars=self._counts[FREE],
            equality_matrices=equality_matrices,
            equality_rhs=rhs,
            objective=objective,
            objective_offset=offset,
            labels=dict(self._labels),
        )


# ============================================================
# cvxpy 어댑터
# ============================================================

def _solver_options(solver: str, settings: SolverSettings) -> dict:
    if solver == "CLARABEL":
        return {
            "tol_feas": settings.solver_tol,
            "tol_gap_abs": settings.solver_tol,
            "tol_gap_rel": settings.solver_tol,
            "max_iter": settings.max_iters,
        }
    if solver == "SCS":
        eps = max(settings.solver_tol, 1e-8)
        return {"eps_abs": eps, "eps_rel": eps, "max_iters": settings.scs_max_iters}
    return {}


class _CvxModel:
    def __init__(self, problem: SdpProblem):
        self.source = problem
        self.blocks = {
            name: cp.Variable((dim, dim), symmetric=True, name=name)
            for name, dim in problem.psd_blocks
        }
        self.canon = {}
        for name, dim in problem.psd_blocks:
            ri, ci = np.tril_indices(dim)
            flat = ri + ci * dim  # column-major 위치
            sel = sp.csr_matrix(
                (np.ones(len(ri)), (np.arange(len(ri)), flat)), shape=(len(ri), dim * dim)
            )
            self.canon[name] = sel @ cp.reshape(self.blocks[name], (dim * dim,), order="F")

        self.nonneg = cp.Variable(problem.nonneg_scalars, nonneg=True) if problem.nonneg_scalars else None
        self.free = cp.Variable(problem.free_scalars) if problem.free_scalars else None
        if self.nonneg is not None:
            self.canon[NONNEG] = self.nonneg
        if self.free is not None:
            self.canon[FREE] = self.free

        constraints = [X >> 0 for X in self.blocks.values()]
        self.equality = None
        lhs_terms = [
            A @ self.canon[g] for g, A in problem.equality_matrices.items() if A.nnz and g in self.canon
        ]
        if lhs_terms:
            self.equality = sum(lhs_terms[1:], lhs_terms[0]) == problem.equality_rhs
            constraints.append(self.equality)

        obj_terms = [c @ self.canon[g] for g, c in problem.objective.items() if np.any(c)]
        if obj_terms:
            objective = cp.Minimize(sum(obj_terms[1:], obj_terms[0]) + problem.objective_offset)
        else:
            objective = cp.Minimize(0)
        self.problem = cp.Problem(objective, constraints)

    def read(self, settings: SolverSettings, solver: str, elapsed: float) -> SdpSolution:
        problem = self.source
        status = self.problem.status

        if status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
            return _empty_solution(problem, SdpStatus.INFEASIBLE, solver, elapsed, np.inf)
        if status in (cp.UNBOUNDED, cp.UNBOUNDED_INACCURATE):
            return _empty_solution(problem, SdpStatus.UNBOUNDED, solver, elapsed, -np.inf)
        if status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
            logger.warning("SDP 솔버 상태 %s (%s)", status, solver)
            return _empty_solution(problem, SdpStatus.NUMERICAL_FAILURE, solver, elapsed, np.nan)

        variables = list(self.blocks.values()) + [v for v in (self.nonneg, self.free) if v is not None]
        if any(v.value is None for v in variables):
            return _empty_solution(problem, SdpStatus.NUMERICAL_FAILURE, solver, elapsed, np.nan)

        blocks = {name: SymMatrix(X.value) for name, X in self.blocks.items()}
        nonneg = np.asarray(self.nonneg.value, dtype=float).ravel() if self.nonneg is not None else np.zeros(0)
        free = np.asarray(self.free.value, dtype=float).ravel() if self.free is not None else np.zeros(0)
        values = {name: b.lower() for name, b in blocks.items()}
        values[NONNEG] = nonneg
        values[FREE] = free

        lhs = np.zeros(problem.n_equalities)
        for g, A in problem.equality_matrices.items():
            lhs += A @ values[g]
        residual = float(np.max(np.abs(lhs - problem.equality_rhs))) if problem.n_equalities else 0.0
        min_eig = min((b.min_eig() for b in blocks.values()), default=0.0)
        if nonneg.size:
            min_eig = min(min_eig, float(nonneg.min()))
        scale = max(1.0, max((float(np.max(np.abs(v))) for v in values.values() if v.size), default=1.0))

        objective_value = problem.objective_offset + sum(
            float(c @ values[g]) for g, c in problem.objective.items()
        )
        dual = (
            np.asarray(self.equality.dual_value, dtype=float).ravel()
            if self.equality is not None and self.equality.dual_value is not None
            else np.zeros(0)
        )

        tol = settings.feas_tol * scale
        if residual > tol or min_eig < -tol:
            logger.warning(
                "SDP 해 검증 실패 (solver=%s, residual=%.2e, min_eig=%.2e, tol=%.2e)",
                solver, residual, min_eig, tol,
            )
            final = SdpStatus.NUMERICAL_FAILURE
        else:
            final = SdpStatus.FEASIBLE if problem.is_feasibility() else SdpStatus.OPTIMAL

        return SdpSolution(
            status=final,
            objective_value=float(objective_value),
            blocks=blocks,
            nonneg=nonneg,
            free=free,
            dual_values=dual,
            labels=problem.labels,
            solver=solver,
            solve_time=elapsed,
            max_residual=residual,
            min_eig=min_eig,
        )


def _empty_solution(
    problem: SdpProblem, status: SdpStatus, solver: Optional[str], elapsed: float, objective: float
) -> SdpSolution:
    return SdpSolution(
        status=status,
        objective_value=objective,
        blocks={},
        nonneg=np.zeros(0),
        free=np.zeros(0),
        dual_values=np.zeros(0),
        labels=problem.labels,
        solver=solver,
        solve_time=elapsed,
    )


def _solve_with_fallback(cvx_problem: cp.Problem, settings: SolverSettings) -> str:
    """솔버 체인을 앞에서부터 시도. SolverError 면 다음 솔버로 넘어간다."""
    chain = settings.solver_chain()
    solver = chain[0]
    for attempt in Retrying(
        retry=retry_if_exception_type(cp.error.SolverError),
        stop=stop_after_attempt(len(chain)),
        before_sleep=before_sleep_log(logger, logging.WARNING),
        reraise=True,
    ):
        with attempt:
            solver = chain[attempt.retry_state.attempt_number - 1]
            cvx_problem.solve(solver=solver, verbose=settings.verbose, **_solver_options(solver, settings))
    return solver


def solve_sdp(problem: SdpProblem, settings: Optional[SolverSettings] = None) -> SdpSolution:
    settings = settings or SolverSettings()
    model = _CvxModel(problem)
    started = time.perf_counter()
    try:
        solver = _solve_with_fallback(model.problem, settings)
    except cp.error.SolverError:
        logger.exception("SDP 솔버 체인 %s 전부 실패", settings.solver_chain())
        return _empty_solution(
            problem, SdpStatus.NUMERICAL_FAILURE, None, time.perf_counter() - started, np.nan
        )
    elapsed = time.perf_counter() - started
    solution = model.read(settings, solver, elapsed)
    logger.debug(
        "SDP solved: status=%s objective=%.6g solver=%s (%.3fs)",
        solution.status.value, solution.objective_value, solver, elapsed,
    )
    return solution
