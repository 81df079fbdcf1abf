# app/core/linalg.py
"""
대칭 행렬 유틸리티: 스펙트럴 노름, 수치 rank, rank-one 분해.

대칭 변수의 canonical 엔트리는 하삼각 (i >= j) 이고 인덱스는 i(i+1)/2 + j 로 고정한다.
conic.py 의 선형 함수들도 이 규칙만 쓴다.
"""
from itertools import combinations
from typing import Iterable, List, Sequence, Union

import numpy as np
import scipy.linalg

from app.config import RANK_TOL
from app.core.errors import RankError


def canonical_index(i: int, j: int) -> int:
    if i < j:
        i, j = j, i
    return i * (i + 1) // 2 + j


def canonical_size(dim: int) -> int:
    return dim * (dim + 1) // 2


class SymMatrix:
    """생성 시점에 하삼각을 기준으로 대칭화되는 읽기 전용 행렬"""

    __slots__ = ("_a",)

    def __init__(self, entries: Union["SymMatrix", Sequence, np.ndarray]):
        a = np.array(entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"정방 행렬이 필요합니다 (shape={a.shape})")
        if a.shape[0] < 1:
            raise ValueError("dim >= 1 이어야 합니다.")
        a = np.tril(a) + np.tril(a, -1).T
        a.flags.writeable = False
        self._a = a

    @classmethod
    def from_lower(cls, values: Iterable[float], dim: int) -> "SymMatrix":
        vec = np.asarray(list(values), dtype=float)
        if vec.size != canonical_size(dim):
            raise ValueError(f"하삼각 엔트리 개수 불일치: {vec.size} != {canonical_size(dim)}")
        a = np.zeros((dim, dim))
        a[np.tril_indices(dim)] = vec
        return cls(a)

    @property
    def dim(self) -> int:
        return self._a.shape[0]

    @property
    def array(self) -> np.ndarray:
        return self._a

    def __array__(self, dtype=None, copy=None):
        return self._a if dtype is None else self._a.astype(dtype)

    def __repr__(self) -> str:
        return f"SymMatrix(dim={self.dim})"

    def lower(self) -> np.ndarray:
        return self._a[np.tril_indices(self.dim)].copy()

    def eigvalsh(self) -> np.ndarray:
        return np.linalg.eigvalsh(self._a)

    def min_eig(self) -> float:
        return float(self.eigvalsh()[0])

    def block(self, rows: slice, cols: slice) -> np.ndarray:
        return self._a[rows, cols]


def _as_sym(M) -> np.ndarray:
    if isinstance(M, SymMatrix):
        return M.array
    return SymMatrix(M).array


# ============================================================
# 노름 / rank
# ============================================================

def spectral_norm(M) -> float:
    a = np.atleast_2d(np.asarray(M, dtype=float))
    if a.size == 0:
        raise ValueError("빈 행렬의 노름은 정의하지 않습니다.")
    return float(scipy.linalg.svdvals(a)[0])


def numerical_rank(M, rel_tol: float = RANK_TOL) -> int:
    if not 0 < rel_tol < 1:
        raise ValueError(f"rel_tol 은 (0, 1) 구간이어야 합니다: {rel_tol}")
    vals = np.abs(np.linalg.eigvalsh(_as_sym(M)))
    top = vals.max()
    if top == 0.0:
        return 0
    return int(np.sum(vals > rel_tol * top))


def eigen_profile(M, k: int = 5) -> List[float]:
    """큰 순서대로 고유값 k 개 (리포트용)"""
    vals = np.linalg.eigvalsh(_as_sym(M))[::-1]
    return [float(v) for v in vals[:k]]


def rank_one_factor(M, rel_tol: float = RANK_TOL) -> np.ndarray:
    """
    M ~ v v^T 인 v = sqrt(lambda_1) u_1 을 돌려준다. 부호는 정하지 않는다.
    rank != 1 이거나 PSD 가 아니면 RankError.
    """
    a = _as_sym(M)
    vals, vecs = np.linalg.eigh(a)
    scale = np.abs(vals).max()
    if scale == 0.0:
        raise RankError("영행렬은 rank-one 분해할 수 없습니다.")
    rank = int(np.sum(np.abs(vals) > rel_tol * scale))
    if rank != 1:
        raise RankError(f"numerical rank = {rank} (rank one 아님)")
    if vals[-1] <= 0 or vals[0] < -rel_tol * scale:
        raise RankError("PSD 가 아닌 행렬입니다.")

    v = np.sqrt(vals[-1]) * vecs[:, -1]
    err = np.linalg.norm(a - np.outer(v, v), "fro") / np.linalg.norm(a, "fro")
    if err > 10 * rel_tol:
        raise RankError(f"rank-one 재구성 오차 {err:.3e} 가 큽니다.")
    return v


def is_p_matrix(M) -> bool:
    """모든 principal minor 가 양수인지 (2^m 개 전부 확인)"""
    a = np.asarray(M, dtype=float)
    m = a.shape[0]
    for size in range(1, m + 1):
        for idx in combinations(range(m), size):
            sub = a[np.ix_(idx, idx)]
            if np.linalg.det(sub) <= 0.0:
                return False
    return True
