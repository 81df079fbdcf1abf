# app/modules/moments/schemas.py
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.core.conic import SdpProblem
from app.core.types import NumericModel, Vector

from .polynomials import Exponent, Terms, exponent_codes, monomial_basis


class MonomialIndex(BaseModel):
    """변수 순서 (x_1..x_n, w_1..w_m, lambda) 의 지수 벡터"""

    exponents: Tuple[int, ...]

    model_config = ConfigDict(frozen=True)

    @field_validator("exponents")
    @classmethod
    def _nonneg(cls, v: Tuple[int, ...]) -> Tuple[int, ...]:
        if any(e < 0 for e in v):
            raise ValueError("지수는 0 이상이어야 합니다.")
        return v

    @property
    def degree(self) -> int:
        return sum(self.exponents)

    def __add__(self, other: "MonomialIndex") -> "MonomialIndex":
        return MonomialIndex(exponents=tuple(a + b for a, b in zip(self.exponents, other.exponents)))


class _MomentIndexing:
    """차수 <= 2N 인 y 의 위치 계산 (MomentRelaxation / MomentVector 공용). n, m, order 필드를 전제로 한다"""

    @property
    def n_vars(self) -> int:
        return self.n + self.m + 1

    def basis(self, degree: int) -> List[Exponent]:
        return monomial_basis(self.n_vars, degree)

    def positions(self) -> Dict[Exponent, int]:
        return {e: k for k, e in enumerate(self.basis(2 * self.order))}

    def _lookup(self, codes: np.ndarray) -> np.ndarray:
        full = exponent_codes(self.basis(2 * self.order), 2 * self.order + 1)
        perm = np.argsort(full)
        return perm[np.searchsorted(full[perm], codes)]

    def moment_index(self, s: int) -> np.ndarray:
        """H_s(y) 의 (beta, gamma) 엔트리가 가리키는 y 위치"""
        return self.localizing_index({(0,) * self.n_vars: 1.0}, s)[0][0]

    def localizing_index(self, terms: Terms, s: int) -> List[Tuple[np.ndarray, float]]:
        """H_s(p y) = sum_k coef_k * y[idx_k] 의 (idx_k, coef_k) 목록"""
        base = 2 * self.order + 1
        rows = exponent_codes(self.basis(s), base)
        pair = rows[:, None] + rows[None, :]
        out = []
        for alpha, coef in terms.items():
            if sum(alpha) + 2 * s > 2 * self.order:
                raise ValueError(f"차수 {sum(alpha) + 2 * s} 가 2N = {2 * self.order} 를 넘습니다.")
            code = int(exponent_codes([alpha], base)[0])
            out.append((self._lookup(pair + code), coef))
        return out


class MomentRelaxation(NumericModel, _MomentIndexing):
    """차수 N 모멘트 완화. y 는 FREE 그룹의 'y' 라벨 스칼라들"""

    order: int = Field(ge=1)
    n: int
    m: int
    objective: Dict[Exponent, float]
    equalities: List[Dict[Exponent, float]] = Field(default_factory=list)
    inequalities: List[Dict[Exponent, float]] = Field(default_factory=list)
    problem: SdpProblem = Field(exclude=True)

    @property
    def n_entries(self) -> int:
        return len(self.basis(2 * self.order))


class MomentVector(NumericModel, _MomentIndexing):
    """차수 <= 2N 인 (의사) 모멘트 값. values 는 graded-lex 순서"""

    order: int = Field(ge=1)
    n: int
    m: int
    values: Vector

    @model_validator(mode="after")
    def _check(self) -> "MomentVector":
        expected = len(self.basis(2 * self.order))
        if self.values.shape != (expected,):
            raise ValueError(f"모멘트 개수 {self.values.shape} != {expected}")
        return self

    def value(self, exponents: Sequence[int]) -> float:
        return float(self.values[self.positions()[tuple(exponents)]])

    def moment_matrix(self, s: int) -> np.ndarray:
        return self.values[self.moment_index(s)]

    def localizing_matrix(self, terms: Terms, s: int) -> np.ndarray:
        size = len(self.basis(s))
        out = np.zeros((size, size))
        for idx, coef in self.localizing_index(terms, s):
            out += coef * self.values[idx]
        return out

    @classmethod
    def from_atoms(
        cls, points: Sequence[Sequence[float]], weights: Sequence[float], n: int, m: int, order: int
    ) -> "MomentVector":
        """원자 측도 sum_k weight_k * delta(point_k) 의 모멘트"""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        wts = np.asarray(weights, dtype=float)
        if pts.shape != (len(wts), n + m + 1):
            raise ValueError("점 / 가중치 shape 가 맞지 않습니다.")
        basis = monomial_basis(n + m + 1, 2 * order)
        values = np.array([
            float(wts @ np.prod(pts ** np.asarray(e), axis=1)) for e in basis
        ])
        return cls(order=order, n=n, m=m, values=values)


# ------------------ 결과 / 리포트 ------------------ #

class MomentStatus(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    NUMERICAL_FAILURE = "NumericalFailure"


class MinimizerPoint(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    x: List[float]
    w: List[float]
    lambda_: float = Field(alias="lambda")
    max_equality_residual: Optional[float] = None
    min_inequality: Optional[float] = None


class MomentOutcome(BaseModel):
    order: int
    status: MomentStatus
    bound: Optional[float] = None
    ranks: List[int] = Field(default_factory=list)       # rank H_0 .. H_N
    flat_extension: Optional[int] = None
    minimizer: Optional[MinimizerPoint] = None
    dual_norm: Optional[float] = None
    n_moments: int = 0
    solve_time: float = 0.0


class MomentReport(BaseModel):
    n: int
    m: int
    outcomes: List[MomentOutcome] = Field(default_factory=list)

    @property
    def best_bound(self) -> Optional[float]:
        bounds = [o.bound for o in self.outcomes if o.bound is not None]
        return max(bounds) if bounds else None
