# app/modules/oracle/schemas.py
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.config import SIGN_TOL
from app.core.types import NumericModel, Vector
from app.modules.system.schemas import RayWitness


class ActivationPattern(BaseModel):
    """w 가 0 이 아닐 수 있는 인덱스 집합 J (0-based, 오름차순)"""

    J: Tuple[int, ...] = ()

    model_config = ConfigDict(frozen=True)

    @field_validator("J")
    @classmethod
    def _canonical(cls, v: Tuple[int, ...]) -> Tuple[int, ...]:
        if any(i < 0 for i in v):
            raise ValueError("패턴 인덱스는 0 이상이어야 합니다.")
        if len(set(v)) != len(v):
            raise ValueError("패턴 인덱스가 중복되었습니다.")
        return tuple(sorted(v))

    @classmethod
    def from_mask(cls, mask) -> "ActivationPattern":
        return cls(J=tuple(int(i) for i in np.flatnonzero(mask)))

    def mask(self, m: int) -> np.ndarray:
        out = np.zeros(m, dtype=bool)
        if self.J:
            if max(self.J) >= m:
                raise ValueError(f"패턴 {self.J} 가 m={m} 범위를 벗어납니다.")
            out[list(self.J)] = True
        return out

    @property
    def sort_key(self) -> Tuple[int, Tuple[int, ...]]:
        return len(self.J), self.J


class CandidateRay(NumericModel):
    """패턴 J 의 실수 고유쌍 하나의 한 쪽 부호. ||(x, w)|| = 1"""

    model_config = ConfigDict(populate_by_name=True)

    pattern: ActivationPattern
    lambda_: float = Field(alias="lambda")
    x: Vector
    w: Vector
    sign_feasible: bool
    lambda_nonneg: bool
    mirror_feasible: bool = False

    @property
    def feasible(self) -> bool:
        return self.sign_feasible and self.lambda_nonneg

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.x, self.w])

    def to_witness(self) -> RayWitness:
        """||x|| = 1 로 다시 맞춘 witness. 작은 음수 w 와 lambda 는 0 으로 자른다"""
        s = float(np.linalg.norm(self.x))
        w = self.w / s
        w = np.where(w < 0.0, 0.0, w)
        return RayWitness(x=self.x / s, w=w, lambda_=max(self.lambda_, 0.0))

    def to_record(self) -> "RayRecord":
        return RayRecord(
            pattern=list(self.pattern.J),
            lambda_=self.lambda_,
            x=self.x.tolist(),
            w=self.w.tolist(),
            sign_feasible=self.sign_feasible,
            lambda_nonneg=self.lambda_nonneg,
            mirror_feasible=self.mirror_feasible,
        )


class PatternDiagnostics(BaseModel):
    pattern: List[int]
    real_eigenvalues: int
    complex_skipped: int
    distinct: bool           # 서로 다르고 0 이 아닌 고유값 n 개
    near_zero_first: bool    # 후보 중 첫 좌표가 거의 0 인 것이 있음
    feasible: int

    @property
    def degenerate(self) -> bool:
        return not self.distinct or self.near_zero_first


# ------------------ 리포트 ------------------ #

class RayRecord(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    pattern: List[int]
    lambda_: float = Field(alias="lambda")
    x: List[float]
    w: List[float]
    sign_feasible: bool
    lambda_nonneg: bool
    mirror_feasible: bool = False


class OracleReport(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    n: int
    m: int
    patterns_checked: int
    expected_complex_solutions: int          # 2 * n * 2^m, 진단용
    rays: List[RayRecord] = Field(default_factory=list)
    diagnostics: List[PatternDiagnostics] = Field(default_factory=list)
    lambda_min: Optional[float] = None
    witness: Optional[RayRecord] = None
    sign_tol: float = SIGN_TOL

    @property
    def has_positive_ray(self) -> bool:
        return self.lambda_min is not None and any(
            r.lambda_ > self.sign_tol for r in self.rays if r.sign_feasible and r.lambda_nonneg
        )
