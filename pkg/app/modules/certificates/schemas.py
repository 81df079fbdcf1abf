# app/modules/certificates/schemas.py
from enum import Enum
from typing import Optional

import numpy as np
from pydantic import model_validator

from app.config import SIGN_TOL
from app.core.conic import SdpStatus
from app.core.types import Matrix, NumericModel, Vector


class NNMultiplier(NumericModel):
    """Pi = E^T (Q + [[0, diag J], [diag J, 0]]) E,  Q 는 엔트리별 비음 대칭 행렬"""

    Q: Matrix
    J: Vector

    @model_validator(mode="after")
    def _check(self) -> "NNMultiplier":
        m = self.J.shape[0]
        if self.Q.shape != (2 * m, 2 * m):
            raise ValueError(f"Q 는 {2 * m} x {2 * m} 이어야 합니다 (shape={self.Q.shape})")
        if not np.allclose(self.Q, self.Q.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(self.Q).max())):
            raise ValueError("Q 가 대칭이 아닙니다.")
        if self.Q.min() < -SIGN_TOL:
            raise ValueError("Q 에 음수 엔트리가 있습니다.")
        return self

    @property
    def m(self) -> int:
        return self.J.shape[0]


class PrimalCertificate(NumericModel):
    P: Matrix
    multiplier: NNMultiplier
    margin: float
    margin_P: float
    t: float
    eps_margin: float


class PrimalResult(NumericModel):
    status: SdpStatus
    t: Optional[float] = None
    certificate: Optional[PrimalCertificate] = None
    solve_time: float = 0.0

    @property
    def strictly_feasible(self) -> bool:
        return self.certificate is not None


class DualSolutionH(NumericModel):
    H: Matrix
    n: int
    m: int
    rank_estimate: int

    @property
    def H11(self) -> np.ndarray:
        return self.H[: self.n, : self.n]

    @property
    def H12(self) -> np.ndarray:
        return self.H[: self.n, self.n:]

    @property
    def H22(self) -> np.ndarray:
        return self.H[self.n:, self.n:]


class DualResult(NumericModel):
    status: SdpStatus
    objective: Optional[float] = None
    solution: Optional[DualSolutionH] = None
    solve_time: float = 0.0

    @property
    def feasible(self) -> bool:
        return self.solution is not None


class Alternative(str, Enum):
    STABLE = "stable"
    DUAL = "dual"
    INCONCLUSIVE = "inconclusive"
