# app/modules/hierarchy/schemas.py
from enum import Enum
from typing import List, Optional

import numpy as np
from pydantic import Field, model_validator

from app.core.types import Matrix, NumericModel
from app.modules.system.schemas import RayWitness, ReluSystem


class HankelRelaxation(NumericModel):
    """차수 N 의 블록 Hankel 변수. (i, j) 블록은 blocks[i + j]"""

    order: int = Field(ge=1)
    n: int
    m: int
    blocks: List[Matrix]

    @model_validator(mode="after")
    def _check(self) -> "HankelRelaxation":
        d = self.n + self.m
        if len(self.blocks) != 2 * self.order - 1:
            raise ValueError(f"블록 개수는 2N - 1 = {2 * self.order - 1} 이어야 합니다.")
        for H in self.blocks:
            if H.shape != (d, d):
                raise ValueError(f"블록 shape {H.shape} != {(d, d)}")
        return self

    @property
    def block_dim(self) -> int:
        return self.n + self.m

    @property
    def assembled(self) -> np.ndarray:
        N = self.order
        return np.block([[self.blocks[i + j] for j in range(N)] for i in range(N)])

    def shift_residual(self, sys: ReluSystem) -> float:
        """max_i ||[A B] H_i - I_u H_{i+1}||_max"""
        AB = np.hstack([sys.A, sys.B])
        worst = 0.0
        for i in range(len(self.blocks) - 1):
            diff = AB @ self.blocks[i] - self.blocks[i + 1][: self.n, :]
            worst = max(worst, float(np.abs(diff).max()))
        return worst


class OrderStatus(str, Enum):
    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"
    NUMERICAL_FAILURE = "NumericalFailure"


class HierarchyOutcome(NumericModel):
    order: int
    status: OrderStatus
    rank_estimate: Optional[int] = None
    eigen_profile: List[float] = Field(default_factory=list)
    objective: Optional[float] = None
    witness: Optional[RayWitness] = None
    solve_time: float = 0.0
    anomaly: bool = False
    relaxation: Optional[HankelRelaxation] = Field(default=None, exclude=True)
