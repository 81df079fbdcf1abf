# app/modules/system/schemas.py
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.config import M_CAP, SIGN_TOL
from app.core.linalg import is_p_matrix, spectral_norm
from app.core.types import Matrix, NumericModel, Vector


class ReluSystem(NumericModel):
    """
    dx/dt = A x + B w,  z = C x + D w,  w = relu(z)

    loop 가 well-posed 해야 한다: ||D|| < 1 (contraction) 이거나 I - D 가 P-matrix.
    A 의 Hurwitz 여부는 검사만 하고 거절하지 않는다.
    """

    A: Matrix
    B: Matrix
    C: Matrix
    D: Matrix

    @model_validator(mode="after")
    def _check_dimensions(self) -> "ReluSystem":
        n = self.A.shape[0]
        if n < 1 or self.A.shape != (n, n):
            raise ValueError(f"A 는 n x n 이어야 합니다 (shape={self.A.shape})")
        if self.B.shape[0] != n or self.B.shape[1] < 1:
            raise ValueError(f"B 는 n x m 이어야 합니다 (shape={self.B.shape})")
        m = self.B.shape[1]
        if self.C.shape != (m, n):
            raise ValueError(f"C 는 m x n = {(m, n)} 이어야 합니다 (shape={self.C.shape})")
        if self.D.shape != (m, m):
            raise ValueError(f"D 는 m x m = {(m, m)} 이어야 합니다 (shape={self.D.shape})")

        if spectral_norm(self.D) >= 1.0:
            if m > M_CAP:
                raise ValueError("||D|| >= 1 이고 m 이 커서 P-matrix 검사를 할 수 없습니다.")
            if not is_p_matrix(np.eye(m) - self.D):
                raise ValueError("loop 가 well-posed 하지 않습니다: ||D|| >= 1 이고 I - D 가 P-matrix 가 아님")
        return self

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def d_norm(self) -> float:
        return spectral_norm(self.D)

    @property
    def contractive(self) -> bool:
        return self.d_norm < 1.0

    @property
    def hurwitz(self) -> bool:
        return bool(np.max(np.linalg.eigvals(self.A).real) < 0.0)


class Trajectory(NumericModel):
    times: Vector
    states: Matrix
    diverged: bool = False

    @model_validator(mode="after")
    def _check(self) -> "Trajectory":
        if self.states.shape[0] != self.times.shape[0]:
            raise ValueError("times 와 states 길이가 다릅니다.")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times 는 strictly increasing 이어야 합니다.")
        return self

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


class RayWitness(NumericModel):
    """x(t) = exp(lambda t) x 가 closed loop 의 해가 되는 (x, w, lambda). ||x|| = 1 로 둔다."""

    model_config = ConfigDict(populate_by_name=True)

    x: Vector
    w: Vector
    lambda_: float = Field(alias="lambda", ge=0.0)

    @model_validator(mode="after")
    def _check(self) -> "RayWitness":
        if np.linalg.norm(self.x) <= 0.0:
            raise ValueError("witness 의 x 는 0 이 아니어야 합니다.")
        if self.w.size and self.w.min() < -SIGN_TOL:
            raise ValueError("witness 의 w 는 음수가 될 수 없습니다.")
        return self

    def normalized(self) -> "RayWitness":
        s = float(np.linalg.norm(self.x))
        return RayWitness(x=self.x / s, w=self.w / s, lambda_=self.lambda_)

    def stacked_unit(self) -> np.ndarray:
        """||(x, w)|| = 1 로 맞춘 (x; w)"""
        v = np.concatenate([self.x, self.w])
        return v / np.linalg.norm(v)

    @property
    def support(self) -> List[int]:
        return [int(i) for i in np.flatnonzero(self.w > SIGN_TOL)]


class ValidationReport(BaseModel):
    residual_eig: float
    min_sign_entry: float
    max_complementarity: float
    lambda_: float = Field(alias="lambda")
    tol: float
    passed: bool

    model_config = ConfigDict(populate_by_name=True)


class SystemFingerprint(BaseModel):
    n: int
    m: int
    sha256: str
    d_norm: float
    contractive: bool
    hurwitz: bool
    label: Optional[str] = None
