# app/core/types.py
"""
pydantic 모델 안에서 numpy 배열을 필드로 쓰기 위한 Annotated 타입.

JSON 으로는 row-major nested list 로 나가고, 들어올 때는 list 를 float 배열로 바꾼다.
"""
from typing import Annotated, Any, List

import numpy as np
from pydantic import BaseModel, BeforeValidator, ConfigDict, PlainSerializer, WithJsonSchema


def _as_vector(value: Any) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"1차원 벡터가 필요합니다 (shape={arr.shape})")
    if not np.all(np.isfinite(arr)):
        raise ValueError("벡터에 유한하지 않은 값이 있습니다.")
    return arr


def _as_matrix(value: Any) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"2차원 행렬이 필요합니다 (shape={arr.shape})")
    if not np.all(np.isfinite(arr)):
        raise ValueError("행렬에 유한하지 않은 값이 있습니다.")
    return arr


def _to_list(arr: np.ndarray) -> List[Any]:
    return np.asarray(arr, dtype=float).tolist()


Vector = Annotated[
    np.ndarray,
    BeforeValidator(_as_vector),
    PlainSerializer(_to_list, return_type=list),
    WithJsonSchema({"type": "array", "items": {"type": "number"}}),
]

Matrix = Annotated[
    np.ndarray,
    BeforeValidator(_as_matrix),
    PlainSerializer(_to_list, return_type=list),
    WithJsonSchema(
        {"type": "array", "items": {"type": "array", "items": {"type": "number"}}}
    ),
]


class NumericModel(BaseModel):
    """numpy 필드를 가지는 도메인 모델의 공통 베이스 (생성 후 불변)"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)
