# app/modules/system/repository.py
import logging
from pathlib import Path
from typing import Union

import numpy as np
from pydantic import BaseModel, ValidationError

from .schemas import ReluSystem, Trajectory

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


class SystemRepository:
    """시스템 JSON 읽기/쓰기와 CSV, 리포트 출력"""

    def load_system(self, path: PathLike) -> ReluSystem:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ValueError(f"시스템 파일을 읽을 수 없습니다: {path} ({exc})") from exc
        try:
            return ReluSystem.model_validate_json(text)
        except ValidationError as exc:
            logger.error("시스템 파일 검증 실패: %s", path)
            raise ValueError(f"시스템 파일 형식 오류: {path}\n{exc}") from exc

    def save_system(self, path: PathLike, sys: ReluSystem) -> None:
        Path(path).write_text(sys.model_dump_json(indent=2) + "\n", encoding="utf-8")

    def write_trajectory_csv(self, path: PathLike, traj: Trajectory) -> None:
        n = traj.states.shape[1]
        header = ",".join(["t"] + [f"x{i + 1}" for i in range(n)])
        data = np.column_stack([traj.times, traj.states])
        np.savetxt(path, data, fmt="%.17g", delimiter=",", header=header, comments="", newline="\n")

    def write_field_grid_csv(self, path: PathLike, grid: np.ndarray) -> None:
        np.savetxt(
            path, grid, fmt="%.17g", delimiter=",", header="x1,x2,f1,f2", comments="", newline="\n"
        )

    def write_report(self, path: PathLike, report: BaseModel) -> None:
        Path(path).write_text(report.model_dump_json(indent=2, by_alias=True) + "\n", encoding="utf-8")
