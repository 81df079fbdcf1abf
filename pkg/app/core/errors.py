# app/core/errors.py
"""
분석 파이프라인 공통 예외.

서비스 코드가 원래 던지던 builtin(ValueError / RuntimeError)을 같이 상속해서
`except ValueError` 같은 기존 처리도 그대로 걸리게 한다.
"""
from typing import Any, Optional


class ReluAnalysisError(Exception):
    """모든 도메인 예외의 루트"""


class RankError(ReluAnalysisError, ValueError):
    """rank-one 분해 전제(rank == 1, PSD) 불만족"""


class EnumerationCapExceeded(ReluAnalysisError, ValueError):
    def __init__(self, m: int, m_cap: int):
        super().__init__(f"활성 패턴 열거 한도 초과: m={m} > m_cap={m_cap}")
        self.m = m
        self.m_cap = m_cap


class BasisTooLarge(ReluAnalysisError, ValueError):
    def __init__(self, entries: int, limit: int):
        super().__init__(f"모멘트 변수 개수 {entries} 가 한도 {limit} 를 넘습니다.")
        self.entries = entries
        self.limit = limit


class NonConvergence(ReluAnalysisError, RuntimeError):
    def __init__(self, message: str, residual: Optional[float] = None):
        super().__init__(message)
        self.residual = residual


class IntegrationOverflow(ReluAnalysisError, RuntimeError):
    """상태 노름이 발산 한계를 넘음. trajectory 에 잘린 궤적이 들어 있다."""

    def __init__(self, message: str, trajectory: Any = None):
        super().__init__(message)
        self.trajectory = trajectory


class SolverFailure(ReluAnalysisError, RuntimeError):
    def __init__(self, message: str, status: Optional[str] = None):
        super().__init__(message)
        self.status = status


class InternalContradiction(ReluAnalysisError, RuntimeError):
    """안정 증명서와 검증된 witness 가 동시에 나온 경우"""
