# app/modules/analysis/router.py
from contextlib import contextmanager

from fastapi import APIRouter, Depends, HTTPException, status

from app.core.errors import ReluAnalysisError, SolverFailure
from app.modules.moments.schemas import MomentReport
from app.modules.oracle.schemas import OracleReport

from .schemas import (
    AnalysisReport,
    AnalysisRequest,
    MomentRequest,
    OracleRequest,
    SimulateRequest,
    SimulationResult,
)
from .service import AnalysisService

router = APIRouter(
    prefix="/analysis",
    tags=["analysis"],
)


def get_analysis_service() -> AnalysisService:
    return AnalysisService()


@contextmanager
def _http_errors():
    # 순서 중요: 도메인 예외가 ValueError 를 같이 상속한다
    try:
        yield
    except SolverFailure as exc:
        raise HTTPException(status_code=status.HTTP_503_SERVICE_UNAVAILABLE, detail=str(exc))
    except ValueError as exc:
        raise HTTPException(status_code=status.HTTP_422_UNPROCESSABLE_ENTITY, detail=str(exc))
    except ReluAnalysisError as exc:
        raise HTTPException(status_code=status.HTTP_500_INTERNAL_SERVER_ERROR, detail=str(exc))


# POST /analysis  -> primal / hierarchy / oracle 전체 파이프라인
@router.post("", response_model=AnalysisReport, response_model_by_alias=True)
def analyze(
    req: AnalysisRequest,
    service: AnalysisService = Depends(get_analysis_service),
):
    with _http_errors():
        return service.analyze(req.system, req.options, req.label)


# POST /analysis/oracle
@router.post("/oracle", response_model=OracleReport, response_model_by_alias=True)
def oracle(
    req: OracleRequest,
    service: AnalysisService = Depends(get_analysis_service),
):
    with _http_errors():
        return service.oracle(req.system)


# POST /analysis/simulate
@router.post("/simulate", response_model=SimulationResult)
def simulate(
    req: SimulateRequest,
    service: AnalysisService = Depends(get_analysis_service),
):
    with _http_errors():
        return service.simulate(req.system, req.x0, req.t_end, req.h)


# POST /analysis/moment  -> f = lambda 모멘트 bound
@router.post("/moment", response_model=MomentReport, response_model_by_alias=True)
def moment(
    req: MomentRequest,
    service: AnalysisService = Depends(get_analysis_service),
):
    with _http_errors():
        return service.moment(req.system, req.max_order, req.rank_tol)
