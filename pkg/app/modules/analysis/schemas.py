# app/modules/analysis/schemas.py
from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field

from app import __version__
from app.config import FEAS_TOL, MAX_ORDER, RANK_TOL, RK4_STEP, SDP_FALLBACK_SOLVERS, SDP_SOLVER, SOLVER_TOL
from app.core.conic import SolverSettings
from app.modules.system.schemas import ReluSystem, SystemFingerprint, ValidationReport


class Verdict(str, Enum):
    STABLE = "Stable"
    UNSTABLE = "Unstable"
    NON_CONVERGENT_RAY = "NonConvergentRay"
    INCONCLUSIVE = "Inconclusive"

    @property
    def exit_code(self) -> int:
        return {
            Verdict.STABLE: 0,
            Verdict.UNSTABLE: 10,
            Verdict.NON_CONVERGENT_RAY: 11,
            Verdict.INCONCLUSIVE: 20,
        }[self]


class AnalysisOptions(BaseModel):
    max_order: int = Field(default=MAX_ORDER, ge=1)
    eps_margin: Optional[float] = Field(default=None, gt=0.0)
    rank_tol: float = Field(default=RANK_TOL, gt=0.0, lt=1.0)
    run_oracle: bool = True
    replay: bool = True
    replay_t_end: float = Field(default=5.0, gt=0.0)
    replay_step: float = Field(default=1e-4, gt=0.0)
    solver: str = SDP_SOLVER
    fallback_solvers: List[str] = Field(default_factory=lambda: list(SDP_FALLBACK_SOLVERS))
    feas_tol: float = Field(default=FEAS_TOL, gt=0.0)
    solver_tol: float = Field(default=SOLVER_TOL, gt=0.0)
    seed: Optional[int] = None

    def solver_settings(self) -> SolverSettings:
        return SolverSettings(
            solver=self.solver,
            fallback=tuple(s for s in self.fallback_solvers if s != self.solver),
            feas_tol=self.feas_tol,
            solver_tol=self.solver_tol,
        )


# ------------------ 리포트 조각 ------------------ #

class PrimalSummary(BaseModel):
    status: str
    t: Optional[float] = None
    certified: bool = False
    margin: Optional[float] = None
    margin_P: Optional[float] = None
    eps_margin: Optional[float] = None
    solve_time: float = 0.0


class OrderSummary(BaseModel):
    """order 1 은 dual LMI 와 같은 문제"""

    order: int
    status: str
    rank_estimate: Optional[int] = None
    eigen_profile: List[float] = Field(default_factory=list)
    objective: Optional[float] = None
    witness_found: bool = False
    anomaly: bool = False
    solve_time: float = 0.0


class WitnessSummary(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    x: List[float]
    w: List[float]
    lambda_: float = Field(alias="lambda")
    support: List[int]
    order: int
    validation: ValidationReport
    ray_deviation: Optional[float] = None


class OracleSummary(BaseModel):
    ran: bool = False
    skipped_reason: Optional[str] = None
    patterns_checked: int = 0
    feasible_rays: int = 0
    lambda_min: Optional[float] = None
    agreement: Optional[bool] = None
    matched_pattern: Optional[List[int]] = None


class AnalysisReport(BaseModel):
    tool_version: str = __version__
    system: SystemFingerprint
    verdict: Verdict
    exit_code: int
    primal: PrimalSummary
    hierarchy: List[OrderSummary] = Field(default_factory=list)
    witness: Optional[WitnessSummary] = None
    oracle: OracleSummary = Field(default_factory=OracleSummary)
    anomalies: List[str] = Field(default_factory=list)
    timings: Dict[str, float] = Field(default_factory=dict)
    config: Dict[str, Any] = Field(default_factory=dict)


# ------------------ HTTP 요청 / 응답 ------------------ #

class AnalysisRequest(BaseModel):
    system: ReluSystem
    options: AnalysisOptions = Field(default_factory=AnalysisOptions)
    label: Optional[str] = None


class OracleRequest(BaseModel):
    system: ReluSystem


class SimulateRequest(BaseModel):
    system: ReluSystem
    x0: List[float]
    t_end: float = Field(default=5.0, gt=0.0)
    h: float = Field(default=RK4_STEP, gt=0.0)


class SimulationResult(BaseModel):
    times: List[float]
    states: List[List[float]]
    diverged: bool
    final_norm: float


class MomentRequest(BaseModel):
    system: ReluSystem
    max_order: int = Field(default=2, ge=1)
    rank_tol: float = Field(default=RANK_TOL, gt=0.0, lt=1.0)
