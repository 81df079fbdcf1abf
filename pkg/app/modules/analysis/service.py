# app/modules/analysis/service.py
"""
분석 파이프라인: primal LMI -> (실패 시) Hankel hierarchy -> oracle 교차 검증 -> witness 재생.
CLI 와 HTTP 라우터가 같은 서비스를 쓴다.
"""
import logging
import time
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from app.config import M_CAP, SIGN_TOL, WITNESS_TOL
from app.core.errors import IntegrationOverflow, InternalContradiction
from app.modules.certificates.schemas import PrimalResult
from app.modules.certificates.service import run_primal
from app.modules.hierarchy.schemas import HierarchyOutcome
from app.modules.hierarchy.service import run_hierarchy
from app.modules.moments.schemas import MomentReport
from app.modules.moments.service import run_moment_hierarchy
from app.modules.oracle.schemas import OracleReport
from app.modules.oracle.service import build_oracle_report, enumerate_rays, feasible_rays, match_witness, min_unstable_lambda
from app.modules.system.repository import PathLike, SystemRepository
from app.modules.system.schemas import RayWitness, ReluSystem, Trajectory
from app.modules.system.service import fingerprint, ray_deviation, simulate, validate_witness

from .schemas import (
    AnalysisOptions,
    AnalysisReport,
    OracleSummary,
    OrderSummary,
    PrimalSummary,
    SimulationResult,
    Verdict,
    WitnessSummary,
)

logger = logging.getLogger(__name__)


class AnalysisService:
    def __init__(self, repo: SystemRepository | None = None):
        self.repo = repo or SystemRepository()

    # ------------------ analyze ------------------ #
    def analyze(
        self, sys: ReluSystem, options: Optional[AnalysisOptions] = None, label: Optional[str] = None
    ) -> AnalysisReport:
        options = options or AnalysisOptions()
        settings = options.solver_settings()
        timings = {}
        anomalies: List[str] = []
        if not sys.hurwitz:
            logger.warning("A 가 Hurwitz 가 아닙니다 (primal LMI 는 feasible 할 수 없음)")

        started = time.perf_counter()
        primal = run_primal(sys, options.eps_margin, settings)
        timings["primal"] = time.perf_counter() - started

        outcomes: List[HierarchyOutcome] = []
        witness: Optional[RayWitness] = None
        witness_order = 0
        if not primal.strictly_feasible:
            started = time.perf_counter()
            outcomes = run_hierarchy(sys, options.max_order, options.rank_tol, settings)
            timings["hierarchy"] = time.perf_counter() - started
            for o in outcomes:
                if o.anomaly:
                    anomalies.append(f"hierarchy order {o.order} feasible after a lower order was infeasible")
                if o.witness is not None and witness is None:
                    witness, witness_order = o.witness, o.order

        oracle = OracleSummary()
        if options.run_oracle:
            started = time.perf_counter()
            oracle = self._cross_check(sys, primal, witness, anomalies)
            timings["oracle"] = time.perf_counter() - started

        verdict = self._verdict(primal, witness)
        if verdict in (Verdict.UNSTABLE, Verdict.NON_CONVERGENT_RAY) and oracle.agreement is False:
            logger.warning("SDP witness 가 oracle ray 와 맞지 않아 Inconclusive 로 내립니다.")
            verdict = Verdict.INCONCLUSIVE

        witness_summary = None
        if witness is not None:
            started = time.perf_counter()
            witness_summary = self._witness_summary(sys, witness, witness_order, options, anomalies)
            timings["replay"] = time.perf_counter() - started

        logger.info("verdict: %s", verdict.value)
        return AnalysisReport(
            system=fingerprint(sys, label),
            verdict=verdict,
            exit_code=verdict.exit_code,
            primal=_primal_summary(primal),
            hierarchy=[_order_summary(o) for o in outcomes],
            witness=witness_summary,
            oracle=oracle,
            anomalies=anomalies,
            timings=timings,
            config=options.model_dump(),
        )

    def analyze_file(
        self, path: PathLike, options: Optional[AnalysisOptions] = None, output: Optional[PathLike] = None
    ) -> AnalysisReport:
        sys = self.repo.load_system(path)
        report = self.analyze(sys, options, label=Path(path).name)
        if output is not None:
            self.repo.write_report(output, report)
        return report

    @staticmethod
    def _verdict(primal: PrimalResult, witness: Optional[RayWitness]) -> Verdict:
        if primal.strictly_feasible and witness is not None:
            raise InternalContradiction("안정 증명서와 검증된 witness 가 동시에 나왔습니다.")
        if primal.strictly_feasible:
            return Verdict.STABLE
        if witness is None:
            return Verdict.INCONCLUSIVE
        return Verdict.UNSTABLE if witness.lambda_ > SIGN_TOL else Verdict.NON_CONVERGENT_RAY

    def _cross_check(
        self,
        sys: ReluSystem,
        primal: PrimalResult,
        witness: Optional[RayWitness],
        anomalies: List[str],
    ) -> OracleSummary:
        if sys.m > M_CAP:
            return OracleSummary(skipped_reason=f"m={sys.m} > m_cap={M_CAP}")
        rays = enumerate_rays(sys)
        feasible = feasible_rays(rays)
        lowest = min_unstable_lambda(sys, rays)
        summary = OracleSummary(
            ran=True,
            patterns_checked=2 ** sys.m,
            feasible_rays=len(feasible),
            lambda_min=None if lowest is None else lowest[0],
        )

        if primal.strictly_feasible and lowest is not None:
            ray_witness = lowest[1]
            if validate_witness(sys, ray_witness, WITNESS_TOL).passed:
                logger.error(
                    "모순: primal 증명서 (t=%.3e) 와 oracle ray (lambda=%.6g, support=%s)",
                    primal.t, ray_witness.lambda_, ray_witness.support,
                )
                raise InternalContradiction(
                    f"primal 증명서가 있는데 oracle 이 lambda={ray_witness.lambda_:.6g} ray 를 찾았습니다."
                )

        if witness is not None:
            match = match_witness(rays, witness)
            summary = summary.model_copy(update={
                "agreement": match is not None,
                "matched_pattern": None if match is None else list(match.pattern.J),
            })
            if match is None:
                anomalies.append("extracted witness does not match any oracle ray")
        elif lowest is not None and not primal.strictly_feasible:
            logger.info("oracle 만 ray 를 찾았습니다 (lambda_min=%.6g). 판정은 Inconclusive 유지", lowest[0])
        return summary

    @staticmethod
    def _witness_summary(
        sys: ReluSystem, witness: RayWitness, order: int, options: AnalysisOptions, anomalies: List[str]
    ) -> WitnessSummary:
        deviation = None
        if options.replay:
            try:
                deviation = ray_deviation(sys, witness, options.replay_t_end, options.replay_step)
            except IntegrationOverflow:
                anomalies.append("witness replay overflowed")
        return WitnessSummary(
            x=witness.x.tolist(),
            w=witness.w.tolist(),
            lambda_=witness.lambda_,
            support=witness.support,
            order=order,
            validation=validate_witness(sys, witness, WITNESS_TOL),
            ray_deviation=deviation,
        )

    # ------------------ 나머지 서브커맨드 ------------------ #
    def oracle(self, sys: ReluSystem) -> OracleReport:
        return build_oracle_report(sys)

    def simulate(self, sys: ReluSystem, x0: Sequence[float], t_end: float, h: float) -> SimulationResult:
        try:
            traj = simulate(sys, x0, t_end, h)
        except IntegrationOverflow as exc:
            traj = exc.trajectory
        return _simulation_result(traj)

    def moment(self, sys: ReluSystem, max_order: int, rank_tol: float) -> MomentReport:
        return run_moment_hierarchy(sys, max_order, rank_tol=rank_tol)


# ============================================================
# DTO 변환
# ============================================================

def _primal_summary(primal: PrimalResult) -> PrimalSummary:
    cert = primal.certificate
    return PrimalSummary(
        status=primal.status.value,
        t=primal.t,
        certified=cert is not None,
        margin=None if cert is None else cert.margin,
        margin_P=None if cert is None else cert.margin_P,
        eps_margin=None if cert is None else cert.eps_margin,
        solve_time=primal.solve_time,
    )


def _order_summary(o: HierarchyOutcome) -> OrderSummary:
    return OrderSummary(
        order=o.order,
        status=o.status.value,
        rank_estimate=o.rank_estimate,
        eigen_profile=list(o.eigen_profile),
        objective=o.objective,
        witness_found=o.witness is not None,
        anomaly=o.anomaly,
        solve_time=o.solve_time,
    )


def _simulation_result(traj: Trajectory) -> SimulationResult:
    return SimulationResult(
        times=traj.times.tolist(),
        states=traj.states.tolist(),
        diverged=traj.diverged,
        final_norm=float(np.linalg.norm(traj.final_state)),
    )
