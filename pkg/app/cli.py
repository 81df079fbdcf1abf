# app/cli.py
"""
배치 드라이버.

    python -m app.cli analyze fixtures/stable.json --output report.json
    python -m app.cli analyze --seed 3 --n 2 --m 3
    python -m app.cli simulate fixtures/unstable_feedthrough.json --x0 -1 -1 --t-end 40 --output traj.csv
    python -m app.cli oracle fixtures/unstable_feedthrough.json
    python -m app.cli moment fixtures/toy.json --max-order 2
    python -m app.cli generate --seed 7 --n 2 --m 3 --output random.json

종료 코드: 0 Stable, 10 Unstable, 11 NonConvergentRay, 20 Inconclusive,
          2 입력 오류, 3 솔버 실패 / 적분 발산 / 내부 모순, 4 열거 한도 초과
"""
import argparse
import logging
import sys as _sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from app import __version__
from app.config import LOG_LEVEL, MAX_ORDER, RANK_TOL, RK4_STEP, SDP_SOLVER
from app.core.errors import (
    BasisTooLarge,
    EnumerationCapExceeded,
    IntegrationOverflow,
    InternalContradiction,
    NonConvergence,
    SolverFailure,
)
from app.modules.analysis.schemas import AnalysisOptions
from app.modules.analysis.service import AnalysisService
from app.modules.oracle.service import oracle_exit_code
from app.modules.system.repository import SystemRepository
from app.modules.system.service import field_grid, random_system, simulate

logger = logging.getLogger("app.cli")

EXIT_INPUT = 2
EXIT_FAILURE = 3
EXIT_CAP = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="relu-stability", description="ReLU 피드백 시스템 안정성 분석")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=LOG_LEVEL, help="로그 레벨 (기본: RELU_LOG_LEVEL)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="primal -> hierarchy -> oracle 전체 분석")
    p.add_argument("system", nargs="?", default=None, help="시스템 JSON. 생략하면 --seed 로 랜덤 시스템을 만든다")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--max-order", type=int, default=MAX_ORDER)
    p.add_argument("--eps", type=float, default=None, help="P >= eps I 마진 (기본 1e-6 (1 + ||A||))")
    p.add_argument("--rank-tol", type=float, default=RANK_TOL)
    p.add_argument("--no-oracle", action="store_true")
    p.add_argument("--no-replay", action="store_true")
    p.add_argument("--solver", default=SDP_SOLVER)
    p.add_argument("--output", default=None)
    p.add_argument("--format", choices=["json"], default="json")

    p = sub.add_parser("simulate", help="RK4 궤적 CSV")
    p.add_argument("system")
    p.add_argument("--x0", type=float, nargs="+", action="append", required=True,
                   help="초기 상태. 여러 번 주면 시작점마다 CSV 하나 (_k 접미사)")
    p.add_argument("--t-end", type=float, default=5.0)
    p.add_argument("--h", type=float, default=RK4_STEP)
    p.add_argument("--output", required=True)
    p.add_argument("--field-grid", type=float, nargs=5, default=None,
                   metavar=("XMIN", "XMAX", "YMIN", "YMAX", "STEPS"))

    p = sub.add_parser("oracle", help="활성 패턴 전수 조사")
    p.add_argument("system")
    p.add_argument("--output", default=None)
    p.add_argument("--format", choices=["json"], default="json")

    p = sub.add_parser("moment", help="f = lambda 모멘트 완화")
    p.add_argument("system")
    p.add_argument("--max-order", type=int, default=2)
    p.add_argument("--rank-tol", type=float, default=RANK_TOL)
    p.add_argument("--output", default=None)
    p.add_argument("--format", choices=["json"], default="json")

    p = sub.add_parser("generate", help="시드 고정 랜덤 시스템 JSON")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--d-norm", type=float, default=None)
    p.add_argument("--hurwitz", action="store_true")
    p.add_argument("--output", required=True)
    return parser


# ------------------ 서브커맨드 ------------------ #

def _emit(repo: SystemRepository, report, output: Optional[str]) -> None:
    if output is None:
        print(report.model_dump_json(indent=2, by_alias=True))
    else:
        repo.write_report(output, report)


def _run_analyze(args, service: AnalysisService) -> int:
    options = AnalysisOptions(
        max_order=args.max_order,
        eps_margin=args.eps,
        rank_tol=args.rank_tol,
        run_oracle=not args.no_oracle,
        replay=not args.no_replay,
        solver=args.solver.upper(),
        seed=args.seed,
    )
    if (args.system is None) == (args.seed is None):
        raise ValueError("system 파일과 --seed 중 하나만 주어야 합니다.")
    if args.system is not None:
        report = service.analyze_file(args.system, options, args.output)
    else:
        sys = random_system(args.seed, args.n, args.m)
        report = service.analyze(sys, options, label=f"random-{args.seed}")
        if args.output is not None:
            service.repo.write_report(args.output, report)
    if args.output is None:
        print(report.model_dump_json(indent=2, by_alias=True))
    else:
        lam = "-" if report.witness is None else f"{report.witness.lambda_:.6g}"
        print(f"verdict={report.verdict.value} lambda={lam} oracle_agreement={report.oracle.agreement}")
    return report.exit_code


def _suffixed(path: Path, k: int, count: int) -> Path:
    if count == 1:
        return path
    return path.with_name(f"{path.stem}_{k}{path.suffix}")


def _run_simulate(args, repo: SystemRepository) -> int:
    sys = repo.load_system(args.system)
    out = Path(args.output)
    code = 0
    for k, x0 in enumerate(args.x0):
        target = _suffixed(out, k, len(args.x0))
        try:
            traj = simulate(sys, x0, args.t_end, args.h)
        except IntegrationOverflow as exc:
            repo.write_trajectory_csv(target, exc.trajectory)
            logger.error("%s: %s", target, exc)
            print(f"{target}: final_norm=inf diverged=True")
            code = EXIT_FAILURE
            continue
        repo.write_trajectory_csv(target, traj)
        print(f"{target}: final_norm={np.linalg.norm(traj.final_state):.17g} diverged={traj.diverged}")

    if args.field_grid is not None:
        xmin, xmax, ymin, ymax, steps = args.field_grid
        grid = field_grid(sys, xmin, xmax, ymin, ymax, int(steps))
        target = out.with_name(f"{out.stem}_field{out.suffix}")
        repo.write_field_grid_csv(target, grid)
        print(f"{target}: {grid.shape[0]} rows")
    return code


def _run_oracle(args, service: AnalysisService) -> int:
    report = service.oracle(service.repo.load_system(args.system))
    _emit(service.repo, report, args.output)
    return oracle_exit_code(report)


def _run_moment(args, service: AnalysisService) -> int:
    report = service.moment(service.repo.load_system(args.system), args.max_order, args.rank_tol)
    _emit(service.repo, report, args.output)
    return 0


def _run_generate(args, repo: SystemRepository) -> int:
    sys = random_system(args.seed, args.n, args.m, args.d_norm, args.hurwitz)
    repo.save_system(args.output, sys)
    print(f"{args.output}: n={sys.n} m={sys.m} ||D||={sys.d_norm:.6g}")
    return 0


# ------------------ main ------------------ #

def main(argv: Optional[List[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else 0

    logging.basicConfig(
        level=args.log_level.upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=_sys.stderr,
    )
    service = AnalysisService()
    try:
        if args.command == "analyze":
            return _run_analyze(args, service)
        if args.command == "simulate":
            return _run_simulate(args, service.repo)
        if args.command == "oracle":
            return _run_oracle(args, service)
        if args.command == "moment":
            return _run_moment(args, service)
        return _run_generate(args, service.repo)
    except (EnumerationCapExceeded, BasisTooLarge) as exc:
        logger.error("%s", exc)
        return EXIT_CAP
    except InternalContradiction:
        logger.exception("내부 모순으로 중단합니다.")
        return EXIT_FAILURE
    except (SolverFailure, NonConvergence, IntegrationOverflow) as exc:
        logger.error("%s", exc)
        return EXIT_FAILURE
    except ValueError as exc:
        logger.error("입력 오류: %s", exc)
        return EXIT_INPUT


if __name__ == "__main__":
    raise SystemExit(main())
