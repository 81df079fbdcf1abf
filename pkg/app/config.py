# app/config.py
import os
from dotenv import load_dotenv

load_dotenv()


def _float_env(name: str, default: float) -> float:
    raw = os.getenv(name)
    if raw is None or raw == "":
        return default
    try:
        return float(raw)
    except ValueError:
        raise RuntimeError(f"{name} 값이 실수가 아닙니다: {raw!r}")


def _int_env(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise RuntimeError(f"{name} 값이 정수가 아닙니다: {raw!r}")


# ------------------ SDP 솔버 ------------------ #
SDP_SOLVER = os.getenv("RELU_SDP_SOLVER", "CLARABEL")
SDP_FALLBACK_SOLVERS = [
    s.strip() for s in os.getenv("RELU_SDP_FALLBACK", "SCS").split(",") if s.strip()
]
FEAS_TOL = _float_env("RELU_FEAS_TOL", 1e-6)
SOLVER_TOL = _float_env("RELU_SOLVER_TOL", 1e-9)
SOLVER_MAX_ITERS = _int_env("RELU_SOLVER_MAX_ITERS", 500)
SCS_MAX_ITERS = _int_env("RELU_SCS_MAX_ITERS", 100_000)   # 1차 방법이라 반복 수가 훨씬 많다

# ------------------ 수치 판정 ------------------ #
RANK_TOL = _float_env("RELU_RANK_TOL", 1e-5)
SIGN_TOL = _float_env("RELU_SIGN_TOL", 1e-7)
ORACLE_TOL = _float_env("RELU_ORACLE_TOL", 1e-9)
HANKEL_TOL = 1e-5
WITNESS_TOL = 1e-6
SUPPORT_TOL = 1e-3   # w_i > SUPPORT_TOL * ||(x, w)|| 이면 활성으로 본다
SNAP_TOL = 1e-3      # 패턴 고유값과 SDP lambda 의 허용 차이 (상대)

# ------------------ 루프 / 시뮬레이션 ------------------ #
LOOP_TOL = 1e-12
LOOP_MAX_ITER = 10_000
RK4_STEP = 1e-3
DIVERGENCE_NORM = 1e12

# ------------------ 탐색 한도 ------------------ #
M_CAP = _int_env("RELU_M_CAP", 16)
MAX_ORDER = _int_env("RELU_MAX_ORDER", 4)
MOMENT_MAX_ENTRIES = 20_000

LOG_LEVEL = os.getenv("RELU_LOG_LEVEL", "INFO").upper()


if FEAS_TOL <= 0 or RANK_TOL <= 0 or RANK_TOL >= 1:
    raise RuntimeError("RELU_FEAS_TOL > 0, 0 < RELU_RANK_TOL < 1 을 만족해야 합니다.")
