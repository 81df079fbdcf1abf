# tests/conftest.py
from pathlib import Path

import numpy as np
import pytest
from hypothesis import strategies as st

from app.core.conic import SolverSettings
from app.modules.system.repository import SystemRepository
from app.modules.system.schemas import ReluSystem

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture(scope="session")
def repo() -> SystemRepository:
    return SystemRepository()


@pytest.fixture(scope="session")
def fixture_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def stable_sys(repo) -> ReluSystem:
    return repo.load_system(FIXTURES / "stable.json")


@pytest.fixture(scope="session")
def first_order_sys(repo) -> ReluSystem:
    return repo.load_system(FIXTURES / "unstable_first_order.json")


@pytest.fixture(scope="session")
def feedthrough_sys(repo) -> ReluSystem:
    return repo.load_system(FIXTURES / "unstable_feedthrough.json")


@pytest.fixture(scope="session")
def third_order_sys(repo) -> ReluSystem:
    return repo.load_system(FIXTURES / "unstable_third_order.json")


def diag_toy() -> ReluSystem:
    """A = diag(1, -1), B = C = D = 0 (m = 1): ray 는 lambda = 1, x = +-e1 하나뿐"""
    return ReluSystem(A=np.diag([1.0, -1.0]), B=np.zeros((2, 1)), C=np.zeros((1, 2)), D=np.zeros((1, 1)))


def scalar_system(a: float) -> ReluSystem:
    return ReluSystem(A=[[a]], B=[[0.0]], C=[[0.0]], D=[[0.0]])


@pytest.fixture
def toy_sys() -> ReluSystem:
    return diag_toy()


@pytest.fixture(scope="session")
def solver_settings() -> SolverSettings:
    return SolverSettings()


def write_system(path: Path, sys: ReluSystem) -> Path:
    SystemRepository().save_system(path, sys)
    return path


# ------------------ hypothesis ------------------ #

finite = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False, allow_infinity=False)


@st.composite
def contractive_systems(draw, max_n: int = 3, max_m: int = 4):
    n = draw(st.integers(1, max_n))
    m = draw(st.integers(1, max_m))
    seed = draw(st.integers(0, 2 ** 31 - 1))
    rng = np.random.default_rng(seed)
    D = rng.uniform(-1.0, 1.0, (m, m))
    D *= draw(st.floats(0.0, 0.9)) / max(np.linalg.norm(D, 2), 1e-12)
    return ReluSystem(
        A=rng.uniform(-1.0, 1.0, (n, n)),
        B=rng.uniform(-1.0, 1.0, (n, m)),
        C=rng.uniform(-1.0, 1.0, (m, n)),
        D=D,
    )
