import json

import numpy as np
import pytest

from app.cli import main
from app.core.conic import SdpStatus
from app.modules.analysis import service as analysis_service
from app.modules.analysis.schemas import AnalysisOptions, AnalysisReport, Verdict
from app.modules.analysis.service import AnalysisService
from app.modules.certificates.schemas import NNMultiplier, PrimalCertificate, PrimalResult
from app.modules.oracle.service import min_unstable_lambda
from app.modules.system.schemas import ReluSystem
from app.modules.system.service import fingerprint, random_system

from .conftest import scalar_system, write_system


def _fixture(fixture_dir, name):
    return str(fixture_dir / name)


def _final_row(path):
    lines = path.read_text().splitlines()
    return np.array([float(v) for v in lines[-1].split(",")])


# ------------------ analyze ------------------ #

def test_analyze_stable_fixture(fixture_dir, capsys):
    code = main(["analyze", _fixture(fixture_dir, "stable.json")])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["verdict"] == "Stable"
    assert report["primal"]["certified"]
    assert report["witness"] is None
    assert report["hierarchy"] == []
    assert report["oracle"]["feasible_rays"] == 0


def test_analyze_first_order_fixture(fixture_dir, capsys):
    code = main(["analyze", _fixture(fixture_dir, "unstable_first_order.json")])
    assert code == 10
    report = json.loads(capsys.readouterr().out)
    assert report["verdict"] == "Unstable"
    assert report["witness"]["lambda"] == pytest.approx(0.1037, abs=1e-3)
    assert report["witness"]["order"] == 1
    assert report["witness"]["validation"]["passed"]
    assert report["oracle"]["agreement"] is True
    assert report["oracle"]["matched_pattern"] == [1]
    assert report["witness"]["ray_deviation"] <= 1e-5


def test_analyze_feedthrough_fixture(fixture_dir, tmp_path, capsys):
    out = tmp_path / "report.json"
    code = main(["analyze", _fixture(fixture_dir, "unstable_feedthrough.json"), "--output", str(out)])
    assert code == 10
    assert capsys.readouterr().out.startswith("verdict=Unstable lambda=0.08")
    report = json.loads(out.read_text())
    assert report["oracle"]["matched_pattern"] == [4]


@pytest.mark.slow
def test_analyze_third_order_fixture(fixture_dir, capsys):
    code = main(["analyze", _fixture(fixture_dir, "unstable_third_order.json"), "--max-order", "3"])
    assert code == 10
    report = json.loads(capsys.readouterr().out)
    found = [o["witness_found"] for o in report["hierarchy"]]
    assert found[-1] and not any(found[:-1])
    assert 2 <= report["witness"]["order"] <= 3
    assert report["witness"]["lambda"] == pytest.approx(0.4858, abs=1e-3)
    assert report["witness"]["ray_deviation"] <= 1e-5


def test_analyze_without_oracle_or_replay(fixture_dir, capsys):
    code = main([
        "analyze", _fixture(fixture_dir, "unstable_first_order.json"), "--no-oracle", "--no-replay",
    ])
    assert code == 10
    report = json.loads(capsys.readouterr().out)
    assert report["oracle"]["ran"] is False
    assert report["witness"]["ray_deviation"] is None
    assert report["config"]["run_oracle"] is False


def test_report_file_round_trip(fixture_dir, tmp_path):
    out = tmp_path / "report.json"
    service = AnalysisService()
    report = service.analyze_file(fixture_dir / "unstable_first_order.json", AnalysisOptions(max_order=2), out)
    assert AnalysisReport.model_validate_json(out.read_text()) == report
    assert report.system.label == "unstable_first_order.json"
    assert set(report.timings) >= {"primal", "hierarchy", "oracle", "replay"}


def test_non_hurwitz_without_witness_is_inconclusive(tmp_path, capsys):
    # 원점은 불안정하지만 고유값이 복소수라 실수 ray 가 없다
    rotation = ReluSystem(A=[[0.1, -1.0], [1.0, 0.1]], B=[[0.0], [0.0]], C=[[0.0, 0.0]], D=[[0.0]])
    path = write_system(tmp_path / "rot.json", rotation)
    code = main(["analyze", str(path), "--max-order", "2"])
    assert code == 20
    report = json.loads(capsys.readouterr().out)
    assert report["verdict"] == "Inconclusive"
    assert report["oracle"]["feasible_rays"] == 0


def test_contradiction_exits_with_failure(fixture_dir, monkeypatch):
    m = 5
    fake = PrimalResult(
        status=SdpStatus.OPTIMAL,
        t=-1.0,
        certificate=PrimalCertificate(
            P=np.eye(2),
            multiplier=NNMultiplier(Q=np.zeros((2 * m, 2 * m)), J=np.zeros(m)),
            margin=1.0,
            margin_P=1.0,
            t=-1.0,
            eps_margin=1e-6,
        ),
    )
    monkeypatch.setattr(analysis_service, "run_primal", lambda *args, **kwargs: fake)
    assert main(["analyze", _fixture(fixture_dir, "unstable_first_order.json")]) == 3


def test_verdict_exit_codes():
    assert [v.exit_code for v in Verdict] == [0, 10, 11, 20]


# ------------------ simulate ------------------ #

def test_simulate_along_ray(first_order_sys, fixture_dir, tmp_path):
    lam, wit = min_unstable_lambda(first_order_sys)
    out = tmp_path / "ray.csv"
    argv = ["simulate", _fixture(fixture_dir, "unstable_first_order.json"), "--t-end", "5", "--h", "1e-4", "--output", str(out)]
    argv += ["--x0"] + [f"{v:.17g}" for v in wit.x]
    assert main(argv) == 0
    row = _final_row(out)
    assert row[0] == pytest.approx(5.0)
    assert np.linalg.norm(row[1:]) == pytest.approx(np.exp(5.0 * lam), rel=1e-5)


def test_simulate_feedthrough_converges(fixture_dir, tmp_path, capsys):
    out = tmp_path / "traj.csv"
    code = main([
        "simulate", _fixture(fixture_dir, "unstable_feedthrough.json"),
        "--x0", "-1", "-1", "--t-end", "40", "--output", str(out),
    ])
    assert code == 0
    assert np.linalg.norm(_final_row(out)[1:]) < 1e-2
    assert "diverged=False" in capsys.readouterr().out


def test_simulate_multiple_starts_and_field(fixture_dir, tmp_path):
    out = tmp_path / "traj.csv"
    code = main([
        "simulate", _fixture(fixture_dir, "stable.json"),
        "--x0", "1", "0", "--x0", "0", "1", "--t-end", "1", "--h", "0.01",
        "--output", str(out), "--field-grid", "-1", "1", "-1", "1", "4",
    ])
    assert code == 0
    assert not out.exists()
    for k in range(2):
        lines = (tmp_path / f"traj_{k}.csv").read_text().splitlines()
        assert lines[0] == "t,x1,x2"
        assert len(lines) == 1 + 101
    field = (tmp_path / "traj_field.csv").read_text().splitlines()
    assert field[0] == "x1,x2,f1,f2"
    assert len(field) == 1 + 16


def test_simulate_overflow_writes_partial_csv(tmp_path):
    path = write_system(tmp_path / "fast.json", scalar_system(10.0))
    out = tmp_path / "fast.csv"
    assert main(["simulate", str(path), "--x0", "1", "--t-end", "5", "--output", str(out)]) == 3
    assert _final_row(out)[0] < 5.0


# ------------------ oracle / moment / generate ------------------ #

@pytest.mark.parametrize(
    "name, expected",
    [("stable.json", 0), ("unstable_first_order.json", 10), ("unstable_third_order.json", 10)],
)
def test_oracle_exit_codes(fixture_dir, name, expected, capsys):
    assert main(["oracle", _fixture(fixture_dir, name)]) == expected
    report = json.loads(capsys.readouterr().out)
    assert report["patterns_checked"] == 32


def test_oracle_cap_exceeded(tmp_path):
    wide = ReluSystem(A=[[-1.0]], B=np.zeros((1, 17)), C=np.zeros((17, 1)), D=np.zeros((17, 17)))
    path = write_system(tmp_path / "wide.json", wide)
    assert main(["oracle", str(path)]) == 4


def test_moment_command(fixture_dir, tmp_path):
    out = tmp_path / "moment.json"
    assert main(["moment", _fixture(fixture_dir, "toy.json"), "--max-order", "1", "--output", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["n"] == 2 and report["m"] == 1
    assert report["outcomes"][0]["status"] == "Optimal"
    assert report["outcomes"][0]["bound"] <= 1.0 + 1e-6


def test_generate_is_reproducible(tmp_path, repo):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["generate", "--seed", "5", "--n", "3", "--m", "2", "--output", str(a)]) == 0
    assert main(["generate", "--seed", "5", "--n", "3", "--m", "2", "--output", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    sys = repo.load_system(a)
    assert (sys.n, sys.m) == (3, 2)
    assert sys.contractive


def test_analyze_seeded_random_system(tmp_path, fixture_dir):
    out = tmp_path / "seeded.json"
    code = main(["analyze", "--seed", "7", "--n", "2", "--m", "2", "--max-order", "1", "--no-replay", "--output", str(out)])
    report = json.loads(out.read_text())
    assert code == report["exit_code"]
    assert report["config"]["seed"] == 7
    assert report["system"]["label"] == "random-7"
    assert report["system"]["sha256"] == fingerprint(random_system(7, 2, 2)).sha256

    # 파일과 시드를 같이 주거나 둘 다 빠지면 입력 오류
    assert main(["analyze", _fixture(fixture_dir, "stable.json"), "--seed", "7"]) == 2
    assert main(["analyze"]) == 2


# ------------------ 입력 오류 ------------------ #

def test_input_errors(tmp_path, fixture_dir):
    assert main(["analyze", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["oracle", str(bad)]) == 2
    ill_posed = tmp_path / "ill.json"
    ill_posed.write_text(json.dumps({"A": [[-1.0]], "B": [[1.0]], "C": [[1.0]], "D": [[2.0]]}))
    assert main(["analyze", str(ill_posed)]) == 2
    assert main(["simulate", _fixture(fixture_dir, "stable.json"), "--x0", "1", "--output", str(tmp_path / "t.csv")]) == 2
    assert main(["unknown"]) == 2
    assert main(["generate", "--seed", "1", "--d-norm", "1.5", "--output", str(tmp_path / "g.json")]) == 2
