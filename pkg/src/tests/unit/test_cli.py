import json
from pathlib import Path

import numpy as np
import pytest

from app.cli import main
from app.services import formats
from app.services.measures import empirical

COIN = "dim=1 atoms=2\n0.5 0\n0.5 1\n"


def _config(**run) -> dict:
    return {
        "family": {"kind": "iid", "mu": {"points": [[0.0], [1.0]], "weights": [0.5, 0.5]}},
        "functional": "linear:identity",
        "run": {"N": 20, "M": 100, "master_seed": 5, **run},
    }


@pytest.fixture
def config_file(tmp_path: Path) -> Path:
    path = tmp_path / "config.json"
    path.write_text(json.dumps(_config()))
    return path


def _write(tmp_path: Path, name: str, text: str) -> str:
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_wasserstein_prints_the_distance(tmp_path: Path, capsys: pytest.CaptureFixture) -> None:
    a = _write(tmp_path, "a.txt", "dim=1 atoms=1\n1 0\n")
    b = _write(tmp_path, "b.txt", "dim=1 atoms=1\n1 3.5\n")
    assert main(["wasserstein", a, b, "--ell", "2"]) == 0
    assert capsys.readouterr().out == "3.5\n"


def test_wasserstein_with_plan(tmp_path: Path, capsys: pytest.CaptureFixture) -> None:
    a = _write(tmp_path, "a.txt", "dim=1 atoms=1\n1 0\n")
    b = _write(tmp_path, "b.txt", COIN)
    assert main(["wasserstein", a, b, "--ell", "1", "--plan"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "0.5"
    assert lines[1] == "plan rows=1 cols=2 entries=2"
    assert lines[2:] == ["0 0 0.5", "0 1 0.5"]


def test_wasserstein_zero_caps_the_cost(tmp_path: Path, capsys: pytest.CaptureFixture) -> None:
    a = _write(tmp_path, "a.txt", "dim=1 atoms=1\n1 0\n")
    b = _write(tmp_path, "b.txt", "dim=1 atoms=1\n1 10\n")
    assert main(["wasserstein", a, b, "--ell", "0"]) == 0
    assert capsys.readouterr().out == "1\n"


def test_input_errors_exit_with_2(tmp_path: Path, capsys: pytest.CaptureFixture) -> None:
    a = _write(tmp_path, "a.txt", COIN)
    b = _write(tmp_path, "b.txt", "dim=2 atoms=1\n1 0 0\n")
    assert main(["wasserstein", a, b, "--ell", "1"]) == 2
    assert capsys.readouterr().err.startswith("error: dimension mismatch")

    broken = _write(tmp_path, "broken.txt", "dim=1 atoms=2\n0.5 0\n0.5 x\n")
    assert main(["wasserstein", a, broken, "--ell", "1"]) == 2
    assert "line 3" in capsys.readouterr().err


def test_solver_limit_exits_with_3(tmp_path: Path, capsys: pytest.CaptureFixture) -> None:
    big = _write(tmp_path, "big.txt", formats.dumps_measure(empirical(np.arange(2048, dtype=float))))
    a = _write(tmp_path, "a.txt", COIN)
    assert main(["wasserstein", big, a, "--ell", "1"]) == 3
    assert "exact solver bound" in capsys.readouterr().err


def test_periodic_model_exits_with_4(tmp_path: Path, capsys: pytest.CaptureFixture) -> None:
    model = _write(tmp_path, "flip.txt", "states=2 dim=1\n0\n1\n0 1\n1 0\n")
    assert main(["poisson", model, "linear:identity"]) == 4
    assert "periodic" in capsys.readouterr().err


def test_poisson_prints_the_solution(tmp_path: Path, capsys: pytest.CaptureFixture) -> None:
    model = _write(tmp_path, "two.txt", "states=2 dim=1\n0\n1\n0.7 0.3\n0.2 0.8\n")
    assert main(["poisson", model, "linear:identity"]) == 0
    lines = capsys.readouterr().out.splitlines()
    state0, state1 = (line.split() for line in lines[:2])
    assert float(state0[1]) == pytest.approx(-1.2)
    assert float(state1[1]) == pytest.approx(0.8)
    assert float(lines[3].split()[1]) == pytest.approx(0.72)


def test_poisson_of_constant_observable(tmp_path: Path, capsys: pytest.CaptureFixture) -> None:
    model = _write(tmp_path, "two.txt", "states=2 dim=1\n0\n1\n0.7 0.3\n0.2 0.8\n")
    assert main(["poisson", model, "linear:constant"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert all(abs(float(line.split()[1])) <= 1e-14 for line in lines[:2])


def test_unknown_functional_is_echoed(tmp_path: Path, capsys: pytest.CaptureFixture) -> None:
    config = tmp_path / "config.json"
    config.write_text(json.dumps({**_config(), "functional": "ustat7:nothing"}))
    assert main(["clt-run", "--config", str(config), "--out", str(tmp_path / "out")]) == 2
    assert "ustat7:nothing" in capsys.readouterr().err


def test_clt_run_is_byte_reproducible(config_file: Path, tmp_path: Path) -> None:
    first, second = tmp_path / "first", tmp_path / "second"
    assert main(["clt-run", "--config", str(config_file), "--out", str(first), "--threads", "1"]) == 0
    assert main(["clt-run", "--config", str(config_file), "--out", str(second), "--threads", "3"]) == 0
    for name in ("samples.csv", "report.json"):
        assert (first / name).read_bytes() == (second / name).read_bytes()
    manifest_a = json.loads((first / "manifest.json").read_text())
    manifest_b = json.loads((second / "manifest.json").read_text())
    assert manifest_a["config_digest"] == manifest_b["config_digest"]
    assert manifest_a["master_seed"] == "5"
    assert len((first / "samples.csv").read_text().splitlines()) == 100


def test_seed_override_changes_the_digest(config_file: Path, tmp_path: Path) -> None:
    main(["clt-run", "--config", str(config_file), "--out", str(tmp_path / "a")])
    main(["clt-run", "--config", str(config_file), "--out", str(tmp_path / "b"), "--seed", "6"])
    a = json.loads((tmp_path / "a" / "manifest.json").read_text())
    b = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert a["config_digest"] != b["config_digest"]
    assert b["master_seed"] == "6"
    samples_a = formats.loads_samples((tmp_path / "a" / "samples.csv").read_text())
    samples_b = formats.loads_samples((tmp_path / "b" / "samples.csv").read_text())
    assert not np.array_equal(samples_a, samples_b)


def test_ell_override_must_match_the_certificate(
    config_file: Path, tmp_path: Path, capsys: pytest.CaptureFixture
) -> None:
    assert main(["clt-run", "--config", str(config_file), "--out", str(tmp_path / "o"), "--ell", "3"]) == 2
    assert "certified for ell=2" in capsys.readouterr().err


def test_measure_files_resolve_next_to_the_config(tmp_path: Path, capsys: pytest.CaptureFixture) -> None:
    (tmp_path / "coin.txt").write_text(COIN)
    config = tmp_path / "config.json"
    config.write_text(json.dumps({**_config(), "family": {"kind": "iid", "mu": "coin.txt"}}))
    assert main(["clt-run", "--config", str(config), "--out", str(tmp_path / "out")]) == 0
    assert "predicted  mean=0 variance=0.25" in capsys.readouterr().out


def test_bad_config_documents(tmp_path: Path, capsys: pytest.CaptureFixture) -> None:
    config = tmp_path / "config.json"
    config.write_text('{\n  "family": \n}')
    assert main(["clt-run", "--config", str(config), "--out", str(tmp_path / "out")]) == 2
    assert "line 3" in capsys.readouterr().err

    config.write_text(json.dumps(_config(N=5)))
    assert main(["clt-run", "--config", str(config), "--out", str(tmp_path / "out")]) == 2
    assert "run.N" in capsys.readouterr().err

    assert main(["clt-run", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 2


def test_clt_run_prints_the_drift_corrected_ks(tmp_path: Path, capsys: pytest.CaptureFixture) -> None:
    config = tmp_path / "config.json"
    family = {"kind": "iid", "mu": {"points": [[0.0], [1.0], [3.0]], "weights": [0.3, 0.4, 0.3]}}
    config.write_text(json.dumps({**_config(), "family": family, "functional": "ustat2:variance"}))
    assert main(["clt-run", "--config", str(config), "--out", str(tmp_path / "out")]) == 0
    out = capsys.readouterr().out
    assert "ks+drift" in out
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["drift"] < 0
    assert report["ks_drift_corrected"]["statistic"] > 0
