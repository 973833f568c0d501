import json
import subprocess
import sys

import pytest

from linespec2d import sdp
from linespec2d.cli import main
from linespec2d.signal_model import SpectralSignal


def test_generate_prints_signal(capsys):
    assert main(["generate", "--seed", "4", "--trial", "2"]) == 0
    s = SpectralSignal.from_json(json.loads(capsys.readouterr().out))
    assert s.n == 7 and s.r == 4


def test_generate_fig3_and_overrides(capsys):
    assert main(["generate", "--fig3", "--n", "5", "--s", "2"]) == 0
    s = SpectralSignal.from_json(json.loads(capsys.readouterr().out))
    assert s.n == 5 and s.r == 2
    assert all(0.1 <= f.f1 <= 0.4 and 0.1 <= f.f2 <= 0.4 for f in s.frequencies)


def test_solve_roundtrip(tmp_path, capsys):
    sig = tmp_path / "sig.json"
    sig.write_text(json.dumps({"n": 5, "components": [{"f1": 0.2, "f2": 0.6, "re": 1.0, "im": 0.5}]}))
    assert main(["solve", str(sig), "--m", "20", "--resolution", "64"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["status"] == "optimal" and out["success"] is True
    assert len(out["components"]) == 1
    assert out["components"][0]["f1"] == pytest.approx(0.2, abs=1e-2)


def test_solve_weighted(tmp_path, capsys):
    sig = tmp_path / "sig.json"
    sig.write_text(json.dumps({"n": 4, "components": [{"f1": 0.25, "f2": 0.3, "re": 2.0, "im": 0.0}]}))
    pri = tmp_path / "pri.json"
    pri.write_text(json.dumps([{"f1": [0.1, 0.4], "f2": [0.1, 0.4], "prob": 2.0},
                               {"complement": True, "prob": 0.5}]))
    assert main(["solve", str(sig), "--prior-file", str(pri), "--resolution", "64"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["method"] == "weighted" and out["success"] is True


def test_config_errors_exit_2(tmp_path, capsys):
    assert main(["sweep", "--m-list", "0", "--out", str(tmp_path)]) == 2
    assert main(["sweep", "--trials", "0", "--out", str(tmp_path)]) == 2
    assert main(["dualpoly", "--prior-file", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 2
    assert main(["solve", str(tmp_path / "nope.json")]) == 2
    assert "configuration error" in capsys.readouterr().err
    with pytest.raises(SystemExit) as info:
        main(["sweep", "--m-list", "a,b"])
    assert info.value.code == 2


def test_sweep_writes_outputs(tmp_path, capsys):
    code = main(["sweep", "--n", "3", "--s", "1", "--trials", "2", "--m-list", "5,9",
                 "--prior-file", "none", "--resolution", "16", "--out", str(tmp_path)])
    assert code == 0
    assert {p.name for p in tmp_path.iterdir()} == {"sweep.csv", "trials.jsonl", "summary.json"}
    assert "m=  9 unweighted" in capsys.readouterr().out


def test_sweep_config_file(tmp_path):
    cfg = {"n": 3, "s": 1, "trials": 1, "m_list": [9], "priors": "none", "split": None,
           "resolution": 16}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    assert main(["sweep", "--config", str(path), "--out", str(tmp_path / "o")]) == 0
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["config"]["n"] == 3 and summary["config"]["priors"] == []


def test_systematic_failure_exit_3(tmp_path, monkeypatch):
    real = sdp.solve

    def broken(problem, tol=sdp.DEFAULT_TOL, max_iter=sdp.DEFAULT_MAX_ITER):
        sol = real(problem, tol, 1)
        return sdp.SdpSolution(sol.blocks, sol.objective, sol.residuals,
                               sdp.Status.NUMERICAL_FAILURE, sol.iterations)

    monkeypatch.setattr(sdp, "solve", broken)
    args = ["--n", "3", "--s", "1", "--resolution", "16", "--prior-file", "none"]
    assert main(["sweep", *args, "--trials", "2", "--m-list", "9", "--out", str(tmp_path)]) == 3
    assert main(["dualpoly", *args, "--out", str(tmp_path / "d")]) == 3


def test_dualpoly_small(tmp_path, capsys):
    code = main(["dualpoly", "--n", "4", "--s", "2", "--resolution", "32", "--seed", "1",
                 "--out", str(tmp_path)])
    assert code == 0
    assert (tmp_path / "surface_weighted.csv").exists()
    assert (tmp_path / "surface_unweighted.csv").exists()
    assert "weighted" in capsys.readouterr().out


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "linespec2d.cli", "--help"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "sweep" in res.stdout
