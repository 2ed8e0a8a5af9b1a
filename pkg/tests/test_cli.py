import json
import logging
import os
from pathlib import Path

import pytest

from fuzzygap.cli import main
from fuzzygap.config import ExperimentConfig, atomic_write, read_series, worker_cap
from fuzzygap.errors import ValidationError

SMALL = ["--L", "4", "--g", "1.2", "--n-steps", "13", "--dt-grid", "0.4,0.2", "--shots", "200"]


def test_gap_command(tmp_path, capsys):
    assert main(["gap", "--L", "4", "--g", "1.2"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert abs(doc["gap"] - 2.3368) < 5e-4
    out = tmp_path / "g.json"
    assert main(["gap", "--L", "4", "--g", "0.6", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["degeneracies"][1] == 3


def test_invalid_input_exit_code():
    assert main(["gap", "--L", "2", "--g", "1.2"]) == 1
    with pytest.raises(SystemExit) as e:
        main(["gap", "--g", "1.2"])
    assert e.value.code == 1
    with pytest.raises(SystemExit) as e:
        main(["evolve", "--mode", "bogus"])
    assert e.value.code == 1


def test_evolve_zero_steps_writes_empty_series(tmp_path):
    assert main(["evolve", "--L", "4", "--n-steps", "0", "--out", str(tmp_path)]) == 0
    (csv,) = tmp_path.glob("series_*.csv")
    assert csv.read_text() == "t,value,stderr\n"


def test_evolve_then_analyze(tmp_path):
    assert main(["evolve", *SMALL, "--mode", "sampled", "--out", str(tmp_path)]) == 0
    files = sorted(p.name for p in tmp_path.glob("series_*.csv"))
    assert files == ["series_dt0.2000_lam1.0000.csv", "series_dt0.4000_lam1.0000.csv"]
    assert main(["analyze", str(tmp_path), "--window", "0", "5.2"]) == 0
    head = (tmp_path / "table.csv").read_text().splitlines()[0]
    assert head == "L,A,A_err,gamma,gamma_err,omega,omega_err,dt,lam"
    doc = json.loads((tmp_path / "analysis.json").read_text())
    assert len(doc["fits"]) == 2 and all(f["fit"] for f in doc["fits"])


def test_reruns_are_bit_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["evolve", *SMALL, "--mode", "sampled", "--seed", "3", "--out", str(d)]) == 0
    assert len(list(a.glob("series_*"))) == 4
    for f in a.glob("series_*"):
        assert f.read_bytes() == (b / f.name).read_bytes()


def test_resume_skips_finished_points(tmp_path, caplog):
    args = ["evolve", *SMALL, "--out", str(tmp_path)]
    assert main(args) == 0
    stamp = {p.name: p.stat().st_mtime_ns for p in tmp_path.glob("series_*")}
    caplog.set_level(logging.INFO, logger="fuzzygap")
    assert main(args) == 0
    assert "up to date" in caplog.text
    assert stamp == {p.name: p.stat().st_mtime_ns for p in tmp_path.glob("series_*")}


def test_analyze_refuses_mixed_configs(tmp_path):
    assert main(["evolve", *SMALL, "--out", str(tmp_path)]) == 0
    assert main(["evolve", "--L", "4", "--g", "1.2", "--n-steps", "13", "--dt", "0.3", "--lam", "0.5",
                 "--out", str(tmp_path)]) == 0
    assert main(["analyze", str(tmp_path)]) == 1
    assert main(["analyze", str(tmp_path), "--force"]) == 0


def test_analyze_missing_input():
    assert main(["analyze", "/nonexistent/dir"]) == 1


def test_config_file_with_overrides(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"L": 4, "g": 1.2, "n_steps": 3, "lam": 0.5}))
    out = tmp_path / "o"
    assert main(["evolve", "--config", str(cfg), "--lam", "1.0", "--out", str(out)]) == 0
    saved = json.loads((out / "config.json").read_text())
    assert saved["lam"] == 1.0 and saved["n_steps"] == 3
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"L": 4, "colour": "red"}))
    assert main(["evolve", "--config", str(bad)]) == 1


def test_circuit_dump(capsys):
    assert main(["circuit-dump", "--L", "4", "--g", "1.2", "--gateset", "cnot_rotations"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["resources"]["counts"]["CNOT"] == 32
    assert main(["circuit-dump", "--L", "4", "--g", "1.2"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["resources"]["counts"] == {"HeisenbergExp": 8}


def test_noise_demo(tmp_path):
    out = tmp_path / "n.json"
    assert main(["noise-demo", "--L", "3", "--p2q", "0,0.05", "--trajectories", "40", "--out", str(out)]) == 0
    rows = json.loads(out.read_text())["results"]
    assert [r["p2q"] for r in rows] == [0.0, 0.05]


def test_config_hash_ignores_output_dir():
    a = ExperimentConfig(out_dir="x")
    b = ExperimentConfig(out_dir="y")
    assert a.hash() == b.hash()
    assert a.hash() != ExperimentConfig(seed=1).hash()


@pytest.mark.parametrize("kw", [dict(prep="weak", L=5), dict(mode="fast"), dict(n_steps=None),
                                dict(dt_grid=[0.1, 0.1]), dict(fit_window=[5, 1]), dict(p2q=2.0),
                                dict(observable_lams=[1.5])])
def test_config_validation(kw):
    with pytest.raises(ValidationError):
        ExperimentConfig(**kw).validate()


def test_steps_follow_t_max():
    cfg = ExperimentConfig(t_max=160.0, n_steps=None)
    assert cfg.steps_for(0.4) == 400 and cfg.steps_for(0.05) == 3200


def test_worker_cap(monkeypatch):
    monkeypatch.delenv("FUZZYGAP_WORKERS", raising=False)
    assert worker_cap() == 1
    monkeypatch.setenv("FUZZYGAP_WORKERS", "3")
    assert worker_cap() == 3
    monkeypatch.setenv("FUZZYGAP_WORKERS", "zero")
    with pytest.raises(ValidationError):
        worker_cap()


def test_atomic_write_leaves_no_partial_file(tmp_path, monkeypatch):
    target = tmp_path / "f.txt"
    atomic_write(target, "old")

    def boom(*a, **k):
        raise OSError("disk full")

    monkeypatch.setattr(os, "replace", boom)
    with pytest.raises(OSError):
        atomic_write(target, "new")
    assert target.read_text() == "old"
    assert [p.name for p in tmp_path.iterdir()] == ["f.txt"]


def test_read_series_malformed(tmp_path):
    p = tmp_path / "series_x.csv"
    p.write_text("t,value,stderr\n1,notanumber,\n")
    with pytest.raises(ValidationError):
        read_series(p)
    with pytest.raises(ValidationError):
        read_series(Path(tmp_path / "missing.csv"))
