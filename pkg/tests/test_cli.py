import csv
import json

import numpy as np
import pytest

from meanfield_if.cli import EXIT_BLOWUP, EXIT_CONFIG, EXIT_OK, run
from meanfield_if.manifest import OUTPUT_ENV, sha256_file
from meanfield_if.oracles import renewal_oracle


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_bounds(tmp_path, capsys):
    assert run(["bounds", "--x0", "0.8", "--drift", "zero", "--out", str(tmp_path)]) == EXIT_OK
    rows = {r["name"]: r for r in read_csv(tmp_path / "bounds.csv")}
    assert float(rows["alpha0"]["value"]) == pytest.approx(0.0103, abs=1e-4)
    assert float(rows["alpha0_reference"]["value"]) == 0.104
    assert "0.104" in (tmp_path / "bounds.txt").read_text()
    man = json.loads((tmp_path / "manifest_bounds.json").read_text())
    assert man["outputs"]["bounds.csv"] == sha256_file(tmp_path / "bounds.csv")


def test_bounds_linear_drift_needs_seed(tmp_path):
    args = ["bounds", "--drift", "linear", "--lambda", "1", "--out", str(tmp_path)]
    assert run(args) == EXIT_CONFIG
    assert run(args + ["--c-prime", "7.7", "--alpha", "0.001", "--C-T", "5"]) == EXIT_OK


def test_solve_uncoupled_matches_renewal(tmp_path):
    assert run(["solve", "--alpha", "0", "--x0", "0.8", "--T", "1", "--dy", "0.01",
                "--out", str(tmp_path)]) == EXIT_OK
    rows = read_csv(tmp_path / "curve.csv")
    assert list(rows[0]) == ["t", "e", "eprime", "flux"]
    t = np.array([float(r["t"]) for r in rows])
    e = np.array([float(r["e"]) for r in rows])
    ref = renewal_oracle(0.8, 1.0, 1e-4)
    assert np.abs(e - ref(t)).max() < 5e-3
    dens = read_csv(tmp_path / "density.csv")
    assert list(dens[0]) == ["t", "y", "p"]


def test_solve_picard_diagnostics(tmp_path):
    assert run(["solve", "--method", "picard", "--T", "0.5", "--dy", "0.01",
                "--out", str(tmp_path), "--plot-stub"]) == EXIT_OK
    diag = read_csv(tmp_path / "diagnostics.csv")
    assert list(diag[0]) == ["iter", "delta", "factor"]
    assert (tmp_path / "plot_solve.py").exists()


def test_exit_codes(tmp_path):
    out = ["--out", str(tmp_path)]
    assert run(["solve", "--alpha", "1.5"] + out) == EXIT_CONFIG
    assert run(["nonsense"]) == EXIT_CONFIG
    assert run(["particles", "--N", "10", "--T", "0.01"] + out) == EXIT_CONFIG
    assert run(["solve", "--alpha", "0.6", "--T", "0.3", "--dy", "0.01"] + out) == EXIT_OK
    assert run(["solve", "--alpha", "0.6", "--T", "0.3", "--dy", "0.01",
                "--fail-on-blowup"] + out) == EXIT_BLOWUP
    assert (tmp_path / "manifest_solve.json").exists()


def test_config_file_and_env(tmp_path, monkeypatch):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("alpha=0.1\nx0=0.5\nT=0.2\ngrid.dy=0.02\n", encoding="utf-8")
    outdir = tmp_path / "envout"
    monkeypatch.setenv(OUTPUT_ENV, str(outdir))
    assert run(["solve", "--config", str(cfg)]) == EXIT_OK
    assert (outdir / "curve.csv").exists()
    bad = tmp_path / "bad.cfg"
    bad.write_text("what=1\n", encoding="utf-8")
    assert run(["solve", "--config", str(bad)]) == EXIT_CONFIG


def test_particles_reproducible(tmp_path):
    hashes = []
    for threads in ("1", "3"):
        d = tmp_path / threads
        assert run(["particles", "--N", "20000", "--T", "0.1", "--dt", "1e-3", "--seed", "8",
                    "--alpha", "0.3", "--threads", threads, "--hist-times", "0.05",
                    "--out", str(d)]) == EXIT_OK
        hashes.append(sha256_file(d / "particles.csv"))
        assert list(read_csv(d / "particles.csv")[0]) == ["t", "eN", "cascade_size",
                                                          "cascade_rounds"]
        assert list(read_csv(d / "histograms.csv")[0]) == ["t", "y", "density"]
    assert hashes[0] == hashes[1]


def test_validate_single_suite(tmp_path):
    assert run(["validate", "--suite", "cross", "--T", "0.5", "--dy", "0.01",
                "--out", str(tmp_path)]) == EXIT_OK
    rows = read_csv(tmp_path / "validate.csv")
    assert {r["name"] for r in rows} == {"cross-picard-direct", "cross-direct-lagged"}
    assert all(r["status"] == "pass" for r in rows)


def test_regions_and_figure1_small(tmp_path):
    assert run(["regions", "--alphas", "0.05,0.6", "--T", "0.2", "--dy", "0.01", "--N", "5000",
                "--seed", "1", "--out", str(tmp_path)]) == EXIT_OK
    rows = read_csv(tmp_path / "regions.csv")
    assert [r["classification"] for r in rows] == ["no-blow-up", "blow-up"]
    assert float(rows[1]["blowup_time"]) > 0
    assert run(["regions", "--alphas", "0.05,1.2", "--seed", "1",
                "--out", str(tmp_path)]) == EXIT_CONFIG
    assert run(["figure1", "--T", "0.05", "--dy", "0.01", "--out", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / "figure1_pde_alpha0.38.csv").exists()
    assert (tmp_path / "figure1_pde_alpha0.39.csv").exists()


def test_sigma_time_change_in_outputs(tmp_path):
    assert run(["solve", "--sigma", "2", "--T", "0.25", "--dy", "0.01",
                "--out", str(tmp_path)]) == EXIT_OK
    t = [float(r["t"]) for r in read_csv(tmp_path / "curve.csv")]
    assert t[-1] == pytest.approx(0.25)
