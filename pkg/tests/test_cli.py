import json
import math
import os

import pytest

from diracdecay.cli import ExperimentConfig, main
from diracdecay.errors import ConfigError
from diracdecay.lyapunov import critical_energies, lambda_critical

TINY = {
    "model": {"m": 0.0, "lambda": 0.3, "alpha": 0.5},
    "energies": {"start": 0.6, "stop": 1.4, "count": 4},
    "sizes": {"N": 2000, "L": 60, "M": 8},
    "seeds": {"base": 1, "replicas": 3},
    "probes": {"n_grid": [10, 20, 30, 40], "window": [0.7, 1.3], "horizon": 30.0},
    "output": {"format": "both"},
}


def write_config(tmp_path, data, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


def read_all(out_dir):
    out = {}
    for name in sorted(os.listdir(out_dir)):
        with open(os.path.join(out_dir, name), "rb") as fh:
            out[name] = fh.read()
    return out


def test_config_round_trip(tmp_path):
    cfg = ExperimentConfig(TINY)
    p = tmp_path / "canon.json"
    p.write_text(cfg.canonical())
    cfg2 = ExperimentConfig.from_file(str(p))
    assert cfg2.canonical() == cfg.canonical()
    assert cfg2.hash() == cfg.hash()


def test_config_validation_errors(tmp_path):
    bad = dict(TINY)
    bad["energies"] = {"values": []}
    with pytest.raises(ConfigError):
        ExperimentConfig(bad)
    with pytest.raises(ConfigError):
        ExperimentConfig({"sizes": {"N": 0}})
    with pytest.raises(ConfigError):
        ExperimentConfig({"distribution": {"family": "cauchy"}})
    p = tmp_path / "broken.json"
    p.write_text("{ not json")
    with pytest.raises(ConfigError) as err:
        ExperimentConfig.from_file(str(p))
    assert "line" in str(err.value)


def test_cli_exit_codes(tmp_path):
    bad = write_config(tmp_path, {"energies": {"values": []}})
    assert main(["lyapunov", "--config", bad, "--out", str(tmp_path / "o")]) == 2
    # diagnostics at the excluded k records the refusal but still succeeds
    cfg = dict(TINY)
    cfg["probes"] = dict(TINY["probes"], E=math.sqrt(2.0))
    code = main(
        [
            "diagnostics",
            "--config",
            write_config(tmp_path, cfg),
            "--out",
            str(tmp_path / "d"),
        ]
    )
    assert code == 0
    with open(tmp_path / "d" / "diagnostics.json") as fh:
        rep = json.load(fh)
    assert rep["refusals"]


def test_lyapunov_rerun_byte_identical(tmp_path):
    cfg = write_config(tmp_path, TINY)
    for out in ("a", "b"):
        assert main(["lyapunov", "--config", cfg, "--out", str(tmp_path / out)]) == 0
    a = read_all(tmp_path / "a")
    b = read_all(tmp_path / "b")
    assert a == b
    assert "lyapunov.csv" in a and "lyapunov.svg" in a
    header = a["lyapunov.csv"].decode().splitlines()[0]
    assert header.startswith("# config=") and "seed=1" in header


def test_lyapunov_csv_content(tmp_path):
    cfg = dict(TINY)
    cfg["energies"] = {"values": [1.0]}
    code = main(
        ["lyapunov", "--config", write_config(tmp_path, cfg), "--out", str(tmp_path / "o")]
    )
    assert code == 0
    lines = (tmp_path / "o" / "lyapunov.csv").read_text().splitlines()
    assert lines[1] == "E,lambda,beta_closed,beta_hat,stderr,N,M"
    row = lines[2].split(",")
    assert float(row[2]) == pytest.approx(0.03, abs=1e-12)  # lambda^2 / 3
    assert abs(float(row[3]) - 0.03) < 0.02


def test_phase_diagram_boundaries(tmp_path):
    cfg = {
        "model": {"m": 1.0, "lambda": 0.5, "alpha": 0.5},
        "energies": {"start": 1.05, "stop": 2.2, "count": 24},
        "sizes": {"N": 100, "L": 10, "M": 2},
        "probes": {"lambda_grid": {"values": [0.5, 1.0]}},
        "output": {"format": "csv"},
    }
    assert main(
        ["phase-diagram", "--config", write_config(tmp_path, cfg), "--out", str(tmp_path / "o")]
    ) == 0
    rows = (tmp_path / "o" / "phase_diagram.csv").read_text().splitlines()[2:]
    lo, hi = critical_energies(0.5, 1.0)
    lam_star, _ = lambda_critical(1.0)
    for row in rows:
        m, lam, E, alpha_class, stype = row.split(",")
        lam, E = float(lam), float(E)
        assert alpha_class == "critical"
        if not 1.0 < abs(E) < math.sqrt(5.0):
            assert stype == "outside_band"
        elif lam >= lam_star:
            assert stype == "pp"
        elif lo < E < hi:
            assert stype == "sc"
        else:
            assert stype == "pp"


def test_green_decay_subcommand(tmp_path):
    cfg = {
        "model": {"m": 0.0, "lambda": 1.0, "alpha": 0.3},
        "energies": {"values": [1.0]},
        "sizes": {"N": 100, "L": 80, "M": 120},
        "probes": {"n_grid": [10, 25, 40, 55, 70], "s": 0.1, "u": 1},
        "output": {"format": "csv"},
    }
    assert main(
        ["green-decay", "--config", write_config(tmp_path, cfg), "--out", str(tmp_path / "o"),
         "--threads", "2"]
    ) == 0
    with open(tmp_path / "o" / "green_decay_fit.json") as fh:
        rep = json.load(fh)
    assert rep["fractional_moments"]["slope"] < 0
    assert rep["negative_moments"]["slope"] < 0
    lines = (tmp_path / "o" / "green_decay.csv").read_text().splitlines()
    assert lines[1].startswith("n,mean_abs_G_pow_s,stderr,s,alpha,lambda,E,L,M")
    assert len(lines) == 2 + 5


def test_dynamics_and_eigen_and_validate(tmp_path):
    cfg = {
        "model": {"m": 0.0, "lambda": 1.0, "alpha": 0.3},
        "energies": {"values": [1.0]},
        "sizes": {"N": 500, "L": 120, "M": 4},
        "seeds": {"base": 1, "replicas": 2},
        "probes": {"window": [0.8, 1.2], "horizon": 40.0, "p": 2, "kappas": [0.2]},
        "output": {"format": "both"},
    }
    path = write_config(tmp_path, cfg)
    assert main(["dynamics", "--config", path, "--out", str(tmp_path / "dyn")]) == 0
    assert (tmp_path / "dyn" / "dynamics_trace.csv").exists()
    assert main(["eigen", "--config", path, "--out", str(tmp_path / "eig")]) == 0
    with open(tmp_path / "eig" / "eigen_fit.json") as fh:
        rep = json.load(fh)
    assert rep["pairs"] > 0
    assert main(["validate-disorder", "--config", path, "--out", str(tmp_path / "v")]) == 0
    with open(tmp_path / "v" / "disorder_validation.json") as fh:
        val = json.load(fh)
    assert val["passes"]["A3a_sd_matches_envelope"]


def test_diagnostics_subcommand(tmp_path):
    cfg = dict(TINY)
    cfg["sizes"] = {"N": 5000, "L": 10, "M": 2}
    cfg["seeds"] = {"base": 3, "replicas": 5}
    cfg["probes"] = {"E": 1.0}
    path = write_config(tmp_path, cfg)
    assert main(["diagnostics", "--config", path, "--out", str(tmp_path / "o")]) == 0
    with open(tmp_path / "o" / "diagnostics.json") as fh:
        rep = json.load(fh)
    assert rep["replicas"] == 5
    lines = (tmp_path / "o" / "diagnostics.csv").read_text().splitlines()
    assert len(lines) == 2 + 5
