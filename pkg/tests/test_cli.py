import json
import math
import subprocess
import sys

import numpy as np
import pytest

from alesim import growth_engine as ge
from alesim.cli_io import main
from alesim.cli_io import config as cfgmod
from alesim.cli_io import outputs
from alesim.cli_io.commands import RunManifest
from alesim.errors import InvalidParameterError
from alesim.growth_engine import empty_state, from_history

RUN_FILES = ["angles.csv", "deviation.csv", "coeffs.csv", "boundary.svg", "manifest.json"]


def _write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


@pytest.fixture
def minimal(tmp_path):
    return _write(tmp_path, "cfg.json", {"model": {"eta": 0.0, "c": 0.01}, "run": {"T": 0.1, "seed": 4}})


def test_simulate_minimal(tmp_path, minimal):
    out = tmp_path / "r"
    assert main(["simulate", "--config", minimal, "--out", str(out)]) == 0
    for f in RUN_FILES:
        assert (out / f).exists()
    thetas, caps = outputs.read_angles(out / "angles.csv")
    assert thetas.size == 10 and np.all(caps == 0.01)
    man = RunManifest.read(out / "manifest.json")
    assert man.status == "ok" and set(man.outputs) == set(RUN_FILES) - {"manifest.json"}
    assert man.config["analysis"]["K"] == 64  # defaults are materialized
    assert man.grid_choices["M_density"] == 4096


def test_simulate_deterministic_and_seed_override(tmp_path, minimal):
    for d in ("a", "b"):
        main(["simulate", "--config", minimal, "--out", str(tmp_path / d)])
    main(["simulate", "--config", minimal, "--seed", "5", "--out", str(tmp_path / "c")])
    a, b, c = (outputs.sha256(tmp_path / d / "angles.csv") for d in "abc")
    assert a == b != c


def test_manifest_replay_is_byte_identical(tmp_path):
    cfg = _write(tmp_path, "cfg.json", {"model": {"eta": 1.0, "c": 0.02}, "run": {"T": 0.5, "seed": 9},
                                         "analysis": {"K": 16}})
    main(["simulate", "--config", cfg, "--out", str(tmp_path / "a")])
    main(["simulate", "--config", str(tmp_path / "a" / "manifest.json"), "--out", str(tmp_path / "b")])
    main(["simulate", "--config", cfg, "--angles", str(tmp_path / "a" / "angles.csv"), "--out", str(tmp_path / "c")])
    for f in ("angles.csv", "deviation.csv", "coeffs.csv"):
        ref = (tmp_path / "a" / f).read_bytes()
        assert (tmp_path / "b" / f).read_bytes() == ref
        assert (tmp_path / "c" / f).read_bytes() == ref


def test_exit_codes(tmp_path, monkeypatch):
    bad_gamma = _write(tmp_path, "g.json", {"model": {"c": 0.02, "particle": {"type": "spreadout", "gamma": 1.0}}})
    assert main(["simulate", "--config", bad_gamma, "--out", str(tmp_path / "x")]) == 2
    unknown = _write(tmp_path, "u.json", {"model": {"c": 0.02, "colour": 1}})
    assert main(["simulate", "--config", unknown, "--out", str(tmp_path / "x")]) == 2
    assert main(["simulate", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path / "x")]) == 2
    assert main(["render", str(tmp_path)]) == 2
    # a health window that any cluster violates: the run aborts after its first particle
    monkeypatch.setattr(ge, "HEALTH_MAX", 1.0 + 1e-9)
    monkeypatch.setattr(ge, "HEALTH_MIN", 1.0 - 1e-9)
    abort = _write(tmp_path, "a.json", {"model": {"c": 0.05, "eta": 1.0}, "run": {"T": 1.0}})
    code = main(["simulate", "--config", abort, "--out", str(tmp_path / "ab")])
    man = RunManifest.read(tmp_path / "ab" / "manifest.json")
    assert code == 1 and man.status == "aborted" and man.abort["step"] == 2
    assert outputs.read_angles(tmp_path / "ab" / "angles.csv")[0].size == 1


def test_config_validation():
    with pytest.raises(InvalidParameterError):
        cfgmod.resolve({"model": {"c": 0.0}})
    with pytest.raises(InvalidParameterError):
        cfgmod.resolve({"model": {"c": 0.1}, "run": {"T": -1}})
    cfg = cfgmod.resolve({"model": {"c": 0.1}})
    assert cfg["analysis"]["times"] == pytest.approx(list(np.linspace(0, 1, 33)))
    assert cfgmod.config_hash(cfg) == cfgmod.config_hash(cfgmod.resolve({"model": {"c": 0.1, "eta": 0.0}}))


def test_verify_particle(capsys):
    assert main(["verify-particle", "spreadout", "0.02", "--gamma", "1.3"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["lambda_hat"] <= 2 * 0.3 / math.sqrt(0.02)
    assert main(["verify-particle", "slit", "0.00227015"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert abs(rep["capacity"] - 0.00227015) < 1e-8
    assert main(["verify-particle", "spreadout", "0.02", "--gamma", "1.2"]) == 2


def test_render_circle_and_nested_curves(tmp_path, minimal):
    p = cfgmod.to_params(cfgmod.load(minimal))
    rho = outputs.render_radius(p.c)
    (curve,) = outputs.level_lines(empty_state(p), [0.0], rho)
    assert np.allclose(np.abs(curve), rho, rtol=1e-15)
    rng = np.random.default_rng(0)
    s = from_history(p, 2 * np.pi * rng.random(100), np.full(100, 0.01))
    inner, outer = outputs.level_lines(s, [0.5, 1.0], rho)
    assert np.abs(outer).mean() > np.abs(inner).mean()
    assert outputs.total_turning(outer) == pytest.approx(2 * math.pi, abs=1e-3)


def test_render_command_hl0_winding(tmp_path):
    cfg = _write(tmp_path, "c.json", {"model": {"c": 1e-3}, "run": {"T": 1.0, "seed": 1}, "analysis": {"K": 8}})
    out = tmp_path / "r"
    main(["simulate", "--config", cfg, "--out", str(out)])
    svg = (out / "boundary.svg").read_bytes()
    (out / "boundary.svg").unlink()
    assert main(["render", str(out)]) == 0
    assert (out / "boundary.svg").read_bytes() == svg
    thetas, caps = outputs.read_angles(out / "angles.csv")
    s = from_history(cfgmod.to_params(cfgmod.load(cfg)), thetas, caps)
    (curve,) = outputs.level_lines(s, [1.0], outputs.render_radius(1e-3))
    assert outputs.total_turning(curve) == pytest.approx(2 * math.pi, abs=1e-3)


def test_ensemble_aggregate_reproducible(tmp_path):
    cfg = _write(tmp_path, "e.json", {"model": {"c": 0.05}, "run": {"T": 0.5, "seed": 3},
                                       "ensemble": {"size": 3, "parallelism": 1},
                                       "analysis": {"K": 8, "ou_reference": True}})
    out = tmp_path / "ens"
    assert main(["ensemble", "--config", cfg, "--out", str(out)]) == 0
    rep = json.loads((out / "covariance_report.json").read_text())
    assert rep["status"] == "insufficient_ensemble" and rep["failed_runs"] == []
    first = (out / "covariance_report.json").read_bytes(), (out / "deviation_summary.csv").read_bytes()
    assert main(["analyze", str(out)]) == 0
    assert ((out / "covariance_report.json").read_bytes(), (out / "deviation_summary.csv").read_bytes()) == first
    rows = np.genfromtxt(out / "ou_reference.csv", delimiter=",", names=True)
    assert set(rows.dtype.names) == {"s", "t", "k", "eta", "value"}
    # each ensemble member equals a standalone simulate with the same run index
    single = tmp_path / "single"
    from alesim.cli_io.commands import simulate

    simulate(cfgmod.load(cfg), single, run_index=2)
    assert (single / "angles.csv").read_bytes() == (out / "runs" / "run_0002" / "angles.csv").read_bytes()


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "alesim", "verify-particle", "slit", "0.01"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0 and json.loads(res.stdout)["certified"]
