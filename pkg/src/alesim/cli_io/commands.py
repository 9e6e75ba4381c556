"""Implementations behind the command-line subcommands."""
from __future__ import annotations

import json
import math
import platform
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from ..diagnostics import (
    MIN_ENSEMBLE,
    covariance_estimator,
    cross_covariance_estimator,
    deviation_series,
)
from ..errors import AlesimError, InvalidParameterError, RunHealthError
from ..growth_engine import SEED_RULE, derive_seed, from_history, run, steps_at
from ..ou_reference import OUParams, ou_covariance
from ..particle_maps import (
    Kind,
    beta_coefficient,
    capacity,
    make_slit_map,
    make_spreadout_map,
    regularity_estimate,
)
from ..spectral_ops import DEFAULT_NODES, CoefficientProcess, coefficient_process, default_radius
from . import config as cfgmod
from . import outputs

MANIFEST_VERSION = 1
RENDER_SNAPSHOTS = 8


@dataclass
class RunManifest:
    run_id: str
    config: dict
    config_hash: str
    master_seed: int
    run_index: int
    seed: int
    per_run_seeds: str
    software_version: str
    versions: dict
    grid_choices: dict
    status: str = "ok"
    abort: dict | None = None
    outputs: dict = field(default_factory=dict)
    manifest_version: int = MANIFEST_VERSION

    def write(self, path):
        outputs.write_json(path, asdict(self))

    @classmethod
    def read(cls, path) -> "RunManifest":
        with open(path) as fh:
            return cls(**json.load(fh))


def _versions() -> dict:
    import numba

    return {"python": platform.python_version(), "numpy": np.__version__, "numba": numba.__version__}


def _with_seed(cfg: dict, seed: int | None) -> dict:
    if seed is None:
        return cfg
    raw = json.loads(json.dumps(cfg))
    raw["run"]["seed"] = int(seed)
    return cfgmod.resolve(raw)


def _render(run_dir: Path, state, cfg):
    times = cfg["analysis"]["times"]
    idx = np.unique(np.linspace(0, len(times) - 1, RENDER_SNAPSHOTS).round().astype(int))
    sel = [times[i] for i in idx]
    rho = outputs.render_radius(state.params.c)
    curves = outputs.level_lines(state, sel, rho)
    outputs.render_svg(run_dir / "boundary.svg", curves, sel)


def simulate(cfg: dict, out_dir, seed: int | None = None, run_index: int = 0, angles_path=None) -> RunManifest:
    """One run with the seed derived from (master seed, run_index); writes all run files."""
    cfg = _with_seed(cfg, seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    params = cfgmod.to_params(cfg)
    master = int(cfg["run"]["seed"])
    run_seed = derive_seed(master, run_index)
    status, abort = "ok", None
    if angles_path is not None:
        thetas, caps = outputs.read_angles(angles_path)
        state = from_history(params, thetas, caps)
    else:
        try:
            state = run(params, run_seed)
        except RunHealthError as err:
            state = err.state
            status, abort = "aborted", {"step": err.step, "message": str(err)}
    a = cfg["analysis"]
    times = [t for t in a["times"] if steps_at(t, params.c) <= state.n]
    r_coef = default_radius(params.c, params.sigma)
    outputs.write_angles(out / "angles.csv", state)
    records = [rec for r in a["radii"] for rec in deviation_series(state, times, r)]
    outputs.write_deviation(out / "deviation.csv", records)
    proc = coefficient_process(state, times, K=a["K"], r=r_coef)
    outputs.write_coeffs(out / "coeffs.csv", proc)
    _render(out, state, {**cfg, "analysis": {**a, "times": times or [0.0]}})
    files = ["angles.csv", "deviation.csv", "coeffs.csv", "boundary.svg"]
    man = RunManifest(
        run_id=f"run_{run_index:04d}",
        config=cfg,
        config_hash=cfgmod.config_hash(cfg),
        master_seed=master,
        run_index=run_index,
        seed=run_seed,
        per_run_seeds=SEED_RULE,
        software_version=__version__,
        versions=_versions(),
        grid_choices={
            **state.grid_choices,
            "M_dft": DEFAULT_NODES,
            "K": a["K"],
            "radii": a["radii"],
            "coeff_radius": r_coef,
            "render_radius": outputs.render_radius(params.c),
            "replayed_from_angles": angles_path is not None,
        },
        status=status,
        abort=abort,
        outputs={f: outputs.sha256(out / f) for f in files},
    )
    man.write(out / "manifest.json")
    return man


def _simulate_task(cfg, run_dir, index):
    try:
        return simulate(cfg, run_dir, run_index=index).status
    except AlesimError as err:  # pragma: no cover - defensive, reported as failure
        return f"error: {err}"


def ensemble(cfg: dict, out_dir, seed: int | None = None, jobs: int | None = None) -> dict:
    from joblib import Parallel, delayed

    cfg = _with_seed(cfg, seed)
    out = Path(out_dir)
    (out / "runs").mkdir(parents=True, exist_ok=True)
    size = cfg["ensemble"]["size"]
    jobs = jobs or cfg["ensemble"]["parallelism"]
    dirs = [out / "runs" / f"run_{i:04d}" for i in range(size)]
    Parallel(n_jobs=jobs)(delayed(_simulate_task)(cfg, d, i) for i, d in enumerate(dirs))
    outputs.write_json(out / "ensemble.json", {"config": cfg, "config_hash": cfgmod.config_hash(cfg),
                                               "master_seed": cfg["run"]["seed"], "size": size,
                                               "per_run_seeds": SEED_RULE, "software_version": __version__,
                                               "manifest_version": MANIFEST_VERSION})
    return aggregate(out)


def _load_runs(ens_dir: Path):
    runs = sorted((ens_dir / "runs").glob("run_*"))
    ok, failed = [], []
    for d in runs:
        try:
            man = RunManifest.read(d / "manifest.json")
        except (OSError, ValueError, TypeError):
            failed.append({"run_id": d.name, "reason": "missing or unreadable manifest"})
            continue
        if man.status != "ok":
            failed.append({"run_id": d.name, "reason": man.abort})
            continue
        ok.append((d, man))
    return ok, failed


def covariance_report(process: CoefficientProcess, eta: float, modes: int) -> dict:
    """Diagonal pairs (t, t) and pairs (s, last time) for k < modes, plus cross-mode entries."""
    if process.size < MIN_ENSEMBLE:
        return {"status": "insufficient_ensemble", "size": process.size, "required": MIN_ENSEMBLE,
                "entries": [], "cross_mode": []}
    modes = min(modes, process.coeffs.shape[2])
    times = [float(t) for t in process.times]
    T = max(times)
    pairs = sorted({(t, t) for t in times} | {(s, T) for s in times})
    entries, cross = [], []
    for s, t in pairs:
        for k in range(modes):
            est, se = covariance_estimator(process, s, t, k)
            ref = ou_covariance(s, t, OUParams(eta, k))
            z = (est - ref) / se if se > 0 else None
            entries.append({"s": s, "t": t, "k": k, "eta": eta, "estimate": est, "stderr": se,
                            "reference": ref, "z_score": z})
    for k1 in range(modes):
        for k2 in range(k1 + 1, modes):
            est, se = cross_covariance_estimator(process, T, T, k1, k2)
            cross.append({"s": T, "t": T, "k1": k1, "k2": k2, "eta": eta, "estimate": est, "stderr": se,
                          "reference": 0.0, "z_score": est / se if se > 0 else None})
    return {"status": "ok", "size": process.size, "entries": entries, "cross_mode": cross}


def aggregate(ens_dir) -> dict:
    """Deterministic reduction over run directories, in run-id order."""
    ens_dir = Path(ens_dir)
    with open(ens_dir / "ensemble.json") as fh:
        info = json.load(fh)
    cfg = info["config"]
    ok, failed = _load_runs(ens_dir)
    report = {"config_hash": info["config_hash"], "failed_runs": failed}
    if ok:
        procs, devs = [], {}
        for d, man in ok:
            times, coeffs = outputs.read_coeffs(d / "coeffs.csv")
            procs.append(CoefficientProcess(times, coeffs[None], man.grid_choices["coeff_radius"], (man.run_id,)))
            for row in np.genfromtxt(d / "deviation.csv", delimiter=",", names=True, ndmin=1):
                devs.setdefault((float(row["t"]), float(row["r"])), []).append(float(row["sup_dev"]))
        proc = CoefficientProcess.stack(procs)
        report.update(covariance_report(proc, cfg["model"]["eta"], cfg["analysis"]["report_modes"]))
        outputs._write_rows(
            ens_dir / "deviation_summary.csv", ["t", "r", "runs", "median_sup_dev"],
            ((outputs.fmt(t), outputs.fmt(r), len(v), outputs.fmt(np.median(v))) for (t, r), v in sorted(devs.items())),
        )
    else:
        report.update({"status": "no_successful_runs", "size": 0, "entries": [], "cross_mode": []})
    outputs.write_json(ens_dir / "covariance_report.json", report)
    if cfg["analysis"]["ou_reference"]:
        write_ou_table(ens_dir / "ou_reference.csv", cfg)
    return report


def write_ou_table(path, cfg):
    times = cfg["analysis"]["times"]
    eta = cfg["model"]["eta"]
    rows = [(s, t, k, eta, ou_covariance(s, t, OUParams(eta, k)))
            for k in range(cfg["analysis"]["report_modes"]) for s in times for t in times]
    outputs.write_ou_reference(path, rows)


def analyze(target) -> dict:
    target = Path(target)
    if (target / "ensemble.json").exists():
        return aggregate(target)
    if (target / "manifest.json").exists():
        man = RunManifest.read(target / "manifest.json")
        write_ou_table(target / "ou_reference.csv", man.config)
        return {"status": "ok", "written": ["ou_reference.csv"]}
    raise InvalidParameterError(f"{target} is neither a run nor an ensemble directory")


#: relative slack on the beta bound, which is attained at infinity
BETA_RTOL = 1e-3


def verify_particle(kind: str, c: float, gamma: complex | None = None) -> dict:
    """Certify capacity, regularity and beta; raises UnivalenceError below threshold."""
    kind = Kind(kind)
    fmap = make_slit_map(c) if kind is Kind.SLIT else make_spreadout_map(c, gamma)
    cap = capacity(fmap)
    reg = regularity_estimate(fmap)
    beta = beta_coefficient(fmap)
    checks = {
        "univalent": True,
        "capacity": abs(cap - c) <= 1e-8,
        "beta_bound": abs(beta - 1) <= reg.lambda_hat * math.sqrt(c) / 2 * (1 + BETA_RTOL),
    }
    out = {"type": kind.value, "c": c, "capacity": cap, "lambda_hat": reg.lambda_hat,
           "worst_point": [reg.worst_point.real, reg.worst_point.imag],
           "beta": [beta.real, beta.imag]}
    if kind is Kind.SPREADOUT:
        bound = 2 * abs(fmap.gamma - 1) / math.sqrt(c)
        out["gamma"] = [fmap.gamma.real, fmap.gamma.imag]
        out["lambda_bound"] = bound
        checks["lambda_bound"] = reg.lambda_hat <= bound
    out["checks"] = checks
    out["certified"] = all(checks.values())
    return out


def render(run_dir) -> Path:
    run_dir = Path(run_dir)
    if not (run_dir / "manifest.json").exists() or not (run_dir / "angles.csv").exists():
        raise InvalidParameterError(f"{run_dir} does not contain a run")
    man = RunManifest.read(run_dir / "manifest.json")
    cfg = man.config
    thetas, caps = outputs.read_angles(run_dir / "angles.csv")
    state = from_history(cfgmod.to_params(cfg), thetas, caps)
    times = [t for t in cfg["analysis"]["times"] if steps_at(t, state.params.c) <= state.n] or [0.0]
    _render(run_dir, state, {**cfg, "analysis": {**cfg["analysis"], "times": times}})
    return run_dir / "boundary.svg"
