"""Seeded pilot ensembles that freeze the empirical bands used by the tests.

Writes tests/data/pilot.json.  Rerun only when the numerics change on purpose.
"""
import json
import math
import sys
from pathlib import Path

import numpy as np

from alesim.diagnostics import NormSpec, circle_norm, deviation_series, drift_residual
from alesim.growth_engine import ModelParams, derive_seed, run, snapshot_times, steps_at
from alesim.spectral_ops import fluctuation_field

PILOT_MASTER = 101
OUT = Path(__file__).resolve().parents[1] / "tests" / "data" / "pilot.json"


def bootstrap_se_median(x, reps=2000, seed=0):
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, x.size, (reps, x.size))
    return float(np.median(x[idx], axis=1).std(ddof=1))


def hl0_pilot(runs=50):
    p = ModelParams(c=1e-3, T=1.0)
    sup, norm2 = [], []
    for i in range(runs):
        s = run(p, derive_seed(PILOT_MASTER, i))
        sup.append(deviation_series(s, [1.0], 1.5)[0].sup_dev)
        norm2.append(circle_norm(lambda z: fluctuation_field(s, 1.0, z), NormSpec(2, 2.0)))
    sup, norm2 = np.array(sup), np.array(norm2)
    med, se = float(np.median(sup)), bootstrap_se_median(sup)
    return {
        "c": 1e-3, "T": 1.0, "r": 1.5, "runs": runs, "master_seed": PILOT_MASTER,
        "median_sup_dev": med, "se_median": se,
        "band": [med - 4 * se, med + 4 * se],
        "field_norm2_r2_q99": float(np.quantile(norm2, 0.99)),
        "field_norm2_r2_max": float(norm2.max()),
    }


def drift_pilot():
    z = 1.5 * np.exp(2j * np.pi * (np.arange(10) + 0.5) / 10)
    out = {}
    for c in (1e-2, 1e-3):
        p = ModelParams(c=c, eta=1.0, T=1.0)
        res = []
        for seed in range(2):
            s = run(p, derive_seed(PILOT_MASTER, seed))
            res += [float(drift_residual(s, steps_at(t, c), z).mean()) for t in snapshot_times(1.0)[1::4]]
        out[repr(c)] = {"mean_residual": float(np.mean(res)), "max_residual": float(np.max(res))}
        print(c, out[repr(c)], file=sys.stderr)
    return {"eta": 1.0, "probe_radius": 1.5, "probes": 10, "snapshot_stride": 4, "runs": 2, "by_c": out}


if __name__ == "__main__":
    data = {"hl0": hl0_pilot(), "drift": drift_pilot()}
    OUT.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    print(json.dumps(data, indent=2))
