"""CSV / JSON / SVG data products.

Floats in CSV files are written with 17 significant digits so that every
double round-trips exactly.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from ..growth_engine import ClusterState, phi_eval, steps_at


def fmt(x) -> str:
    return format(float(x), ".17g")


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_angles(path, state: ClusterState):
    _write_rows(path, ["j", "theta", "c_j"],
                ((j + 1, fmt(t), fmt(c)) for j, (t, c) in enumerate(zip(state.thetas, state.caps))))


def read_angles(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    thetas = np.array([float(r["theta"]) for r in rows])
    caps = np.array([float(r["c_j"]) for r in rows])
    return thetas, caps


def write_deviation(path, records):
    _write_rows(path, ["t", "r", "sup_dev", "norm2_dev"],
                ((fmt(d.t), fmt(d.r), fmt(d.sup_dev), fmt(d.norm2_dev)) for d in records))


def write_coeffs(path, process):
    """Rows (t, k, re, im) for a single-run coefficient process."""
    rows = []
    for i, t in enumerate(process.times):
        for k, a in enumerate(process.coeffs[0, i]):
            rows.append((fmt(t), k, fmt(a.real), fmt(a.imag)))
    _write_rows(path, ["t", "k", "re", "im"], rows)


def read_coeffs(path):
    """Returns (times, coeffs[times, K])."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    times = sorted({float(r["t"]) for r in rows})
    K = 1 + max(int(r["k"]) for r in rows)
    index = {t: i for i, t in enumerate(times)}
    out = np.zeros((len(times), K), dtype=complex)
    for r in rows:
        out[index[float(r["t"])], int(r["k"])] = complex(float(r["re"]), float(r["im"]))
    return np.array(times), out


def write_ou_reference(path, rows):
    """Rows (s, t, k, eta, value)."""
    _write_rows(path, ["s", "t", "k", "eta", "value"],
                ((fmt(s), fmt(t), k, fmt(e), fmt(v)) for s, t, k, e, v in rows))


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def render_radius(c: float) -> float:
    return 1.0 + math.sqrt(c) / 4.0


def level_lines(state: ClusterState, times, rho: float, nodes: int = 4096):
    """Curves theta -> Phi_{n(t)}(rho e^{i theta}) for each time."""
    z = rho * np.exp(2j * np.pi * np.arange(nodes) / nodes)
    return [phi_eval(state, z, min(steps_at(t, state.params.c), state.n)) for t in times]


def total_turning(curve: np.ndarray) -> float:
    """Sum of signed exterior angles of a closed polyline (2 pi for a simple ccw loop)."""
    e = np.roll(curve, -1) - curve
    return float(np.sum(np.angle(np.roll(e, -1) / e)))


def _colour(frac: float) -> str:
    # blue (early) to red (late)
    r = int(round(30 + 200 * frac))
    b = int(round(230 - 200 * frac))
    return f"#{r:02x}40{b:02x}"


def render_svg(path, curves, times, size: int = 800):
    extent = max(float(np.max(np.abs(c))) for c in curves) * 1.05
    scale = size / (2 * extent)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
    ]
    tmax = max(times) if max(times) > 0 else 1.0
    for curve, t in zip(curves, times):
        x = (curve.real + extent) * scale
        y = (extent - curve.imag) * scale
        pts = " ".join(f"{a:.3f},{b:.3f}" for a, b in zip(x, y))
        parts.append(
            f'<polygon data-t="{fmt(t)}" points="{pts}" fill="none" '
            f'stroke="{_colour(t / tmax)}" stroke-width="0.8"/>'
        )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")
