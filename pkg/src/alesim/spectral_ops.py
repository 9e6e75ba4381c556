"""Laurent coefficients on circles, the rescaled fluctuation field, and the
diagonal multipliers of the linearized growth dynamics.

Coefficients are indexed by k >= 0 for the term z^{-k}.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ExtractionError, InvalidParameterError
from .growth_engine import ClusterState, phi_eval, steps_at

DEFAULT_NODES = 4096
DEFAULT_K = 64


@dataclass(frozen=True)
class LaurentSeries:
    coeffs: np.ndarray
    radius: float

    @property
    def K(self) -> int:
        return int(self.coeffs.size)

    def __call__(self, z):
        """Evaluate sum_k coeffs[k] z^{-k} by Horner's rule in 1/z."""
        w = 1.0 / np.asarray(z, dtype=complex)
        out = np.zeros_like(w)
        for a in self.coeffs[::-1]:
            out = out * w + a
        return out

    def tail_bound(self, sup_f: float, r_eval: float) -> float:
        """Truncation error bound at |z| = r_eval given sup|f| on the extraction circle."""
        q = self.radius / r_eval
        if q >= 1:
            return math.inf
        return sup_f * q**self.K / (1.0 - q)


def laurent_extract(f, r: float, K: int, M: int | None = None) -> LaurentSeries:
    """coeffs[k] = r^k mean_m f(r e^{i theta_m}) e^{i k theta_m}, M = max(4K, 4096) nodes."""
    if not r > 1:
        raise InvalidParameterError(f"extraction radius must exceed 1, got {r}")
    M = max(4 * K, DEFAULT_NODES) if M is None else int(M)
    if K > M // 2:
        raise InvalidParameterError("K must not exceed half the node count")
    z = r * np.exp(2j * np.pi * np.arange(M) / M)
    vals = np.asarray(f(z), dtype=complex)
    if not np.all(np.isfinite(vals)):
        raise ExtractionError("non-finite samples on the extraction circle")
    # numpy's ifft is (1/M) sum_m v_m e^{+2 pi i k m / M}
    coeffs = np.fft.ifft(vals)[:K] * r ** np.arange(K)
    return LaurentSeries(coeffs, float(r))


def default_radius(c: float, sigma: float) -> float:
    return max(math.exp(sigma), 1.0 + 4.0 * math.sqrt(c))


def rescale_factor(state: ClusterState, n: int) -> float:
    """e^{-cap_n}: exactly e^{-cn} when alpha = 0."""
    p = state.params
    if p.alpha == 0.0:
        return math.exp(-p.c * n)
    return math.exp(-float(np.sum(state.caps[:n])))


def fluctuation_field(state: ClusterState, t: float, z):
    """(e^{-c n(t)} Phi_{n(t)}(z) - z) / sqrt(c)."""
    n = steps_at(t, state.params.c)
    if n > state.n:
        raise InvalidParameterError(f"time {t} is beyond the simulated horizon")
    z = np.asarray(z, dtype=complex)
    w = phi_eval(state, z, n)
    return (rescale_factor(state, n) * w - z) / math.sqrt(state.params.c)


@dataclass
class CoefficientProcess:
    """Rescaled Laurent coefficients; ``coeffs`` has shape (runs, times, K)."""

    times: np.ndarray
    coeffs: np.ndarray
    radius: float
    run_ids: tuple = ()

    @property
    def size(self) -> int:
        return int(self.coeffs.shape[0])

    @classmethod
    def stack(cls, processes) -> "CoefficientProcess":
        processes = list(processes)
        if not processes:
            raise InvalidParameterError("nothing to stack")
        first = processes[0]
        for p in processes[1:]:
            if not np.array_equal(p.times, first.times) or p.coeffs.shape[1:] != first.coeffs.shape[1:]:
                raise InvalidParameterError("processes disagree on times or K")
        ids = tuple(i for p in processes for i in (p.run_ids or (None,) * p.size))
        return cls(first.times, np.concatenate([p.coeffs for p in processes]), first.radius, ids)

    def at(self, t: float) -> np.ndarray:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-12 * max(1.0, abs(t)):
            raise InvalidParameterError(f"time {t} is not a snapshot")
        return self.coeffs[:, i, :]


def coefficient_process(state: ClusterState, times, K: int = DEFAULT_K, r: float | None = None,
                        M: int = DEFAULT_NODES, run_id=None) -> CoefficientProcess:
    times = np.asarray(times, dtype=float)
    p = state.params
    r = default_radius(p.c, p.sigma) if r is None else r
    out = np.zeros((1, times.size, K), dtype=complex)
    for i, t in enumerate(times):
        out[0, i] = laurent_extract(lambda z: fluctuation_field(state, t, z), r, K, M).coeffs
    return CoefficientProcess(times, out, r, (run_id,))


@dataclass(frozen=True)
class MultiplierSpec:
    c: float
    sigma: float
    eta: float
    K: int


def multiplier_p(spec: MultiplierSpec, k):
    """p(k) = e^{-c(k+1)} + c eta k e^{-sigma(k+1)}."""
    k = np.asarray(k, dtype=float)
    out = np.exp(-spec.c * (k + 1)) + spec.c * spec.eta * k * np.exp(-spec.sigma * (k + 1))
    return out[()] if out.ndim == 0 else out


def multiplier_p0(spec: MultiplierSpec, k):
    """Rescaled multiplier: e^{c(1+(1-eta)k)} p(k), or e^{c(k+1)} p(k) for eta < 0.

    Written out term by term so that large k cannot overflow.
    """
    k = np.asarray(k, dtype=float)
    c, s, eta = spec.c, spec.sigma, spec.eta
    if eta < 0:
        out = 1.0 + c * eta * k * np.exp((c - s) * (k + 1))
    else:
        out = np.exp(-c * eta * k) + c * eta * k * np.exp(c * (1 + (1 - eta) * k) - s * (k + 1))
    return out[()] if out.ndim == 0 else out


def apply_P(series: LaurentSeries, spec: MultiplierSpec, n: float) -> LaurentSeries:
    """coeffs[k] <- p(k)^n coeffs[k]."""
    if series.K > spec.K:
        raise InvalidParameterError("series is longer than the multiplier spec")
    p = multiplier_p(spec, np.arange(series.K))
    return LaurentSeries(series.coeffs * p**n, series.radius)


@dataclass(frozen=True)
class MonotonicityReport:
    passed: bool
    first_violation: int | None
    detail: str = ""


#: relative slack on comparisons, a few ulps of accumulated rounding
MONO_RTOL = 1e-14


def p0_monotonicity_check(spec: MultiplierSpec) -> MonotonicityReport:
    """Scan 0 <= p0(k+1) <= p0(k) <= 1 over k < K and report the first failure."""
    if spec.eta > 1:
        raise InvalidParameterError("the monotonicity scan is defined for eta <= 1")
    p0 = multiplier_p0(spec, np.arange(spec.K))
    if not np.all(np.isfinite(p0)):
        k = int(np.argmin(np.isfinite(p0)))
        return MonotonicityReport(False, k, "non-finite p0")
    bad_hi = p0 > 1.0 + MONO_RTOL
    bad_lo = p0 < 0.0
    bad_inc = np.zeros_like(bad_hi)
    bad_inc[1:] = p0[1:] > p0[:-1] * (1.0 + MONO_RTOL)
    bad = bad_hi | bad_lo | bad_inc
    if not bad.any():
        return MonotonicityReport(True, None)
    k = int(np.argmax(bad))
    why = "p0 > 1" if bad_hi[k] else "p0 < 0" if bad_lo[k] else f"p0({k}) > p0({k - 1})"
    return MonotonicityReport(False, k, why)
