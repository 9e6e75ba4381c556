"""Circle norms, disk-deviation statistics, increment identities, threshold
monitoring and ensemble estimators used by the acceptance suite.

All suprema over circles are grid maxima over ``M`` equally spaced nodes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InsufficientEnsembleError, InvalidParameterError
from .growth_engine import (
    ClusterState,
    attachment_density,
    phi_deriv,
    phi_eval,
    snapshot_times,
    steps_at,
)
from .particle_maps import evaluate
from .spectral_ops import CoefficientProcess

DEFAULT_NODES = 4096
MIN_ENSEMBLE = 50


def circle_nodes(r: float, M: int = DEFAULT_NODES) -> np.ndarray:
    return r * np.exp(2j * np.pi * np.arange(M) / M)


@dataclass(frozen=True)
class NormSpec:
    p: float
    r: float
    M: int = DEFAULT_NODES

    def __post_init__(self):
        if not self.p >= 1:
            raise InvalidParameterError("p must be >= 1")
        if not self.r > 0 or self.M < 1:
            raise InvalidParameterError("bad radius or node count")


def _pnorm(vals: np.ndarray, p: float) -> float:
    a = np.abs(vals)
    if math.isinf(p):
        return float(a.max())
    return float(np.mean(a**p) ** (1.0 / p))


def circle_norm(f, spec: NormSpec) -> float:
    """(mean |f|^p)^{1/p} over the circle |z| = r, or the grid max for p = inf."""
    vals = np.asarray(f(circle_nodes(spec.r, spec.M)), dtype=complex)
    if not np.all(np.isfinite(vals)):
        raise DomainError("non-finite sample on the norm circle")
    return _pnorm(vals, spec.p)


@dataclass(frozen=True)
class DeviationRecord:
    t: float
    r: float
    sup_dev: float
    norm2_dev: float
    n: int


def disk_deviation(state: ClusterState, t: float, r: float, M: int = DEFAULT_NODES) -> DeviationRecord:
    """Grid sup and 2-norm of Phi_{n(t)}(z) - e^{c n(t)} z on |z| = r."""
    if not r > 1:
        raise DomainError("deviation radius must exceed 1")
    n = steps_at(t, state.params.c)
    if n > state.n:
        raise InvalidParameterError(f"time {t} is beyond the simulated horizon")
    z = circle_nodes(r, M)
    dev = phi_eval(state, z, n) - math.exp(state.params.c * n) * z
    return DeviationRecord(float(t), float(r), _pnorm(dev, math.inf), _pnorm(dev, 2), n)


def deviation_series(state: ClusterState, times, r: float, M: int = DEFAULT_NODES):
    return [disk_deviation(state, t, r, M) for t in times]


def increment_delta(state: ClusterState, n: int, theta, z):
    """Delta_n(theta, z) = Phi_{n-1}(e^{i theta} F(e^{-i theta} z)) - Phi_{n-1}(e^c z).

    F is the basic map of capacity c; ``theta`` and ``z`` broadcast.
    """
    if not 1 <= n <= state.n + 1:
        raise InvalidParameterError(f"n = {n} outside [1, {state.n + 1}]")
    p = state.params
    z0 = np.asarray(z, dtype=complex)
    if np.any(np.abs(z0) <= 1.0):
        raise DomainError("increment points must satisfy |z| > 1")
    theta, z = np.broadcast_arrays(np.asarray(theta, dtype=float), z0)
    rot = np.exp(1j * theta)
    fmap = p.particle.build(p.c)
    moved = rot * evaluate(fmap, z / rot)
    # the base point does not depend on theta: evaluate once, then broadcast
    base = phi_eval(state, math.exp(p.c) * z0, n - 1)
    out = phi_eval(state, moved, n - 1) - np.broadcast_to(base, z.shape)
    return out[()] if out.ndim == 0 else out


def mean_increment(state: ClusterState, n: int, z, M: int = DEFAULT_NODES) -> np.ndarray:
    """Uniform-angle mean of Delta_n(., z); zero by Cauchy's theorem."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    theta = 2.0 * np.pi * np.arange(M) / M
    d = increment_delta(state, n, theta[:, None], z[None, :])
    return d.mean(axis=0)


def drift_term(state: ClusterState, n: int, z, M: int = DEFAULT_NODES) -> np.ndarray:
    """A_n(z): trapezoidal mean of Delta_n(theta, z) h_n(theta) over M angles."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    dens = attachment_density(state.prefix(n - 1), M)
    d = increment_delta(state, n, dens.grid[:, None], z[None, :])
    return (d * dens.weights[:, None]).mean(axis=0)


def drift_leading_order(state: ClusterState, n: int, z) -> np.ndarray:
    """-c eta e^{cn} z Phi~'_{n-1}(e^sigma z), Phi~ = e^{-c(n-1)} Phi_{n-1} - id."""
    p = state.params
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    tilde_d = math.exp(-p.c * (n - 1)) * phi_deriv(state, math.exp(p.sigma) * z, n - 1) - 1.0
    return -p.c * p.eta * math.exp(p.c * n) * z * tilde_d


def drift_residual(state: ClusterState, n: int, z, M: int = DEFAULT_NODES) -> np.ndarray:
    """|A_n(z) - leading order|, the remainder of the drift linearization."""
    return np.abs(drift_term(state, n, z, M) - drift_leading_order(state, n, z))


def threshold_delta0(c: float, sigma: float, eta: float, nu: float) -> float:
    gap = math.expm1(sigma)
    if gap <= 0:
        return math.inf
    power = 1.5 if eta == 1 else 1.0
    return c ** (0.5 - nu) / gap**power


@dataclass
class ThresholdReport:
    delta0: float
    times: np.ndarray
    norms: np.ndarray
    first_crossing: float | None = None
    aborted_at: int | None = None
    extra: dict = field(default_factory=dict)

    @property
    def crossed(self) -> bool:
        return self.first_crossing is not None


def tilde_deriv_sup(state: ClusterState, n: int, M: int = DEFAULT_NODES) -> float:
    """Grid max of |e^{-cn} Phi_n'(z) - 1| on |z| = e^sigma."""
    p = state.params
    z = circle_nodes(math.exp(p.sigma), M)
    return _pnorm(math.exp(-p.c * n) * phi_deriv(state, z, n) - 1.0, math.inf)


def threshold_monitor(state: ClusterState, nu: float, times=None, M: int = DEFAULT_NODES) -> ThresholdReport:
    """Track sup |Phi~_n'| on |z| = e^sigma at snapshot times against delta_0."""
    p = state.params
    if p.eta > 1:
        raise InvalidParameterError("threshold monitor is defined for eta <= 1")
    times = snapshot_times(p.T) if times is None else np.asarray(times, dtype=float)
    d0 = threshold_delta0(p.c, p.sigma, p.eta, nu)
    norms = np.zeros(times.size)
    first = None
    for i, t in enumerate(times):
        n = min(steps_at(t, p.c), state.n)
        norms[i] = tilde_deriv_sup(state, n, M) if n else 0.0
        if first is None and not norms[i] <= d0:
            first = float(t)
    return ThresholdReport(d0, times, norms, first)


@dataclass(frozen=True)
class Regression:
    slope: float
    intercept: float
    r2: float


def scaling_regression(records) -> Regression:
    """Least-squares fit of log(statistic) against log(c)."""
    arr = np.asarray(records, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise InvalidParameterError("records must be (c, statistic) pairs")
    if np.unique(arr[:, 0]).size < 3 or np.any(arr <= 0) or not np.all(np.isfinite(arr)):
        raise InvalidParameterError("need >= 3 distinct positive c values and positive statistics")
    x, y = np.log(arr[:, 0]), np.log(arr[:, 1])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return Regression(float(slope), float(intercept), r2)


def jackknife(values: np.ndarray, stat=np.mean):
    """Statistic and its leave-one-out jackknife standard error."""
    values = np.asarray(values)
    N = values.shape[0]
    est = float(stat(values))
    loo = np.array([stat(np.delete(values, i, axis=0)) for i in range(N)])
    se = math.sqrt((N - 1) / N * float(np.sum((loo - loo.mean()) ** 2)))
    return est, se


def _component_products(process: CoefficientProcess, s, t, k1, k2):
    if process.size < MIN_ENSEMBLE:
        raise InsufficientEnsembleError(f"ensemble of {process.size} runs; need at least {MIN_ENSEMBLE}")
    a = process.at(s)[:, k1]
    b = process.at(t)[:, k2]
    return 0.5 * (a.real * b.real + a.imag * b.imag)


def covariance_estimator(process: CoefficientProcess, s: float, t: float, k: int):
    """Per-component E[A(s,k) (x) A(t,k)] diagonal average with jackknife SE."""
    return jackknife(_component_products(process, s, t, k, k))


def cross_covariance_estimator(process: CoefficientProcess, s: float, t: float, k1: int, k2: int):
    """Same diagonal average between modes k1 and k2 (zero in the limit when k1 != k2)."""
    return jackknife(_component_products(process, s, t, k1, k2))


def reim_covariance_estimator(process: CoefficientProcess, t: float, k: int):
    """E[Re A(t,k) Im A(t,k)] with jackknife SE (zero in the limit)."""
    if process.size < MIN_ENSEMBLE:
        raise InsufficientEnsembleError(f"ensemble of {process.size} runs; need at least {MIN_ENSEMBLE}")
    a = process.at(t)[:, k]
    return jackknife(a.real * a.imag)
