"""ALE(alpha, eta) cluster growth by composition of rotated basic maps.

The cluster after ``n`` particles is ``Phi_n = F_1 o ... o F_n`` with
``F_j(z) = e^{i theta_j} F^{(c_j)}(e^{-i theta_j} z)``; only the history of
(theta_j, c_j) pairs is stored and ``Phi_n`` is evaluated on demand by
backward composition.

Attachment angles are drawn from the density proportional to
``|Phi_{n-1}'(e^{sigma + i theta})|^{-eta}`` on a uniform grid of ``M``
angles, and capacities follow ``c_n = c |Phi_{n-1}'(e^{sigma + i Theta_n})|^{-alpha}``.
"""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .errors import DomainError, InvalidParameterError, RunHealthError
from .particle_maps import Kind, ParticleMap, make_slit_map, make_spreadout_map, spreadout_threshold

#: |Phi'| outside [HEALTH_MIN, HEALTH_MAX] on the density circle aborts a run
HEALTH_MIN = 1e-8
HEALTH_MAX = 1e8
#: floor on the density grid size
MIN_DENSITY_GRID = 4096
#: target size of the Fourier tail dropped when interpolating log|Phi'|
INTERP_TAIL = 1e-13

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_seed(master_seed: int, index: int) -> int:
    """Per-run seed ``splitmix64(master ^ splitmix64(index))`` (frozen rule)."""
    return splitmix64((int(master_seed) & _MASK64) ^ splitmix64(int(index)))


SEED_RULE = "splitmix64(master ^ splitmix64(index))"


@dataclass(frozen=True)
class SigmaRule:
    """How the regularization sigma is derived from c.

    ``fixed``: sigma = value; ``power_of_c``: sigma = c**value;
    ``radius_gap``: e^sigma = 1 + c**value.
    """

    kind: str = "radius_gap"
    value: float = 0.4

    def materialize(self, c: float) -> float:
        if self.kind == "fixed":
            return float(self.value)
        if self.kind == "power_of_c":
            return float(c**self.value)
        if self.kind == "radius_gap":
            return float(math.log1p(c**self.value))
        raise InvalidParameterError(f"unknown sigma rule {self.kind!r}")


@dataclass(frozen=True)
class ParticleSpec:
    """Particle family; ``gamma=None`` for spread-out means the threshold gamma(c)."""

    kind: Kind = Kind.SLIT
    gamma: complex | None = None

    def build(self, c: float) -> ParticleMap:
        if self.kind is Kind.SLIT:
            return make_slit_map(c)
        return make_spreadout_map(c, self.gamma)


@dataclass(frozen=True)
class ModelParams:
    c: float
    eta: float = 0.0
    alpha: float = 0.0
    sigma_rule: SigmaRule = field(default_factory=SigmaRule)
    particle: ParticleSpec = field(default_factory=ParticleSpec)
    T: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.c <= 1.0):
            raise InvalidParameterError(f"c must lie in (0, 1], got {self.c}")
        if not self.T > 0:
            raise InvalidParameterError(f"T must be positive, got {self.T}")
        if self.sigma < 0 or not math.isfinite(self.sigma):
            raise InvalidParameterError(f"sigma must be >= 0, got {self.sigma}")
        # validates gamma against the base capacity
        self.particle.build(self.c)

    @property
    def sigma(self) -> float:
        return self.sigma_rule.materialize(self.c)

    @property
    def n_steps(self) -> int:
        return steps_at(self.T, self.c)

    def to_dict(self) -> dict:
        p = {"type": self.particle.kind.value}
        if self.particle.gamma is not None:
            g = complex(self.particle.gamma)
            p["gamma"] = [g.real, g.imag]
        return {
            "eta": self.eta,
            "alpha": self.alpha,
            "c": self.c,
            "sigma_rule": {"type": self.sigma_rule.kind, "value": self.sigma_rule.value},
            "sigma": self.sigma,
            "particle": p,
            "T": self.T,
        }


def steps_at(t: float, c: float) -> int:
    """n(t) = floor(t/c), guarded against t/c landing a hair below an integer."""
    return int(math.floor(t / c * (1.0 + 1e-12)))


def snapshot_times(T: float, count: int = 32) -> np.ndarray:
    """Evenly spaced times 0, T/count, ..., T."""
    return np.linspace(0.0, T, count + 1)


def density_grid_size(c: float) -> int:
    """max(4096, 2^ceil(log2(16/sqrt(c)))): >= 16 cells per particle width."""
    return max(MIN_DENSITY_GRID, 1 << math.ceil(math.log2(16.0 / math.sqrt(c))))


def eval_nodes(sigma: float, M: int) -> int:
    """Nodes at which log|Phi'| is computed exactly before interpolation to M.

    log|Phi'| on |z| = e^sigma has Fourier coefficients decaying like
    e^{-sigma |k|}; keeping |k| < M_eval/2 drops a tail below INTERP_TAIL.
    """
    if sigma <= 0:
        return M
    need = 2.0 * -math.log(INTERP_TAIL) / sigma
    return min(M, max(128, 1 << math.ceil(math.log2(need))))


@dataclass
class ClusterState:
    """Growth history defining Phi_n; ``rng`` is None for replayed/forced states."""

    params: ModelParams
    thetas: np.ndarray
    caps: np.ndarray
    rng: np.random.Generator | None = None
    seed: int | None = None

    @property
    def n(self) -> int:
        return int(self.thetas.size)

    @property
    def total_capacity(self) -> float:
        return float(np.sum(self.caps))

    def prefix(self, n: int) -> "ClusterState":
        if not 0 <= n <= self.n:
            raise InvalidParameterError(f"prefix length {n} outside [0, {self.n}]")
        return ClusterState(self.params, self.thetas[:n], self.caps[:n], None, self.seed)

    def at_time(self, t: float) -> "ClusterState":
        return self.prefix(min(steps_at(t, self.params.c), self.n))

    @property
    def grid_choices(self) -> dict:
        M = density_grid_size(self.params.c)
        return {"M_density": M, "M_eval": eval_nodes(self.params.sigma, M)}


def empty_state(params: ModelParams, seed: int | None = None) -> ClusterState:
    rng = None if seed is None else np.random.Generator(np.random.PCG64(seed))
    return ClusterState(params, np.zeros(0), np.zeros(0), rng, seed)


def from_history(params: ModelParams, thetas, caps) -> ClusterState:
    thetas = np.asarray(thetas, dtype=float)
    caps = np.asarray(caps, dtype=float)
    if thetas.shape != caps.shape or thetas.ndim != 1:
        raise InvalidParameterError("angle and capacity histories must be 1-d and equal length")
    if np.any(caps <= 0):
        raise InvalidParameterError("capacities must be positive")
    return ClusterState(params, thetas.copy(), caps.copy())


def _kernel_args(particle: ParticleSpec, thetas, caps):
    if particle.kind is Kind.SLIT:
        g = np.zeros(caps.size)
        return np.cos(thetas), np.sin(thetas), caps, g, g, _kernels.SLIT
    if particle.gamma is None:
        gam = 1.0 + caps + np.sqrt(2.0 * caps + caps * caps)
        gi = np.zeros(caps.size)
    else:
        gamma = complex(particle.gamma)
        gam = np.full(caps.size, gamma.real)
        gi = np.full(caps.size, gamma.imag)
    return np.cos(thetas), np.sin(thetas), caps, gam, gi, _kernels.SPREADOUT


def _points(z):
    z = np.asarray(z, dtype=complex)
    if np.any(np.abs(z) < 1.0 - 1e-12) or not np.all(np.isfinite(z)):
        raise DomainError("points must lie in the closed exterior disk")
    return z


def _compose(state: ClusterState, z, n: int | None = None):
    z = _points(z)
    n = state.n if n is None else n
    flat = np.ascontiguousarray(z.ravel())
    args = _kernel_args(state.params.particle, state.thetas[:n], state.caps[:n])
    wr, wi, lre, lim = _kernels.compose(flat.real.copy(), flat.imag.copy(), *args)
    w = (wr + 1j * wi).reshape(z.shape)
    logd = (lre + 1j * lim).reshape(z.shape)
    if np.any(np.abs(w) < np.abs(z) * (1.0 - 1e-9)):
        raise DomainError("composition left the exterior disk (branch error)")
    return w, logd


def phi_eval(state: ClusterState, z, n: int | None = None):
    """Phi_n(z), n defaulting to the full history."""
    w, _ = _compose(state, z, n)
    return w[()] if w.ndim == 0 else w


def phi_deriv(state: ClusterState, z, n: int | None = None):
    """Phi_n'(z) = exp(sum_j log F_j'(w_j)), exponentiated once."""
    _, logd = _compose(state, z, n)
    d = np.exp(logd)
    return d[()] if d.ndim == 0 else d


def log_abs_phi_deriv(state: ClusterState, z, n: int | None = None):
    z = _points(z)
    n = state.n if n is None else n
    flat = np.ascontiguousarray(z.ravel())
    args = _kernel_args(state.params.particle, state.thetas[:n], state.caps[:n])
    return _kernels.log_abs_deriv(flat.real.copy(), flat.imag.copy(), *args).reshape(z.shape)


@dataclass
class AngleDensity:
    grid: np.ndarray
    weights: np.ndarray
    Z: float
    M_eval: int

    @property
    def M(self) -> int:
        return int(self.grid.size)


def _fourier_upsample(values: np.ndarray, M: int) -> np.ndarray:
    m = values.size
    if m == M:
        return values
    spec = np.fft.rfft(values)
    if m % 2 == 0:
        spec[-1] *= 0.5
    out = np.zeros(M // 2 + 1, dtype=complex)
    out[: spec.size] = spec
    return np.fft.irfft(out, n=M) * (M / m)


def density_log_abs_deriv(state: ClusterState, M: int, exact: bool = False) -> np.ndarray:
    """log|Phi_n'(e^{sigma + i theta_m})| on the M-point grid."""
    sigma = state.params.sigma
    m_eval = M if exact else eval_nodes(sigma, M)
    if M % m_eval:
        m_eval = M
    z = math.exp(sigma) * np.exp(2j * np.pi * np.arange(m_eval) / m_eval)
    return _fourier_upsample(log_abs_phi_deriv(state, z), M), m_eval


def _check_health(logd, step):
    if not np.all(np.isfinite(logd)):
        raise RunHealthError(f"non-finite derivative on the density circle at step {step}", step)
    lo, hi = float(np.min(logd)), float(np.max(logd))
    if lo < math.log(HEALTH_MIN) or hi > math.log(HEALTH_MAX):
        raise RunHealthError(
            f"|Phi'| range [{math.exp(lo):.3g}, {math.exp(hi):.3g}] leaves the trusted window at step {step}",
            step,
        )


def attachment_density(state: ClusterState, M: int | None = None, exact: bool = False) -> AngleDensity:
    """Density h_{n+1} of the next attachment angle given the current state."""
    M = density_grid_size(state.params.c) if M is None else int(M)
    if M < 64 or M & (M - 1):
        raise InvalidParameterError("density grid size must be a power of two >= 64")
    grid = 2.0 * np.pi * np.arange(M) / M
    eta = state.params.eta
    if eta == 0.0 or state.n == 0:
        return AngleDensity(grid, np.ones(M), 1.0, 0)
    logd, m_eval = density_log_abs_deriv(state, M, exact)
    _check_health(logd, state.n + 1)
    shift = float(np.mean(logd))
    raw = np.exp(-eta * (logd - shift))
    mean_raw = float(np.mean(raw))
    return AngleDensity(grid, raw / mean_raw, mean_raw * math.exp(-eta * shift), m_eval)


def sample_angle(density: AngleDensity, rng: np.random.Generator) -> float:
    """Inverse-CDF draw over the trapezoidal cumulative, linear inside cells.

    Consumes exactly one uniform from ``rng``.
    """
    return _invert(density, rng.random())


def _invert(density: AngleDensity, u: float) -> float:
    h = density.weights
    M = h.size
    d = 2.0 * np.pi / M
    mass = 0.5 * (h + np.roll(h, -1))
    cdf = np.cumsum(mass)
    target = u * cdf[-1]
    i = int(np.searchsorted(cdf, target, side="right"))
    i = min(i, M - 1)
    while mass[i] <= 0.0 and i < M - 1:
        i += 1
    below = cdf[i - 1] if i > 0 else 0.0
    frac = (target - below) / mass[i] if mass[i] > 0 else 0.0
    theta = (i + min(max(frac, 0.0), 1.0)) * d
    return float(theta % (2.0 * np.pi))


def capacity_rule(state: ClusterState, theta: float) -> float:
    """c |Phi_n'(e^{sigma + i theta})|^{-alpha} for the next particle."""
    p = state.params
    if p.alpha == 0.0 or state.n == 0:
        return p.c
    z = np.array([math.exp(p.sigma) * complex(math.cos(theta), math.sin(theta))])
    logd = log_abs_phi_deriv(state, z)
    _check_health(logd, state.n + 1)
    return float(p.c * math.exp(-p.alpha * float(logd[0])))


def _next_angle(state: ClusterState, rng: np.random.Generator, M: int) -> float:
    u = rng.random()
    if state.params.eta == 0.0 or state.n == 0:
        return float((2.0 * np.pi * u) % (2.0 * np.pi))
    return _invert(attachment_density(state, M), u)


def step(state: ClusterState) -> ClusterState:
    """Add one particle; returns a new state, the input is left untouched."""
    if state.rng is None:
        raise InvalidParameterError("state carries no random generator")
    rng = copy.deepcopy(state.rng)
    theta = _next_angle(state, rng, density_grid_size(state.params.c))
    cap = capacity_rule(state, theta)
    return ClusterState(
        state.params, np.append(state.thetas, theta), np.append(state.caps, cap), rng, state.seed
    )


def run(params: ModelParams, seed: int, progress=None) -> ClusterState:
    """Grow n(T) = floor(T/c) particles from the unit disk.

    Raises RunHealthError (carrying the last healthy state) if the density
    circle leaves the trusted derivative range.
    """
    state = empty_state(params, seed)
    N = params.n_steps
    thetas = np.zeros(N)
    caps = np.zeros(N)
    M = density_grid_size(params.c)
    rng = state.rng
    for j in range(N):
        cur = ClusterState(params, thetas[:j], caps[:j], None, seed)
        try:
            theta = _next_angle(cur, rng, M)
            cap = capacity_rule(cur, theta)
        except RunHealthError as err:
            err.state = ClusterState(params, thetas[:j].copy(), caps[:j].copy(), rng, seed)
            raise
        thetas[j] = theta
        caps[j] = cap
        if progress is not None:
            progress(j + 1, N)
    return ClusterState(params, thetas, caps, rng, seed)


def forced(params: ModelParams, thetas) -> ClusterState:
    """State with prescribed attachment angles (capacities from the rule)."""
    thetas = np.asarray(thetas, dtype=float)
    caps = np.zeros(thetas.size)
    for j in range(thetas.size):
        caps[j] = capacity_rule(ClusterState(params, thetas[:j], caps[:j]), thetas[j])
    return ClusterState(params, thetas.copy(), caps)


def rotate_state(state: ClusterState, phi: float) -> ClusterState:
    return replace(state, thetas=(state.thetas + phi), rng=None)
