"""Limiting Ornstein-Uhlenbeck coefficient processes.

Mode k solves dA = -lambda_k A dt + sqrt(2) dB with lambda_k = 1 + (1-eta)k,
A(0) = 0, where B has independent standard real Brownian motions in its real
and imaginary parts.  Sampling uses the exact Gaussian transition.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError, TruncationError

#: truncation error allowed when summing the limit field
FIELD_TAIL = 1e-6


@dataclass(frozen=True)
class OUParams:
    eta: float
    k: int

    def __post_init__(self):
        if self.k < 0:
            raise InvalidParameterError("mode index must be >= 0")
        if self.lambda_k <= 0:
            raise InvalidParameterError(f"decay rate {self.lambda_k} is not positive")

    @property
    def lambda_k(self) -> float:
        return 1.0 + (1.0 - self.eta) * self.k


def transition_variance(dt, lam):
    """Per-component variance (1 - e^{-2 lam dt}) / lam of one exact step."""
    return -np.expm1(-2.0 * lam * np.asarray(dt, dtype=float)) / lam


def ou_exact_step(a, dt: float, params: OUParams, rng: np.random.Generator):
    if not dt > 0:
        raise InvalidParameterError("dt must be positive")
    lam = params.lambda_k
    a = np.asarray(a, dtype=complex)
    sd = math.sqrt(transition_variance(dt, lam))
    g = rng.standard_normal(a.shape + (2,)) * sd
    out = math.exp(-lam * dt) * a + (g[..., 0] + 1j * g[..., 1])
    return out[()] if out.ndim == 0 else out


def ou_paths(times, n_paths: int, params: OUParams, rng: np.random.Generator) -> np.ndarray:
    """Paths started at 0 and sampled at increasing ``times``; shape (n_paths, len(times))."""
    times = np.asarray(times, dtype=float)
    out = np.zeros((n_paths, times.size), dtype=complex)
    a = np.zeros(n_paths, dtype=complex)
    prev = 0.0
    for i, t in enumerate(times):
        if t < prev:
            raise InvalidParameterError("times must be nondecreasing")
        if t > prev:
            a = ou_exact_step(a, t - prev, params, rng)
        out[:, i] = a
        prev = t
    return out


def ou_covariance(s: float, t: float, params: OUParams) -> float:
    """(e^{-lam|s-t|} - e^{-lam(s+t)}) / lam, the per-component covariance."""
    if s < 0 or t < 0:
        raise InvalidParameterError("times must be nonnegative")
    lam = params.lambda_k
    return math.exp(-lam * abs(s - t)) * -math.expm1(-2.0 * lam * min(s, t)) / lam


def required_modes(r_min: float, tail: float = FIELD_TAIL) -> int:
    """Smallest K with r_min^{-K} / (1 - 1/r_min) < tail."""
    if not r_min > 1:
        raise InvalidParameterError("r_min must exceed 1")
    K = max(1, math.ceil(math.log(tail * (1.0 - 1.0 / r_min)) / -math.log(r_min)))
    while r_min ** -K / (1.0 - 1.0 / r_min) >= tail:  # guard the rounding of the log ratio
        K += 1
    while K > 1 and r_min ** -(K - 1) / (1.0 - 1.0 / r_min) < tail:
        K -= 1
    return K


def limit_field_sample(t: float, z_grid, K: int, eta: float, rng: np.random.Generator, size: int = 1):
    """Draw ``size`` samples of sum_{k<K} A(t,k) z^{-k} on ``z_grid``.

    Returns an array of shape (size,) + z_grid.shape.
    """
    z = np.asarray(z_grid, dtype=complex)
    r_min = float(np.min(np.abs(z)))
    if not r_min > 1:
        raise TruncationError("field points must satisfy |z| > 1")
    if r_min ** -K / (1.0 - 1.0 / r_min) >= FIELD_TAIL:
        raise TruncationError(f"K = {K} leaves a tail above {FIELD_TAIL} at |z| = {r_min:.6g}")
    k = np.arange(K)
    lam = 1.0 + (1.0 - eta) * k
    if np.any(lam <= 0):
        raise InvalidParameterError("non-positive decay rate")
    sd = np.sqrt(transition_variance(t, lam)) if t > 0 else np.zeros(K)
    g = rng.standard_normal((size, K, 2)) * sd[None, :, None]
    A = g[..., 0] + 1j * g[..., 1]
    powers = z.ravel()[None, :] ** -k[:, None]
    return (A @ powers).reshape((size,) + z.shape)
