"""Basic exterior-disk maps: slits, spread-out particles and their rotations.

A basic map sends ``{|z| > 1}`` univalently into itself with ``F(z)/z -> e^c``
at infinity, ``c`` being the logarithmic capacity of the attached particle.

Two families are provided:

* slit maps, obtained by conjugating the dilation ``w -> e^c w`` with the
  Joukowski-type map ``h(z) = z + 1/z + 2`` (which sends the exterior disk
  onto ``C \\ [0, 4]``); the particle is the radial segment ``[1, tip]``;
* spread-out maps ``F(z) = e^c z exp(2c / (gamma z - 1))``, univalent exactly
  when ``|gamma| >= 1 + c + sqrt(2c + c^2)``.

All evaluators accept scalars or arrays and return the same shape.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InvalidParameterError, SingularityError, UnivalenceError

#: radius used to read quantities off at infinity
ASYMPTOTIC_RADIUS = 1e6
#: radial step ratio used when unwrapping the slit log-ratio
UNWRAP_RATIO = 0.9
#: tolerance on |z| >= 1 for boundary evaluation
BOUNDARY_TOL = 1e-12
#: |s| / |w| below this marks a slit base preimage; s = w sqrt(1 - 4/w)
#: carries an absolute error ~ sqrt(eps) |w| there, so F' is meaningless
SINGULAR_TOL = 1e-7


class Kind(str, enum.Enum):
    SLIT = "slit"
    SPREADOUT = "spreadout"


def spreadout_threshold(c: float) -> float:
    """Smallest |gamma| for which the spread-out map of capacity c is univalent."""
    return 1.0 + c + math.sqrt(2.0 * c + c * c)


def slit_tip(c: float) -> float:
    """Tip modulus t of the slit [1, t] with t + 1/t + 2 = 4 e^c."""
    ec = math.exp(c)
    return 2.0 * ec - 1.0 + 2.0 * math.sqrt(ec * math.expm1(c))


def slit_capacity(delta: float) -> float:
    """Capacity of the slit of length delta, ``log(1 + delta^2 / (4 (1 + delta)))``."""
    return math.log1p(delta * delta / (4.0 * (1.0 + delta)))


@dataclass(frozen=True)
class ParticleMap:
    """Immutable description of a (possibly rotated) basic map."""

    kind: Kind
    c: float
    gamma: complex | None = None
    rotation: float = 0.0
    tip: float | None = field(default=None, compare=False)

    def rotated(self, theta: float) -> "ParticleMap":
        """The map ``e^{i theta} F(e^{-i theta} z)``."""
        return ParticleMap(self.kind, self.c, self.gamma, self.rotation + theta, self.tip)

    def to_dict(self) -> dict:
        d = {"type": self.kind.value, "c": self.c, "rotation": self.rotation}
        if self.gamma is not None:
            d["gamma"] = [self.gamma.real, self.gamma.imag]
        return d


def make_slit_map(c: float) -> ParticleMap:
    if not (c > 0 and math.isfinite(c)):
        raise InvalidParameterError(f"capacity must be positive, got {c!r}")
    return ParticleMap(Kind.SLIT, float(c), tip=slit_tip(c))


def make_spreadout_map(c: float, gamma: complex | None = None) -> ParticleMap:
    """Spread-out map; ``gamma=None`` selects the threshold value (cusp particle)."""
    if not (c > 0 and math.isfinite(c)):
        raise InvalidParameterError(f"capacity must be positive, got {c!r}")
    threshold = spreadout_threshold(c)
    if gamma is None:
        gamma = threshold
    gamma = complex(gamma)
    if abs(gamma) < threshold * (1.0 - 1e-14):
        raise UnivalenceError(
            f"|gamma| = {abs(gamma):.6g} is below the univalence threshold {threshold:.6g} for c = {c:g}"
        )
    return ParticleMap(Kind.SPREADOUT, float(c), gamma)


def _as_points(z, strict=False):
    z = np.asarray(z, dtype=complex)
    r = np.abs(z)
    bad = (r <= 1.0) if strict else (r < 1.0 - BOUNDARY_TOL)
    if np.any(bad) or not np.all(np.isfinite(z)):
        raise DomainError("points must lie in the exterior of the unit disk")
    return z


def _slit_value(c, u):
    # (u+1)^2/u rather than u + 1/u + 2: no cancellation near u = -1
    w = math.exp(c) * (u + 1.0) ** 2 / u
    with np.errstate(divide="ignore", invalid="ignore"):
        # sqrt(w) sqrt(w - 4): analytic off [0, 4] and ~ w - 2 at infinity
        s = np.sqrt(w) * np.sqrt(w - 4.0)
    return 0.5 * (w - 2.0 + s), s


def evaluate(fmap: ParticleMap, z):
    """F(z) for |z| >= 1 (the unit circle via the continuous extension)."""
    z = _as_points(z)
    rot = np.exp(1j * fmap.rotation) if fmap.rotation else 1.0
    u = z / rot if fmap.rotation else z
    if fmap.kind is Kind.SLIT:
        f, _ = _slit_value(fmap.c, u)
    else:
        f = math.exp(fmap.c) * u * np.exp(2.0 * fmap.c / (fmap.gamma * u - 1.0))
    return f * rot


def deriv(fmap: ParticleMap, z):
    """F'(z), raising SingularityError at the slit tip and base preimages."""
    z = _as_points(z)
    u = z * np.exp(-1j * fmap.rotation) if fmap.rotation else z
    c = fmap.c
    if fmap.kind is Kind.SPREADOUT:
        g = fmap.gamma * u - 1.0
        f = math.exp(c) * u * np.exp(2.0 * c / g)
        return f * (1.0 / u - 2.0 * c * fmap.gamma / (g * g))
    f, s = _slit_value(c, u)
    w = math.exp(c) * (u + 1.0) ** 2 / u
    near_m1 = np.abs(u + 1.0) < 1e-3
    with np.errstate(divide="ignore", invalid="ignore"):
        generic = math.exp(c) * (1.0 - 1.0 / (u * u)) * f / s
        # removable 0/0 at u = -1: (F+1)/(u+1) = e^{c/2} sqrt(F/u)
        local = math.exp(0.5 * c) * (u - 1.0) * f * f * np.sqrt(u / f) / (u * u * (f - 1.0))
    out = np.where(near_m1, local, generic)
    if not np.all(np.isfinite(out)) or np.any((np.abs(s) < SINGULAR_TOL * np.abs(w)) & ~near_m1):
        raise SingularityError("derivative evaluated at a slit endpoint preimage")
    return out


def _unwrapped_log_ratio(fmap, z):
    # principal log along the ray from ASYMPTOTIC_RADIUS*z/|z| down to z
    r = np.abs(z)
    steps = int(np.ceil(np.log(ASYMPTOTIC_RADIUS / max(r.min(), 1.0)) / -np.log(UNWRAP_RATIO))) + 1
    k = np.arange(steps + 1)[:, None]
    radii = np.maximum(ASYMPTOTIC_RADIUS * UNWRAP_RATIO ** k, r[None, :])
    path = radii * (z / r)[None, :]
    vals = np.log(evaluate(fmap, path) / path)
    phase = np.unwrap(vals.imag, axis=0)
    return vals.real[-1] + 1j * phase[-1]


def log_ratio(fmap: ParticleMap, z):
    """The branch of log(F(z)/z) continuous on |z| > 1 with limit c at infinity."""
    z = _as_points(z)
    if fmap.kind is Kind.SPREADOUT:
        u = z * np.exp(-1j * fmap.rotation)
        g = fmap.gamma * u
        return fmap.c * (g + 1.0) / (g - 1.0)
    flat = np.atleast_1d(z).ravel()
    if flat.size == 0:
        return np.asarray(z, dtype=complex)
    out = _unwrapped_log_ratio(fmap, flat)
    return out.reshape(np.shape(z)) if np.ndim(z) else complex(out[0])


def capacity(fmap: ParticleMap) -> float:
    """log F'(infinity), read off as the mean of Re log(F/z) on |z| = 1e6.

    Averaging over eight equally spaced points cancels every Laurent term of
    log(F/z) except those of order divisible by eight.
    """
    z = ASYMPTOTIC_RADIUS * np.exp(2j * np.pi * (np.arange(8) + 0.5) / 8)
    return float(np.mean(log_ratio(fmap, z).real))


@dataclass(frozen=True)
class GridSpec:
    radii: tuple
    n_angles: int = 512

    @classmethod
    def default(cls, n_angles: int = 512) -> "GridSpec":
        """Radii 1 + 2^-m for m = 0..20 plus 1 + 2^m for m = 1..12."""
        inner = [1.0 + 2.0 ** -m for m in range(21)]
        outer = [1.0 + 2.0 ** m for m in range(1, 13)]
        return cls(tuple(sorted(inner + outer)), n_angles)

    def points(self):
        theta = 2.0 * np.pi * np.arange(self.n_angles) / self.n_angles
        return (np.asarray(self.radii)[:, None] * np.exp(1j * theta)[None, :]).ravel()


@dataclass
class RegularityReport:
    lambda_hat: float
    grid: GridSpec
    worst_point: complex

    def to_json(self) -> str:
        return json.dumps(
            {
                "lambda_hat": self.lambda_hat,
                "grid": {"radii": list(self.grid.radii), "n_angles": self.grid.n_angles},
                "worst_point_re": self.worst_point.real,
                "worst_point_im": self.worst_point.imag,
            }
        )


def regularity_defect(fmap: ParticleMap, z):
    """Normalized defect |log(F/z) - c(z+1)/(z-1)| |z-1|(|z|-1) / (c^{3/2}|z|).

    Rotations are undone first, so the defect is measured relative to the
    particle's own attachment point.
    """
    z = _as_points(z, strict=True)
    base = ParticleMap(fmap.kind, fmap.c, fmap.gamma, 0.0, fmap.tip)
    c = fmap.c
    lr = log_ratio(base, z)
    r = np.abs(z)
    return np.abs(lr - c * (z + 1.0) / (z - 1.0)) * np.abs(z - 1.0) * (r - 1.0) / (c**1.5 * r)


def regularity_estimate(fmap: ParticleMap, grid: GridSpec | None = None) -> RegularityReport:
    grid = grid or GridSpec.default()
    if len(grid.radii) == 0 or grid.n_angles <= 0:
        raise InvalidParameterError("empty regularity grid")
    z = grid.points()
    d = regularity_defect(fmap, z)
    if not np.all(np.isfinite(d)):
        raise SingularityError("non-finite regularity defect on the grid")
    i = int(np.argmax(d))
    return RegularityReport(float(d[i]), grid, complex(z[i]))


def beta_coefficient(fmap: ParticleMap, radius: float = 2.0, nodes: int = 4096) -> complex:
    """beta = a_0 / (2c), a_0 the constant Laurent coefficient of e^{-c}F(z) - z."""
    z = radius * np.exp(2j * np.pi * np.arange(nodes) / nodes)
    a0 = np.mean(math.exp(-fmap.c) * evaluate(fmap, z) - z)
    return complex(a0 / (2.0 * fmap.c))
