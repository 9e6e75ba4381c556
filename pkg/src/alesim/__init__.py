"""Simulation and validation of planar conformal aggregation (ALE / Hastings-Levitov).

Clusters are stored as (angle, capacity) histories and evaluated as
compositions of rotated exterior-disk maps.
"""
__version__ = "0.1.0"

from .errors import (  # noqa: F401
    AlesimError,
    DomainError,
    ExtractionError,
    InsufficientEnsembleError,
    InvalidParameterError,
    RunHealthError,
    SingularityError,
    TruncationError,
    UnivalenceError,
)
from .growth_engine import ClusterState, ModelParams, ParticleSpec, SigmaRule, run  # noqa: F401
from .particle_maps import Kind, make_slit_map, make_spreadout_map  # noqa: F401
