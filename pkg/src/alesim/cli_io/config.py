"""Run configuration: JSON schema, default materialization and hashing."""
from __future__ import annotations

import copy
import hashlib
import json

import jsonschema

from ..errors import InvalidParameterError
from ..growth_engine import ModelParams, ParticleSpec, SigmaRule, snapshot_times
from ..particle_maps import Kind

_num = {"type": "number"}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["model"],
    "properties": {
        "model": {
            "type": "object",
            "additionalProperties": False,
            "required": ["c"],
            "properties": {
                "eta": _num,
                "alpha": _num,
                "c": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "sigma_rule": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["type", "value"],
                    "properties": {
                        "type": {"enum": ["fixed", "power_of_c", "radius_gap"]},
                        "value": _num,
                    },
                },
                "particle": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["type"],
                    "properties": {
                        "type": {"enum": ["slit", "spreadout"]},
                        "gamma": {
                            "oneOf": [
                                {"type": "number"},
                                {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
                                {"type": "null"},
                            ]
                        },
                    },
                },
            },
        },
        "run": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "T": {"type": "number", "exclusiveMinimum": 0},
                "snapshots": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
            },
        },
        "ensemble": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "size": {"type": "integer", "minimum": 1},
                "parallelism": {"type": "integer", "minimum": 1},
            },
        },
        "analysis": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "K": {"type": "integer", "minimum": 1, "maximum": 1024},
                "radii": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 1}, "minItems": 1},
                "times": {"oneOf": [{"type": "array", "items": {"type": "number", "minimum": 0}}, {"type": "null"}]},
                "report_modes": {"type": "integer", "minimum": 1},
                "ou_reference": {"type": "boolean"},
            },
        },
    },
}

DEFAULTS = {
    "model": {
        "eta": 0.0,
        "alpha": 0.0,
        "sigma_rule": {"type": "radius_gap", "value": 0.4},
        "particle": {"type": "slit", "gamma": None},
    },
    "run": {"T": 1.0, "snapshots": 32, "seed": 0},
    "ensemble": {"size": 1, "parallelism": 1},
    "analysis": {"K": 64, "radii": [1.5, 2.0], "times": None, "report_modes": 4, "ou_reference": False},
}


class ConfigError(InvalidParameterError):
    pass


def _merge(defaults, given):
    out = copy.deepcopy(defaults)
    for key, val in given.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def resolve(raw: dict) -> dict:
    """Validate against the schema and materialize every default."""
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as err:
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {err.message}") from None
    cfg = _merge(DEFAULTS, raw)
    a = cfg["analysis"]
    if a["times"] is None:
        a["times"] = [float(t) for t in snapshot_times(cfg["run"]["T"], cfg["run"]["snapshots"])]
    if any(t > cfg["run"]["T"] * (1 + 1e-12) for t in a["times"]):
        raise ConfigError("analysis times must not exceed run.T")
    g = cfg["model"]["particle"].get("gamma")
    if isinstance(g, (int, float)):
        cfg["model"]["particle"]["gamma"] = [float(g), 0.0]
    # fail early on invalid model parameters (e.g. gamma below threshold)
    to_params(cfg)
    return cfg


def load(path) -> dict:
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as err:
            raise ConfigError(f"{path}: not valid JSON ({err})") from None
    # a manifest carries its resolved config
    if isinstance(raw, dict) and "manifest_version" in raw:
        raw = raw["config"]
    return resolve(raw)


def to_params(cfg: dict) -> ModelParams:
    m = cfg["model"]
    g = m["particle"].get("gamma")
    gamma = None if g is None else complex(g[0], g[1])
    return ModelParams(
        c=float(m["c"]),
        eta=float(m["eta"]),
        alpha=float(m["alpha"]),
        sigma_rule=SigmaRule(m["sigma_rule"]["type"], float(m["sigma_rule"]["value"])),
        particle=ParticleSpec(Kind(m["particle"]["type"]), gamma),
        T=float(cfg["run"]["T"]),
    )


def canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(cfg: dict) -> str:
    """sha256 of the resolved model parameters."""
    return hashlib.sha256(canonical(to_params(cfg).to_dict()).encode()).hexdigest()
