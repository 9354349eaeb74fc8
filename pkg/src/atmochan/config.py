"""Run configuration: JSON schema, defaults, presets and the config hash."""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema

from .errors import ConfigError, InvalidArgument
from .montecarlo import MonteCarloConfig
from .turbulence import ChannelGeometry, TurbulenceParams

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}
_UNIT = {"type": "number", "minimum": 0, "maximum": 1}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


def _list(item, min_items=1):
    return {"type": "array", "items": item, "minItems": min_items}


SCHEMA = _obj(
    {
        "name": {"type": "string"},
        "turbulence": _obj(
            {"cn2": _POS, "l0": _POS, "L0": _POS, "kmin": _POS, "kmax": _POS},
            required=("cn2", "l0", "L0"),
        ),
        "geometry": _obj(
            {
                "wavelength": _POS,
                "z_ap": _NONNEG,
                "n_screens": {"type": "integer", "minimum": 1},
                "grid_n": {"type": "integer", "minimum": 2},
                "grid_step": _POS,
                "aperture_radii": _list(_NONNEG),
                "w0": _POS,
                "f0": {"type": ["number", "null"]},
            },
            required=("wavelength", "z_ap", "n_screens", "grid_n", "grid_step", "aperture_radii"),
        ),
        "simulation": _obj(
            {
                "shifts": _list(_NONNEG),
                "n_samples": {"type": "integer", "minimum": 1},
                "master_seed": {"type": "integer", "minimum": 0},
                "ring_count": {"type": "integer", "minimum": 8},
                "amplitude_law": {"enum": ["deterministic", "rayleigh"]},
                "precision": {"enum": ["double", "single"]},
                "absorber": {"type": "boolean"},
                "binary": {"type": "boolean"},
            },
            required=("shifts", "n_samples"),
        ),
        "analysis": _obj(
            {
                "pdt": _obj(
                    {"aperture_radius": _NONNEG, "eta_min": _list(_UNIT), "bins": {"type": "integer", "minimum": 1}}
                ),
                "coherence": _obj({"bootstrap": {"type": "integer", "minimum": 0}, "seed": {"type": "integer"}}),
                "cv": _obj(
                    {
                        "aperture_radius": _NONNEG,
                        "xi": _list(_NONNEG),
                        "atmospheric_db_per_km": _NONNEG,
                        "path_km": _NONNEG,
                        "optics_db": _NONNEG,
                        "memory_write_db": _NONNEG,
                        "memory_read_db": _NONNEG,
                    }
                ),
                "dv": _obj(
                    {
                        "aperture_radius": _NONNEG,
                        "sources": _list({"enum": ["bell", "pdc"]}),
                        "memory_decay_db_per_ms": _list(_NONNEG),
                        "wind_v": _list(_POS),
                        "noise_mean": _NONNEG,
                        "deterministic_db": _NONNEG,
                        "splitter_db": _NONNEG,
                        "fock_cutoff": {"type": "integer", "minimum": 2},
                        "xi_grid": _list(_POS, 3),
                        "bootstrap": {"type": "integer", "minimum": 0},
                    }
                ),
                "nonclassicality": _obj(
                    {
                        "aperture_radius": _NONNEG,
                        "alpha0": _NUM,
                        "xi": _NUM,
                        "eta_min": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                        "deterministic_db": _NONNEG,
                        "N": _list({"type": "integer", "minimum": 1}),
                        "events": {"type": "integer", "minimum": 1},
                        "resamples": {"type": "integer", "minimum": 0},
                    }
                ),
            }
        ),
    },
    required=("turbulence", "geometry", "simulation"),
)

DEFAULTS = {
    "name": "run",
    "geometry": {"w0": 0.08, "f0": None},
    "simulation": {
        "master_seed": 0,
        "ring_count": 1024,
        "amplitude_law": "deterministic",
        "precision": "double",
        "absorber": True,
        "binary": False,
    },
}

ANALYSIS_DEFAULTS = {
    "pdt": {"eta_min": [0.0, 0.5], "bins": 100},
    "coherence": {"bootstrap": 200, "seed": 0},
    "cv": {
        "xi": [0.25, 0.5, 1.0, 1.5, 2.0],
        "atmospheric_db_per_km": 0.0,
        "path_km": 0.0,
        "optics_db": 0.0,
        "memory_write_db": 0.0,
        "memory_read_db": 0.0,
    },
    "dv": {
        "sources": ["bell", "pdc"],
        "memory_decay_db_per_ms": [0.0, 3.0],
        "wind_v": [10.0, 5.0],
        "noise_mean": 5e-4,
        "deterministic_db": 9.42,
        "splitter_db": 3.0,
        "fock_cutoff": 14,
        "xi_grid": [0.02, 0.05, 0.1, 0.15, 0.2, 0.3, 0.45],
        "bootstrap": 200,
    },
    "nonclassicality": {
        "alpha0": 1.15,
        "xi": 0.59,
        "eta_min": 0.1,
        "deterministic_db": 6.0,
        "N": [2, 3, 5],
        "events": 10**6,
        "resamples": 1000,
    },
}


def _merge(base, override):
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def validate(raw: dict):
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid configuration at {where}: {exc.message}") from None


def resolve(raw: dict) -> dict:
    """Validate ``raw`` and fill in defaults; analysis blocks present stay present."""
    validate(raw)
    out = _merge(DEFAULTS, raw)
    for block, values in out.get("analysis", {}).items():
        out["analysis"][block] = _merge(ANALYSIS_DEFAULTS[block], values)
    out.setdefault("analysis", {})
    return out


def config_hash(resolved: dict) -> str:
    """Short SHA-256 of the canonical JSON form (name excluded)."""
    body = {k: v for k, v in resolved.items() if k != "name"}
    blob = json.dumps(body, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def preset_names() -> list:
    return sorted(p.name[:-5] for p in resources.files("atmochan.presets").iterdir() if p.name.endswith(".json"))


def load_raw(path=None, preset=None) -> dict:
    if (path is None) == (preset is None):
        raise ConfigError("give exactly one of a config file or a preset name")
    try:
        if preset is not None:
            if preset not in preset_names():
                raise ConfigError(f"unknown preset {preset!r}; available: {', '.join(preset_names())}")
            text = resources.files("atmochan.presets").joinpath(f"{preset}.json").read_text()
        else:
            text = Path(path).read_text()
        return json.loads(text)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read configuration: {exc}") from None


@dataclass(frozen=True)
class RunConfig:
    """Resolved configuration plus the objects built from it."""

    resolved: dict
    hash: str

    @classmethod
    def from_raw(cls, raw: dict, seed: int | None = None) -> "RunConfig":
        raw = copy.deepcopy(raw)
        if seed is not None:
            raw.setdefault("simulation", {})["master_seed"] = int(seed)
        resolved = resolve(raw)
        run = cls(resolved, config_hash(resolved))
        try:
            run.geometry.check_grid()
            run.monte_carlo()
        except InvalidArgument as exc:
            raise ConfigError(str(exc)) from None
        return run

    @classmethod
    def load(cls, path=None, preset=None, seed=None) -> "RunConfig":
        return cls.from_raw(load_raw(path, preset), seed)

    @property
    def name(self) -> str:
        return self.resolved["name"]

    @property
    def turbulence(self) -> TurbulenceParams:
        try:
            return TurbulenceParams(**self.resolved["turbulence"])
        except InvalidArgument as exc:
            raise ConfigError(str(exc)) from None

    @property
    def geometry(self) -> ChannelGeometry:
        g = dict(self.resolved["geometry"])
        f0 = g.pop("f0")
        radii = tuple(g.pop("aperture_radii"))
        try:
            return ChannelGeometry(
                aperture_radius=radii[0], aperture_radii=radii, f0=math.inf if f0 is None else f0, **g
            )
        except InvalidArgument as exc:
            raise ConfigError(str(exc)) from None

    @property
    def simulation(self) -> dict:
        return self.resolved["simulation"]

    @property
    def analysis(self) -> dict:
        return self.resolved["analysis"]

    def monte_carlo(self) -> MonteCarloConfig:
        s = self.simulation
        try:
            return MonteCarloConfig(
                turbulence=self.turbulence,
                geometry=self.geometry,
                shifts=tuple(s["shifts"]),
                n_samples=s["n_samples"],
                master_seed=s["master_seed"],
                ring_count=s["ring_count"],
                amplitude_law=s["amplitude_law"],
                precision=s["precision"],
                absorber=s["absorber"],
                config_hash=self.hash,
            )
        except InvalidArgument as exc:
            raise ConfigError(str(exc)) from None
