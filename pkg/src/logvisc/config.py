"""
Run configuration: a line-based ``key = value`` text format.

Blank lines and ``#`` comments are ignored.  Unknown keys, malformed lines,
bad values and missing required keys raise :class:`ConfigError` carrying
the line number.  :func:`dump_config` writes every key in a fixed order, so
a dumped file parses and dumps back to identical bytes.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields

from .errors import ConfigError

MODELS = ("solid", "fluid", "transport_only")
SCENARIOS = ("rest_strained", "taylor_green", "lid_cavity", "uniform_shear_prescribed",
             "relaxation_uniform", "rigid_rotation_prescribed")
BOUNDARIES = ("auto", "periodic", "no_slip_walls")
REQUIRED = ("model", "scenario", "t_end")

_NONE = "none"


@dataclass
class SimConfig:
    """All run parameters; see ``DEFAULTS_DOC`` for the meaning of each key."""

    model: str = ""
    scenario: str = ""
    t_end: float = 0.0
    d: int = 2
    nx: int = 64
    ny: int = 64
    nz: int = 0
    lx: float | None = None
    ly: float | None = None
    lz: float | None = None
    boundary: str = "auto"
    rho: float = 1.0
    eta: float = 1.0
    kappa: float = 1.0
    tau_r: float | None = None
    dt: float = 0.0
    cfl: float = 0.5
    stabilization: float = 1.0
    amplitude: float | None = None
    velocity: float | None = None
    width: float = 0.15
    noise: float = 0.0
    mollify_scale: float = 0.0
    seed: int = 0
    track_F: bool = False
    output_dir: str = "out"
    record_every: int = 1
    snapshot_every: int = 0
    checkpoint_every: int = 0

    @property
    def uses_bref(self) -> bool:
        return self.model == "fluid" or (self.model == "transport_only" and self.tau_r is not None)


DEFAULTS_DOC = {
    "model": "solid | fluid | transport_only (required)",
    "scenario": "initial-condition generator (required): " + ", ".join(SCENARIOS),
    "t_end": "final time, > 0 (required)",
    "d": "spatial dimension; shipped scenarios use 2",
    "nx": "cells along x", "ny": "cells along y", "nz": "cells along z (d = 3 only)",
    "lx": "domain extent along x; none picks the scenario default",
    "ly": "domain extent along y", "lz": "domain extent along z",
    "boundary": "auto | periodic | no_slip_walls; auto picks the scenario's natural choice",
    "rho": "mass density", "eta": "viscosity", "kappa": "elastic modulus",
    "tau_r": "relaxation time; required for the fluid model, enables B_ref in transport_only",
    "dt": "time step; 0 selects it from the stability estimate",
    "cfl": "safety factor of the automatic time step",
    "stabilization": "implicit elastic correction factor theta (viscosity eta + theta kappa dt)",
    "amplitude": "strain amplitude of the initial log-strain field; none picks the scenario default",
    "velocity": "velocity, forcing or rotation-rate scale; none picks the scenario default",
    "noise": "amplitude of a smooth random log-strain perturbation drawn from the seed",
    "width": "width of the initial strain bump, relative to the box",
    "mollify_scale": "Gaussian mollification of the initial log strain, in cells",
    "seed": "seed of the 64-bit LCG for randomized initial perturbations",
    "track_F": "also transport the deformation gradient (true/false)",
    "output_dir": "directory for diagnostics, snapshots, checkpoints and the manifest",
    "record_every": "steps between energy records",
    "snapshot_every": "steps between field snapshots; 0 disables",
    "checkpoint_every": "steps between checkpoints; 0 disables",
}

_ORDER = [f.name for f in fields(SimConfig)]
_TYPES = {f.name: f.type for f in fields(SimConfig)}


def _convert(key, raw, lineno):
    typ = _TYPES[key]
    try:
        if typ == "int":
            return int(raw)
        if typ == "float":
            return float(raw)
        if typ == "float | None":
            return None if raw.lower() == _NONE else float(raw)
        if typ == "bool":
            low = raw.lower()
            if low not in ("true", "false"):
                raise ValueError(raw)
            return low == "true"
        return raw
    except ValueError:
        raise ConfigError(f"invalid value {raw!r} for {key} (expected {typ})", lineno) from None


def parse_config_text(text: str) -> SimConfig:
    cfg = SimConfig()
    seen = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"expected 'key = value', got {body!r}", lineno)
        key, raw = (s.strip() for s in body.split("=", 1))
        if key not in _TYPES:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in seen:
            raise ConfigError(f"duplicate key {key!r} (first set on line {seen[key]})", lineno)
        if raw == "":
            raise ConfigError(f"missing value for {key}", lineno)
        seen[key] = lineno
        setattr(cfg, key, _convert(key, raw, lineno))
    last = len(text.splitlines()) or 1
    for key in REQUIRED:
        if key not in seen:
            raise ConfigError(f"missing required key {key!r}", last)
    validate(cfg, seen, last)
    return cfg


def parse_config(path) -> SimConfig:
    with open(path) as fh:
        return parse_config_text(fh.read())


def validate(cfg: SimConfig, seen=None, last: int | None = None) -> None:
    seen = seen or {}

    def fail(msg, key):
        raise ConfigError(msg, seen.get(key, last))

    if cfg.model not in MODELS:
        fail(f"model must be one of {', '.join(MODELS)}", "model")
    if cfg.scenario not in SCENARIOS:
        fail(f"scenario must be one of {', '.join(SCENARIOS)}", "scenario")
    if not cfg.t_end > 0:
        fail("t_end must be positive", "t_end")
    if cfg.model == "fluid" and cfg.tau_r is None:
        fail("tau_r is required for the fluid model", "model")
    if cfg.tau_r is not None and not cfg.tau_r > 0:
        fail("tau_r must be positive", "tau_r")
    if cfg.scenario == "relaxation_uniform" and not cfg.uses_bref:
        fail("relaxation_uniform needs tau_r (fluid or transport_only model)", "scenario")
    if cfg.d not in (2, 3):
        fail("d must be 2 or 3", "d")
    if cfg.d == 3 and cfg.nz < 8:
        fail("nz must be at least 8 in three dimensions", "nz")
    if cfg.boundary not in BOUNDARIES:
        fail(f"boundary must be one of {', '.join(BOUNDARIES)}", "boundary")
    for key in ("rho", "eta", "cfl"):
        if not getattr(cfg, key) > 0:
            fail(f"{key} must be positive", key)
    for key in ("lx", "ly", "lz"):
        v = getattr(cfg, key)
        if v is not None and not v > 0:
            fail(f"{key} must be positive", key)
    for key in ("kappa", "dt", "mollify_scale", "stabilization", "noise"):
        if getattr(cfg, key) < 0:
            fail(f"{key} must be non-negative", key)
    for key in ("record_every",):
        if getattr(cfg, key) < 1:
            fail(f"{key} must be at least 1", key)
    for key in ("snapshot_every", "checkpoint_every"):
        if getattr(cfg, key) < 0:
            fail(f"{key} must be non-negative", key)


def _fmt(value) -> str:
    if value is None:
        return _NONE
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_config(cfg: SimConfig) -> str:
    """Canonical text of a configuration, every key in declaration order."""
    return "".join(f"{k} = {_fmt(getattr(cfg, k))}\n" for k in _ORDER)


def config_hash(cfg: SimConfig) -> str:
    return hashlib.sha256(dump_config(cfg).encode()).hexdigest()
