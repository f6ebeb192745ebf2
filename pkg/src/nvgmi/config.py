"""Experiment configuration: YAML documents with explicit units.

Every physical quantity is a string ``"<number> <unit>"``; bare numbers are
rejected for dimensioned fields so that T and mT cannot be confused.
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass, field

import yaml

from .errors import ConfigError

# decimal exponents; negative ones are applied by division so that e.g.
# "10 us" parses to the correctly rounded 1e-05
_PREFIX = {"G": 9, "M": 6, "k": 3, "": 0, "m": -3, "u": -6, "µ": -6, "n": -9, "p": -12}

_BASE = {"T": "field", "s": "time", "Hz": "frequency", "V": "voltage", "A": "current", "m": "length", "A/m": "field_strength", "ohm": "resistance"}

_UNITS = {}
for _base, _dim in _BASE.items():
    for _p, _f in _PREFIX.items():
        _UNITS.setdefault(_p + _base, (_dim, _f))
# "m" alone is metres, not milli-nothing
_UNITS["m"] = ("length", 0)
_UNITS["rad"] = ("angle", 0)
_UNITS["deg"] = ("angle", None)
_UNITS["1"] = ("dimensionless", 0)
for _u, _e in (("T/A", 0), ("mT/A", -3), ("mT/mA", 0), ("uT/mA", -3), ("µT/mA", -3)):
    _UNITS[_u] = ("field_per_current", _e)

_QTY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([^\s\d].*?)\s*$")


def parse_quantity(text, dimension: str, path: str) -> float:
    """Parse ``"10 us"`` into SI seconds, checking the dimension."""
    if isinstance(text, bool) or not isinstance(text, str):
        raise ConfigError(path, f"expected a quantity with units ({dimension}), got {text!r}")
    m = _QTY.match(text)
    if not m:
        raise ConfigError(path, f"cannot parse quantity {text!r}; write e.g. '10 us'")
    unit = m.group(2)
    if unit not in _UNITS:
        raise ConfigError(path, f"unknown unit {unit!r}")
    dim, exp = _UNITS[unit]
    if dim != dimension:
        raise ConfigError(path, f"unit {unit!r} is a {dim}, expected {dimension}")
    value = float(m.group(1))
    if exp is None:
        return math.radians(value)
    return value * 10.0**exp if exp >= 0 else value / 10.0 ** (-exp)


EXPERIMENTS = ("odmr", "rabi", "ramsey", "hahn", "magnetometry", "sweep-fac", "noise-floor", "calibrate", "widefield", "gmi-curve")

# per-experiment parameters: name -> dimension
_PARAMS = {
    "odmr": {"b_parallel": "field", "fwhm": "frequency"},
    "rabi": {},
    "ramsey": {"detuning": "frequency"},
    "hahn": {},
    "magnetometry": {"two_tau": "time", "v_ac": "voltage", "phi_prime": "angle", "f_ac": "frequency", "final_phase": "angle"},
    "sweep-fac": {"two_tau": "time", "v_ac": "voltage"},
    "noise-floor": {"two_tau": "time", "v_ac": "voltage", "duration": "time", "sampling_rate": "frequency", "ambient_rate": "frequency"},
    "calibrate": {"coil_slope": "field_per_current", "linear_limit": "current", "knee_width": "current", "bias": "field"},
    "widefield": {"spacing": "length", "offset": "length"},
    "gmi-curve": {"f_min": "frequency", "f_max": "frequency", "h_max": "field_strength"},
}

_SWEEP_DIM = {
    "odmr": "frequency",
    "rabi": "time",
    "ramsey": "time",
    "hahn": "time",
    "magnetometry": "field",
    "sweep-fac": "field",
    "calibrate": "current",
}

# NvParams / GmiWire override dimensions
_OVERRIDE_DIMS = {
    "nv": {
        "zero_field_splitting_D": "frequency", "hyperfine_A": "frequency", "t2_star": "time", "t2": "time",
        "rabi_freq": "frequency", "odmr_fwhm": "frequency", "stretch_p": "dimensionless", "contrast_c": "dimensionless",
        "photons_bright": "dimensionless", "odmr_depth": "dimensionless", "gyro_e": "dimensionless",
    },
    "wire": {
        "radius_a": "length", "length_l": "length", "resistivity_rho": "dimensionless", "r_dc": "resistance",
        "mu_max": "dimensionless", "h_k": "field_strength", "h_sat": "field_strength", "transduction_gain_G": "dimensionless",
        "standoff_r": "length", "peak_offset": "field_strength",
    },
}

_TOP_KEYS = {"experiment", "seed", "shots", "presets", "sweep", "params", "overrides", "output"}


@dataclass(frozen=True)
class Sweep:
    start: float
    stop: float
    points: int


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    seed: int
    shots: int | None = None
    presets: dict = field(default_factory=dict)
    sweep: Sweep | None = None
    params: dict = field(default_factory=dict)
    overrides: dict = field(default_factory=dict)
    output: str | None = None
    source_sha256: str = ""


def _dimensionless(value, path):
    if isinstance(value, bool):
        raise ConfigError(path, "expected a number")
    if isinstance(value, (int, float)):
        return float(value)
    return parse_quantity(value, "dimensionless", path)


def _quantity(value, dim, path):
    if dim == "dimensionless":
        return _dimensionless(value, path)
    return parse_quantity(value, dim, path)


def _int(value, path, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(path, f"must be >= {minimum}")
    return value


def load_config(text: str, seed_override: int | None = None) -> ExperimentConfig:
    from . import presets as P

    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("<document>", f"invalid YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("<document>", "top level must be a mapping")
    for key in doc:
        if key not in _TOP_KEYS:
            raise ConfigError(str(key), "unknown key")
    kind = doc.get("experiment")
    if kind not in EXPERIMENTS:
        raise ConfigError("experiment", f"must be one of {', '.join(EXPERIMENTS)}")
    if seed_override is not None:
        seed = seed_override
    elif "seed" not in doc:
        raise ConfigError("seed", "seed is mandatory")
    else:
        seed = _int(doc["seed"], "seed", 0)
    if not 0 <= seed < 2**64:
        raise ConfigError("seed", "must lie in [0, 2**64)")
    shots = _int(doc["shots"], "shots", 1) if "shots" in doc else None

    presets = dict(P.DEFAULT_IDS)
    raw_presets = doc.get("presets") or {}
    if not isinstance(raw_presets, dict):
        raise ConfigError("presets", "must be a mapping")
    for k, v in raw_presets.items():
        if k not in P.DEFAULT_IDS:
            raise ConfigError(f"presets.{k}", "unknown preset kind")
        P.get(k, v)
        presets[k] = v

    sweep = None
    if "sweep" in doc:
        s = doc["sweep"]
        if not isinstance(s, dict) or set(s) != {"start", "stop", "points"}:
            raise ConfigError("sweep", "needs exactly start, stop and points")
        dim = _SWEEP_DIM.get(kind)
        if dim is None:
            raise ConfigError("sweep", f"experiment {kind!r} takes no sweep")
        sweep = Sweep(_quantity(s["start"], dim, "sweep.start"), _quantity(s["stop"], dim, "sweep.stop"), _int(s["points"], "sweep.points", 2))

    params = {}
    raw = doc.get("params") or {}
    if not isinstance(raw, dict):
        raise ConfigError("params", "must be a mapping")
    allowed = _PARAMS[kind]
    for k, v in raw.items():
        if k not in allowed:
            raise ConfigError(f"params.{k}", f"unknown parameter for {kind!r}")
        params[k] = _quantity(v, allowed[k], f"params.{k}")

    overrides = {}
    raw = doc.get("overrides") or {}
    if not isinstance(raw, dict):
        raise ConfigError("overrides", "must be a mapping")
    for group, values in raw.items():
        if group not in _OVERRIDE_DIMS or not isinstance(values, dict):
            raise ConfigError(f"overrides.{group}", "unknown override group")
        overrides[group] = {}
        for k, v in values.items():
            if k not in _OVERRIDE_DIMS[group]:
                raise ConfigError(f"overrides.{group}.{k}", "unknown parameter")
            overrides[group][k] = _quantity(v, _OVERRIDE_DIMS[group][k], f"overrides.{group}.{k}")

    output = doc.get("output")
    if output is not None and not isinstance(output, str):
        raise ConfigError("output", "must be a path string")
    return ExperimentConfig(kind, seed, shots, presets, sweep, params, overrides, output, hashlib.sha256(text.encode()).hexdigest())
