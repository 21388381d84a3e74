"""Run configuration: JSON text with a versioned schema.

Structure is validated with a JSON schema (unknown keys are rejected and
errors carry the offending key path); cross-field rules such as
method/model compatibility are checked afterwards.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from typing import Optional

import jsonschema
import numpy as np

from .bcf import BathModel, SystemModel, model_from_dict
from .exceptions import ConfigError
from .fock import Rectangular, Triangular
from .solvers import METHODS, STOCHASTIC, Problem

SCHEMA_VERSION = "nshops.run/1"

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}
_COMPLEX = {
    "oneOf": [
        {"type": "number"},
        {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
    ]
}
_MATRIX = {"type": "array", "minItems": 1, "items": {"type": "array", "minItems": 1, "items": _COMPLEX}}


def _obj(props, required=(), **extra):
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False,
            **extra}


def _by_kind(field_name, variants):
    """Discriminated union on ``field_name`` with precise error paths."""
    props = {field_name: {"enum": sorted(variants)}}
    rules = []
    for kind, (vprops, required) in variants.items():
        rules.append({
            "if": {"properties": {field_name: {"const": kind}}, "required": [field_name]},
            "then": _obj({field_name: {"const": kind}, **vprops}, [field_name, *required]),
        })
    return {"type": "object", "properties": props, "required": [field_name], "allOf": rules}


_COEFFICIENT = _by_kind("type", {
    "stationary": ({"amp": _COMPLEX, "freq": _NUM}, ["amp", "freq"]),
    "uniform_squeezed": ({"amplitude": _COMPLEX, "center": _NUM, "squeeze": _NONNEG, "phase": _NUM,
                          "detuning": _NUM}, ["amplitude", "center"]),
    "harmonic": ({"prefactor": _NUM, "kind": {"enum": ["cos", "sin"]}, "center": _NUM, "phase": _NUM},
                 ["prefactor", "kind", "center"]),
    "tabulated": ({"csv": {"type": "string"}}, ["csv"]),
})

_BATH = _by_kind("kind", {
    "single_mode_squeezed": (
        {"params": _obj({"gamma": _NONNEG, "omega0": _NUM, "r": _NONNEG, "phi": _NUM, "Gamma": _POS},
                        ["gamma", "omega0", "r", "phi", "Gamma"])},
        ["params"],
    ),
    "dpa_three_mode": (
        {"params": _obj({"gamma": _NONNEG, "omega0": _NUM, "Gamma0": _POS, "Gamma": _POS, "eps": _POS,
                         "phi": _NUM}, ["gamma", "omega0", "Gamma0", "Gamma", "eps", "phi"])},
        ["params"],
    ),
    "uniform_squeezed_multimode": (
        {"params": _obj({
            "terms": {"type": "array", "minItems": 1,
                      "items": {"type": "array", "prefixItems": [_COMPLEX, _NUM, _POS],
                                "items": False, "minItems": 3}},
            "r": _NONNEG, "phi": _NUM, "omega0": _NUM}, ["terms", "r", "phi", "omega0"])},
        ["params"],
    ),
    "modes": (
        {"modes": {"type": "array", "minItems": 1,
                   "items": _obj({"rate": _POS, "f": _COEFFICIENT, "g": _COEFFICIENT}, ["rate", "f", "g"])}},
        ["modes"],
    ),
})

_SYSTEM = _by_kind("kind", {
    "two_level": ({"omega0": _NUM, "coupling": {"enum": ["sigma_x", "sigma_y", "sigma_z"]}},
                  ["omega0", "coupling"]),
    "matrix": ({"hamiltonian": _MATRIX, "coupling": _MATRIX}, ["hamiltonian", "coupling"]),
})

_TRUNCATION = _by_kind("kind", {
    "rectangular": ({"nmax": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 0}}},
                    ["nmax"]),
    "triangular": ({"nsum": {"type": "integer", "minimum": 0}}, ["nsum"]),
})

_REFERENCE = _obj({
    "method": {"enum": ["hme", "pme"] + sorted(STOCHASTIC)},
    "truncation": _TRUNCATION,
    "h": _POS,
    "trajectories": {"type": "integer", "minimum": 1},
})

_SCAN = _obj({
    "axis": {"enum": ["nmax", "nsum", "trajectories", "step"]},
    "values": {"type": "array", "minItems": 1, "items": _NONNEG},
    "mode": {"type": "integer", "minimum": 0},
    "per_source": {"type": "boolean"},
    "reference": _REFERENCE,
}, ["axis", "values"])

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "nshops run configuration",
    **_obj({
        "schema": {"const": SCHEMA_VERSION},
        "system": _SYSTEM,
        "initial_state": {"type": "array", "minItems": 1, "items": _COMPLEX},
        "bath": _BATH,
        "method": {"enum": list(METHODS)},
        "truncation": _TRUNCATION,
        "T": _POS,
        "h": _POS,
        "stored_points": {"type": "integer", "minimum": 1},
        "trajectories": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "noise": {"enum": ["auto", "ou", "eigen"]},
        "frame_frequency": _NUM,
        "output": {"type": "string"},
        "scan": _SCAN,
    }, ["schema", "system", "initial_state", "bath", "method", "truncation", "T", "h"]),
}

DEFAULTS = {"stored_points": 1000, "trajectories": 1, "seed": 0, "noise": "auto"}

_PAULI = {
    "sigma_x": [[0, 1], [1, 0]],
    "sigma_y": [[0, [0, -1]], [[0, 1], 0]],
    "sigma_z": [[1, 0], [0, -1]],
}


def _cplx(x) -> complex:
    return complex(x[0], x[1]) if isinstance(x, list) else complex(x)


def _matrix(rows) -> np.ndarray:
    return np.array([[_cplx(x) for x in row] for row in rows], dtype=complex)


def _path(err) -> str:
    parts = [str(p) for p in err.absolute_path]
    return ".".join(parts) if parts else "<root>"


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration; ``data`` is the canonical dictionary."""

    data: dict

    def __getitem__(self, key):
        return self.data[key]

    @property
    def method(self) -> str:
        return self.data["method"]

    @property
    def stochastic(self) -> bool:
        return self.method in STOCHASTIC

    @property
    def n_steps(self) -> int:
        return _steps(self.data["T"], self.data["h"], "h")

    def canonical(self) -> str:
        return canonical_text(self.data)

    def with_overrides(self, **kw) -> "RunConfig":
        data = copy.deepcopy(self.data)
        data.update({k: v for k, v in kw.items() if v is not None})
        return parse_dict(data)

    def system(self) -> SystemModel:
        return build_system(self.data["system"])

    def bath(self) -> BathModel:
        return model_from_dict(self.data["bath"])

    def truncation(self):
        return build_truncation(self.data["truncation"], self.bath().n_modes)

    def frame_frequency(self) -> float:
        if "frame_frequency" in self.data:
            return float(self.data["frame_frequency"])
        sysd = self.data["system"]
        return float(sysd["omega0"]) if sysd["kind"] == "two_level" else 0.0

    def problem(self, truncation=None, h: Optional[float] = None) -> Problem:
        h = self.data["h"] if h is None else h
        n_steps = _steps(self.data["T"], h, "h")
        n_store = self.data["stored_points"]
        if n_steps % n_store:
            raise ConfigError(f"stored_points ({n_store}) must divide the number of steps ({n_steps})",
                              "stored_points")
        psi0 = np.array([_cplx(x) for x in self.data["initial_state"]])
        return Problem(self.system(), self.bath(), psi0, truncation or self.truncation(), self.data["T"],
                       n_steps, n_store, omega0=self.frame_frequency())


def _steps(T, h, key) -> int:
    ratio = T / h
    n = int(round(ratio))
    if n < 1 or abs(ratio - n) > 1e-9 * max(1.0, ratio):
        raise ConfigError(f"step h={h} does not divide horizon T={T}", key)
    return n


def build_system(d: dict) -> SystemModel:
    if d["kind"] == "two_level":
        H = 0.5 * d["omega0"] * _matrix(_PAULI["sigma_z"])
        return SystemModel(H, _matrix(_PAULI[d["coupling"]]))
    return SystemModel(_matrix(d["hamiltonian"]), _matrix(d["coupling"]))


def build_truncation(d: dict, n_modes: int):
    if d["kind"] == "rectangular":
        if len(d["nmax"]) != n_modes:
            raise ConfigError(f"truncation lists {len(d['nmax'])} cutoffs for a bath with {n_modes} modes",
                              "truncation.nmax")
        return Rectangular(tuple(int(n) for n in d["nmax"]))
    return Triangular(int(d["nsum"]), n_modes)


def canonical_text(data: dict) -> str:
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


def parse_dict(data: dict) -> RunConfig:
    """Validate a configuration dictionary and fill defaults."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: (len(list(e.absolute_path)), str(e.message)))
    if errors:
        err = max(errors, key=lambda e: len(list(e.absolute_path)))
        raise ConfigError(err.message, _path(err))
    data = copy.deepcopy(data)
    for k, v in DEFAULTS.items():
        data.setdefault(k, v)
    for key in ("T", "h"):
        if not math.isfinite(data[key]):
            raise ConfigError(f"{key} must be finite", key)
    cfg = RunConfig(data)
    _check_rules(cfg)
    return cfg


def parse_config(text: str) -> RunConfig:
    """Parse JSON text into a validated :class:`RunConfig`."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    return parse_dict(data)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def _check_rules(cfg: RunConfig) -> None:
    data = cfg.data
    # out-of-domain physics (e.g. a pump above threshold) propagates as ModelDomainError
    system = cfg.system()
    try:
        bath = cfg.bath()
    except (TypeError, KeyError) as exc:
        raise ConfigError(str(exc), "bath") from exc
    if len(data["initial_state"]) != system.dim:
        raise ConfigError(f"initial_state has {len(data['initial_state'])} entries, system dimension is "
                          f"{system.dim}", "initial_state")
    if not any(_cplx(x) != 0 for x in data["initial_state"]):
        raise ConfigError("initial_state must be nonzero", "initial_state")
    build_truncation(data["truncation"], bath.n_modes)
    method = data["method"]
    if method == "pme" and not bath.pseudomode_ok:
        raise ConfigError("pme requires f_j = g_j for all modes", "method")
    if method.startswith("psse") and not bath.pseudomode_ok:
        raise ConfigError("psse requires f_j = g_j for all modes", "method")
    if data["noise"] == "ou" and not bath.pseudomode_ok:
        raise ConfigError("ou noise requires f_j = g_j for all modes", "noise")
    n_steps = cfg.n_steps
    if n_steps % data["stored_points"]:
        raise ConfigError(f"stored_points ({data['stored_points']}) must divide the number of steps ({n_steps})",
                          "stored_points")
    scan = data.get("scan")
    if scan:
        axis = scan["axis"]
        ints = axis in ("nmax", "nsum", "trajectories")
        if ints and any(float(v) != int(v) for v in scan["values"]):
            raise ConfigError(f"scan values for axis {axis!r} must be integers", "scan.values")
        if axis in ("step", "trajectories") and min(scan["values"]) <= 0:
            raise ConfigError(f"scan values for axis {axis!r} must be positive", "scan.values")
        if axis == "nmax" and data["truncation"]["kind"] != "rectangular":
            raise ConfigError("nmax scans need a rectangular truncation", "scan.axis")
        if axis == "nsum" and data["truncation"]["kind"] != "triangular":
            raise ConfigError("nsum scans need a triangular truncation", "scan.axis")
        if scan.get("mode", 0) >= bath.n_modes:
            raise ConfigError(f"scan mode {scan['mode']} out of range for {bath.n_modes} modes", "scan.mode")
        if axis == "trajectories" and method not in STOCHASTIC:
            raise ConfigError("trajectory scans need a stochastic method", "scan.axis")
        ref = scan.get("reference", {})
        ref_method = ref.get("method")
        if ref_method in ("pme",) or (ref_method or "").startswith("psse"):
            if not bath.pseudomode_ok:
                raise ConfigError(f"{ref_method} reference requires f_j = g_j for all modes",
                                  "scan.reference.method")
        if "truncation" in ref:
            build_truncation(ref["truncation"], bath.n_modes)
        elif bath.n_modes > 1:
            raise ConfigError("multi-mode scans need an explicit reference truncation",
                              "scan.reference.truncation")
        if "h" in ref:
            _steps(data["T"], ref["h"], "scan.reference.h")
