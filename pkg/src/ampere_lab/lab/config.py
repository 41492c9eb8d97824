"""JSON configuration: schema, validation and overrides.

A config is one JSON object::

    {
      "model":  {"kind": "twist", "rho_twist": 0.5},
      "domain": {"bbox": [[-0.6, 0.6], [-0.6, 0.6], [-0.6, 0.6], [-0.6, 0.6]],
                 "resolutions": [9, 17],
                 "omega": {"shape": "ball", "radius": 0.5}},
      "experiment": "cln",
      "params": {"pairs": 5},
      "seed": 0,
      "tolerances": {"tol": 1e-6},
      "output_dir": "out/cln"
    }

Only ``model`` and ``domain`` are required.  ``omega`` defaults to the whole
box; a ball is centred at the box centre unless ``center`` is given.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field

import jsonschema
import numpy as np

from ..errors import LabError
from ..grid import GridDomain, ball_rho, build_domain
from ..structure import ModelSpec

_NUM = {"type": "number"}
_INTERVAL = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}

SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "ampere-lab config",
    "type": "object",
    "required": ["model", "domain"],
    "additionalProperties": False,
    "properties": {
        "model": {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {"kind": {"enum": ["standard", "twist"]}, "rho_twist": _NUM},
        },
        "domain": {
            "type": "object",
            "required": ["bbox", "resolutions"],
            "additionalProperties": False,
            "properties": {
                "bbox": {"type": "array", "items": _INTERVAL, "minItems": 4, "maxItems": 4},
                "resolutions": {"type": "array", "minItems": 1,
                                "items": {"type": "integer", "minimum": 5}},
                "omega": {
                    "type": "object",
                    "required": ["shape"],
                    "additionalProperties": False,
                    "properties": {
                        "shape": {"enum": ["ball", "box"]},
                        "radius": {"type": "number", "exclusiveMinimum": 0},
                        "center": {"type": "array", "items": _NUM, "minItems": 4, "maxItems": 4},
                    },
                },
            },
        },
        "experiment": {"type": "string"},
        "params": {"type": "object"},
        "seed": {"type": "integer", "minimum": 0},
        "tolerances": {"type": "object", "additionalProperties": _NUM},
        "output_dir": {"type": "string"},
    },
}


class ConfigError(LabError):
    """Invalid configuration (usage error)."""


def schema_text() -> str:
    return json.dumps(SCHEMA, indent=2)


@dataclass
class LabConfig:
    model: ModelSpec
    bbox: list
    resolutions: list
    omega: dict = field(default_factory=lambda: {"shape": "box"})
    experiment: str | None = None
    params: dict = field(default_factory=dict)
    seed: int = 0
    tolerances: dict = field(default_factory=dict)
    output_dir: str = "out"

    @classmethod
    def from_dict(cls, raw: dict) -> "LabConfig":
        validate(raw)
        dom = raw["domain"]
        return cls(ModelSpec.from_dict(raw["model"]),
                   [list(map(float, iv)) for iv in dom["bbox"]],
                   list(dom["resolutions"]),
                   copy.deepcopy(dom.get("omega", {"shape": "box"})),
                   raw.get("experiment"),
                   copy.deepcopy(raw.get("params", {})),
                   int(raw.get("seed", 0)),
                   dict(raw.get("tolerances", {})),
                   raw.get("output_dir", "out"))

    def to_dict(self) -> dict:
        out = {"model": self.model.to_dict(),
               "domain": {"bbox": self.bbox, "resolutions": list(self.resolutions),
                          "omega": self.omega},
               "params": self.params, "seed": self.seed, "tolerances": self.tolerances,
               "output_dir": self.output_dir}
        if self.experiment is not None:
            out["experiment"] = self.experiment
        return out

    def override(self, resolution=None, tol=None, seed=None, out_dir=None) -> "LabConfig":
        new = copy.deepcopy(self)
        if resolution is not None:
            new.resolutions = [int(resolution)]
        if tol is not None:
            new.tolerances["tol"] = float(tol)
        if seed is not None:
            new.seed = int(seed)
        if out_dir is not None:
            new.output_dir = str(out_dir)
        validate(new.to_dict())
        return new

    def domain(self, n: int) -> GridDomain:
        rho = None
        if self.omega.get("shape") == "ball":
            centre = self.omega.get("center") or [0.5 * (lo + hi) for lo, hi in self.bbox]
            rho = ball_rho(float(self.omega.get("radius", 1.0)), centre)
        return build_domain(self.bbox, n, rho)

    def omega_mask(self, dom: GridDomain) -> np.ndarray:
        return dom.inside if self.omega.get("shape") == "ball" else dom.interior_mask


def validate(raw: dict) -> None:
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {path}: {exc.message}") from None
    res = raw["domain"]["resolutions"]
    if any(b <= a for a, b in zip(res, res[1:])):
        raise ConfigError("config invalid at domain/resolutions: must be strictly increasing")
    for lo, hi in raw["domain"]["bbox"]:
        if not hi > lo:
            raise ConfigError("config invalid at domain/bbox: each interval needs lo < hi")
    m = raw["model"]
    if m["kind"] == "twist" and "rho_twist" not in m:
        raise ConfigError("config invalid at model: twist needs rho_twist")


def load_config(path) -> LabConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return LabConfig.from_dict(raw)
