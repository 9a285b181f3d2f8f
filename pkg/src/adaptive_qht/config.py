"""Experiment configuration: JSON schema, validation and typed accessors."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from .homodyne import PhaseStrategy
from .nullfns import NullFamily
from .states import StateSpec

__all__ = ["CONFIG_SCHEMA", "ConfigError", "ExperimentConfig", "load_config"]

_STATE = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["coherent", "squeezed", "fock", "cat", "vacuum"]},
        "alpha": {
            "oneOf": [
                {"type": "number"},
                {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
            ]
        },
        "intensity": {"type": "number", "minimum": 0},
        "r": {"type": "number", "minimum": 0},
        "theta": {"type": "number"},
        "mean_photons": {"type": "number", "minimum": 0},
        "n": {"type": "integer", "minimum": 0},
        "nmax": {"type": "integer", "minimum": 0},
    },
}

_PAIR = {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 2, "maxItems": 2}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "description": {"type": "string"},
        "state": _STATE,
        "states": {"type": "array", "items": _STATE, "minItems": 1},
        "phases": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {"kind": {"enum": ["random", "grid", "stratified"]}, "P": {"type": "integer", "minimum": 1}},
        },
        "blocks": {"type": "integer", "minimum": 1},
        "per_block": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0, "maximum": 18446744073709551615},
        "targets": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        "elements": {"type": "array", "items": _PAIR, "minItems": 1},
        "diagonal": {"type": "integer", "minimum": 0},
        "square": {"type": "integer", "minimum": 0},
        "family": {"enum": ["I", "II", "III"]},
        "families": {"type": "array", "items": {"enum": ["I", "II", "III"]}, "minItems": 1},
        "M": {"type": "integer", "minimum": 0, "maximum": 64},
        "M_values": {"type": "array", "items": {"type": "integer", "minimum": 0, "maximum": 64}, "minItems": 1},
        "mode": {"enum": ["auto", "real", "complex"]},
        "max_condition": {"type": "number", "exclusiveMinimum": 1},
        "split": {"type": "boolean"},
        "dataset": {"type": "string"},
        "histogram": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "bins": {"type": "integer", "minimum": 1},
                "range": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
            },
        },
        "pathology": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "M_bad": {"type": "integer", "minimum": 1, "maximum": 64},
                "grid_P": {"type": "integer", "minimum": 1},
                "target": {"type": "string"},
            },
        },
    },
}


class ConfigError(ValueError):
    """Invalid experiment configuration."""


def _state_from(d):
    d = dict(d)
    kind = d["kind"]
    if kind == "vacuum":
        return StateSpec.vacuum(d.get("nmax"))
    if "intensity" in d:
        if "alpha" in d:
            raise ConfigError("give either alpha or intensity, not both")
        d["alpha"] = d.pop("intensity") ** 0.5
    allowed = {
        "coherent": {"alpha"},
        "cat": {"alpha"},
        "squeezed": {"r", "theta", "mean_photons"},
        "fock": {"n"},
    }[kind] | {"kind", "nmax"}
    extra = set(d) - allowed
    if extra:
        raise ConfigError(f"keys {sorted(extra)} do not apply to a {kind} state")
    if kind in ("coherent", "cat") and "alpha" not in d:
        raise ConfigError(f"{kind} state needs alpha or intensity")
    if kind == "squeezed" and ("r" in d) == ("mean_photons" in d):
        raise ConfigError("squeezed state needs exactly one of r or mean_photons")
    if kind == "fock" and "n" not in d:
        raise ConfigError("fock state needs n")
    return StateSpec.from_dict(d)


@dataclass
class ExperimentConfig:
    """Validated experiment settings with the documented defaults filled in."""

    raw: dict
    states: list = field(default_factory=list)
    strategy: PhaseStrategy = field(default_factory=PhaseStrategy.random)
    blocks: int = 5
    per_block: int = 1250
    seed: int = 0
    family_kind: str = "I"
    M: int = 10
    mode: str = "auto"
    max_condition: float = 1e12
    split: bool = False

    @property
    def state(self):
        if len(self.states) != 1:
            raise ConfigError("this command needs exactly one state")
        return self.states[0]

    @property
    def family(self):
        return NullFamily(self.family_kind, self.M)

    def get(self, key, default=None):
        return self.raw.get(key, default)

    def elements(self):
        """Requested ``(n, m)`` pairs: ``elements``, else ``diagonal`` or ``square`` up to N."""
        if "elements" in self.raw:
            return [tuple(p) for p in self.raw["elements"]]
        if "square" in self.raw:
            N = self.raw["square"]
            return [(n, m) for n in range(N + 1) for m in range(N + 1)]
        N = self.raw.get("diagonal", 5)
        return [(n, n) for n in range(N + 1)]


def parse_config(raw, seed=None) -> ExperimentConfig:
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from None
    if "state" in raw and "states" in raw:
        raise ConfigError("give either state or states, not both")
    try:
        states = [_state_from(s) for s in raw.get("states", [raw["state"]] if "state" in raw else [])]
        strategy = PhaseStrategy.parse(raw.get("phases", {"kind": "random"}))
    except (ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from None
    cfg = ExperimentConfig(
        raw=raw,
        states=states,
        strategy=strategy,
        blocks=raw.get("blocks", 5),
        per_block=raw.get("per_block", 1250),
        seed=raw.get("seed", 0) if seed is None else seed,
        family_kind=raw.get("family", "I"),
        M=raw.get("M", 10),
        mode=raw.get("mode", "auto"),
        max_condition=float(raw.get("max_condition", 1e12)),
        split=raw.get("split", False),
    )
    if not 0 <= cfg.seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    return cfg


def load_config(path, seed=None) -> ExperimentConfig:
    """Read and validate a JSON config; ``seed`` overrides the file's seed."""
    with open(Path(path)) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    return parse_config(raw, seed)
