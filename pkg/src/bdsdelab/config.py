"""Flat key = value scenario configs and the run manifest."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

from .errors import InvalidArgument

# key -> (type, default); None default means "scenario decides"
CONFIG_KEYS: dict[str, tuple[type, Any]] = {
    "scenario": (str, None),
    "seed": (int, 42),
    "T": (float, None),
    "n_steps": (int, None),
    "m_outer": (int, None),
    "n_inner": (int, None),
    "degree": (int, 3),
    "picard_inner": (int, 3),
    "tol_iter": (float, 1e-3),
    "i_max": (int, 25),
    "epsilon": (float, 0.02),
    "p": (float, 0.01),
    # scenario-specific knobs
    "a": (float, 1.0),
    "c0": (float, 0.0),
    "xi0": (float, 1.0),
    "f_shift": (float, 0.5),
    "xi_shift": (float, 0.1),
    "out_dir": (str, "./out"),
}

_RANGES = {
    "n_steps": lambda v: v >= 1,
    "m_outer": lambda v: v >= 1,
    "n_inner": lambda v: v >= 2,
    "degree": lambda v: 0 <= v <= 10,
    "picard_inner": lambda v: v >= 1,
    "tol_iter": lambda v: v > 0,
    "i_max": lambda v: v >= 1,
    "epsilon": lambda v: v > 0,
    "p": lambda v: 0 < v < 1,
    "T": lambda v: v > 0,
    "seed": lambda v: 0 <= v < 2 ** 64,
}


def parse_config_text(text: str) -> dict:
    """Parse flat ``key = value`` lines; '#' starts a comment; unknown keys reject."""
    values: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidArgument(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = (part.strip() for part in line.partition("="))
        if key not in CONFIG_KEYS:
            raise InvalidArgument(f"line {lineno}: unknown config key {key!r}")
        typ, _default = CONFIG_KEYS[key]
        try:
            parsed = typ(val) if typ is not int else int(val, 0)
        except ValueError:
            raise InvalidArgument(f"line {lineno}: cannot parse {key} value {val!r} as {typ.__name__}")
        check = _RANGES.get(key)
        if check is not None and not check(parsed):
            raise InvalidArgument(f"line {lineno}: {key} = {parsed} is out of range")
        values[key] = parsed
    if "scenario" not in values:
        raise InvalidArgument("config must set a scenario")
    return values


def load_config(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def resolve(config: dict, scenario_defaults: dict) -> dict:
    """Global defaults, then scenario defaults, then explicit config values."""
    out = {k: d for k, (_t, d) in CONFIG_KEYS.items() if d is not None}
    out.update(scenario_defaults)
    out.update(config)
    return out


@dataclass
class RunManifest:
    scenario: str
    resolved_config: dict
    code_version: str
    rng_method: str
    duration_seconds: float
    checks: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "resolved_config": self.resolved_config,
            "code_version": self.code_version,
            "rng_method": self.rng_method,
            "duration_seconds": self.duration_seconds,
            "checks": self.checks,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        d = json.loads(text)
        return cls(scenario=d["scenario"], resolved_config=d["resolved_config"],
                   code_version=d["code_version"], rng_method=d["rng_method"],
                   duration_seconds=d["duration_seconds"], checks=d["checks"])
