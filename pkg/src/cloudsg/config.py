"""Sectioned key=value run configuration with typed validation.

The format is INI-like: ``[section]`` headers, ``key = value`` lines, ``#``
comments. Every key has a declared type and default; unknown sections or
keys, and values of the wrong type, are rejected with the offending line
number. Parsing the serialized form of a config reproduces it exactly.
"""

import math
from dataclasses import dataclass, field

from cloudsg.scenarios import ScenarioConfig


class ConfigError(ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


def _parse_bool(tok):
    low = tok.lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {tok!r}")


def _parse_int_tuple(tok):
    return tuple(int(p) for p in tok.replace("x", ",").split(",") if p.strip())


_TYPES = {
    int: (int, str),
    float: (float, lambda v: repr(float(v))),
    bool: (_parse_bool, lambda v: "true" if v else "false"),
    str: (lambda t: t, str),
    tuple: (_parse_int_tuple, lambda v: ",".join(str(n) for n in v)),
}

# section -> key -> (type, default)
SCHEMA = {
    "scenario": {
        "name": (str, "warm_bubble"),
        "dim": (int, 2),
        "cells": (tuple, (40, 40)),
        "nu": (float, 0.0),
        "seed": (int, 0),
        "perturb": (str, "none"),
        "literal_bubble": (bool, False),
        "bottom": (str, "open"),
    },
    "time": {
        "t_end": (float, 10.0),
        "dt_max": (float, math.inf),
        "cfl": (float, 0.5),
    },
    "solver": {
        "mu_m": (float, 1.0e-3),
        "mu_h": (float, 1.0e-2),
        "mu_q": (float, 1.0e-2),
        "gmres_tol": (float, 1.0e-10),
        "rk_rtol": (float, 1.0e-6),
        "rk_atol": (float, 1.0e-10),
        "couple": (bool, True),
    },
    "stochastic": {
        "modes": (int, 0),
        "method": (str, "galerkin"),
    },
    "output": {
        "directory": (str, "out"),
        "snapshot_interval": (float, math.inf),
        "diagnostics_interval": (float, 1.0),
    },
}


@dataclass
class RunConfig:
    """Validated configuration; sections are plain dicts per the schema."""

    scenario: dict = field(default_factory=dict)
    time: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    stochastic: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)

    def __post_init__(self):
        for sec, keys in SCHEMA.items():
            current = getattr(self, sec)
            for key, (typ, default) in keys.items():
                current.setdefault(key, default)
            for key in current:
                if key not in keys:
                    raise ConfigError(f"unknown key {key!r} in [{sec}]")
        if self.stochastic["method"] not in ("galerkin", "collocation"):
            raise ConfigError(
                f"unknown stochastic method {self.stochastic['method']!r}")
        if self.stochastic["modes"] < 0:
            raise ConfigError("stochastic modes must be nonnegative")
        if any(n <= 0 for n in self.scenario["cells"]):
            raise ConfigError(f"cells must be positive, got "
                              f"{self.scenario['cells']}")

    def scenario_config(self) -> ScenarioConfig:
        s = self.scenario
        return ScenarioConfig(
            scenario=s["name"], dim=s["dim"], cells=tuple(s["cells"]),
            nu=s["nu"], seed=s["seed"], t_end=self.time["t_end"],
            output_interval=self.output["diagnostics_interval"],
            perturb=s["perturb"], literal_bubble=s["literal_bubble"],
            bottom=s["bottom"])

    def replace(self, section, **updates):
        """Copy with some keys of one section changed."""
        data = {sec: dict(getattr(self, sec)) for sec in SCHEMA}
        data[section].update(updates)
        return RunConfig(**data)


def parse_config(text: str) -> RunConfig:
    data = {sec: {} for sec in SCHEMA}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in SCHEMA:
                raise ConfigError(f"unknown section [{section}]", lineno)
            continue
        if "=" not in line:
            raise ConfigError(f"expected key = value, got {line!r}", lineno)
        if section is None:
            raise ConfigError("key outside of any section", lineno)
        key, _, value = (p.strip() for p in line.partition("="))
        if key not in SCHEMA[section]:
            raise ConfigError(f"unknown key {key!r} in [{section}]", lineno)
        typ = SCHEMA[section][key][0]
        parser = _TYPES[typ][0]
        try:
            data[section][key] = parser(value)
        except (ValueError, TypeError) as exc:
            raise ConfigError(
                f"bad value for {key!r}: {exc}", lineno) from None
    try:
        return RunConfig(**data)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def serialize_config(config: RunConfig) -> str:
    lines = []
    for sec, keys in SCHEMA.items():
        lines.append(f"[{sec}]")
        current = getattr(config, sec)
        for key, (typ, _default) in keys.items():
            fmt = _TYPES[typ][1]
            lines.append(f"{key} = {fmt(current[key])}")
        lines.append("")
    return "\n".join(lines)


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())
