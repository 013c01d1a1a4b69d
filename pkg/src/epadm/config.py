"""INI run configuration with a fixed schema.

Sections and keys (all optional except ``scenario.name``)::

    [scenario]    name, t_end, plus scenario parameters (amplitude, speed, ...)
    [grid]        dim, points, extent, fd_order, interp_order
    [eos]         kind, m, K, Gamma
    [background]  name
    [frame]       kind, velocity, amplitude, omega
    [numerics]    safety, dt, hyperdissipation, hyper_order, quadrature
    [output]      directory, cadence, fields, snapshots
    [verify]      suite, seed
    [loop.NAME]   center, radius, markers

Values are Python literals (numbers, tuples, booleans) or bare strings.
Unknown sections or keys are rejected.
"""

from __future__ import annotations

import ast
import configparser
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

SCENARIO_PARAMS = {
    "t_end", "output_every", "amplitude", "mode", "direction", "n0", "velocity", "comoving",
    "speed", "width", "cap", "center", "loop_radius", "markers", "balanced", "shift",
    "shift_profile", "perturbation", "frame_velocity",
}

SCHEMA = {
    "scenario": {"name"} | SCENARIO_PARAMS,
    "grid": {"dim", "points", "extent", "fd_order", "interp_order"},
    "eos": {"kind", "m", "K", "Gamma"},
    "background": {"name"},
    "frame": {"kind", "velocity", "amplitude", "omega"},
    "numerics": {"safety", "dt", "hyperdissipation", "hyper_order", "quadrature"},
    "output": {"directory", "cadence", "fields", "snapshots"},
    "verify": {"suite", "seed"},
}
LOOP_KEYS = {"center", "radius", "markers"}
OUTPUT_FIELDS = ("J0", "u", "m")


class ConfigError(ValueError):
    pass


def parse_value(text: str):
    text = text.strip()
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        low = text.lower()
        if low in ("true", "yes", "on"):
            return True
        if low in ("false", "no", "off"):
            return False
        if low in ("none", ""):
            return None
        return text


@dataclass
class RunConfig:
    sections: dict = field(default_factory=dict)
    source: Optional[str] = None

    def get(self, section: str, key: str, default=None):
        return self.sections.get(section, {}).get(key, default)

    def section(self, name: str) -> dict:
        return dict(self.sections.get(name, {}))

    def loops(self) -> dict:
        return {k.split(".", 1)[1]: v for k, v in self.sections.items() if k.startswith("loop.")}


def _key_line(lines, section, key):
    current = None
    for i, line in enumerate(lines, 1):
        m = re.match(r"\s*\[(.+?)\]", line)
        if m:
            current = m.group(1).strip()
            continue
        if current == section and re.match(rf"\s*{re.escape(key)}\s*[=:]", line):
            return i
    return None


def _validate(sections: dict, lines=()) -> None:
    for sec, keys in sections.items():
        if sec.startswith("loop."):
            allowed = LOOP_KEYS
            if not sec[5:]:
                raise ConfigError("loop section needs a name: [loop.NAME]")
        elif sec in SCHEMA:
            allowed = SCHEMA[sec]
        else:
            raise ConfigError(f"unknown section [{sec}]")
        for key in keys:
            if key not in allowed:
                where = _key_line(lines, sec, key)
                loc = f"line {where}: " if where else ""
                raise ConfigError(f"{loc}unknown key {key!r} in [{sec}]; allowed: {sorted(allowed)}")
    fields = sections.get("output", {}).get("fields")
    if fields is not None:
        names = [fields] if isinstance(fields, str) else list(fields)
        bad = [f for f in names if f not in OUTPUT_FIELDS]
        if bad:
            raise ConfigError(f"unknown output fields {bad}; choose from {OUTPUT_FIELDS}")


def load_config(path=None, overrides=()) -> RunConfig:
    """Read ``path`` (if any), apply ``section.key=value`` overrides, validate."""
    sections: dict = {}
    lines: list = []
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        text = p.read_text()
        lines = text.splitlines()
        cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        cp.optionxform = str
        try:
            cp.read_string(text, source=str(p))
        except configparser.Error as exc:
            raise ConfigError(f"{p}: {exc}") from exc
        if cp.defaults():
            raise ConfigError("a [DEFAULT] section is not supported")
        for sec in cp.sections():
            sections[sec] = {k: parse_value(v) for k, v in cp.items(sec)}
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        lhs, rhs = item.split("=", 1)
        if "." not in lhs:
            raise ConfigError(f"override {item!r} needs a section: section.key=value")
        sec, key = lhs.strip().rsplit(".", 1)
        sections.setdefault(sec, {})[key] = parse_value(rhs)
    _validate(sections, lines)
    return RunConfig(sections, None if path is None else str(path))
