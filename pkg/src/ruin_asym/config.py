"""Scenario files: a sectioned key-value text format, plus built-in presets.

Example::

    [model]
    byclaims = true
    r = 0.1
    t = 10
    T = 10

    [main_claim]
    law = pareto(2, 2.3)

    [run]
    samples = 100000
    x_grid = logspace:20:500:15
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .asym import Scenario
from .dist import DistributionError, Exponential, Pareto, PointMass, Weibull
from .renewal import RenewalSpec


class ConfigError(ValueError):
    """Bad scenario file.  ``lineno`` and ``key`` locate the problem when known."""

    def __init__(self, message: str, *, lineno: Optional[int] = None, key: Optional[str] = None,
                 source: str = "<config>"):
        where = f"{source}:{lineno}: " if lineno is not None else f"{source}: "
        super().__init__(where + message)
        self.lineno = lineno
        self.key = key


LAW_SECTIONS = ("main_claim", "by_claim", "interarrival", "delay")
KEYS = {
    "model": {"byclaims", "r", "t", "T"},
    "main_claim": {"law"},
    "by_claim": {"law"},
    "interarrival": {"law"},
    "delay": {"law"},
    "run": {"samples", "seed", "workers", "x_grid", "quad_tol"},
}

_LAWS = {
    "pareto": (Pareto, 2),
    "weibull": (Weibull, 2),
    "exp": (Exponential, 1),
    "zero": (PointMass, 0),
}
_LAW_RE = re.compile(r"^\s*([a-z]+)\s*\((.*)\)\s*$")


@dataclass(frozen=True)
class RunOptions:
    samples: int = 100_000
    seed: int = 12345
    workers: int = 1
    x_grid: tuple = field(default_factory=lambda: tuple(np.geomspace(20.0, 500.0, 15)))
    quad_tol: float = 1e-8


def parse_law(text: str):
    """``pareto(kappa, alpha)``, ``weibull(kappa, alpha)``, ``exp(rate)`` or ``zero()``."""
    m = _LAW_RE.match(text)
    if not m or m.group(1) not in _LAWS:
        raise ValueError(f"unknown law {text!r}; expected pareto(k, a), weibull(k, a), exp(rate) or zero()")
    cls, arity = _LAWS[m.group(1)]
    raw = [a.strip() for a in m.group(2).split(",")] if m.group(2).strip() else []
    if len(raw) != arity:
        raise ValueError(f"{m.group(1)} takes {arity} parameter(s), got {len(raw)}")
    return cls(*(float(a) for a in raw))


def parse_x_grid(text: str) -> tuple:
    """A comma list, or ``logspace:lo:hi:count`` with ``lo`` and ``hi`` given as values."""
    text = text.strip()
    if text.startswith("logspace:"):
        parts = text.split(":")
        if len(parts) != 4:
            raise ValueError("logspace grid needs the form logspace:lo:hi:count")
        lo, hi, count = float(parts[1]), float(parts[2]), int(parts[3])
        if not (0 < lo < hi and count >= 1):
            raise ValueError("logspace grid needs 0 < lo < hi and count >= 1")
        return tuple(float(v) for v in np.geomspace(lo, hi, count))
    values = tuple(float(v) for v in text.split(",") if v.strip())
    if not values:
        raise ValueError("x grid is empty")
    return values


def _line_numbers(text: str) -> dict:
    """``(section, key) -> line`` and ``(section, None) -> header line``."""
    where, section = {}, None
    for i, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s or s[0] in "#;":
            continue
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip()
            where.setdefault((section, None), i)
        elif section is not None:
            key = re.split(r"[=:]", s, maxsplit=1)[0].strip()
            where.setdefault((section, key), i)
    return where


def _bool(value: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def parse_text(text: str, source: str = "<config>") -> tuple:
    """Parse a scenario document into ``(Scenario, RunOptions)``."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keep T distinct from t
    try:
        cp.read_string(text, source=source)
    except configparser.MissingSectionHeaderError as err:
        raise ConfigError("content before the first [section]", lineno=err.lineno, source=source) from err
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as err:
        raise ConfigError(err.message.split(": ", 1)[-1], lineno=err.lineno, source=source) from err
    except configparser.ParsingError as err:
        lineno = err.errors[0][0] if err.errors else None
        raise ConfigError("malformed line", lineno=lineno, source=source) from err

    lines = _line_numbers(text)

    def fail(msg, section, key=None):
        raise ConfigError(msg, lineno=lines.get((section, key)), key=key, source=source)

    for section in cp.sections():
        if section not in KEYS:
            fail(f"unknown section [{section}]", section)
        for key in cp[section]:
            if key not in KEYS[section]:
                fail(f"unknown key {key!r} in [{section}]", section, key)

    def get(section, key, conv, default=None, required=False):
        if not cp.has_option(section, key):
            if required:
                line = lines.get((section, None))
                raise ConfigError(f"missing key {key!r} in [{section}]", lineno=line, key=key, source=source)
            return default
        try:
            return conv(cp[section][key])
        except (ValueError, DistributionError) as err:
            fail(f"{section}.{key}: {err}", section, key)

    if not cp.has_section("model"):
        raise ConfigError("missing [model] section", source=source)
    byclaims = get("model", "byclaims", _bool, default=False)
    r = get("model", "r", float, required=True)
    t = get("model", "t", float, required=True)
    T = get("model", "T", float, default=t)

    laws = {}
    for section in LAW_SECTIONS:
        needed = section in ("main_claim", "interarrival") or (byclaims and section in ("by_claim", "delay"))
        if not cp.has_section(section):
            if needed:
                raise ConfigError(f"missing [{section}] section", key=section, source=source)
            continue
        if not byclaims and section in ("by_claim", "delay"):
            fail(f"[{section}] given but byclaims = false", section)
        laws[section] = get(section, "law", parse_law, required=True)

    try:
        scenario = Scenario(
            main_claim=laws["main_claim"],
            renewal=RenewalSpec(laws["interarrival"]),
            r=r, t=t, T=T,
            by_claim=laws.get("by_claim"),
            delay=laws.get("delay"),
        )
    except DistributionError as err:
        raise ConfigError(f"interarrival: {err}", lineno=lines.get(("interarrival", "law")),
                          key="interarrival", source=source) from err
    except ValueError as err:
        raise ConfigError(f"model: {err}", lineno=lines.get(("model", None)), key="model", source=source) from err

    defaults = RunOptions()
    opts = RunOptions(
        samples=get("run", "samples", int, defaults.samples),
        seed=get("run", "seed", int, defaults.seed),
        workers=get("run", "workers", int, defaults.workers),
        x_grid=get("run", "x_grid", parse_x_grid, defaults.x_grid),
        quad_tol=get("run", "quad_tol", float, defaults.quad_tol),
    )
    if opts.samples < 1:
        fail("run.samples must be >= 1", "run", "samples")
    if opts.workers < 1:
        fail("run.workers must be >= 1", "run", "workers")
    if not opts.quad_tol > 0:
        fail("run.quad_tol must be positive", "run", "quad_tol")
    return scenario, opts


def parse_scenario(path) -> tuple:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise ConfigError(f"cannot read: {err.strerror}", source=str(path)) from err
    return parse_text(text, source=str(path))


PRESETS = {
    "pareto-s4": """\
[model]
byclaims = true
r = 0.1
t = 10
T = 10

[main_claim]
law = pareto(2, 2.3)

[by_claim]
law = pareto(2, 2.3)

[interarrival]
law = exp(0.2)

[delay]
law = exp(0.2)

[run]
samples = 100000
seed = 12345
workers = 1
x_grid = logspace:20:500:15
""",
    "weibull-s4": """\
[model]
byclaims = true
r = 0.1
t = 10
T = 10

[main_claim]
law = weibull(1, 0.3)

[by_claim]
law = weibull(1, 0.3)

[interarrival]
law = exp(0.1)

[delay]
law = exp(0.1)

[run]
samples = 100000
seed = 12345
workers = 1
x_grid = logspace:5:3000:15
""",
}


def load_preset(name: str) -> tuple:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(sorted(PRESETS))}", source="<preset>")
    return parse_text(PRESETS[name], source=f"<preset {name}>")


def with_overrides(opts: RunOptions, **changes) -> RunOptions:
    return replace(opts, **{k: v for k, v in changes.items() if v is not None})
