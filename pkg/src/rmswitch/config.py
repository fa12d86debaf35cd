"""Run configuration files (INI dialect) and presets.

A file looks like::

    [game]
    b1 = 0.2
    b2 = 0.3

    [mutation]
    mu1 = 0.01
    mu2 = 0.26

    [generator]
    q12 = 10
    q21 = 10

    [sim]
    dt = 0.001
    horizon = 100
    sample_every = 0.1
    seed = 42
    paths = 200

    [run]
    x0 = 0.7
    i0 = 1

Values are layered preset < file < command-line flags and re-validated after
merging. Errors name the file, line, section and key.
"""

import configparser
import copy
import re

from .errors import ValidationError

SECTIONS = {
    "game": {"b1": float, "b2": float},
    "mutation": {"mu1": float, "mu2": float},
    "generator": {"q12": float, "q21": float},
    "sim": {"dt": float, "horizon": float, "sample_every": float, "seed": int, "paths": int},
    "run": {
        "x0": float,
        "i0": int,
        "mu": float,
        "threshold": str,
        "direction": str,
        "bins": int,
        "burn_in": float,
        "p": float,
        "x0_grid": str,
        "workers": int,
    },
}

DEFAULTS = {
    "sim": {"dt": 1e-3, "horizon": 100.0, "sample_every": 0.1, "seed": 42, "paths": 200},
    "run": {"i0": 1},
}

PRESETS = {
    "figure1": {
        "game": {"b1": 0.2, "b2": 0.3},
        "mutation": {"mu1": 0.01, "mu2": 0.26},
        "generator": {"q12": 10.0, "q21": 10.0},
        "sim": {"horizon": 100.0, "seed": 42},
        "run": {"x0": 0.7, "i0": 1},
    },
}


class ConfigError(ValidationError):
    def __init__(self, where, field, message):
        self.where = where
        super().__init__(field, message)
        self.args = (f"{where}: {field}: {message}" if where else f"{field}: {message}",)

    def __str__(self):
        return self.args[0]


def _line_index(text):
    """Map (section, key) to the 1-based line where it is defined."""
    index = {}
    section = None
    for n, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        m = re.match(r"^\[([^\]]+)\]", stripped)
        if m:
            section = m.group(1).strip()
            index[(section, None)] = n
            continue
        m = re.match(r"^([^=:#;\s][^=:]*?)\s*[=:]", stripped)
        if m and section is not None:
            index[(section, m.group(1).strip().lower())] = n
    return index


def load_file(path):
    """Parse a config file into a nested dict of typed values."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    lines = _line_index(text)
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        lineno = getattr(exc, "lineno", None)
        raise ConfigError(f"{path}:{lineno}" if lineno else str(path), "syntax", str(exc).splitlines()[0])

    out = {}
    for section in parser.sections():
        where = f"{path}:{lines.get((section, None), '?')}"
        if section not in SECTIONS:
            raise ConfigError(where, f"[{section}]", f"unknown section; expected one of {sorted(SECTIONS)}")
        for key, raw in parser.items(section):
            where = f"{path}:{lines.get((section, key), '?')}"
            kind = SECTIONS[section].get(key)
            if kind is None:
                raise ConfigError(where, f"[{section}] {key}", "unknown key")
            try:
                value = kind(raw)
            except ValueError:
                raise ConfigError(where, f"[{section}] {key}", f"expected {kind.__name__}, got {raw!r}")
            out.setdefault(section, {})[key] = value
    out["_lines"] = {f"{s}.{k}": f"{path}:{n}" for (s, k), n in lines.items() if k is not None}
    return out


def merge(*layers):
    """Later layers override earlier ones key by key."""
    merged = {s: {} for s in SECTIONS}
    origins = {}
    for layer in layers:
        if not layer:
            continue
        lines = layer.get("_lines", {})
        for section, values in layer.items():
            if section == "_lines":
                continue
            for key, value in values.items():
                if value is None:
                    continue
                merged[section][key] = value
                name = f"{section}.{key}"
                if name in lines:
                    origins[name] = lines[name]
                else:
                    origins.pop(name, None)
    merged["_lines"] = origins
    return merged


def resolve(preset=None, path=None, overrides=None):
    layers = [copy.deepcopy(DEFAULTS)]
    if preset is not None:
        if preset not in PRESETS:
            raise ValidationError("preset", f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        layers.append(copy.deepcopy(PRESETS[preset]))
    if path is not None:
        layers.append(load_file(path))
    layers.append(overrides or {})
    return merge(*layers)


def where(cfg, section, key):
    """Source location of a merged value, or "" if it came from flags/defaults."""
    return cfg.get("_lines", {}).get(f"{section}.{key}", "")


def public(cfg):
    """The merged configuration without bookkeeping entries, for echoing."""
    return {s: dict(v) for s, v in cfg.items() if not s.startswith("_") and v}
