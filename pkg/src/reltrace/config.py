"""Flat sectioned ``key = value`` run configuration.

Grammar: INI sections, one scalar or comma-separated list per key, ``#``
comments.  Unknown sections or keys are errors.  ``to_ini`` writes every
key in canonical order so that parse -> serialize -> parse is the identity.
"""

from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, fields, replace

from .errors import ConfigError

# key -> (section, kind)
SCHEMA = {
    "alpha": ("process", "float"),
    "mass": ("process", "float"),
    "dim": ("process", "int"),
    "domain": ("domain", "str"),
    "t_grid": ("time", "floats"),
    "r_grid": ("time", "floats"),
    "paths": ("montecarlo", "int"),
    "step": ("montecarlo", "float"),
    "seed": ("montecarlo", "int"),
    "antithetic": ("montecarlo", "bool"),
    "extrapolate": ("montecarlo", "bool"),
    "workers": ("montecarlo", "int"),
    "chunk_size": ("montecarlo", "int"),
    "grid_h": ("spectral", "float"),
    "eigs": ("spectral", "int"),
    "weyl_index": ("spectral", "int"),
    "tolerance": ("numerics", "float"),
    "cache_dir": ("numerics", "str"),
    "curve": ("fit", "str"),
    "prediction": ("fit", "str"),
    "c2": ("fit", "float"),
    "fix_volume": ("fit", "bool"),
    "extra_exponents": ("fit", "floats"),
    "min_span": ("fit", "float"),
    "curve_column": ("fit", "str"),
    "out": ("output", "str"),
}
SECTIONS = ("process", "domain", "time", "montecarlo", "spectral", "numerics", "fit", "output")


@dataclass(frozen=True)
class RunConfig:
    alpha: float = 1.0
    mass: float = 0.0
    dim: int = 2
    domain: str = "disk:1"
    t_grid: tuple = (0.1, 0.15, 0.2, 0.25, 0.3)
    r_grid: tuple = ()
    paths: int = 10000
    step: float = 0.01
    seed: int = 2024
    antithetic: bool = True
    extrapolate: bool = True
    workers: int = 1
    chunk_size: int = 1024
    grid_h: float = 0.05
    eigs: int = 0
    weyl_index: int = 100
    tolerance: float = 1e-9
    cache_dir: str = ""
    curve: str = ""
    prediction: str = ""
    c2: float = 0.0
    fix_volume: bool = False
    extra_exponents: tuple = ()
    min_span: float = 4.0
    curve_column: str = "value"
    out: str = "out"

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

    def with_overrides(self, **kw) -> "RunConfig":
        clean = {k: coerce(k, v) for k, v in kw.items() if v is not None}
        return replace(self, **clean)


def _format(kind: str, v) -> str:
    if kind == "float":
        return repr(float(v))
    if kind == "floats":
        return ", ".join(repr(float(x)) for x in v)
    if kind == "bool":
        return "true" if v else "false"
    return str(v)


def coerce(key: str, raw):
    """Convert a raw string (or already-typed value) for ``key``."""
    if key not in SCHEMA:
        raise ConfigError(f"unknown key {key!r}")
    kind = SCHEMA[key][1]
    try:
        if kind == "float":
            return float(raw)
        if kind == "int":
            if isinstance(raw, str):
                try:
                    # exact for large seeds; float() would round beyond 2^53
                    return int(raw.strip())
                except ValueError:
                    v = float(raw)
            else:
                v = raw
            if int(v) != v:
                raise ValueError("not an integer")
            return int(v)
        if kind == "bool":
            if isinstance(raw, bool):
                return raw
            s = str(raw).strip().lower()
            if s in ("true", "yes", "1", "on"):
                return True
            if s in ("false", "no", "0", "off"):
                return False
            raise ValueError("not a boolean")
        if kind == "floats":
            if isinstance(raw, str):
                parts = [p.strip() for p in raw.split(",") if p.strip()]
                return tuple(float(p) for p in parts)
            return tuple(float(x) for x in raw)
        return str(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from exc


def parse_config(text: str) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config does not parse: {exc}") from exc
    values = {}
    for section in cp.sections():
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in cp.items(section):
            if key not in SCHEMA:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            if SCHEMA[key][0] != section:
                raise ConfigError(f"key {key!r} belongs in [{SCHEMA[key][0]}], not [{section}]")
            values[key] = coerce(key, raw)
    return RunConfig(**values)


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def to_ini(cfg: RunConfig) -> str:
    lines = []
    d = {f.name: getattr(cfg, f.name) for f in fields(cfg)}
    for section in SECTIONS:
        keys = [k for k, (s, _) in SCHEMA.items() if s == section]
        lines.append(f"[{section}]")
        for k in keys:
            lines.append(f"{k} = {_format(SCHEMA[k][1], d[k])}".rstrip())
        lines.append("")
    return "\n".join(lines)
