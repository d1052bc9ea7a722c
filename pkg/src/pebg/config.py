"""Flat ``key = value`` configuration files.

Blank lines and ``#`` comments are ignored.  Keys may carry a stage prefix
(``pretrain.d_v``, ``kt.hidden``); unprefixed keys apply to whichever stage
reads the file.  Defaults < config file < command-line flags.

``PEBG_CONFIG`` names a config file used when no ``--config`` is given.
"""

from __future__ import annotations

import dataclasses
import os
import typing

from .errors import ConfigError

ENV_CONFIG = "PEBG_CONFIG"
ALIASES = {"lambda": "lam"}


def read_config(path) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            if not key:
                raise ConfigError(f"{path}:{lineno}: empty key")
            out[key] = value
    return out


def default_config_path() -> str | None:
    return os.environ.get(ENV_CONFIG) or None


def stage_values(raw: dict[str, str], stage: str, known: set[str]) -> dict[str, str]:
    """Values for ``stage``: its prefixed keys plus unprefixed keys it knows."""
    out = {}
    for key, value in raw.items():
        if "." in key:
            prefix, name = key.split(".", 1)
            if prefix != stage:
                continue
        else:
            name = key
        name = ALIASES.get(name, name)
        if name in known:
            out[name] = value
        elif "." in key:
            raise ConfigError(f"unknown {stage} config key {key!r}")
    return out


def _convert(value: str, target, name: str):
    origin = typing.get_origin(target)
    try:
        if target is bool:
            lowered = value.lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        if target is int:
            return int(value)
        if target is float:
            return float(value)
        if target in (frozenset, tuple) or origin in (frozenset, tuple):
            return [v.strip() for v in value.split(",") if v.strip()]
        return value
    except ValueError:
        raise ConfigError(f"bad value for {name}: {value!r}") from None


def build(cls, values: dict[str, object], strict: bool = True):
    """Instantiate dataclass ``cls`` from string (or already typed) values."""
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in values.items():
        key = ALIASES.get(key, key)
        if key not in names:
            if strict:
                raise ConfigError(f"unknown {cls.__name__} key {key!r}")
            continue
        kwargs[key] = _convert(value, hints[key], key) if isinstance(value, str) else value
    return cls(**kwargs)


def field_names(cls) -> set[str]:
    return {f.name for f in dataclasses.fields(cls)} | {a for a, t in ALIASES.items()
                                                        if t in {f.name for f in dataclasses.fields(cls)}}


def fingerprint(values: dict) -> str:
    import hashlib

    text = "\n".join(f"{k}={values[k]}" for k in sorted(values))
    return hashlib.sha256(text.encode()).hexdigest()[:16]
