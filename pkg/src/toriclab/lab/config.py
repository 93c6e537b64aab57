"""Experiment config files: one ``key = value`` per line, ``#`` starts a comment.

Keys use underscores; the CLI flag ``--p-grid`` corresponds to key ``p_grid``.
Values stay strings here and are typed by whoever consumes them.
"""
from __future__ import annotations

import hashlib
import json
import re

from ..errors import ConfigError

_KEY = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def parse_config(text: str, source: str = "<config>") -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if not _KEY.match(key):
            raise ConfigError(f"{source}:{lineno}: bad key {key!r}")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def load_config(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), str(path))


def format_config(cfg: dict) -> str:
    return "".join(f"{k} = {v}\n" for k, v in sorted(cfg.items()))


def config_hash(cfg: dict) -> str:
    """SHA-256 of the canonical JSON form of a resolved config."""
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def parse_list(value, cast=float) -> list:
    if isinstance(value, (list, tuple)):
        return [cast(v) for v in value]
    try:
        return [cast(v) for v in str(value).replace(";", ",").split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad list value {value!r}: {exc}") from None


def parse_grid(value) -> list:
    """``"0.01:0.25:0.02"`` (start:stop:step, inclusive) or a comma list."""
    text = str(value)
    if ":" in text:
        try:
            start, stop, step = (float(v) for v in text.split(":"))
        except ValueError:
            raise ConfigError(f"bad grid {value!r}; expected start:stop:step") from None
        if step <= 0 or stop < start:
            raise ConfigError(f"bad grid {value!r}")
        count = int(round((stop - start) / step)) + 1
        return [round(start + k * step, 10) for k in range(count)]
    return parse_list(text)


__all__ = ["parse_config", "load_config", "format_config", "config_hash", "parse_list", "parse_grid"]
