"""Flat ``key = value`` configuration files.

Keys may carry dotted namespaces (``problem.sigma = 0.16``).  ``#`` starts a
comment.  Values are parsed as int, float, comma-separated list of numbers,
or left as strings.
"""
from __future__ import annotations

from pathlib import Path
from typing import Any


class ConfigError(ValueError):
    pass


def _parse_scalar(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    return text


def parse_value(text: str) -> Any:
    text = text.strip()
    if "," in text:
        return [_parse_scalar(t.strip()) for t in text.split(",") if t.strip()]
    return _parse_scalar(text)


def parse_config(text: str, source: str = "<string>") -> dict[str, Any]:
    out: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or any(c.isspace() for c in key):
            raise ConfigError(f"{source}:{lineno}: invalid key {key!r}")
        if not value:
            raise ConfigError(f"{source}:{lineno}: missing value for {key!r}")
        out[key] = parse_value(value)
    return out


def load_config(path) -> dict[str, Any]:
    path = Path(path)
    return parse_config(path.read_text(), str(path))


def section(config: dict, prefix: str) -> dict[str, Any]:
    """Entries under ``prefix.`` with the prefix stripped."""
    p = prefix + "."
    return {k[len(p):]: v for k, v in config.items() if k.startswith(p)}
