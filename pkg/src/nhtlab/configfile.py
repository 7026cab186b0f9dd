"""Plain-text ``key = value`` configuration files.

One assignment per line, ``#`` starts a comment, list values are
comma-separated.  Values stay strings; callers convert.
"""

from __future__ import annotations

from pathlib import Path

from .errors import ConfigError


def parse_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def load(path: str | Path) -> dict[str, str]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_text(text)


def as_list(value: str) -> list[str]:
    value = value.strip().strip("[]")
    return [s.strip() for s in value.split(",") if s.strip()]


def as_floats(value: str, key: str = "value") -> list[float]:
    try:
        return [float(s) for s in as_list(value)]
    except ValueError as exc:
        raise ConfigError(f"{key}: expected comma-separated numbers, got {value!r}") from exc


def as_float(value: str, key: str = "value") -> float:
    vals = as_floats(value, key)
    if len(vals) != 1:
        raise ConfigError(f"{key}: expected a single number, got {value!r}")
    return vals[0]


def as_int(value: str, key: str = "value") -> int:
    try:
        return int(value.strip())
    except ValueError as exc:
        raise ConfigError(f"{key}: expected an integer, got {value!r}") from exc


def as_bool(value: str, key: str = "value") -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {value!r}")
