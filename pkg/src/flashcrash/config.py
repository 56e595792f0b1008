"""Plain-text ``key = value`` config files mapped onto dataclasses."""

from __future__ import annotations

import dataclasses
import enum
import typing
from pathlib import Path
from typing import Any, Mapping, TypeVar

from .errors import ConfigError

T = TypeVar("T")


def parse_key_values(text: str, source: str = "<config>") -> dict[str, str]:
    """Parse ``key = value`` lines. ``#`` starts a comment, blank lines are skipped."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        out[key.replace("-", "_")] = value
    return out


def read_key_values(path: str | Path) -> dict[str, str]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_key_values(text, source=str(path))


def _coerce(value: str, tp: Any, key: str) -> Any:
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin is typing.Union or (origin is not None and str(origin) == "types.UnionType"):
        non_none = [a for a in args if a is not type(None)]
        if value.lower() in ("", "none", "null"):
            return None
        return _coerce(value, non_none[0], key)
    if origin in (tuple, list):
        inner = args[0] if args else float
        items = [v.strip() for v in value.split(",") if v.strip()]
        coerced = [_coerce(v, inner, key) for v in items]
        return tuple(coerced) if origin is tuple else coerced
    try:
        if tp is bool:
            low = value.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        if isinstance(tp, type) and issubclass(tp, enum.Enum):
            for member in tp:
                if value.lower() in (member.name.lower(), str(member.value).lower()):
                    return member
            raise ValueError(value)
        if tp in (int, float, str):
            return tp(value)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {value!r}") from exc
    return value


def apply_overrides(obj: T, values: Mapping[str, str], *, strict: bool = True) -> T:
    """Return a copy of dataclass ``obj`` with string ``values`` coerced onto its fields.

    Unknown keys raise :class:`ConfigError` unless ``strict`` is false.
    """
    hints = typing.get_type_hints(type(obj))
    names = {f.name for f in dataclasses.fields(obj)}
    changes: dict[str, Any] = {}
    for key, value in values.items():
        if key not in names:
            if strict:
                raise ConfigError(f"unknown key {key!r} for {type(obj).__name__}")
            continue
        changes[key] = _coerce(value, hints[key], key)
    try:
        return dataclasses.replace(obj, **changes)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
