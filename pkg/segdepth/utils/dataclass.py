"""Dataclass helpers.

Help

- Describing configuration in Python `dataclass` and serialising it
  with :py:mod:`dataclasses_json`

- Reading and writing the same dataclasses as flat `key=value` text,
  the format of config files and of the config block inside checkpoints
"""
import dataclasses
import enum
import io
import types
import typing
from pathlib import Path
from typing import Any, Type, TypeVar

from dotenv import dotenv_values


T = TypeVar("T")


class KeyValueError(Exception):
    """A key=value entry does not parse or does not belong to the target."""


def read_key_value_text(text: str) -> dict[str, str]:
    """Parse `key=value` lines with `#` comments."""
    values = dotenv_values(stream=io.StringIO(text), interpolate=False)
    missing = [k for k, v in values.items() if v is None]
    if missing:
        raise KeyValueError(f"Entries without a value: {', '.join(missing)}")
    return dict(values)


def read_key_value_file(path: Path) -> dict[str, str]:
    """Parse a `key=value` file."""
    return read_key_value_text(Path(path).read_text(encoding="utf-8"))


def format_key_values(values: dict[str, str]) -> str:
    """Canonical text form, sorted keys, one entry per line."""
    return "".join(f"{key}={values[key]}\n" for key in sorted(values))


def format_value(value: Any) -> str:
    """Render a config value in its key=value syntax.

    - Integer pairs as sizes `96x96`
    - Other sequences comma separated `16,8,4`
    - Enums by value
    """
    if isinstance(value, enum.Enum):
        return str(value.value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (tuple, list)):
        if isinstance(value, tuple) and len(value) == 2 and all(isinstance(v, int) for v in value):
            return f"{value[0]}x{value[1]}"
        return ",".join(format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _split_sequence(text: str) -> list[str]:
    separator = "x" if "x" in text and "," not in text else ","
    return [part.strip() for part in text.split(separator)]


def parse_value(text: str, kind) -> Any:
    """Parse a key=value string into the annotated field type."""
    text = text.strip()
    origin = typing.get_origin(kind)
    if origin in (typing.Union, types.UnionType):
        args = [a for a in typing.get_args(kind) if a is not type(None)]
        if text.lower() in ("", "none"):
            return None
        return parse_value(text, args[0])
    if origin in (tuple, list):
        args = typing.get_args(kind)
        element = args[0] if args else str
        parts = _split_sequence(text)
        values = [parse_value(p, element) for p in parts]
        if origin is tuple:
            if len(args) == 2 and args[1] is Ellipsis:
                return tuple(values)
            if len(values) != len(args):
                raise KeyValueError(f"Expected {len(args)} values, got {text!r}")
            return tuple(values)
        return values
    if isinstance(kind, type) and issubclass(kind, enum.Enum):
        try:
            return kind(text)
        except ValueError as e:
            raise KeyValueError(f"{text!r} is not one of {[m.value for m in kind]}") from e
    if kind is bool:
        lowered = text.lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise KeyValueError(f"Not a boolean: {text!r}")
    if kind is int:
        try:
            return int(text)
        except ValueError as e:
            raise KeyValueError(f"Not an integer: {text!r}") from e
    if kind is float:
        try:
            return float(text)
        except ValueError as e:
            raise KeyValueError(f"Not a number: {text!r}") from e
    return text


def field_names(cls) -> set[str]:
    return {f.name for f in dataclasses.fields(cls)}


def dataclass_to_key_values(obj) -> dict[str, str]:
    """Flatten a dataclass into key=value strings."""
    return {f.name: format_value(getattr(obj, f.name)) for f in dataclasses.fields(obj)}


def dataclass_from_key_values(cls: Type[T], values: dict[str, str], base: T = None) -> T:
    """Build a dataclass from key=value strings.

    :param base:
        Instance supplying values for keys not given. Field defaults are used otherwise.

    :raise KeyValueError:
        Unknown keys or unparseable values
    """
    known = field_names(cls)
    unknown = sorted(set(values) - known)
    if unknown:
        raise KeyValueError(f"Unknown keys for {cls.__name__}: {', '.join(unknown)}")

    hints = typing.get_type_hints(cls)
    kwargs = {}
    if base is not None:
        kwargs = {name: getattr(base, name) for name in known}
    for name, text in values.items():
        try:
            kwargs[name] = parse_value(text, hints[name])
        except KeyValueError as e:
            raise KeyValueError(f"Bad value for {name}: {e}") from e
    return cls(**kwargs)
