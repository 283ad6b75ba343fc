"""Shared grammar for config string ids: ``name`` or ``name:k=v,k=v``."""

from __future__ import annotations

from .errors import IdParseError


def parse_id(text: str) -> tuple[str, dict[str, str]]:
    """Split ``"beta:a=0.5,b=0.5"`` into ``("beta", {"a": "0.5", "b": "0.5"})``."""
    if not isinstance(text, str) or not text.strip():
        raise IdParseError(f"empty or non-string id: {text!r}")
    head, sep, tail = text.partition(":")
    name = head.strip().lower()
    params: dict[str, str] = {}
    if sep and not tail.strip():
        raise IdParseError(f"id {text!r} has a ':' but no parameters")
    if tail.strip():
        for item in tail.split(","):
            key, eq, value = item.partition("=")
            if not eq or not key.strip() or not value.strip():
                raise IdParseError(f"bad parameter {item!r} in id {text!r}")
            key = key.strip()
            if key in params:
                raise IdParseError(f"duplicate parameter {key!r} in id {text!r}")
            params[key] = value.strip()
    return name, params


def take_float(params: dict[str, str], key: str, id_text: str) -> float:
    if key not in params:
        raise IdParseError(f"id {id_text!r} is missing parameter {key!r}")
    raw = params.pop(key)
    try:
        return float(raw)
    except ValueError:
        raise IdParseError(f"parameter {key}={raw!r} in id {id_text!r} is not a number") from None


def take_int(params: dict[str, str], key: str, id_text: str) -> int:
    value = take_float(params, key, id_text)
    if value != int(value):
        raise IdParseError(f"parameter {key}={value!r} in id {id_text!r} is not an integer")
    return int(value)


def reject_extras(params: dict[str, str], id_text: str) -> None:
    if params:
        raise IdParseError(f"unknown parameters {sorted(params)} in id {id_text!r}")
