"""Runtime values produced by expression evaluation.

Numbers are plain floats (seconds when they came from time literals), booleans
are ``bool`` and text is ``str``. Entity references and the invalid marker
get their own types so they never mix with arithmetic by accident.
"""
from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class EntityRef:
    kind: str  # "building", "object", "zone", "person", "household"
    id: int

    def __str__(self) -> str:
        return f"{self.kind}#{self.id}"


class _Invalid:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __eq__(self, other) -> bool:
        return other is self

    def __hash__(self) -> int:
        return 0x1A7A11D

    def __bool__(self) -> bool:
        return False

    def __repr__(self) -> str:
        return "INVALID"

    def __reduce__(self):
        return (_Invalid, ())


INVALID = _Invalid()


def is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def is_valid(v) -> bool:
    return v is not INVALID


def type_name(v) -> str:
    if v is INVALID:
        return "invalid"
    if isinstance(v, bool):
        return "bool"
    if is_number(v):
        return "number"
    if isinstance(v, str):
        return "text"
    if isinstance(v, EntityRef):
        return v.kind
    return type(v).__name__


def show(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if is_number(v):
        f = float(v)
        return str(int(f)) if f.is_integer() else repr(f)
    if isinstance(v, str):
        return repr(v)
    return str(v)
