"""Syntax tree shared by the city (CGA) and agenda (PCG) rule languages.

Nodes are frozen dataclasses. Source positions are carried for diagnostics
but excluded from equality, so two parses of equivalent text compare equal.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union


@dataclass(frozen=True)
class Pos:
    line: int
    col: int

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


NOPOS = Pos(0, 0)

UNIT_SECONDS = {"h": 3600.0, "m": 60.0, "s": 1.0}


# -- expressions -------------------------------------------------------------

@dataclass(frozen=True)
class Number:
    value: float
    unit: Optional[str] = None
    text: Optional[str] = field(default=None, compare=False)
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class String:
    value: str
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class Bool:
    value: bool
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class Var:
    name: str
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Expr"
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class FuncCall:
    name: str
    args: tuple["Expr", ...] = ()
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class Relative:
    """``'x``: a fraction of the current scope size (CGA)."""

    operand: "Expr"
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class Floating:
    """``~x``: a floating split size sharing the leftover extent (CGA)."""

    operand: "Expr"
    pos: Pos = field(default=NOPOS, compare=False)


Expr = Union[Number, String, Bool, Var, Binary, Unary, FuncCall, Relative, Floating]


# -- successor items ---------------------------------------------------------

@dataclass(frozen=True)
class SelectorEntry:
    key: Expr
    items: tuple["Item", ...]
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class SelectorBlock:
    entries: tuple[SelectorEntry, ...]
    repeat: bool = False
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class RuleCall:
    name: str
    args: tuple[Expr, ...] = ()
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class OpCall:
    name: str
    args: tuple[Expr, ...] = ()
    selector: Optional[SelectorBlock] = None
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class CaseGuard:
    cond: Expr
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class ElseGuard:
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class Group:
    items: tuple["Item", ...]
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class Placeholder:
    """The ``...`` elision marker; executes as a no-op."""

    pos: Pos = field(default=NOPOS, compare=False)


Item = Union[RuleCall, OpCall, CaseGuard, ElseGuard, Group, Placeholder]


# -- file level --------------------------------------------------------------

@dataclass(frozen=True)
class Annotation:
    name: str
    args: tuple = ()
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class Rule:
    name: str
    params: tuple[str, ...]
    annotations: tuple[Annotation, ...]
    successor: tuple[Item, ...]
    pos: Pos = field(default=NOPOS, compare=False)

    def annotation(self, name: str) -> Optional[Annotation]:
        for a in self.annotations:
            if a.name.lower() == name.lower():
                return a
        return None

    @property
    def is_start(self) -> bool:
        return self.annotation("StartRule") is not None


@dataclass(frozen=True)
class Attribute:
    name: str
    value: Expr
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class RuleFile:
    attributes: tuple[Attribute, ...]
    rules: tuple[Rule, ...]
    imports: tuple[str, ...] = ()
    start_rule: Optional[str] = None
    path: Optional[str] = field(default=None, compare=False)

    def rule(self, name: str) -> Optional[Rule]:
        for r in self.rules:
            if r.name == name:
                return r
        return None


# -- compiled control flow ---------------------------------------------------

@dataclass(frozen=True)
class CaseChain:
    """A run of ``case``/``else`` guards folded into one branching item."""

    branches: tuple[tuple[Expr, tuple], ...]
    otherwise: Optional[tuple] = None
    pos: Pos = field(default=NOPOS, compare=False)


def compile_block(items) -> tuple:
    """Fold top-level guards of a successor into :class:`CaseChain` items.

    A guard covers every following item up to the next guard or the end of
    the block, so a chain always runs to the end of its block. Items before
    the first guard execute unconditionally. Nested groups and selector
    entries are compiled lazily by the interpreters.
    """
    items = tuple(items)
    for i, item in enumerate(items):
        if isinstance(item, (CaseGuard, ElseGuard)):
            break
    else:
        return items
    head, rest = items[:i], items[i:]
    if isinstance(rest[0], ElseGuard):
        from .errors import ParseError
        raise ParseError("'else' without a preceding 'case'", rest[0].pos)
    branches: list = []
    otherwise = None
    current: Optional[list] = None
    cond = None
    for item in rest:
        if isinstance(item, CaseGuard):
            if otherwise is not None:
                from .errors import ParseError
                raise ParseError("'case' after 'else' in the same chain", item.pos)
            if current is not None:
                branches.append((cond, tuple(current)))
            cond, current = item.cond, []
        elif isinstance(item, ElseGuard):
            if otherwise is not None:
                from .errors import ParseError
                raise ParseError("duplicate 'else'", item.pos)
            if current is not None:
                branches.append((cond, tuple(current)))
            cond, current = None, None
            otherwise = []
        elif otherwise is not None:
            otherwise.append(item)
        else:
            current.append(item)
    if current is not None:
        branches.append((cond, tuple(current)))
    chain = CaseChain(
        tuple((c, compile_block(b)) for c, b in branches),
        compile_block(otherwise) if otherwise is not None else None,
        rest[0].pos,
    )
    return head + (chain,)


_compiled: dict[int, tuple] = {}


def compiled(items) -> tuple:
    """Memoised :func:`compile_block` keyed on the identity of ``items``."""
    hit = _compiled.get(id(items))
    if hit is not None and hit[0] is items:
        return hit[1]
    out = compile_block(items)
    _compiled[id(items)] = (items, out)
    return out
