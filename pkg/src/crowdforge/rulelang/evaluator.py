"""Expression evaluation shared by the city and agenda interpreters.

An environment supplies variable lookup, a function table and an RNG. Each
function declares which parameters are lazy; those receive the raw
expression and evaluate it themselves, typically once per household member.
"""
from __future__ import annotations

import operator
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np

from . import ast
from .errors import EvalError, RuleError
from .values import INVALID, EntityRef, is_number, show, type_name


@dataclass(frozen=True)
class Function:
    name: str
    impl: Callable
    min_args: int = 0
    max_args: Optional[int] = None  # None = same as min_args
    lazy: frozenset = field(default_factory=frozenset)

    def check_arity(self, n: int, pos) -> None:
        hi = self.min_args if self.max_args is None else self.max_args
        if not self.min_args <= n <= hi:
            want = str(self.min_args) if hi == self.min_args else f"{self.min_args}..{hi}"
            raise EvalError(f"{self.name}() takes {want} argument(s), got {n}", pos)


class Registry(dict):
    """Name -> :class:`Function`, with a decorator for registration."""

    def define(self, name: str, min_args: int = 0, max_args: Optional[int] = None, lazy=()):
        def deco(fn):
            self[name] = Function(name, fn, min_args, max_args, frozenset(lazy))
            return fn
        return deco


class Environment:
    """Base evaluation environment: a flat variable map plus functions."""

    def __init__(self, functions: Mapping[str, Function], variables: Optional[dict] = None,
                 rng: Optional[np.random.Generator] = None):
        self.functions = functions
        self.variables = dict(variables or {})
        self.rng = rng if rng is not None else np.random.default_rng(0)

    def lookup(self, name: str):
        return self.variables[name]


def truthy(v, pos=None) -> bool:
    if isinstance(v, bool):
        return v
    if v is INVALID:
        return False
    if is_number(v):
        return v != 0
    raise EvalError(f"expected a condition, got {type_name(v)} {show(v)}", pos)


def values_equal(a, b) -> bool:
    if is_number(a) and is_number(b):
        return float(a) == float(b)
    if isinstance(a, bool) or isinstance(b, bool):
        return isinstance(a, bool) and isinstance(b, bool) and a == b
    if a is INVALID or b is INVALID:
        return a is b
    if type(a) is not type(b):
        return False
    return a == b


_REL = {"<": operator.lt, "<=": operator.le, ">": operator.gt, ">=": operator.ge}
_ARITH = {"+": operator.add, "-": operator.sub, "*": operator.mul}


def _binary(e: ast.Binary, env):
    op = e.op
    if op == "&&":
        return truthy(evaluate(e.left, env), e.pos) and truthy(evaluate(e.right, env), e.pos)
    if op == "||":
        return truthy(evaluate(e.left, env), e.pos) or truthy(evaluate(e.right, env), e.pos)
    a = evaluate(e.left, env)
    b = evaluate(e.right, env)
    if op == "==":
        return values_equal(a, b)
    if op == "!=":
        return not values_equal(a, b)
    if op in _REL:
        if a is INVALID or b is INVALID:
            return False
        if is_number(a) and is_number(b):
            return _REL[op](float(a), float(b))
        if isinstance(a, str) and isinstance(b, str):
            return _REL[op](a, b)
        raise EvalError(f"cannot compare {type_name(a)} {op} {type_name(b)}", e.pos)
    if a is INVALID or b is INVALID:
        return INVALID
    if op == "+" and isinstance(a, str) and isinstance(b, str):
        return a + b
    if not (is_number(a) and is_number(b)):
        raise EvalError(f"type mismatch: {type_name(a)} {op} {type_name(b)}", e.pos)
    if op == "/":
        if b == 0:
            return INVALID
        return float(a) / float(b)
    return float(_ARITH[op](float(a), float(b)))


def evaluate(e, env):
    """Evaluate ``e`` strictly under ``env``; lazy call arguments stay unevaluated."""
    t = type(e)
    if t is ast.Number:
        return e.value
    if t is ast.String or t is ast.Bool:
        return e.value
    if t is ast.Var:
        try:
            return env.lookup(e.name)
        except KeyError:
            raise EvalError(f"unknown variable {e.name!r}", e.pos) from None
    if t is ast.Binary:
        return _binary(e, env)
    if t is ast.Unary:
        v = evaluate(e.operand, env)
        if e.op == "!":
            return not truthy(v, e.pos)
        if v is INVALID:
            return INVALID
        if not is_number(v):
            raise EvalError(f"cannot negate {type_name(v)}", e.pos)
        return -float(v)
    if t is ast.FuncCall:
        fn = env.functions.get(e.name)
        if fn is None:
            raise EvalError(f"unknown function {e.name!r}", e.pos)
        fn.check_arity(len(e.args), e.pos)
        args = [a if i in fn.lazy else evaluate(a, env) for i, a in enumerate(e.args)]
        try:
            return fn.impl(env, *args)
        except RuleError as exc:
            if exc.pos is None or not exc.pos.line:
                exc.pos = e.pos
                exc.args = (exc._format(),)
            raise
    if t is ast.Relative or t is ast.Floating:
        raise EvalError("relative and floating sizes are only allowed in split and t()", e.pos)
    raise EvalError(f"cannot evaluate {e!r}")


def as_number(v, what: str, pos=None) -> float:
    if not is_number(v):
        raise EvalError(f"{what} must be a number, got {type_name(v)} {show(v)}", pos)
    return float(v)


def as_text(v, what: str, pos=None) -> str:
    if not isinstance(v, str):
        raise EvalError(f"{what} must be text, got {type_name(v)} {show(v)}", pos)
    return v


def as_entity(v, kind: str, what: str, pos=None):
    """Return ``v`` if it is a reference of ``kind`` or INVALID; otherwise raise."""
    if v is INVALID:
        return v
    if isinstance(v, EntityRef) and v.kind == kind:
        return v
    raise EvalError(f"{what} must be a {kind} reference, got {type_name(v)} {show(v)}", pos)
