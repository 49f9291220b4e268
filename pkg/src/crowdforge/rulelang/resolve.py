"""Import merging, start-rule resolution and attribute overrides."""
from __future__ import annotations

import hashlib
import os
from dataclasses import replace
from typing import Iterable, Mapping, Optional

from . import ast
from .errors import ResolveError, RuleError
from .parser import parse_expression, parse_rule_file, reclassify


def read_rule_file(path: str) -> ast.RuleFile:
    try:
        with open(path, encoding="utf-8") as fh:
            source = fh.read()
    except OSError as exc:
        raise ResolveError(f"cannot read rule file: {exc.strerror}", path=path) from None
    return parse_rule_file(source, path)


def _collect(path: str, seen: dict, order: list, stack: tuple) -> None:
    real = os.path.realpath(path)
    if real in seen:
        return
    rf = read_rule_file(path)
    seen[real] = rf
    base = os.path.dirname(path)
    for imp in rf.imports:
        target = imp if os.path.isabs(imp) else os.path.join(base, imp)
        if os.path.realpath(target) in stack:
            continue
        _collect(target, seen, order, stack + (real,))
    order.append(rf)


def merge(files: list[ast.RuleFile], root: ast.RuleFile,
          start_rule: Optional[str] = None) -> ast.RuleFile:
    """Merge ``files`` (dependencies first, root last) into one rule file."""
    rules: dict[str, ast.Rule] = {}
    origin: dict[str, str] = {}
    attrs: dict[str, ast.Attribute] = {}
    for rf in files:
        for r in rf.rules:
            if r.name in rules:
                raise ResolveError(
                    f"rule {r.name!r} defined both in {origin[r.name]} and here", r.pos, rf.path)
            rules[r.name] = r
            origin[r.name] = rf.path or "<source>"
        for a in rf.attributes:
            attrs.pop(a.name, None)
            attrs[a.name] = a
    start = start_rule or root.start_rule
    if start is None:
        starts = [rf.start_rule for rf in files if rf.start_rule]
        if len(starts) > 1:
            raise ResolveError(f"ambiguous start rule among imports: {', '.join(starts)}", path=root.path)
        start = starts[0] if starts else None
    if start is None:
        raise ResolveError("no rule is marked @StartRule", path=root.path)
    if start not in rules:
        raise ResolveError(f"start rule {start!r} is not defined", path=root.path)
    names = set(rules)
    for name, r in rules.items():
        if r.is_start and name != start:
            # imported start rules become ordinary rules in the merged file
            rules[name] = replace(r, annotations=tuple(a for a in r.annotations
                                                       if a.name.lower() != "startrule"))
    merged = tuple(reclassify(r, names) for r in rules.values())
    return ast.RuleFile(tuple(attrs.values()), merged, (), start, root.path)


def load_rules(path: str, start_rule: Optional[str] = None,
               defines: Optional[Mapping[str, str]] = None) -> ast.RuleFile:
    """Parse ``path`` with all its imports and apply ``--define`` overrides."""
    seen: dict = {}
    order: list = []
    _collect(path, seen, order, ())
    root = order[-1]
    rf = merge(order, root, start_rule)
    if defines:
        rf = apply_defines(rf, defines)
    return rf


def resolve_source(source: str, path: Optional[str] = None, start_rule: Optional[str] = None,
                   defines: Optional[Mapping[str, str]] = None) -> ast.RuleFile:
    """Like :func:`load_rules` for in-memory text; imports are resolved next to ``path``."""
    root = parse_rule_file(source, path)
    seen: dict = {}
    order: list = []
    base = os.path.dirname(path) if path else os.getcwd()
    for imp in root.imports:
        target = imp if os.path.isabs(imp) else os.path.join(base, imp)
        _collect(target, seen, order, ())
    order.append(root)
    rf = merge(order, root, start_rule)
    if defines:
        rf = apply_defines(rf, defines)
    return rf


def apply_defines(rf: ast.RuleFile, defines: Mapping[str, str]) -> ast.RuleFile:
    attrs = list(rf.attributes)
    for name, text in defines.items():
        try:
            expr = parse_expression(str(text))
        except RuleError as exc:
            raise ResolveError(f"bad value for --define {name}: {exc.message}") from None
        for i, a in enumerate(attrs):
            if a.name == name:
                attrs[i] = ast.Attribute(name, expr, a.pos)
                break
        else:
            attrs.append(ast.Attribute(name, expr))
    return replace(rf, attributes=tuple(attrs))


def parse_define(item: str) -> tuple[str, str]:
    name, sep, value = item.partition("=")
    name = name.strip()
    if not sep or not name.isidentifier():
        raise ResolveError(f"expected name=value, got {item!r}")
    return name, value.strip()


def called_rules(items: Iterable) -> set[str]:
    out: set[str] = set()
    for it in items:
        if isinstance(it, ast.RuleCall):
            out.add(it.name)
        elif isinstance(it, ast.Group):
            out |= called_rules(it.items)
        elif isinstance(it, ast.OpCall) and it.selector is not None:
            for e in it.selector.entries:
                out |= called_rules(e.items)
    return out


def undefined_rules(rf: ast.RuleFile) -> dict[str, list[str]]:
    """Map each called-but-undefined rule name to the rules calling it."""
    defined = {r.name for r in rf.rules}
    missing: dict[str, list[str]] = {}
    for r in rf.rules:
        for name in sorted(called_rules(r.successor) - defined):
            missing.setdefault(name, []).append(r.name)
    return missing


def file_digest(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        h.update(fh.read())
    return h.hexdigest()[:16]
