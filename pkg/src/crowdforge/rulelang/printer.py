"""Render syntax trees back to rule-file text."""
from __future__ import annotations

import json

from . import ast

_PREC = {
    "||": 1, "&&": 2, "==": 3, "!=": 3,
    "<": 4, "<=": 4, ">": 4, ">=": 4,
    "+": 5, "-": 5, "*": 6, "/": 6,
}
_UNARY_PREC = 7


def _number_text(n: ast.Number) -> str:
    if n.text is not None:
        return n.text + (n.unit or "")
    if n.unit:
        v = n.value / ast.UNIT_SECONDS[n.unit]
    else:
        v = n.value
    s = repr(float(v))
    if s.endswith(".0"):
        s = s[:-2]
    return s + (n.unit or "")


def _prec(e) -> int:
    if isinstance(e, ast.Binary):
        return _PREC[e.op]
    if isinstance(e, (ast.Unary, ast.Relative, ast.Floating)):
        return _UNARY_PREC
    if isinstance(e, ast.Number) and e.value < 0:
        return _UNARY_PREC
    return 99


def print_expr(e) -> str:
    if isinstance(e, ast.Number):
        return _number_text(e)
    if isinstance(e, ast.String):
        body = e.value.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t")
        return f'"{body}"'
    if isinstance(e, ast.Bool):
        return "true" if e.value else "false"
    if isinstance(e, ast.Var):
        return e.name
    if isinstance(e, ast.FuncCall):
        return f"{e.name}({', '.join(print_expr(a) for a in e.args)})"
    if isinstance(e, ast.Binary):
        p = _PREC[e.op]
        left = print_expr(e.left)
        if _prec(e.left) < p:
            left = f"({left})"
        right = print_expr(e.right)
        # operators are left-associative, so an equal-precedence right operand needs parentheses
        if _prec(e.right) <= p:
            right = f"({right})"
        return f"{left} {e.op} {right}"
    if isinstance(e, (ast.Unary, ast.Relative, ast.Floating)):
        sym = {ast.Relative: "'", ast.Floating: "~"}.get(type(e), getattr(e, "op", ""))
        inner = print_expr(e.operand)
        if _prec(e.operand) < _UNARY_PREC:
            inner = f"({inner})"
        elif sym == "-" and inner.startswith("-"):
            inner = f"({inner})"
        return f"{sym}{inner}"
    raise TypeError(f"not an expression: {e!r}")


def _print_items(items, indent: str) -> list[str]:
    lines = []
    for it in items:
        if isinstance(it, ast.CaseGuard):
            lines.append(f"{indent}case {print_expr(it.cond)}:")
        elif isinstance(it, ast.ElseGuard):
            lines.append(f"{indent}else:")
        elif isinstance(it, ast.Placeholder):
            lines.append(f"{indent}...")
        elif isinstance(it, ast.Group):
            lines.append(f"{indent}[")
            lines.extend(_print_items(it.items, indent + "    "))
            lines.append(f"{indent}]")
        elif isinstance(it, (ast.RuleCall, ast.OpCall)):
            head = it.name
            if it.args or (isinstance(it, ast.OpCall) and it.selector is None):
                head += f"({', '.join(print_expr(a) for a in it.args)})"
            sel = getattr(it, "selector", None)
            if sel is None:
                lines.append(indent + head)
                continue
            lines.append(indent + head + " {")
            for k, entry in enumerate(sel.entries):
                prefix = "  " if k == 0 else "| "
                lines.append(f"{indent}  {prefix}{print_expr(entry.key)}:")
                lines.extend(_print_items(entry.items, indent + "        "))
            lines.append(indent + ("}*" if sel.repeat else "}"))
        else:
            raise TypeError(f"not a successor item: {it!r}")
    return lines


def print_rule(rule: ast.Rule) -> str:
    lines = []
    for a in rule.annotations:
        if a.args:
            lines.append(f"@{a.name}({', '.join(_literal(v) for v in a.args)})")
        else:
            lines.append(f"@{a.name}")
    params = f"({', '.join(rule.params)})" if rule.params else ""
    lines.append(f"{rule.name}{params} -->")
    lines.extend(_print_items(rule.successor, "    "))
    return "\n".join(lines)


def _literal(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return json.dumps(v)
    return repr(v)


def print_rule_file(rf: ast.RuleFile) -> str:
    parts = [f"import {json.dumps(p)}" for p in rf.imports]
    parts += [f"{a.name} = {print_expr(a.value)}" for a in rf.attributes]
    out = "\n".join(parts)
    for r in rf.rules:
        out += ("\n\n" if out else "") + print_rule(r)
    return out + "\n"
