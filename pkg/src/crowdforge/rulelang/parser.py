"""Recursive-descent parser for CGA-style rule files.

The same grammar serves building rules and agenda rules::

    file      := (import | attribute | annotation* rule)*
    import    := 'import' STRING
    attribute := IDENT '=' expr
    rule      := IDENT ['(' params ')'] ('-->' | '->') item*
    item      := call [selector] | '[' item* ']' | 'case' expr ':' | 'else' ':' | '...'
    selector  := '{' key ':' item* ('|' key ':' item*)* '}' ['*']

A successor runs until the next rule head, attribute, annotation or import,
so line breaks carry no meaning.
"""
from __future__ import annotations

from typing import Optional

from . import ast
from .errors import ParseError
from .lexer import Token, tokenize

_BINARY_PREC = {
    "||": 1,
    "&&": 2,
    "==": 3, "!=": 3,
    "<": 4, "<=": 4, ">": 4, ">=": 4,
    "+": 5, "-": 5,
    "*": 6, "/": 6,
}


def is_rule_name(name: str) -> bool:
    """Capitalised call names are rules unless declared otherwise."""
    return name[:1].isupper() and name != "NIL"


class Parser:
    def __init__(self, tokens: list[Token], path: Optional[str] = None):
        self.toks = tokens
        self.i = 0
        self.path = path

    # -- token helpers -----------------------------------------------------
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        j = min(self.i + k, len(self.toks) - 1)
        return self.toks[j]

    def advance(self) -> Token:
        t = self.toks[self.i]
        if t.kind != "EOF":
            self.i += 1
        return t

    def accept(self, kind: str) -> Optional[Token]:
        if self.tok.kind == kind:
            return self.advance()
        return None

    def expect(self, kind: str, what: str = "") -> Token:
        if self.tok.kind != kind:
            found = self.tok.text or self.tok.kind
            raise ParseError(f"expected {what or repr(kind)}, found {found!r}", self.tok.pos)
        return self.advance()

    # -- file level --------------------------------------------------------
    def parse_file(self) -> ast.RuleFile:
        attributes: list[ast.Attribute] = []
        rules: list[ast.Rule] = []
        imports: list[str] = []
        pending: list[ast.Annotation] = []
        while self.tok.kind != "EOF":
            t = self.tok
            if t.kind == "IMPORT":
                if pending:
                    raise ParseError("annotation must precede a rule", pending[0].pos)
                self.advance()
                imports.append(self.expect("STRING", "an import path").value)
            elif t.kind == "ANNOTATION":
                name, args = t.value
                pending.append(ast.Annotation(name, args, t.pos))
                self.advance()
            elif t.kind == "IDENT" and self.peek().kind == "=":
                if pending:
                    raise ParseError("annotation must precede a rule", pending[0].pos)
                self.advance()
                self.advance()
                attributes.append(ast.Attribute(t.value, self.expression(), t.pos))
            elif t.kind == "IDENT" and self._at_rule_head():
                rules.append(self.rule(tuple(pending)))
                pending = []
            else:
                raise ParseError(f"expected a rule or attribute, found {t.text or t.kind!r}", t.pos)
        if pending:
            raise ParseError("annotation is not followed by a rule", pending[-1].pos)

        seen: dict[str, ast.Rule] = {}
        for r in rules:
            if r.name in seen:
                raise ParseError(f"duplicate rule {r.name!r}", r.pos)
            seen[r.name] = r
        starts = [r.name for r in rules if r.is_start]
        if len(starts) > 1:
            raise ParseError(f"several @StartRule annotations: {', '.join(starts)}")
        rules = [_classify_rule(r, set(seen)) for r in rules]
        return ast.RuleFile(
            tuple(attributes), tuple(rules), tuple(imports),
            starts[0] if starts else None, self.path,
        )

    def _at_rule_head(self) -> bool:
        nxt = self.peek()
        if nxt.kind == "ARROW":
            return True
        if nxt.kind != "(":
            return False
        depth, j = 0, self.i + 1
        while j < len(self.toks):
            k = self.toks[j].kind
            if k == "(":
                depth += 1
            elif k == ")":
                depth -= 1
                if depth == 0:
                    return self.toks[j + 1].kind == "ARROW"
            elif k == "EOF":
                return False
            j += 1
        return False

    def rule(self, annotations: tuple) -> ast.Rule:
        head = self.expect("IDENT")
        params: list[str] = []
        if self.accept("("):
            if self.tok.kind != ")":
                while True:
                    p = self.expect("IDENT", "a parameter name")
                    if p.value in params:
                        raise ParseError(f"duplicate parameter {p.value!r}", p.pos)
                    params.append(p.value)
                    if not self.accept(","):
                        break
            self.expect(")")
        self.expect("ARROW", "'-->'")
        items = self.items(top_level=True)
        return ast.Rule(head.value, tuple(params), annotations, tuple(items), head.pos)

    # -- successors ----------------------------------------------------------
    def _successor_ends(self, top_level: bool) -> bool:
        t = self.tok
        if t.kind in ("EOF", "ANNOTATION", "IMPORT"):
            return True
        if t.kind in ("]", "|", "}"):
            if top_level:
                raise ParseError(f"unexpected {t.text!r}", t.pos)
            return True
        if t.kind == "IDENT":
            if self.peek().kind == "=":
                return True
            if self._at_rule_head():
                return True
        return False

    def items(self, top_level: bool = False) -> list:
        out: list = []
        while not self._successor_ends(top_level):
            out.append(self.item())
        return out

    def item(self):
        t = self.tok
        if t.kind == "CASE":
            self.advance()
            cond = self.expression()
            self.expect(":", "':' after case condition")
            return ast.CaseGuard(cond, t.pos)
        if t.kind == "ELSE":
            self.advance()
            self.expect(":", "':' after else")
            return ast.ElseGuard(t.pos)
        if t.kind == "[":
            self.advance()
            inner = self.items()
            self.expect("]", "']'")
            return ast.Group(tuple(inner), t.pos)
        if t.kind == "ELLIPSIS":
            self.advance()
            return ast.Placeholder(t.pos)
        if t.kind == "IDENT":
            self.advance()
            args: tuple = ()
            if self.tok.kind == "(":
                args = self.call_args()
            selector = self.selector() if self.tok.kind == "{" else None
            if selector is None and is_rule_name(t.value):
                return ast.RuleCall(t.value, args, t.pos)
            return ast.OpCall(t.value, args, selector, t.pos)
        raise ParseError(f"unexpected {t.text or t.kind!r} in rule successor", t.pos)

    def call_args(self) -> tuple:
        self.expect("(")
        args = []
        if self.tok.kind != ")":
            while True:
                args.append(self.expression())
                if not self.accept(","):
                    break
        self.expect(")", "')'")
        return tuple(args)

    def selector(self) -> ast.SelectorBlock:
        start = self.expect("{")
        entries = []
        while True:
            key_tok = self.tok
            key = self.expression()
            self.expect(":", "':' after selector")
            items = self.items()
            entries.append(ast.SelectorEntry(key, tuple(items), key_tok.pos))
            if self.accept("|"):
                continue
            self.expect("}", "'|' or '}'")
            break
        repeat = self.accept("*") is not None
        return ast.SelectorBlock(tuple(entries), repeat, start.pos)

    # -- expressions ---------------------------------------------------------
    def expression(self, min_prec: int = 1):
        left = self.unary()
        while True:
            op = self.tok.kind
            prec = _BINARY_PREC.get(op)
            if prec is None or prec < min_prec:
                return left
            t = self.advance()
            right = self.expression(prec + 1)
            left = ast.Binary(op, left, right, t.pos)

    def unary(self):
        t = self.tok
        if t.kind in ("-", "!"):
            self.advance()
            return ast.Unary(t.kind, self.unary(), t.pos)
        if t.kind == "~":
            self.advance()
            return ast.Floating(self.unary(), t.pos)
        if t.kind == "'":
            self.advance()
            return ast.Relative(self.unary(), t.pos)
        return self.primary()

    def primary(self):
        t = self.tok
        if t.kind == "NUMBER":
            self.advance()
            value, unit = t.value
            mantissa = t.text[:-1] if unit else t.text
            return ast.Number(value, unit, mantissa, t.pos)
        if t.kind == "STRING":
            self.advance()
            return ast.String(t.value, t.pos)
        if t.kind in ("TRUE", "FALSE"):
            self.advance()
            return ast.Bool(t.kind == "TRUE", t.pos)
        if t.kind == "IDENT":
            self.advance()
            if self.tok.kind == "(":
                return ast.FuncCall(t.value, self.call_args(), t.pos)
            return ast.Var(t.value, t.pos)
        if t.kind == "(":
            self.advance()
            e = self.expression()
            self.expect(")", "')'")
            return e
        raise ParseError(f"expected an expression, found {t.text or t.kind!r}", t.pos)


def _classify_items(items, rule_names: set) -> tuple:
    out = []
    for it in items:
        if isinstance(it, ast.OpCall):
            if it.selector is None and it.name in rule_names:
                it = ast.RuleCall(it.name, it.args, it.pos)
            elif it.selector is not None:
                sel = it.selector
                entries = tuple(
                    ast.SelectorEntry(e.key, _classify_items(e.items, rule_names), e.pos)
                    for e in sel.entries
                )
                it = ast.OpCall(it.name, it.args, ast.SelectorBlock(entries, sel.repeat, sel.pos), it.pos)
        elif isinstance(it, ast.Group):
            it = ast.Group(_classify_items(it.items, rule_names), it.pos)
        out.append(it)
    return tuple(out)


def _classify_rule(rule: ast.Rule, rule_names: set) -> ast.Rule:
    return ast.Rule(rule.name, rule.params, rule.annotations,
                    _classify_items(rule.successor, rule_names), rule.pos)


def reclassify(rule: ast.Rule, rule_names: set) -> ast.Rule:
    """Turn operation calls that name a known rule into rule calls."""
    return _classify_rule(rule, rule_names)


def parse_rule_file(source: str, path: Optional[str] = None) -> ast.RuleFile:
    try:
        return Parser(tokenize(source), path).parse_file()
    except ParseError as exc:
        raise exc.with_path(path) if path else exc
    except Exception as exc:
        from .errors import RuleError
        if isinstance(exc, RuleError) and path:
            raise exc.with_path(path)
        raise


def parse_expression(source: str):
    p = Parser(tokenize(source))
    e = p.expression()
    if p.tok.kind != "EOF":
        raise ParseError(f"unexpected {p.tok.text!r} after expression", p.tok.pos)
    return e
