from __future__ import annotations

import re
from typing import NamedTuple

from .ast import UNIT_SECONDS, Pos
from .errors import LexError


class Token(NamedTuple):
    kind: str
    value: object
    pos: Pos
    text: str = ""

    def __repr__(self) -> str:
        return f"Token({self.kind}, {self.value!r}, {self.pos})"


_SPEC = [
    ("COMMENT", r"\#[^\n]*"),
    ("NEWLINE", r"\n"),
    ("WS", r"[ \t\r\f﻿]+"),
    ("ANNOTATION", r"@[A-Za-z_]\w*"),
    ("BADARROW", r"-{3,}>"),
    ("ARROW", r"-->|->"),
    ("ELLIPSIS", r"\.\.\."),
    ("NUMBER", r"(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?[hms]?(?![A-Za-z_0-9])"),
    ("STRING", r'"(?:[^"\\\n]|\\.)*"'),
    ("UNTERMINATED", r'"'),
    ("IDENT", r"[A-Za-z_]\w*(?:\.[A-Za-z_]\w*)*"),
    ("OP", r"&&|\|\||==|!=|<=|>=|[-+*/<>!(){}\[\],:|=~']"),
    ("MISMATCH", r"."),
]
_MASTER = re.compile("|".join(f"(?P<{name}>{rx})" for name, rx in _SPEC))

KEYWORDS = {"case": "CASE", "else": "ELSE", "true": "TRUE", "false": "FALSE", "import": "IMPORT"}

_ESCAPES = {"n": "\n", "t": "\t", '"': '"', "\\": "\\"}


def _unescape(body: str) -> str:
    return re.sub(r"\\(.)", lambda m: _ESCAPES.get(m.group(1), m.group(1)), body)


def _number(text: str) -> tuple[float, str | None]:
    unit = text[-1] if text[-1] in UNIT_SECONDS else None
    mantissa = text[:-1] if unit else text
    value = float(mantissa)
    if unit:
        value *= UNIT_SECONDS[unit]
    return value, unit


def tokenize(source: str) -> list[Token]:
    """Split rule-file text into tokens.

    Comments and whitespace are dropped. ``@Name(...)`` annotations are folded
    into a single ``ANNOTATION`` token whose value is ``(name, args)`` with
    literal arguments only.
    """
    tokens: list[Token] = []
    line, line_start = 1, 0
    i, n = 0, len(source)
    while i < n:
        m = _MASTER.match(source, i)
        kind = m.lastgroup
        text = m.group()
        pos = Pos(line, m.start() - line_start + 1)
        i = m.end()
        if kind == "NEWLINE":
            line += 1
            line_start = i
            continue
        if kind in ("WS", "COMMENT"):
            continue
        if kind == "MISMATCH":
            raise LexError(f"illegal character {text!r}", pos)
        if kind == "UNTERMINATED":
            raise LexError("unterminated string literal", pos)
        if kind == "BADARROW":
            raise LexError(f"unknown arrow {text!r}; rules use '-->'", pos)
        if kind == "NUMBER":
            value, unit = _number(text)
            tokens.append(Token("NUMBER", (value, unit), pos, text))
        elif kind == "STRING":
            tokens.append(Token("STRING", _unescape(text[1:-1]), pos, text))
        elif kind == "IDENT":
            kw = KEYWORDS.get(text)
            tokens.append(Token(kw or "IDENT", text, pos, text))
        elif kind == "ANNOTATION":
            args, i = _annotation_args(source, i, pos)
            tokens.append(Token("ANNOTATION", (text[1:], args), pos, text))
        elif kind == "OP":
            tokens.append(Token(text, text, pos, text))
        else:
            tokens.append(Token(kind, text, pos, text))
    tokens.append(Token("EOF", None, Pos(line, i - line_start + 1)))
    return tokens


def _annotation_args(source: str, i: int, pos: Pos) -> tuple[tuple, int]:
    j = i
    while j < len(source) and source[j] in " \t":
        j += 1
    if j >= len(source) or source[j] != "(":
        return (), i
    depth, k = 0, j
    while k < len(source):
        ch = source[k]
        if ch == '"':
            k += 1
            while k < len(source) and source[k] != '"':
                k += 2 if source[k] == "\\" else 1
        elif ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth == 0:
                break
        elif ch == "\n":
            raise LexError("unterminated annotation arguments", pos)
        k += 1
    else:
        raise LexError("unterminated annotation arguments", pos)
    inner = tokenize(source[j + 1:k])[:-1]
    args = []
    expect_value = True
    for tok in inner:
        if expect_value:
            if tok.kind == "STRING":
                args.append(tok.value)
            elif tok.kind == "NUMBER":
                args.append(tok.value[0])
            elif tok.kind in ("TRUE", "FALSE"):
                args.append(tok.kind == "TRUE")
            else:
                raise LexError(f"annotation arguments must be literals, got {tok.text!r}", pos)
        elif tok.kind != ",":
            raise LexError("expected ',' between annotation arguments", pos)
        expect_value = not expect_value
    return tuple(args), k + 1
