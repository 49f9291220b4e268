from __future__ import annotations

from typing import Optional

from ..errors import CrowdforgeError
from .ast import Pos


class RuleError(CrowdforgeError):
    """An error tied to a location in a rule file."""

    def __init__(self, message: str, pos: Optional[Pos] = None, path: Optional[str] = None):
        self.message = message
        self.pos = pos
        self.path = path
        super().__init__(self._format())

    def _format(self) -> str:
        where = ""
        if self.path:
            where = self.path
        if self.pos is not None and self.pos.line:
            where = f"{where}:{self.pos}" if where else str(self.pos)
        return f"{where}: {self.message}" if where else self.message

    def with_path(self, path: str) -> "RuleError":
        self.path = path
        self.args = (self._format(),)
        return self


class LexError(RuleError):
    pass


class ParseError(RuleError):
    pass


class ResolveError(RuleError):
    pass


class EvalError(RuleError):
    pass
