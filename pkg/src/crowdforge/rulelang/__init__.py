"""Shared front end for the city and agenda rule languages."""
from .ast import RuleFile, Rule
from .errors import EvalError, LexError, ParseError, ResolveError, RuleError
from .evaluator import Environment, Function, Registry, evaluate, truthy
from .lexer import tokenize
from .parser import parse_expression, parse_rule_file
from .printer import print_expr, print_rule_file
from .resolve import apply_defines, load_rules, resolve_source, undefined_rules
from .values import INVALID, EntityRef

__all__ = [
    "RuleFile", "Rule", "EvalError", "LexError", "ParseError", "ResolveError", "RuleError",
    "Environment", "Function", "Registry", "evaluate", "truthy", "tokenize",
    "parse_expression", "parse_rule_file", "print_expr", "print_rule_file",
    "apply_defines", "load_rules", "resolve_source", "undefined_rules", "INVALID", "EntityRef",
]
