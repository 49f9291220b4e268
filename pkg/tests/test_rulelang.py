import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crowdforge.harness.pipeline import data_path
from crowdforge.rulelang import (INVALID, Environment, EvalError, LexError, ParseError, ResolveError, ast, evaluate,
                                 load_rules, parse_expression, parse_rule_file, print_expr, print_rule_file,
                                 resolve_source, tokenize, undefined_rules)
from crowdforge.rulelang.resolve import apply_defines, parse_define


def read(name):
    with open(data_path(name), encoding="utf-8") as fh:
        return fh.read()


def ev(text, **variables):
    return evaluate(parse_expression(text), Environment({}, variables))


# -- lexer -----------------------------------------------------------------------------------------


def test_arrow_tokens():
    kinds = [t.kind for t in tokenize("A --> B")]
    assert kinds == ["IDENT", "ARROW", "IDENT", "EOF"]
    assert [t.kind for t in tokenize("A -> B")][1] == "ARROW"


def test_long_arrow_is_rejected():
    with pytest.raises(LexError):
        tokenize("A ---> B")


def test_annotation_token():
    tok = tokenize("@StartRule")[0]
    assert tok.kind == "ANNOTATION"
    assert tok.value == ("StartRule", ())
    tok = tokenize('@Object("bench")')[0]
    assert tok.value == ("Object", ("bench",))


def test_time_units():
    toks = tokenize("8h + rand(-30m, 30m)")
    nums = [t.value[0] for t in toks if t.kind == "NUMBER"]
    assert nums == [28800.0, 1800.0, 1800.0]
    assert tokenize("2s")[0].value == (2.0, "s")
    assert tokenize("1.5h")[0].value == (5400.0, "h")


def test_comments_and_positions():
    toks = tokenize("# comment\n  Foo --> Bar")
    assert toks[0].kind == "IDENT"
    assert (toks[0].pos.line, toks[0].pos.col) == (2, 3)


def test_lex_errors():
    with pytest.raises(LexError):
        tokenize('"open')
    with pytest.raises(LexError):
        tokenize("A --> B $")


# -- parser ----------------------------------------------------------------------------------------


def test_rule_with_calls():
    rf = parse_rule_file("A --> B C(arg1, arg2)\nB --> NIL\nC(x, y) --> NIL")
    a = rf.rule("A")
    assert [type(i) for i in a.successor] == [ast.RuleCall, ast.RuleCall]
    assert a.successor[1].name == "C"
    assert len(a.successor[1].args) == 2
    assert rf.rule("C").params == ("x", "y")


def test_shop_park_lot_structure():
    rf = parse_rule_file(read("shop_park_lot.cga"))
    names = [r.name for r in rf.rules]
    assert names == ["Lot", "Park", "Benches", "Bench", "Shop", "Facade", "DoorV", "Door"]
    assert rf.start_rule == "Lot"
    objects = [r for r in rf.rules if r.annotation("Object")]
    assert [r.annotation("Object").args for r in objects] == [("bench",)]
    # eight defined rules plus one that is referenced but never defined
    assert set(undefined_rules(rf)) == {"Wall"}


def test_school_day_structure():
    rf = parse_rule_file(read("school_day.pcg"))
    assert len(rf.rules) == 8
    assert [a.name for a in rf.attributes] == ["schoolStart", "schoolEnd", "workStart", "workEnd"]
    assert rf.start_rule == "Household"


def test_school_day_bare_accompany_offset_parses():
    text = read("school_day.pcg").replace("schoolStart-2h", "schoolStart-2")
    rf = parse_rule_file(text)
    op = rf.rule("BringChildrenToSchool").successor[0]
    assert op.name == "accompany"
    assert evaluate(op.args[0], Environment({}, {"schoolStart": 28800.0})) == 28798.0


def test_parse_errors():
    with pytest.raises(ParseError):
        parse_rule_file("A --> B(")
    with pytest.raises(ParseError):
        parse_rule_file("@StartRule\nA --> NIL\n@StartRule\nB --> NIL")
    with pytest.raises(ParseError):
        parse_rule_file("A --> NIL\nA --> NIL")


def test_printer_round_trip_on_shipped_files():
    for name in ("shop_park_lot.cga", "school_day.pcg", "weekday.pcg", "structured_city.cga"):
        rf = parse_rule_file(read(name))
        again = parse_rule_file(print_rule_file(rf))
        assert again.rules == rf.rules
        assert again.attributes == rf.attributes


# -- evaluator -------------------------------------------------------------------------------------


def test_arithmetic_and_logic():
    assert ev("1 + 2 * 3") == 7
    assert ev("(1 + 2) * 3") == 9
    assert ev("7 / 2") == 3.5
    assert ev("1 / 0") is INVALID
    assert ev("-3 + 1") == -2
    assert ev("1 < 2 && 2 < 3") is True
    assert ev("!(1 == 1) || false") is False
    assert ev('"a" + "b"') == "ab"
    assert ev("x * 2", x=4.0) == 8.0


def test_short_circuit_skips_unknown():
    assert ev("false && nope") is False
    assert ev("true || nope") is True


def test_eval_errors():
    with pytest.raises(EvalError):
        ev("nope + 1")
    with pytest.raises(EvalError):
        ev("nofn(1)")
    with pytest.raises(EvalError):
        ev('"a" * 2')


def test_invalid_propagates():
    assert ev("x + 1", x=INVALID) is INVALID
    assert ev("x < 1", x=INVALID) is False
    assert ev("x == x", x=INVALID) is True


# -- resolution ------------------------------------------------------------------------------------


def test_defines_override_attributes():
    rf = load_rules(data_path("weekday.pcg"), defines={"workStart": "9h"})
    attr = {a.name: a for a in rf.attributes}["workStart"]
    assert evaluate(attr.value, Environment({})) == 32400.0
    extra = apply_defines(rf, {"extraDelay": "5m"})
    assert {a.name: evaluate(a.value, Environment({})) for a in extra.attributes}["extraDelay"] == 300.0
    with pytest.raises(ResolveError):
        apply_defines(rf, {"workStart": "9h +"})
    assert parse_define("a=1h") == ("a", "1h")


def test_imports_keep_only_root_start_rule():
    rf = load_rules(data_path("mixed.pcg"))
    assert rf.start_rule == "MixedHousehold"
    assert [r.name for r in rf.rules if r.is_start] == ["MixedHousehold"]
    # the merged text is self-contained
    assert parse_rule_file(print_rule_file(rf)).start_rule == "MixedHousehold"


def test_missing_start_rule(tmp_path):
    with pytest.raises(ResolveError):
        resolve_source("A --> NIL", str(tmp_path / "x.pcg"))


def test_duplicate_rule_across_imports(tmp_path):
    (tmp_path / "a.pcg").write_text("Shared --> NIL\n")
    (tmp_path / "b.pcg").write_text('import "a.pcg"\n@StartRule\nTop --> Shared\nShared --> NIL\n')
    with pytest.raises(ResolveError):
        load_rules(str(tmp_path / "b.pcg"))


def test_import_cycle_is_tolerated(tmp_path):
    (tmp_path / "a.pcg").write_text('import "b.pcg"\n@StartRule\nTop --> Other\n')
    (tmp_path / "b.pcg").write_text('import "a.pcg"\nOther --> NIL\n')
    rf = load_rules(str(tmp_path / "a.pcg"))
    assert {r.name for r in rf.rules} == {"Top", "Other"}


# -- properties ------------------------------------------------------------------------------------

ints = st.integers(min_value=-50, max_value=50)


@st.composite
def int_expr(draw, depth=3):
    if depth == 0 or draw(st.booleans()):
        n = draw(ints)
        return str(n) if n >= 0 else f"({n})", n
    op = draw(st.sampled_from(["+", "-", "*"]))
    ltxt, lval = draw(int_expr(depth - 1))
    rtxt, rval = draw(int_expr(depth - 1))
    val = {"+": lval + rval, "-": lval - rval, "*": lval * rval}[op]
    return f"({ltxt} {op} {rtxt})", val


@settings(max_examples=200, deadline=None)
@given(int_expr())
def test_integer_arithmetic_matches_python(case):
    text, value = case
    assert ev(text) == value


@settings(max_examples=200, deadline=None)
@given(int_expr())
def test_expression_print_round_trip(case):
    text, _ = case
    e = parse_expression(text)
    assert parse_expression(print_expr(e)) == e


@settings(max_examples=100, deadline=None)
@given(st.floats(min_value=0, max_value=1e6, allow_nan=False), st.sampled_from(["h", "m", "s"]))
def test_unit_scaling(x, unit):
    text = np.format_float_positional(x, trim="-")
    if "." not in text:
        text += ".0"
    scale = {"h": 3600.0, "m": 60.0, "s": 1.0}[unit]
    assert ev(text + unit) == pytest.approx(float(text) * scale)
