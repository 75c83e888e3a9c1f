from __future__ import annotations

import ast
import json
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mindgrid.parsing import (
    LiteralSyntaxError,
    PlanError,
    SubgoalCall,
    extract_block,
    format_literal,
    literal_from_text,
    move_to,
    parse_action_plan,
    parse_call,
    parse_literal,
    plan_from_text,
)

GOLDEN = Path(__file__).parent / "golden"
RESPONSES = json.loads((GOLDEN / "responses.json").read_text(encoding="utf-8"))
ERRORS = json.loads((GOLDEN / "literal_errors.json").read_text(encoding="utf-8"))


@pytest.mark.parametrize("case", RESPONSES, ids=[c["name"] for c in RESPONSES])
def test_golden_responses(case):
    if case["kind"] == "plan":
        assert [str(c) for c in plan_from_text(case["text"])] == case["expected"]
    else:
        assert literal_from_text(case["text"]) == case["expected"]
        # second route: the standard library agrees on the extracted block
        assert ast.literal_eval(extract_block(case["text"])) == case["expected"]


@pytest.mark.parametrize("case", ERRORS, ids=[repr(c["text"][:20]) for c in ERRORS])
def test_golden_errors(case):
    with pytest.raises(LiteralSyntaxError) as info:
        parse_literal(case["text"])
    err = info.value
    assert (err.offset, err.line, err.column) == (case["offset"], case["line"], case["column"])
    assert err.reason == case["reason"]
    assert str(err).endswith(f"at line {case['line']}, column {case['column']}")


def test_inventory_example():
    assert parse_literal("{'rock/yellow': 5, 'paper/purple': 1, 'scissors/blue': 1}") == {
        "rock/yellow": 5, "paper/purple": 1, "scissors/blue": 1,
    }


def test_scalars_and_escapes():
    assert parse_literal("-3.428") == -3.428
    assert parse_literal("1e3") == 1000.0
    assert parse_literal("(1,)") == (1,)
    assert parse_literal("()") == ()
    assert parse_literal('"it\'s"') == "it's"
    assert parse_literal(r"'a\nb\x41'") == "a\nbA"
    assert parse_literal(" [ 1 ,\n 2 , ] ") == [1, 2]
    with pytest.raises(LiteralSyntaxError):
        parse_literal("None")  # not part of the grammar


def test_never_evaluates():
    for text in ("__import__('os')", "open('x')", "1 + 1", "[x for x in y]", "lambda: 0"):
        with pytest.raises(LiteralSyntaxError):
            parse_literal(text)


def test_action_plan_examples():
    assert parse_action_plan({"action_plan": ["move_to((21, 10), (20, 10))"]}) == [move_to((21, 10), (20, 10))]
    assert parse_action_plan({"action_plan": ["interact((5, 1))"]}) == [SubgoalCall("interact", ((5, 1),))]
    assert parse_action_plan({"action_plan": []}) == []


@pytest.mark.parametrize(
    "value, message",
    [
        ({"action_plan": ["teleport((1,1))"]}, "unknown function 'teleport'"),
        ({"action_plan": ["move_to((1, 1))"]}, "move_to expects 2 coordinates"),
        ({"action_plan": ["fire_at((1.5, 2))"]}, "integer pairs"),
        ({"action_plan": [3]}, "entry 0 is not a string"),
        ({"plan": []}, "missing key 'action_plan'"),
        ({"action_plan": "wait((1, 1))"}, "must be a list"),
    ],
)
def test_action_plan_errors(value, message):
    with pytest.raises(PlanError, match=message):
        parse_action_plan(value)


def test_call_text_round_trip():
    for text in ("move_to((11, 7), (9, 5))", "fire_at((3, 4))", "interact((0, 6))", "wait((4, 1))"):
        assert str(parse_call(text)) == text
    assert str(parse_call("  wait( (4,1) )")) == "wait((4, 1))"


def test_plan_from_unquoted_calls():
    text = "{'action_plan': [move_to((1, 2), (3, 4)), fire_at((5, 6))]}"
    assert [str(c) for c in plan_from_text(text)] == ["move_to((1, 2), (3, 4))", "fire_at((5, 6))"]


def test_plan_from_text_without_plan_raises():
    with pytest.raises(LiteralSyntaxError):
        plan_from_text("I will go left.")


def test_extract_block_rules():
    assert extract_block("a\n```python\n{'k': 1}\n```\nb ```x```") == "{'k': 1}"
    assert extract_block("say {'k': {'j': '}'}} and {'z': 2}") == "{'k': {'j': '}'}}"
    assert extract_block("no block here") == "no block here"


_keys = st.text(st.characters(blacklist_categories=("Cs",)), max_size=8)
_scalars = (
    st.integers(-10**6, 10**6)
    | st.floats(allow_nan=False, allow_infinity=False, width=64)
    | st.booleans()
    | st.text(st.characters(blacklist_categories=("Cs",)), max_size=12)
)
literals = st.recursive(
    _scalars,
    lambda inner: st.lists(inner, max_size=4)
    | st.lists(inner, max_size=4).map(tuple)
    | st.dictionaries(_keys, inner, max_size=4),
    max_leaves=12,
)


@settings(max_examples=400, deadline=None)
@given(literals)
def test_round_trip(value):
    text = format_literal(value)
    assert parse_literal(text) == value
    assert ast.literal_eval(text) == value


@settings(max_examples=200, deadline=None)
@given(st.dictionaries(_keys, _scalars, min_size=1, max_size=4), st.text(alphabet="abc .:\n", max_size=20))
def test_extract_block_from_prose_wrapper(value, prose):
    body = format_literal(value)
    assert literal_from_text(f"{prose}\n{body}\n{prose}") == value
    assert literal_from_text(f"{prose}\n```python\n{body}\n```\n{prose}") == value
