"""Parsing of reasoner output: literal blocks and action-function plans.

The literal grammar is the subset of Python literal syntax that reasoner
responses use (see ``docs/literal_grammar.md``). It is parsed by a small
recursive-descent parser; nothing is ever evaluated.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Any, Union

LiteralValue = Union[int, float, bool, str, tuple, list, dict]
Pos = tuple[int, int]


class LiteralSyntaxError(ValueError):
    """Malformed literal. ``offset`` is 0-based, line and column 1-based."""

    def __init__(self, message: str, text: str, offset: int) -> None:
        self.reason = message
        self.offset = offset
        self.line = text.count("\n", 0, offset) + 1
        self.column = offset - (text.rfind("\n", 0, offset) + 1) + 1
        super().__init__(f"{message} at line {self.line}, column {self.column}")


class PlanError(ValueError):
    """An action plan that parsed as a literal but is not a valid plan."""


_NUMBER = re.compile(r"[+-]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_SIMPLE_ESCAPES = {
    "\\": "\\",
    "'": "'",
    '"': '"',
    "n": "\n",
    "t": "\t",
    "r": "\r",
    "0": "\0",
    "a": "\a",
    "b": "\b",
    "f": "\f",
    "v": "\v",
}
_HEX_ESCAPES = {"x": 2, "u": 4, "U": 8}


class _Parser:
    def __init__(self, text: str) -> None:
        self.text = text
        self.pos = 0

    def error(self, message: str, offset: int | None = None) -> LiteralSyntaxError:
        return LiteralSyntaxError(message, self.text, self.pos if offset is None else offset)

    def skip_ws(self) -> None:
        text, n = self.text, len(self.text)
        while self.pos < n and text[self.pos] in " \t\r\n":
            self.pos += 1

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def unexpected(self) -> LiteralSyntaxError:
        ch = self.peek()
        if not ch:
            return self.error("unexpected end of input")
        return self.error(f"unexpected {ch!r}")

    def parse(self) -> LiteralValue:
        value = self.value()
        if self.peek():
            raise self.error("unexpected trailing content")
        return value

    def value(self) -> LiteralValue:
        ch = self.peek()
        if ch == "{":
            return self.mapping()
        if ch == "[":
            return self.sequence("[", "]")
        if ch == "(":
            return self.paren()
        if ch in ("'", '"'):
            return self.string()
        if ch and (ch.isdigit() or ch in "+-."):
            return self.number()
        if ch and (ch.isalpha() or ch == "_"):
            m = _IDENT.match(self.text, self.pos)
            assert m is not None
            word = m.group()
            if word in ("True", "False"):
                self.pos = m.end()
                return word == "True"
            raise self.error(f"unexpected identifier {word!r}")
        raise self.unexpected()

    def items(self, close: str) -> list[LiteralValue]:
        """Comma separated values up to ``close``; trailing comma allowed."""
        out: list[LiteralValue] = []
        self.trailing_comma = False
        while True:
            if self.peek() == close:
                self.pos += 1
                return out
            out.append(self.value())
            ch = self.peek()
            if ch == ",":
                self.pos += 1
                self.trailing_comma = True
            elif ch == close:
                self.trailing_comma = False
            else:
                raise self.error(f"expected ',' or {close!r}") if ch else self.unexpected()

    def sequence(self, open_: str, close: str) -> list:
        self.pos += 1
        return self.items(close)

    def paren(self) -> LiteralValue:
        self.pos += 1
        values = self.items(")")
        if len(values) == 1 and not self.trailing_comma:
            return values[0]
        return tuple(values)

    def mapping(self) -> dict:
        self.pos += 1
        out: dict[str, LiteralValue] = {}
        while True:
            if self.peek() == "}":
                self.pos += 1
                return out
            key_at = self.pos
            if self.peek() not in ("'", '"'):
                if self.peek() in ("", "}"):
                    raise self.unexpected()
                raise self.error("map keys must be strings")
            key = self.string()
            if key in out:
                raise self.error(f"duplicate key {key!r}", key_at)
            if self.peek() != ":":
                raise self.error("expected ':'") if self.peek() else self.unexpected()
            self.pos += 1
            out[key] = self.value()
            ch = self.peek()
            if ch == ",":
                self.pos += 1
            elif ch != "}":
                raise self.error("expected ',' or '}'") if ch else self.unexpected()

    def string(self) -> str:
        text = self.text
        quote = text[self.pos]
        start = self.pos
        self.pos += 1
        chunks: list[str] = []
        while True:
            if self.pos >= len(text):
                raise self.error("unterminated string", start)
            ch = text[self.pos]
            if ch == quote:
                self.pos += 1
                return "".join(chunks)
            if ch == "\n":
                raise self.error("unterminated string", start)
            if ch == "\\":
                chunks.append(self.escape())
                continue
            chunks.append(ch)
            self.pos += 1

    def escape(self) -> str:
        text = self.text
        if self.pos + 1 >= len(text):
            raise self.error("unterminated string")
        code = text[self.pos + 1]
        if code in _SIMPLE_ESCAPES:
            self.pos += 2
            return _SIMPLE_ESCAPES[code]
        if code in _HEX_ESCAPES:
            width = _HEX_ESCAPES[code]
            digits = text[self.pos + 2 : self.pos + 2 + width]
            if len(digits) != width or not all(c in "0123456789abcdefABCDEF" for c in digits):
                raise self.error(f"bad \\{code} escape")
            self.pos += 2 + width
            value = int(digits, 16)
            if value > 0x10FFFF:
                raise self.error(f"bad \\{code} escape")
            return chr(value)
        self.pos += 1
        return "\\"

    def number(self) -> int | float:
        m = _NUMBER.match(self.text, self.pos)
        if m is None:
            raise self.unexpected()
        token = m.group()
        self.pos = m.end()
        if any(c in token for c in ".eE"):
            return float(token)
        return int(token)


def parse_literal(text: str) -> LiteralValue:
    """Parse one literal value; raises :class:`LiteralSyntaxError`."""
    return _Parser(text).parse()


def format_literal(value: Any) -> str:
    """Canonical text for a literal value; inverse of :func:`parse_literal`."""
    if isinstance(value, bool):
        return "True" if value else "False"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError("non-finite floats have no literal form")
        return repr(value)
    if isinstance(value, str):
        return repr(value)
    if isinstance(value, tuple):
        if len(value) == 1:
            return f"({format_literal(value[0])},)"
        return "(" + ", ".join(format_literal(v) for v in value) + ")"
    if isinstance(value, list):
        return "[" + ", ".join(format_literal(v) for v in value) + "]"
    if isinstance(value, dict):
        parts = []
        for k, v in value.items():
            if not isinstance(k, str):
                raise ValueError(f"map key {k!r} is not a string")
            parts.append(f"{format_literal(k)}: {format_literal(v)}")
        return "{" + ", ".join(parts) + "}"
    raise ValueError(f"{type(value).__name__} has no literal form")


_FENCE = re.compile(r"```[^\n`]*\n?(.*?)```", re.DOTALL)


def _balanced_braces(text: str) -> str | None:
    start = text.find("{")
    while start != -1:
        depth, quote, i = 0, "", start
        while i < len(text):
            ch = text[i]
            if quote:
                if ch == "\\":
                    i += 1
                elif ch == quote or ch == "\n":
                    quote = ""
            elif ch in ("'", '"'):
                quote = ch
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    return text[start : i + 1]
            i += 1
        start = text.find("{", start + 1)
    return None


def extract_block(text: str) -> str:
    """Body of the first fenced block, else the first balanced ``{...}``."""
    m = _FENCE.search(text)
    if m:
        return m.group(1).strip()
    region = _balanced_braces(text)
    return region if region is not None else text


# -- action functions ---------------------------------------------------------

ACTION_ARITY = {"move_to": 2, "fire_at": 1, "interact": 1, "wait": 1}


@dataclass(frozen=True)
class SubgoalCall:
    name: str
    args: tuple[Pos, ...]

    def __post_init__(self) -> None:
        if self.name not in ACTION_ARITY:
            raise PlanError(f"unknown function {self.name!r}")
        if len(self.args) != ACTION_ARITY[self.name]:
            raise PlanError(
                f"{self.name} expects {ACTION_ARITY[self.name]} coordinates, got {len(self.args)}"
            )

    @property
    def target(self) -> Pos:
        return self.args[-1]

    def __str__(self) -> str:
        return f"{self.name}(" + ", ".join(f"({x}, {y})" for x, y in self.args) + ")"


def move_to(src: Pos, dst: Pos) -> SubgoalCall:
    return SubgoalCall("move_to", (tuple(src), tuple(dst)))  # type: ignore[arg-type]


def fire_at(pos: Pos) -> SubgoalCall:
    return SubgoalCall("fire_at", (tuple(pos),))  # type: ignore[arg-type]


def interact(pos: Pos) -> SubgoalCall:
    return SubgoalCall("interact", (tuple(pos),))  # type: ignore[arg-type]


def wait(pos: Pos) -> SubgoalCall:
    return SubgoalCall("wait", (tuple(pos),))  # type: ignore[arg-type]


_CALL = re.compile(r"\s*([A-Za-z_][A-Za-z0-9_]*)\s*\((.*)\)\s*$", re.DOTALL)


def _is_coord(v: Any) -> bool:
    return (
        isinstance(v, tuple)
        and len(v) == 2
        and all(isinstance(c, int) and not isinstance(c, bool) for c in v)
    )


def parse_call(text: str) -> SubgoalCall:
    m = _CALL.match(text)
    if not m:
        raise PlanError(f"malformed call {text!r}")
    name, inner = m.group(1), m.group(2)
    if name not in ACTION_ARITY:
        raise PlanError(f"unknown function {name!r} in {text!r}")
    try:
        args = parse_literal(f"({inner},)") if inner.strip() else ()
    except LiteralSyntaxError:
        raise PlanError(f"malformed arguments in {text!r}") from None
    if not all(_is_coord(a) for a in args):  # type: ignore[union-attr]
        raise PlanError(f"arguments must be (x, y) integer pairs in {text!r}")
    if len(args) != ACTION_ARITY[name]:  # type: ignore[arg-type]
        raise PlanError(
            f"{name} expects {ACTION_ARITY[name]} coordinates, got {len(args)} in {text!r}"  # type: ignore[arg-type]
        )
    return SubgoalCall(name, tuple(args))  # type: ignore[arg-type]


def parse_action_plan(value: LiteralValue) -> list[SubgoalCall]:
    if not isinstance(value, dict) or "action_plan" not in value:
        raise PlanError("missing key 'action_plan'")
    plan = value["action_plan"]
    if not isinstance(plan, list):
        raise PlanError("'action_plan' must be a list")
    calls = []
    for i, entry in enumerate(plan):
        if not isinstance(entry, str):
            raise PlanError(f"action_plan entry {i} is not a string")
        calls.append(parse_call(entry))
    return calls


_BARE_CALL = re.compile(
    r"\b([A-Za-z_][A-Za-z0-9_]*)\s*\(\s*(\(\s*-?\d+\s*,\s*-?\d+\s*\)"
    r"(?:\s*,\s*\(\s*-?\d+\s*,\s*-?\d+\s*\))*)\s*\)"
)


def plan_from_text(text: str) -> list[SubgoalCall]:
    """Action plan from a raw reasoner response.

    Falls back to scanning unquoted calls (``action_plan: [move_to((1, 2),
    (3, 4))]``) when the block is not a valid literal.
    """
    block = extract_block(text)
    try:
        value = parse_literal(block)
    except LiteralSyntaxError:
        if "action_plan" not in block:
            raise
        calls = [parse_call(m.group(0)) for m in _BARE_CALL.finditer(block)]
        if not calls:
            raise
        return calls
    return parse_action_plan(value)


def literal_from_text(text: str) -> LiteralValue:
    return parse_literal(extract_block(text))
