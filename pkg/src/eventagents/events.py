"""The constrained event-construction language and its canonical form.

The coding agent answers with a single event construction in one of two
surface forms:

* a constructor call mirroring the rendered schema classes, for example
  ``Databreach(mention="breach", tool=["malware"])``, whose keyword
  arguments carry string, number or boolean literals, or flat lists of
  them;
* object notation, a JSON object with the keys ``event_type``,
  ``trigger`` and ``arguments``.

Both normalize to the same :class:`EventObject`; ``mention`` in the
constructor form maps to ``trigger``.  Nothing is ever executed.  Parsing
is total: bad input produces a :class:`CodeObject` carrying a positioned
:class:`ParseFailure` instead of an exception, and the failure text is
what the refinement loop feeds back to the coding agent.

Scalar argument values are normalized to singleton lists so multiplicity
checking is uniform downstream.  Unknown roles are kept; rejecting them
is the type checker's job, not the parser's.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Any

from .schemas import EventSchema, SchemaRegistry

Scalar = str | int | float | bool

EVENT_FIELDS = ("event_type", "trigger", "arguments")


@dataclass
class EventObject:
    """A fully specified event: type, trigger span text, role values."""

    event_type: str
    trigger: str
    arguments: dict[str, list]

    def __post_init__(self):
        if not isinstance(self.event_type, str) or not self.event_type:
            raise ValueError("event_type must be a non-empty string")
        if not isinstance(self.trigger, str):
            raise ValueError("trigger must be a string")
        if not isinstance(self.arguments, dict):
            raise ValueError("arguments must map role names to value lists")
        for role, values in self.arguments.items():
            if not isinstance(role, str) or not role:
                raise ValueError("argument role names must be non-empty strings")
            if not isinstance(values, list):
                raise ValueError(f"values of role {role!r} must be a list")
            for value in values:
                if not isinstance(value, (str, int, float, bool)):
                    raise ValueError(f"role {role!r} holds an unsupported value {value!r}")


@dataclass(frozen=True)
class ParseFailure:
    """Why a piece of generated code was rejected, and where."""

    message: str
    line: int
    col: int

    def describe(self) -> str:
        return f"line {self.line}, col {self.col}: {self.message}"


@dataclass
class CodeObject:
    """Generated source text together with its parse outcome.

    ``extra_fields`` records unexpected top-level keys seen in object
    notation; they parse fine but fail the structural check later.
    ``origin_hypothesis`` points back at the trigger hypothesis the code
    was generated for, when known.
    """

    raw_source: str
    parsed: EventObject | None = None
    failure: ParseFailure | None = None
    extra_fields: tuple[str, ...] = ()
    origin_hypothesis: Any = None

    def __post_init__(self):
        if (self.parsed is None) == (self.failure is None):
            raise ValueError("exactly one of parsed/failure must be set")


class _ParseError(Exception):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(message)
        self.message = message
        self.line = line
        self.col = col


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    line: int
    col: int


_PUNCT = {"(": "lparen", ")": "rparen", "[": "lbracket", "]": "rbracket", ",": "comma", "=": "equals"}
_NUMBER_RE = re.compile(r"-?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?")
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*(?:-[A-Za-z0-9_]+)*")
_ESCAPES = {"\\": "\\", "'": "'", '"': '"', "n": "\n", "t": "\t", "r": "\r"}
_REVERSE_ESCAPES = {"\\": "\\\\", "\n": "\\n", "\t": "\\t", "\r": "\\r"}


def _scan(source: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, col = 1, 1
    i, n = 0, len(source)
    while i < n:
        ch = source[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch in _PUNCT:
            tokens.append(_Token(_PUNCT[ch], ch, line, col))
            i += 1
            col += 1
            continue
        if ch in "'\"":
            quote = ch
            start_line, start_col = line, col
            i += 1
            col += 1
            chunks: list[str] = []
            while True:
                if i >= n or source[i] == "\n":
                    raise _ParseError("unterminated string literal", start_line, start_col)
                c = source[i]
                if c == "\\":
                    if i + 1 >= n:
                        raise _ParseError("unterminated string literal", start_line, start_col)
                    esc = source[i + 1]
                    if esc not in _ESCAPES:
                        raise _ParseError(f"invalid escape sequence '\\{esc}'", line, col)
                    chunks.append(_ESCAPES[esc])
                    i += 2
                    col += 2
                    continue
                if c == quote:
                    i += 1
                    col += 1
                    break
                chunks.append(c)
                i += 1
                col += 1
            tokens.append(_Token("string", "".join(chunks), start_line, start_col))
            continue
        if ch.isdigit() or ch == "-":
            m = _NUMBER_RE.match(source, i)
            if m:
                text = m.group(0)
                tokens.append(_Token("number", text, line, col))
                i = m.end()
                col += len(text)
                continue
        m = _IDENT_RE.match(source, i)
        if m:
            text = m.group(0)
            tokens.append(_Token("ident", text, line, col))
            i = m.end()
            col += len(text)
            continue
        raise _ParseError(f"unexpected character {ch!r}", line, col)
    tokens.append(_Token("eof", "", line, col))
    return tokens


def _show(tok: _Token) -> str:
    return "end of input" if tok.kind == "eof" else repr(tok.text)


def _as_number(text: str) -> int | float:
    if "." in text or "e" in text or "E" in text:
        return float(text)
    return int(text)


class _ConstructorParser:
    """Recursive descent over the tiny constructor-call grammar."""

    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def expect(self, kind: str, what: str) -> _Token:
        tok = self.advance()
        if tok.kind != kind:
            raise _ParseError(f"expected {what}, got {_show(tok)}", tok.line, tok.col)
        return tok

    def parse(self) -> EventObject:
        name = self.expect("ident", "a class name")
        self.expect("lparen", "'('")
        kwargs: dict[str, Any] = {}
        rparen = None
        while True:
            tok = self.peek()
            if tok.kind == "rparen":
                rparen = self.advance()
                break
            if tok.kind in ("string", "number", "lbracket"):
                raise _ParseError("positional arguments are not allowed", tok.line, tok.col)
            name_tok = self.expect("ident", "a keyword argument")
            nxt = self.peek()
            if nxt.kind != "equals":
                if nxt.kind in ("comma", "rparen"):
                    raise _ParseError("positional arguments are not allowed", name_tok.line, name_tok.col)
                raise _ParseError(f"expected '=' after {name_tok.text!r}, got {_show(nxt)}", nxt.line, nxt.col)
            self.advance()
            if name_tok.text in kwargs:
                raise _ParseError(f"duplicate keyword argument {name_tok.text!r}", name_tok.line, name_tok.col)
            kwargs[name_tok.text] = self.parse_value(allow_list=True)
            sep = self.advance()
            if sep.kind == "comma":
                continue
            if sep.kind == "rparen":
                rparen = sep
                break
            raise _ParseError(f"expected ',' or ')', got {_show(sep)}", sep.line, sep.col)
        trailing = self.peek()
        if trailing.kind != "eof":
            raise _ParseError(f"unexpected trailing content {_show(trailing)}", trailing.line, trailing.col)
        if "mention" not in kwargs:
            raise _ParseError("missing required keyword 'mention'", rparen.line, rparen.col)
        mention = kwargs.pop("mention")
        if not isinstance(mention, str):
            raise _ParseError("keyword 'mention' must be a string literal", name.line, name.col)
        arguments = {k: v if isinstance(v, list) else [v] for k, v in kwargs.items()}
        return EventObject(event_type=name.text, trigger=mention, arguments=arguments)

    def parse_value(self, allow_list: bool) -> Any:
        tok = self.advance()
        if tok.kind == "string":
            return tok.text
        if tok.kind == "number":
            return _as_number(tok.text)
        if tok.kind == "ident":
            if tok.text == "True":
                return True
            if tok.text == "False":
                return False
            raise _ParseError(
                f"expected a string, number, boolean or list, got {tok.text!r}", tok.line, tok.col
            )
        if tok.kind == "lbracket":
            if not allow_list:
                raise _ParseError("nested lists are not allowed", tok.line, tok.col)
            values: list[Any] = []
            if self.peek().kind == "rbracket":
                self.advance()
                return values
            while True:
                values.append(self.parse_value(allow_list=False))
                sep = self.advance()
                if sep.kind == "comma":
                    if self.peek().kind == "rbracket":
                        self.advance()
                        return values
                    continue
                if sep.kind == "rbracket":
                    return values
                raise _ParseError(f"expected ',' or ']', got {_show(sep)}", sep.line, sep.col)
        raise _ParseError(f"expected a value, got {_show(tok)}", tok.line, tok.col)


def _is_scalar(value: Any) -> bool:
    return isinstance(value, (str, int, float, bool)) and value is not None


def _parse_object_notation(source: str) -> tuple[EventObject, tuple[str, ...]]:
    try:
        data = json.loads(source)
    except json.JSONDecodeError as exc:
        raise _ParseError(f"malformed object notation: {exc.msg}", exc.lineno, exc.colno) from None
    if not isinstance(data, dict):
        raise _ParseError("object notation must be a JSON object", 1, 1)
    for key in EVENT_FIELDS:
        if key not in data:
            raise _ParseError(f"missing required field {key!r}", 1, 1)
    event_type = data["event_type"]
    trigger = data["trigger"]
    raw_arguments = data["arguments"]
    if not isinstance(event_type, str) or not event_type:
        raise _ParseError("'event_type' must be a non-empty string", 1, 1)
    if not isinstance(trigger, str):
        raise _ParseError("'trigger' must be a string", 1, 1)
    if not isinstance(raw_arguments, dict):
        raise _ParseError("'arguments' must be an object", 1, 1)
    arguments: dict[str, list] = {}
    for role, value in raw_arguments.items():
        if isinstance(value, list):
            for item in value:
                if isinstance(item, list):
                    raise _ParseError(f"nested lists are not allowed in role {role!r}", 1, 1)
                if not _is_scalar(item):
                    raise _ParseError(
                        f"values of role {role!r} must be strings, numbers or booleans", 1, 1
                    )
            arguments[role] = list(value)
        elif _is_scalar(value):
            arguments[role] = [value]
        else:
            raise _ParseError(
                f"values of role {role!r} must be strings, numbers or booleans", 1, 1
            )
    extras = tuple(k for k in data if k not in EVENT_FIELDS)
    return EventObject(event_type=event_type, trigger=trigger, arguments=arguments), extras


def order_arguments(arguments: dict[str, list], schema: EventSchema) -> dict[str, list]:
    """Order roles by schema declaration, then unknown roles lexicographically."""
    known = [role.name for role in schema.roles if role.name in arguments]
    unknown = sorted(name for name in arguments if schema.find_role(name) is None)
    return {name: arguments[name] for name in [*known, *unknown]}


def parse_event_code(
    source: str,
    registry: SchemaRegistry | None = None,
    origin_hypothesis: Any = None,
) -> CodeObject:
    """Parse generated code text into a :class:`CodeObject`; never raises.

    A registry is only consulted to put a recognized event type's
    arguments into canonical role order; unresolved names still parse
    and fail later in verification.
    """
    head = source.lstrip()
    try:
        if not head:
            raise _ParseError("empty input", 1, 1)
        if head.startswith("{"):
            event, extras = _parse_object_notation(source)
        else:
            event = _ConstructorParser(_scan(source)).parse()
            extras = ()
    except _ParseError as exc:
        return CodeObject(
            raw_source=source,
            failure=ParseFailure(exc.message, exc.line, exc.col),
            origin_hypothesis=origin_hypothesis,
        )
    if registry is not None:
        schema = registry.get(event.event_type)
        if schema is not None:
            event = EventObject(event.event_type, event.trigger, order_arguments(event.arguments, schema))
    return CodeObject(
        raw_source=source,
        parsed=event,
        extra_fields=extras,
        origin_hypothesis=origin_hypothesis,
    )


def serialize_event(event: EventObject, schema: EventSchema | None = None) -> str:
    """Render an event in canonical object notation (one line, valid JSON).

    Key order is fixed: ``event_type``, ``trigger``, ``arguments``.  With
    a schema, argument roles come out in declaration order followed by
    unknown roles lexicographically; without one, stored order is kept
    (parsing puts arguments into canonical order whenever the event type
    is known, so pipeline output is canonical either way).
    """
    arguments = order_arguments(event.arguments, schema) if schema is not None else dict(event.arguments)
    payload = {"event_type": event.event_type, "trigger": event.trigger, "arguments": arguments}
    return json.dumps(payload, ensure_ascii=False, allow_nan=False)


def render_constructor_call(event: EventObject) -> str:
    """Render an event as constructor-call text (the prompts' code shape).

    Inverse-compatible with :func:`parse_event_code`'s constructor form
    for events whose strings avoid unprintable characters outside the
    supported escape set.
    """
    parts = [f"mention={_quote(event.trigger)}"]
    for role, values in event.arguments.items():
        rendered = ", ".join(_literal(v) for v in values)
        parts.append(f"{role}=[{rendered}]")
    return f"{event.event_type}({', '.join(parts)})"


def _quote(text: str) -> str:
    out = []
    for ch in text:
        if ch in _REVERSE_ESCAPES:
            out.append(_REVERSE_ESCAPES[ch])
        elif ch == '"':
            out.append('\\"')
        else:
            out.append(ch)
    return '"' + "".join(out) + '"'


def _literal(value: Scalar) -> str:
    if isinstance(value, bool):
        return "True" if value else "False"
    if isinstance(value, str):
        return _quote(value)
    return repr(value)
