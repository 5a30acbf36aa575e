"""Three-stage verification of generated event objects.

The verdict is the conjunction of three checks, reported with the first
failure only:

* T1 (semantic): the trigger occurs in the input text as a contiguous,
  case-insensitive token subsequence; in llm mode an additional yes/no
  judge call must agree the trigger fits the event type.
* T2 (type): every argument role is declared by the schema, every value
  matches the role's value type, and multiplicity constraints hold.
* T3 (structural): the source parsed, the object carries exactly the
  fields event_type/trigger/arguments, and it serializes cleanly.

Check order for parsed objects is T1, T2, T3.  Source that does not
parse cannot be inspected at all, so it short-circuits straight to a T3
diagnostic carrying the parser's position message.

T2 walks the event's arguments in stored order and reports, per role:
first an undeclared-role diagnostic, then value type errors in list
order, then the multiplicity violation; schema roles missing from the
arguments are checked for required-scalar multiplicity afterwards, in
declaration order.  This ordering is part of the contract: diagnostics
must be reproducible because the patch prompt embeds them verbatim.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

from .errors import EventAgentsError
from .events import CodeObject, serialize_event
from .schemas import EventSchema, Multiplicity, SCALAR_TYPE_NAMES, ValueType

MODE_STRICT = "strict"
MODE_LLM = "llm"

_WORD_RE = re.compile(r"[^\W_]+")


@dataclass(frozen=True)
class Diagnostic:
    """First-failure record: which check failed, why, and where."""

    failed_check: str
    message: str
    locus: str

    def __post_init__(self):
        if self.failed_check not in ("T1", "T2", "T3"):
            raise ValueError(f"unknown check name {self.failed_check!r}")

    def as_line(self) -> str:
        """Single-line rendering consumed verbatim by the patch prompt."""
        return f"[{self.failed_check}] {self.message} (at {self.locus})"


@dataclass(frozen=True)
class VerificationResult:
    verdict: bool
    diagnostic: Diagnostic | None = None

    def __post_init__(self):
        if self.verdict and self.diagnostic is not None:
            raise ValueError("a passing result carries no diagnostic")
        if not self.verdict and self.diagnostic is None:
            raise ValueError("a failing result must carry a diagnostic")


def tokenize(text: str) -> list[str]:
    """Lowercased word tokens, split at whitespace and punctuation."""
    return _WORD_RE.findall(text.lower())


def contains_token_subsequence(haystack: list[str], needle: list[str]) -> bool:
    """True iff needle occurs in haystack as a contiguous run."""
    if not needle or len(needle) > len(haystack):
        return False
    span = len(needle)
    return any(haystack[i : i + span] == needle for i in range(len(haystack) - span + 1))


def check_semantic(
    code: CodeObject,
    text: str,
    mode: str = MODE_STRICT,
    backend=None,
) -> Diagnostic | None:
    """T1: trigger occurrence, plus the compatibility judge in llm mode."""
    _require_parsed(code)
    _require_mode(mode)
    event = code.parsed
    if not contains_token_subsequence(tokenize(text), tokenize(event.trigger)):
        return Diagnostic("T1", f"trigger {event.trigger!r} not found in text", event.trigger or "trigger")
    if mode == MODE_LLM:
        if backend is None:
            raise EventAgentsError("llm mode requires a backend for the semantic judge")
        from .agents import judge_semantic_compat

        outcome = judge_semantic_compat(backend, event.trigger, event.event_type, text)
        if not outcome.compatible:
            return Diagnostic(
                "T1",
                f"trigger {event.trigger!r} judged not semantically compatible with event type {event.event_type!r}",
                event.trigger,
            )
    return None


def _matches_type(value, value_type: ValueType) -> bool:
    if value_type is ValueType.STRING:
        return isinstance(value, str)
    if value_type is ValueType.BOOLEAN:
        return isinstance(value, bool)
    if value_type is ValueType.INTEGER:
        return isinstance(value, int) and not isinstance(value, bool)
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def check_types(code: CodeObject, schema: EventSchema) -> Diagnostic | None:
    """T2: role existence, value types, and multiplicity."""
    _require_parsed(code)
    event = code.parsed
    if event.event_type != schema.event_type:
        return Diagnostic(
            "T2",
            f"event type {event.event_type!r} does not match schema {schema.event_type!r}",
            "event_type",
        )
    for role_name, values in event.arguments.items():
        role = schema.find_role(role_name)
        if role is None:
            return Diagnostic(
                "T2",
                f"role {role_name!r} is not defined by event type {schema.event_type!r}",
                role_name,
            )
        expected = SCALAR_TYPE_NAMES[role.value_type]
        for value in values:
            if not _matches_type(value, role.value_type):
                return Diagnostic(
                    "T2",
                    f"value {json.dumps(value)} is not of type {expected}",
                    role_name,
                )
        if role.multiplicity is Multiplicity.REQUIRED_SCALAR and len(values) != 1:
            return Diagnostic(
                "T2",
                f"role {role_name!r} expects exactly one value, got {len(values)}",
                role_name,
            )
        if role.multiplicity is Multiplicity.OPTIONAL_SCALAR and len(values) > 1:
            return Diagnostic(
                "T2",
                f"role {role_name!r} expects at most one value, got {len(values)}",
                role_name,
            )
    for role in schema.roles:
        if role.multiplicity is Multiplicity.REQUIRED_SCALAR and role.name not in event.arguments:
            return Diagnostic(
                "T2",
                f"role {role.name!r} expects exactly one value, got 0",
                role.name,
            )
    return None


def check_structure(code: CodeObject) -> Diagnostic | None:
    """T3: parse success, exact field set, serializability."""
    if code.failure is not None:
        return Diagnostic("T3", code.failure.describe(), "source")
    if code.extra_fields:
        return Diagnostic("T3", f"unexpected field {code.extra_fields[0]!r}", code.extra_fields[0])
    try:
        serialize_event(code.parsed)
    except (TypeError, ValueError) as exc:
        return Diagnostic("T3", f"event is not serializable: {exc}", "arguments")
    return None


def verify(
    code: CodeObject,
    text: str,
    schema: EventSchema,
    mode: str = MODE_STRICT,
    backend=None,
) -> VerificationResult:
    """Run T1, T2, T3 in order and stop at the first failure.

    Unparsed source returns a T3 diagnostic immediately.  In llm mode a
    backend failure during the judge call propagates as an exception; it
    is an operational problem, not a verdict.
    """
    _require_mode(mode)
    if code.failure is not None:
        return VerificationResult(False, check_structure(code))
    for check in (
        lambda: check_semantic(code, text, mode=mode, backend=backend),
        lambda: check_types(code, schema),
        lambda: check_structure(code),
    ):
        diagnostic = check()
        if diagnostic is not None:
            return VerificationResult(False, diagnostic)
    return VerificationResult(True)


def _require_parsed(code: CodeObject) -> None:
    if code.parsed is None:
        raise ValueError("check requires a parsed CodeObject; unparsed source belongs to check_structure")


def _require_mode(mode: str) -> None:
    if mode not in (MODE_STRICT, MODE_LLM):
        raise ValueError(f"unknown verification mode {mode!r}; expected '{MODE_STRICT}' or '{MODE_LLM}'")
