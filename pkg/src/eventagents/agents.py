"""The retrieval, planning, coding and judging operations.

Each operation builds a prompt from the catalog, sends it through a
backend, and normalizes the reply.  All of them are stateless except for
the exemplar cache, which memoizes retrieval output per event type so a
corpus run prompts for exemplars once per schema rather than once per
document.
"""

from __future__ import annotations

import json
import re
import threading
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .errors import EventAgentsError
from .prompts import (
    coding_prompt,
    judge_prompt,
    planning_prompt,
    planning_retry_prompt,
    retrieval_prompt,
)
from .schemas import EventSchema

_FENCE_RE = re.compile(r"```[^\n`]*\n(.*?)```", re.DOTALL)


class PlanningError(EventAgentsError):
    """The planning reply stayed unparseable after the one retry."""


class CodingError(EventAgentsError):
    """The coding agent returned nothing usable."""


@dataclass(frozen=True)
class ExemplarSet:
    """Self-generated example sentences illustrating one schema."""

    sentences: tuple[str, ...]
    schema_ref: EventSchema
    warning: str | None = None


@dataclass(frozen=True)
class TriggerHypothesis:
    """A candidate (trigger span, event type) pair from planning."""

    trigger: str
    event_type: str
    confidence: float
    rationale: str = ""
    char_offset: int | None = None

    def __post_init__(self):
        if not self.trigger:
            raise ValueError("hypothesis trigger must be non-empty")
        if not self.event_type:
            raise ValueError("hypothesis event_type must be non-empty")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")


@dataclass(frozen=True)
class JudgeResult:
    compatible: bool
    warning: str | None = None


def extract_code_block(reply: str) -> str:
    """First fenced code block if present, else the whole reply, stripped."""
    match = _FENCE_RE.search(reply)
    if match:
        return match.group(1).strip()
    return reply.strip()


def run_retrieval_agent(backend, schema: EventSchema, k: int) -> ExemplarSet:
    """Generate up to k exemplar sentences for a schema, deduplicated.

    Issues k independent single-sentence prompts.  Blank replies are
    dropped; zero usable sentences yields an empty set with a warning so
    the pipeline can proceed without an exemplar block.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    request = retrieval_prompt(schema)
    sentences: list[str] = []
    for _ in range(k):
        reply = backend.complete(request).strip()
        if reply and reply not in sentences:
            sentences.append(reply)
    warning = None
    if not sentences:
        warning = f"retrieval produced no usable sentences for {schema.event_type}"
    return ExemplarSet(tuple(sentences), schema, warning)


class ExemplarCache:
    """Per-run exemplar memo, keyed by event type.

    Reads vastly outnumber writes; population holds the lock through the
    factory call, serializing retrieval for a given schema so it runs
    exactly once even under concurrent documents.
    """

    def __init__(self):
        self._sets: dict[str, ExemplarSet] = {}
        self._lock = threading.Lock()

    def get_or_create(self, schema: EventSchema, factory: Callable[[], ExemplarSet]) -> ExemplarSet:
        with self._lock:
            cached = self._sets.get(schema.event_type)
            if cached is None:
                cached = factory()
                self._sets[schema.event_type] = cached
            return cached


def flatten_exemplars(exemplars: Sequence[ExemplarSet]) -> tuple[str, ...]:
    out: list[str] = []
    for exemplar_set in exemplars:
        out.extend(exemplar_set.sentences)
    return tuple(out)


def _parse_planning_reply(reply: str, text: str) -> list[TriggerHypothesis] | None:
    """None means the reply is malformed and a retry is warranted."""
    try:
        data = json.loads(extract_code_block(reply))
    except json.JSONDecodeError:
        return None
    if not isinstance(data, list):
        return None
    items: list[dict] = []
    for entry in data:
        if not isinstance(entry, dict):
            return None
        trigger = entry.get("trigger")
        event_type = entry.get("event_type")
        if not isinstance(trigger, str) or not trigger:
            return None
        if not isinstance(event_type, str) or not event_type:
            return None
        confidence = entry.get("confidence")
        if confidence is not None and (
            isinstance(confidence, bool) or not isinstance(confidence, (int, float))
        ):
            return None
        rationale = entry.get("rationale", "")
        if not isinstance(rationale, str):
            return None
        items.append(entry)
    n = len(items)
    hypotheses = []
    for rank, entry in enumerate(items, start=1):
        confidence = entry.get("confidence")
        if confidence is None:
            confidence = 1.0 - (rank - 1) / n
        confidence = min(1.0, max(0.0, float(confidence)))
        trigger = entry["trigger"]
        offset = text.lower().find(trigger.lower())
        hypotheses.append(
            TriggerHypothesis(
                trigger=trigger,
                event_type=entry["event_type"],
                confidence=confidence,
                rationale=entry.get("rationale", ""),
                char_offset=None if offset < 0 else offset,
            )
        )
    return hypotheses


def run_planning_agent(
    backend,
    text: str,
    schemas: Sequence[EventSchema],
    exemplars: Sequence[ExemplarSet] = (),
    hypothesis_k: int = 3,
) -> list[TriggerHypothesis]:
    """Produce the ranked hypothesis list for one document.

    Missing confidences default to 1 - (rank-1)/n in reply order, which
    preserves the model's implicit ranking.  The result is sorted by
    confidence (stable, so reply order breaks ties) and truncated to
    hypothesis_k.  A malformed reply earns exactly one retry with a
    format reminder before the call fails.
    """
    if not text:
        raise ValueError("text must be non-empty")
    if hypothesis_k < 1:
        raise ValueError("hypothesis_k must be >= 1")
    sentences = flatten_exemplars(exemplars)
    reply = backend.complete(planning_prompt(text, schemas, sentences))
    hypotheses = _parse_planning_reply(reply, text)
    if hypotheses is None:
        reply = backend.complete(planning_retry_prompt(text, schemas, sentences))
        hypotheses = _parse_planning_reply(reply, text)
        if hypotheses is None:
            raise PlanningError(
                f"planning reply is not a JSON array of trigger/event_type objects: {reply[:200]!r}"
            )
    hypotheses.sort(key=lambda h: -h.confidence)
    return hypotheses[:hypothesis_k]


def run_coding_agent(
    backend,
    hypothesis: TriggerHypothesis,
    schema: EventSchema,
    text: str,
    diagnostic: str | None = None,
) -> str:
    """Ask for the event construction realizing a hypothesis.

    With a diagnostic, the prompt becomes a patch request embedding the
    diagnostic line verbatim.  Returns the reply's code text (first
    fenced block if any, else the stripped reply).
    """
    request = coding_prompt(
        schema,
        hypothesis.trigger,
        text,
        rationale=hypothesis.rationale,
        diagnostic=diagnostic or "",
    )
    code = extract_code_block(backend.complete(request))
    if not code:
        raise CodingError(
            f"coding agent returned an empty reply for trigger {hypothesis.trigger!r}"
        )
    return code


def judge_semantic_compat(backend, trigger: str, event_type: str, text: str) -> JudgeResult:
    """Yes/no compatibility judgment; anything unclear counts as no."""
    reply = backend.complete(judge_prompt(trigger, event_type, text))
    head = reply.strip().lower()
    if head.startswith("yes"):
        return JudgeResult(True)
    if head.startswith("no"):
        return JudgeResult(False)
    return JudgeResult(False, warning=f"unparseable judge reply: {reply[:80]!r}")
