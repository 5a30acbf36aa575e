"""Dual-loop refinement: hypothesis backtracking around a patch loop.

The outer loop repeatedly selects the highest-confidence hypothesis left
in the pool.  The inner loop gives the coding agent up to ``patch_attempts``
tries for that hypothesis, feeding the previous attempt's diagnostic line
back into the prompt from the second try on.  A hypothesis that exhausts
its attempts is removed and the outer loop re-selects; an empty pool ends
the search with :class:`ExtractionFailed`, which is a result, not an
error: evaluation counts failed documents as zero predictions.

Total coding-agent work is bounded by hypothesis_k * patch_attempts per
refine call.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable

from .agents import (
    ExemplarCache,
    ExemplarSet,
    TriggerHypothesis,
    run_coding_agent,
    run_planning_agent,
    run_retrieval_agent,
)
from .errors import EventAgentsError
from .events import CodeObject, EventObject, parse_event_code, serialize_event
from .schemas import SchemaRegistry
from .verify import MODE_LLM, MODE_STRICT, VerificationResult, verify


class PoolExhausted(EventAgentsError):
    """Selection was attempted on an empty hypothesis pool."""


@dataclass(frozen=True)
class RefinementConfig:
    hypothesis_k: int = 3
    patch_attempts: int = 3
    mode: str = MODE_STRICT

    def __post_init__(self):
        if self.hypothesis_k < 1:
            raise ValueError("hypothesis_k must be >= 1")
        if self.patch_attempts < 1:
            raise ValueError("patch_attempts must be >= 1")
        if self.mode not in (MODE_STRICT, MODE_LLM):
            raise ValueError(f"unknown verification mode {self.mode!r}")


@dataclass(frozen=True)
class PipelineConfig(RefinementConfig):
    """Refinement knobs plus the document-pipeline extras."""

    exemplar_k: int = 3
    multi_event: bool = False
    event_cap: int = 5

    def __post_init__(self):
        super().__post_init__()
        if self.exemplar_k < 1:
            raise ValueError("exemplar_k must be >= 1")
        if self.event_cap < 1:
            raise ValueError("event_cap must be >= 1")


class HypothesisPool:
    """The planning candidates still open for exploration."""

    def __init__(self, hypotheses: Iterable[TriggerHypothesis]):
        self._entries = list(hypotheses)
        self._consumed: set[int] = set()

    def available(self) -> list[TriggerHypothesis]:
        return [h for i, h in enumerate(self._entries) if i not in self._consumed]

    def is_empty(self) -> bool:
        return len(self._consumed) >= len(self._entries)

    def remove(self, hypothesis: TriggerHypothesis) -> None:
        for i, entry in enumerate(self._entries):
            if i not in self._consumed and entry == hypothesis:
                self._consumed.add(i)
                return
        raise ValueError("hypothesis not present in pool")

    def discard_pair(self, trigger: str, event_type: str) -> None:
        """Consume every entry carrying this (trigger, event type) pair."""
        for i, entry in enumerate(self._entries):
            if i not in self._consumed and entry.trigger == trigger and entry.event_type == event_type:
                self._consumed.add(i)


def select_best(pool: HypothesisPool) -> TriggerHypothesis:
    """Argmax by confidence; ties broken by earlier text position, then
    trigger text, then pool order."""
    candidates = pool.available()
    if not candidates:
        raise PoolExhausted("hypothesis pool is empty")
    def rank(pair):
        index, h = pair
        offset = math.inf if h.char_offset is None else h.char_offset
        return (-h.confidence, offset, h.trigger, index)
    return min(enumerate(candidates), key=rank)[1]


@dataclass
class AttemptRecord:
    hypothesis: TriggerHypothesis
    attempt: int
    code: CodeObject
    result: VerificationResult


@dataclass
class RefinementTrace:
    """Everything that happened while refining one document."""

    attempts: list[AttemptRecord] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    outcome: str = "pending"

    @property
    def coding_calls(self) -> int:
        return len(self.attempts)


@dataclass
class ExtractionFailed:
    """Terminal no-event outcome; carries the full trace for analysis."""

    trace: RefinementTrace


def refine(
    pool: HypothesisPool,
    text: str,
    registry: SchemaRegistry,
    config: RefinementConfig,
    backend,
    trace: RefinementTrace | None = None,
) -> EventObject | ExtractionFailed:
    """Run the dual loop until an event verifies or the pool runs out.

    Hypotheses whose event type is not in the registry are consumed
    without costing any coding calls.  Backend failures abort with the
    partial trace attached to the exception, which is an operational
    error distinct from ExtractionFailed.
    """
    if trace is None:
        trace = RefinementTrace()
    hypotheses_tried = 0
    while not pool.is_empty() and hypotheses_tried < config.hypothesis_k:
        hypothesis = select_best(pool)
        schema = registry.get(hypothesis.event_type)
        if schema is None:
            trace.notes.append(
                f"hypothesis ({hypothesis.trigger!r}, {hypothesis.event_type!r}) skipped: unknown event type"
            )
            pool.remove(hypothesis)
            continue
        hypotheses_tried += 1
        diagnostic_line = None
        for attempt in range(1, config.patch_attempts + 1):
            try:
                code_text = run_coding_agent(
                    backend, hypothesis, schema, text, diagnostic=diagnostic_line
                )
                code = parse_event_code(code_text, registry=registry, origin_hypothesis=hypothesis)
                result = verify(code, text, schema, mode=config.mode, backend=backend)
            except EventAgentsError as exc:
                trace.outcome = "aborted"
                exc.trace = trace
                raise
            trace.attempts.append(AttemptRecord(hypothesis, attempt, code, result))
            if result.verdict:
                trace.outcome = "accepted"
                return code.parsed
            diagnostic_line = result.diagnostic.as_line()
        pool.remove(hypothesis)
    trace.outcome = "exhausted"
    return ExtractionFailed(trace)


def extract_document(
    text: str,
    registry: SchemaRegistry,
    config: PipelineConfig,
    backend,
    exemplar_cache: ExemplarCache | None = None,
) -> tuple[list[EventObject], RefinementTrace]:
    """Full per-document pipeline: retrieval, planning, refinement.

    Returns at most one event unless the multi-event extension is on, in
    which case refinement re-runs with accepted (trigger, type) pairs
    excluded until the pool empties or the event cap is reached.  Empty
    planning output is a normal empty extraction, not an error.
    """
    if len(registry) == 0:
        raise EventAgentsError("no schemas loaded")
    cache = exemplar_cache if exemplar_cache is not None else ExemplarCache()
    exemplars: list[ExemplarSet] = []
    for schema in registry:
        exemplars.append(
            cache.get_or_create(
                schema, lambda s=schema: run_retrieval_agent(backend, s, config.exemplar_k)
            )
        )
    trace = RefinementTrace()
    for exemplar_set in exemplars:
        if exemplar_set.warning:
            trace.notes.append(exemplar_set.warning)
    hypotheses = run_planning_agent(
        backend, text, list(registry), exemplars, hypothesis_k=config.hypothesis_k
    )
    if not hypotheses:
        trace.notes.append("planning produced no hypotheses")
        trace.outcome = "no-hypotheses"
        return [], trace
    pool = HypothesisPool(hypotheses)
    events: list[EventObject] = []
    while True:
        outcome = refine(pool, text, registry, config, backend, trace=trace)
        if isinstance(outcome, ExtractionFailed):
            break
        events.append(outcome)
        if not config.multi_event or len(events) >= config.event_cap:
            break
        pool.discard_pair(outcome.trigger, outcome.event_type)
        if pool.is_empty():
            break
        trace.notes.append(
            f"multi-event: continuing after accepting ({outcome.trigger!r}, {outcome.event_type!r})"
        )
    if events:
        trace.outcome = "accepted"
    return events, trace


def trace_to_records(trace: RefinementTrace, doc_id: str) -> list[dict]:
    """Flatten a trace into JSON-ready records, one per coding attempt.

    Notes and the final outcome get their own records so the log replays
    the whole search.
    """
    records: list[dict] = []
    for note in trace.notes:
        records.append({"doc_id": doc_id, "note": note})
    for record in trace.attempts:
        event = record.code.parsed
        records.append(
            {
                "doc_id": doc_id,
                "trigger": record.hypothesis.trigger,
                "event_type": record.hypothesis.event_type,
                "confidence": record.hypothesis.confidence,
                "attempt": record.attempt,
                "code": record.code.raw_source,
                "event": None if event is None else _event_payload(event),
                "verdict": record.result.verdict,
                "diagnostic": None
                if record.result.diagnostic is None
                else record.result.diagnostic.as_line(),
            }
        )
    records.append({"doc_id": doc_id, "outcome": trace.outcome})
    return records


def _event_payload(event: EventObject) -> dict:
    return json.loads(serialize_event(event))
