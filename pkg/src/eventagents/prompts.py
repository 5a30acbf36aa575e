"""Prompt catalog for the four agents.

Each builder returns a :class:`PromptRequest` whose bindings capture
exactly the variable parts of the prompt, so requests are reconstructible
and fingerprintable.  Message texts follow the worked examples the agents
were designed around: role-setting system message, context blocks with
"Event definitions:" / "Text:" markers, explicit output format.

Retrieval runs at the backend's default temperature for exemplar variety.
Planning, coding and the semantic judge pin temperature to 0: the
refinement loop depends on reproducible replies for the same prompt.
"""

from __future__ import annotations

from typing import Sequence

from .backends import ChatMessage, PromptRequest
from .schemas import EventSchema, render_schema_as_code

RETRIEVAL = "retrieval"
PLANNING = "planning"
PLANNING_RETRY = "planning_retry"
CODING = "coding"
SEMANTIC_JUDGE = "semantic_judge"

_RETRIEVAL_SYSTEM = "You are a helpful example generator for event extraction."

_PLANNING_SYSTEM = (
    "You are an assistant for event extraction. Given a piece of text and "
    "definitions of event types (as Python dataclasses), produce a JSON array "
    "of objects where each object has keys 'trigger' and 'event_type'."
)

_CODING_SYSTEM = (
    "You are a coding agent that creates event objects based on a trigger "
    "hypothesis. Given an event definition, a trigger word, and the original "
    "text, construct the event object that realizes the hypothesis, filling "
    "argument roles from the text."
)

_JUDGE_SYSTEM = "You are a verifier for event extraction."

_PLANNING_FORMAT = (
    "Return a JSON array of {'trigger': str, 'event_type': str} objects. "
    "Each object may also include 'confidence' (a number between 0 and 1) "
    "and a short 'rationale'."
)

_PLANNING_REMINDER = (
    "Your previous reply could not be parsed. Return only a JSON array of "
    "{'trigger': str, 'event_type': str} objects, with no surrounding prose."
)


def definitions_block(schemas: Sequence[EventSchema]) -> str:
    """All schemas rendered as code, separated by blank lines."""
    return "\n\n".join(render_schema_as_code(schema).rstrip("\n") for schema in schemas)


def retrieval_prompt(schema: EventSchema) -> PromptRequest:
    roles = ", ".join(schema.role_names()) or "none"
    user = (
        f"Event type: {schema.event_type}\n"
        f"Roles: {roles}\n"
        f"Write one English sentence that contains a clear mention of the "
        f"{schema.event_type} trigger and populates all roles."
    )
    return PromptRequest(
        template_id=RETRIEVAL,
        bindings=(("event_type", schema.event_type), ("roles", roles)),
        messages=(ChatMessage("system", _RETRIEVAL_SYSTEM), ChatMessage("user", user)),
        temperature=None,
    )


def _planning_user(text: str, definitions: str, exemplar_sentences: Sequence[str]) -> str:
    parts = [f"Event definitions:\n{definitions}\n"]
    if exemplar_sentences:
        listed = "\n".join(f"- {sentence}" for sentence in exemplar_sentences)
        parts.append(f"Example sentences:\n{listed}\n")
    parts.append(f"Text:\n{text}\n")
    parts.append(_PLANNING_FORMAT)
    return "\n".join(parts)


def _planning_bindings(text: str, definitions: str, exemplar_sentences: Sequence[str]):
    return (
        ("definitions", definitions),
        ("exemplars", "\n".join(exemplar_sentences)),
        ("text", text),
    )


def planning_prompt(
    text: str,
    schemas: Sequence[EventSchema],
    exemplar_sentences: Sequence[str] = (),
) -> PromptRequest:
    definitions = definitions_block(schemas)
    return PromptRequest(
        template_id=PLANNING,
        bindings=_planning_bindings(text, definitions, exemplar_sentences),
        messages=(
            ChatMessage("system", _PLANNING_SYSTEM),
            ChatMessage("user", _planning_user(text, definitions, exemplar_sentences)),
        ),
        temperature=0.0,
    )


def planning_retry_prompt(
    text: str,
    schemas: Sequence[EventSchema],
    exemplar_sentences: Sequence[str] = (),
) -> PromptRequest:
    """The single-reprompt variant appended with a format reminder."""
    definitions = definitions_block(schemas)
    user = _planning_user(text, definitions, exemplar_sentences) + "\n\n" + _PLANNING_REMINDER
    return PromptRequest(
        template_id=PLANNING_RETRY,
        bindings=_planning_bindings(text, definitions, exemplar_sentences),
        messages=(ChatMessage("system", _PLANNING_SYSTEM), ChatMessage("user", user)),
        temperature=0.0,
    )


def coding_prompt(
    schema: EventSchema,
    trigger: str,
    text: str,
    rationale: str = "",
    diagnostic: str = "",
) -> PromptRequest:
    """Coding-agent prompt; a non-empty diagnostic turns it into a patch request.

    The diagnostic line is embedded verbatim: it is the one piece of
    feedback the refinement loop sends back between attempts.
    """
    definition = render_schema_as_code(schema)
    parts = [
        f"Event definition:\n{definition}",
        f'Trigger: "{trigger}"',
        f'Text: "{text}"',
    ]
    if rationale:
        parts.append(f"Rationale: {rationale}")
    parts.append(
        "Return only one of: a single constructor call such as "
        f'{schema.event_type}(mention="{trigger}", ...) using the class above, '
        "or a JSON object with exactly the keys 'event_type', 'trigger' and "
        "'arguments'. No imports, no explanation."
    )
    if diagnostic:
        parts.append(
            "Your previous attempt failed verification with this diagnostic:\n"
            f"{diagnostic}\n"
            "Patch the code so this diagnostic no longer applies and return "
            "the corrected event object."
        )
    user = "\n".join(parts)
    return PromptRequest(
        template_id=CODING,
        bindings=(
            ("definition", definition),
            ("diagnostic", diagnostic),
            ("rationale", rationale),
            ("text", text),
            ("trigger", trigger),
        ),
        messages=(ChatMessage("system", _CODING_SYSTEM), ChatMessage("user", user)),
        temperature=0.0,
    )


def judge_prompt(trigger: str, event_type: str, text: str) -> PromptRequest:
    user = (
        f'Text: "{text}"\n\n'
        f'In this text, is "{trigger}" semantically compatible with an event '
        f"of type {event_type}? Answer yes or no."
    )
    return PromptRequest(
        template_id=SEMANTIC_JUDGE,
        bindings=(("event_type", event_type), ("text", text), ("trigger", trigger)),
        messages=(ChatMessage("system", _JUDGE_SYSTEM), ChatMessage("user", user)),
        temperature=0.0,
    )
