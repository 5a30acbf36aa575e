"""Zero-shot event extraction with cooperating retrieval, planning,
coding and verification agents over schema-as-code definitions."""

from .agents import (
    ExemplarCache,
    ExemplarSet,
    JudgeResult,
    TriggerHypothesis,
    judge_semantic_compat,
    run_coding_agent,
    run_planning_agent,
    run_retrieval_agent,
)
from .backends import (
    BackendConfig,
    BackendError,
    ChatMessage,
    HttpBackend,
    PromptRequest,
    ScriptedBackend,
    fingerprint,
    load_scripted_fixture,
)
from .corpus import (
    CorpusError,
    DatasetStats,
    Document,
    GoldEvent,
    Span,
    dataset_stats,
    load_corpus,
    sample_split,
)
from .errors import ConfigError, EventAgentsError
from .events import (
    CodeObject,
    EventObject,
    ParseFailure,
    order_arguments,
    parse_event_code,
    render_constructor_call,
    serialize_event,
)
from .metrics import EvaluationError, MetricScores, MetricsReport, score
from .refine import (
    ExtractionFailed,
    HypothesisPool,
    PipelineConfig,
    PoolExhausted,
    RefinementConfig,
    RefinementTrace,
    extract_document,
    refine,
    select_best,
)
from .schemas import (
    EventSchema,
    Multiplicity,
    OntologyError,
    RoleSpec,
    SchemaCodeError,
    SchemaRegistry,
    ValueType,
    load_ontology,
    parse_schema_code,
    render_schema_as_code,
)
from .verify import (
    Diagnostic,
    VerificationResult,
    check_semantic,
    check_structure,
    check_types,
    verify,
)

__version__ = "0.1.0"

__all__ = [
    "BackendConfig",
    "BackendError",
    "ChatMessage",
    "CodeObject",
    "ConfigError",
    "CorpusError",
    "DatasetStats",
    "Diagnostic",
    "Document",
    "EvaluationError",
    "EventAgentsError",
    "EventObject",
    "EventSchema",
    "ExemplarCache",
    "ExemplarSet",
    "ExtractionFailed",
    "GoldEvent",
    "HttpBackend",
    "HypothesisPool",
    "JudgeResult",
    "MetricScores",
    "MetricsReport",
    "Multiplicity",
    "OntologyError",
    "ParseFailure",
    "PipelineConfig",
    "PoolExhausted",
    "PromptRequest",
    "RefinementConfig",
    "RefinementTrace",
    "RoleSpec",
    "SchemaCodeError",
    "SchemaRegistry",
    "ScriptedBackend",
    "Span",
    "TriggerHypothesis",
    "ValueType",
    "VerificationResult",
    "check_semantic",
    "check_structure",
    "check_types",
    "dataset_stats",
    "extract_document",
    "fingerprint",
    "judge_semantic_compat",
    "load_corpus",
    "load_ontology",
    "load_scripted_fixture",
    "order_arguments",
    "parse_event_code",
    "parse_schema_code",
    "refine",
    "render_constructor_call",
    "render_schema_as_code",
    "run_coding_agent",
    "run_planning_agent",
    "run_retrieval_agent",
    "sample_split",
    "score",
    "select_best",
    "serialize_event",
    "verify",
]
