"""Command-line interface.

Subcommands:

* ``extract``  run the pipeline over a corpus, writing prediction and
  trace files (one pair per run);
* ``eval``     score prediction files against a gold corpus;
* ``stats``    corpus statistics (documents, mentions, length, multi-word
  trigger percentage);
* ``schema``   list or render the ontology's schemas.

Configuration precedence is flags over config file over environment
(variables prefixed ``EVENTAGENTS_``) over built-in defaults;
``--print-config`` dumps the resolved configuration and exits.  Exit
status is 0 on success, 1 for operational failures (unreadable files,
backend errors, bad data), 2 for usage and configuration errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Callable, Sequence

from .agents import ExemplarCache, run_retrieval_agent
from .backends import BackendConfig, HttpBackend, ScriptedBackend, load_scripted_fixture
from .corpus import Document, dataset_stats, load_corpus, sample_split
from .errors import ConfigError, EventAgentsError
from .events import EventObject, parse_event_code, serialize_event
from .metrics import EvaluationError, MetricsReport, mean_of_reports, score
from .refine import PipelineConfig, extract_document, trace_to_records
from .schemas import SchemaRegistry, load_ontology, render_schema_as_code
from .verify import MODE_LLM, MODE_STRICT


@dataclass(frozen=True)
class RunConfig:
    ontology: str | None = None
    corpus: str | None = None
    out: str | None = None
    backend_endpoint: str = "http://localhost:8000/v1"
    model: str = "llama3-8b-instruct"
    temperature: float = 0.7
    max_tokens: int = 1024
    api_key_env: str | None = None
    timeout: float = 30.0
    retries: int = 2
    exemplar_k: int = 3
    hypothesis_k: int = 3
    patch_attempts: int = 3
    mode: str = MODE_STRICT
    workers: int = 1
    seed: int = 0
    runs: int = 3
    sample: int | None = None
    scripted_fixture: str | None = None
    multi_event: bool = False
    event_cap: int = 5

    def __post_init__(self):
        for name in ("exemplar_k", "hypothesis_k", "patch_attempts", "workers", "runs", "event_cap"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.mode not in (MODE_STRICT, MODE_LLM):
            raise ConfigError(f"mode must be '{MODE_STRICT}' or '{MODE_LLM}', got {self.mode!r}")
        if self.sample is not None and self.sample < 0:
            raise ConfigError("sample must be >= 0")
        # Backend value ranges are enforced by BackendConfig itself.
        self.backend_config()

    def backend_config(self) -> BackendConfig:
        return BackendConfig(
            endpoint=self.backend_endpoint,
            model=self.model,
            temperature=self.temperature,
            max_tokens=self.max_tokens,
            api_key_env=self.api_key_env,
            timeout=self.timeout,
            retries=self.retries,
        )

    def pipeline_config(self) -> PipelineConfig:
        return PipelineConfig(
            hypothesis_k=self.hypothesis_k,
            patch_attempts=self.patch_attempts,
            mode=self.mode,
            exemplar_k=self.exemplar_k,
            multi_event=self.multi_event,
            event_cap=self.event_cap,
        )

    def as_dict(self) -> dict:
        return {
            "ontology": self.ontology,
            "corpus": self.corpus,
            "out": self.out,
            "backend": {
                "endpoint": self.backend_endpoint,
                "model": self.model,
                "temperature": self.temperature,
                "max_tokens": self.max_tokens,
                "api_key_env": self.api_key_env,
                "timeout": self.timeout,
                "retries": self.retries,
            },
            "exemplar_k": self.exemplar_k,
            "hypothesis_k": self.hypothesis_k,
            "patch_attempts": self.patch_attempts,
            "mode": self.mode,
            "workers": self.workers,
            "seed": self.seed,
            "runs": self.runs,
            "sample": self.sample,
            "scripted_fixture": self.scripted_fixture,
            "multi_event": self.multi_event,
            "event_cap": self.event_cap,
        }


_INT_FIELDS = {
    "max_tokens", "retries", "exemplar_k", "hypothesis_k", "patch_attempts",
    "workers", "seed", "runs", "sample", "event_cap",
}
_FLOAT_FIELDS = {"temperature", "timeout"}
_STR_FIELDS = {
    "ontology", "corpus", "out", "backend_endpoint", "model", "api_key_env",
    "mode", "scripted_fixture",
}
_BOOL_FIELDS = {"multi_event"}

# Fields settable through EVENTAGENTS_* environment variables (everything
# except the config-file-only multi-event knobs).
_ENV_FIELDS = (_INT_FIELDS | _FLOAT_FIELDS | _STR_FIELDS) - {"event_cap"}

_BACKEND_FILE_KEYS = {
    "endpoint": "backend_endpoint",
    "model": "model",
    "temperature": "temperature",
    "max_tokens": "max_tokens",
    "api_key_env": "api_key_env",
    "timeout": "timeout",
    "retries": "retries",
}

_TOP_FILE_KEYS = {
    "ontology", "corpus", "out", "exemplar_k", "hypothesis_k", "patch_attempts",
    "mode", "workers", "seed", "runs", "sample", "scripted_fixture",
    "multi_event", "event_cap",
}


def _cast_env(name: str, raw: str):
    source = f"environment variable EVENTAGENTS_{name.upper()}"
    try:
        if name in _INT_FIELDS:
            return int(raw)
        if name in _FLOAT_FIELDS:
            return float(raw)
    except ValueError:
        raise ConfigError(f"{source}: invalid value {raw!r}") from None
    return raw


def _check_file_value(key: str, field_name: str, value):
    if field_name in _INT_FIELDS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"config file key {key!r} must be an integer")
    elif field_name in _FLOAT_FIELDS:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"config file key {key!r} must be a number")
    elif field_name in _BOOL_FIELDS:
        if not isinstance(value, bool):
            raise ConfigError(f"config file key {key!r} must be a boolean")
    elif value is not None and not isinstance(value, str):
        raise ConfigError(f"config file key {key!r} must be a string")
    return value


def _load_config_file(path: str) -> dict:
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must contain a JSON object")
    overrides: dict = {}
    for key, value in data.items():
        if key == "backend":
            if not isinstance(value, dict):
                raise ConfigError("config file key 'backend' must be an object")
            for sub_key, sub_value in value.items():
                field_name = _BACKEND_FILE_KEYS.get(sub_key)
                if field_name is None:
                    raise ConfigError(f"unknown config file key 'backend.{sub_key}'")
                overrides[field_name] = _check_file_value(f"backend.{sub_key}", field_name, sub_value)
        elif key in _TOP_FILE_KEYS:
            overrides[key] = _check_file_value(key, key, value)
        else:
            raise ConfigError(f"unknown config file key {key!r}")
    return overrides


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Merge defaults, environment, config file and flags, in that order."""
    overrides: dict = {}
    for name in sorted(_ENV_FIELDS):
        env_name = f"EVENTAGENTS_{name.upper()}"
        if env_name in os.environ:
            overrides[name] = _cast_env(name, os.environ[env_name])
    config_path = getattr(args, "config", None)
    if config_path:
        overrides.update(_load_config_file(config_path))
    all_fields = {f.name for f in fields(RunConfig)}
    for name in all_fields:
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    return RunConfig(**overrides)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file mirroring the run configuration")
    common.add_argument("--print-config", action="store_true", help="print the resolved configuration and exit")
    common.add_argument("--ontology", help="path to the ontology JSON document")
    common.add_argument("--corpus", help="path to the newline-delimited corpus")
    common.add_argument("--out", help="output path")
    common.add_argument("--backend-endpoint", help="chat-completions base URL")
    common.add_argument("--model", help="model name sent to the backend")
    common.add_argument("--temperature", type=float, help="default sampling temperature")
    common.add_argument("--max-tokens", type=int, help="completion token limit")
    common.add_argument("--api-key-env", help="environment variable holding the bearer token")
    common.add_argument("--timeout", type=float, help="request timeout in seconds")
    common.add_argument("--retries", type=int, help="retry count for transient backend failures")
    common.add_argument("--exemplar-k", type=int, help="exemplar sentences per schema")
    common.add_argument("--hypothesis-k", type=int, help="planning hypotheses kept per document")
    common.add_argument("--patch-attempts", type=int, help="coding attempts per hypothesis")
    common.add_argument("--mode", choices=[MODE_STRICT, MODE_LLM], help="verification mode")
    common.add_argument("--workers", type=int, help="concurrent documents")
    common.add_argument("--seed", type=int, help="random seed for sampling")
    common.add_argument("--runs", type=int, help="number of extraction runs")
    common.add_argument("--sample", type=int, help="uniformly subsample the corpus to this many documents")
    common.add_argument("--scripted-fixture", help="scripted-backend fixture file (offline deterministic runs)")

    parser = argparse.ArgumentParser(
        prog="eventagents",
        description="Zero-shot event extraction with retrieval, planning, coding and verification agents.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    subparsers.add_parser("extract", parents=[common], help="run extraction over a corpus")
    eval_parser = subparsers.add_parser("eval", parents=[common], help="score prediction files")
    eval_parser.add_argument("predictions", nargs="+", help="prediction file(s), one per run")
    subparsers.add_parser("stats", parents=[common], help="corpus statistics")
    schema_parser = subparsers.add_parser("schema", parents=[common], help="inspect the ontology")
    schema_parser.add_argument("schema_action", choices=["list", "render"], help="what to print")
    return parser


_REQUIRED = {
    "extract": ("ontology", "corpus", "out"),
    "eval": ("corpus",),
    "stats": ("corpus",),
    "schema": ("ontology",),
}


def _require_paths(config: RunConfig, command: str) -> None:
    for name in _REQUIRED[command]:
        if getattr(config, name) is None:
            raise ConfigError(f"missing required option --{name} for command {command!r}")


def _read_bytes(path: str) -> bytes:
    return Path(path).read_bytes()


def _run_path(out: str, run_index: int, runs: int) -> Path:
    path = Path(out)
    if runs == 1:
        return path
    return path.with_name(f"{path.stem}.run{run_index}{path.suffix}")


def _trace_path(pred_path: Path) -> Path:
    return pred_path.with_name(f"{pred_path.stem}.trace{pred_path.suffix}")


def _event_payload(event: EventObject, registry: SchemaRegistry) -> dict:
    return json.loads(serialize_event(event, registry.get(event.event_type)))


def cmd_extract(args: argparse.Namespace, config: RunConfig) -> int:
    _require_paths(config, "extract")
    registry = load_ontology(_read_bytes(config.ontology))
    if len(registry) == 0:
        raise EventAgentsError(f"ontology {config.ontology} declares no event types")
    documents = load_corpus(_read_bytes(config.corpus))
    if config.sample is not None:
        documents = sample_split(documents, config.sample, config.seed)
    pipeline = config.pipeline_config()
    fixture = None
    if config.scripted_fixture is not None:
        fixture = load_scripted_fixture(_read_bytes(config.scripted_fixture))

    for run_index in range(1, config.runs + 1):
        backend = ScriptedBackend(fixture) if fixture is not None else HttpBackend(config.backend_config())
        cache = ExemplarCache()
        for schema in registry:
            cache.get_or_create(schema, lambda s=schema: run_retrieval_agent(backend, s, config.exemplar_k))
        results = _run_documents(documents, registry, pipeline, backend, cache, config.workers, run_index)

        pred_path = _run_path(config.out, run_index, config.runs)
        trace_path = _trace_path(pred_path)
        events_written = 0
        with open(pred_path, "w", encoding="utf-8", newline="\n") as pred_file, open(
            trace_path, "w", encoding="utf-8", newline="\n"
        ) as trace_file:
            for doc, outcome in zip(documents, results):
                if isinstance(outcome, EventAgentsError):
                    trace_file.write(
                        json.dumps({"doc_id": doc.id, "note": f"document skipped: {outcome}"}) + "\n"
                    )
                    continue
                events, trace = outcome
                events_written += len(events)
                payload = {
                    "doc_id": doc.id,
                    "events": [_event_payload(event, registry) for event in events],
                }
                pred_file.write(json.dumps(payload, ensure_ascii=False) + "\n")
                for record in trace_to_records(trace, doc.id):
                    trace_file.write(json.dumps(record, ensure_ascii=False) + "\n")
        print(f"run {run_index}: {len(documents)} documents, {events_written} events -> {pred_path}")
    return 0


def _run_documents(
    documents: Sequence[Document],
    registry: SchemaRegistry,
    pipeline: PipelineConfig,
    backend,
    cache: ExemplarCache,
    workers: int,
    run_index: int,
):
    """Extract every document, in corpus order; failures become values.

    A document whose extraction raises is skipped with a logged warning;
    the run continues.
    """

    def one(doc: Document):
        try:
            return extract_document(doc.text, registry, pipeline, backend, exemplar_cache=cache)
        except EventAgentsError as exc:
            print(f"run {run_index}: document {doc.id} skipped: {exc}", file=sys.stderr)
            return exc

    if workers <= 1:
        return [one(doc) for doc in documents]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, documents))


def _load_predictions(path: str) -> dict[str, list[EventObject]]:
    predictions: dict[str, list[EventObject]] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise EvaluationError(f"cannot read predictions file {path}: {exc}") from None
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise EvaluationError(f"{path}: line {line_no}: malformed record: {exc.msg}") from None
        if not isinstance(record, dict) or not isinstance(record.get("doc_id"), str):
            raise EvaluationError(f"{path}: line {line_no}: record needs a string 'doc_id'")
        raw_events = record.get("events", [])
        if not isinstance(raw_events, list):
            raise EvaluationError(f"{path}: line {line_no}: 'events' must be an array")
        doc_id = record["doc_id"]
        if doc_id in predictions:
            raise EvaluationError(f"{path}: line {line_no}: duplicate doc_id {doc_id!r}")
        events = []
        for raw_event in raw_events:
            code = parse_event_code(json.dumps(raw_event, ensure_ascii=False))
            if code.failure is not None or code.extra_fields:
                problem = code.failure.message if code.failure else f"unexpected field {code.extra_fields[0]!r}"
                raise EvaluationError(f"{path}: line {line_no}: bad event for {doc_id!r}: {problem}")
            events.append(code.parsed)
        predictions[doc_id] = events
    return predictions


def cmd_eval(args: argparse.Namespace, config: RunConfig) -> int:
    _require_paths(config, "eval")
    documents = load_corpus(_read_bytes(config.corpus))
    reports: list[MetricsReport] = []
    for path in args.predictions:
        reports.append(score(_load_predictions(path), documents))

    for path, report in zip(args.predictions, reports):
        if len(reports) > 1:
            print(f"# {path}")
        print(report.as_table())
    if len(reports) > 1:
        mean = mean_of_reports(reports)
        print(f"# mean over {len(reports)} runs")
        print(f"{'Metric':<8}{'Precision':>10}{'Recall':>10}{'F1':>10}")
        for name in ("TI", "TC", "AI", "AC"):
            row = mean[name]
            print(f"{name:<8}{row['precision']:>10.4f}{row['recall']:>10.4f}{row['f1']:>10.4f}")

    if len(reports) == 1:
        document = reports[0].as_dict()
    else:
        document = {"runs": [report.as_dict() for report in reports], "mean": mean_of_reports(reports)}
    rendered = json.dumps(document, indent=2)
    if config.out:
        Path(config.out).write_text(rendered + "\n", encoding="utf-8")
    else:
        print(rendered)
    return 0


def cmd_stats(args: argparse.Namespace, config: RunConfig) -> int:
    _require_paths(config, "stats")
    documents = load_corpus(_read_bytes(config.corpus))
    stats = dataset_stats(documents)
    lines = [
        f"{'Documents':<24}{stats.documents}",
        f"{'Event mentions':<24}{stats.event_mentions}",
        f"{'Avg doc length (tokens)':<24}{stats.avg_doc_length_tokens:.2f}",
        f"{'Multi-word triggers':<24}{stats.multiword_trigger_pct:.1f}%",
    ]
    if stats.documents == 0:
        lines.append("note: empty corpus")
    print("\n".join(lines))
    if config.out:
        Path(config.out).write_text(json.dumps(vars(stats), indent=2) + "\n", encoding="utf-8")
    return 0


def cmd_schema(args: argparse.Namespace, config: RunConfig) -> int:
    _require_paths(config, "schema")
    registry = load_ontology(_read_bytes(config.ontology))
    if args.schema_action == "list":
        for schema in registry:
            print(f"{schema.event_type}: {len(schema.roles)} roles")
    else:
        sys.stdout.write("\n".join(render_schema_as_code(schema) for schema in registry))
    return 0


_COMMANDS: dict[str, Callable[[argparse.Namespace, RunConfig], int]] = {
    "extract": cmd_extract,
    "eval": cmd_eval,
    "stats": cmd_stats,
    "schema": cmd_schema,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        config = resolve_config(args)
        if getattr(args, "print_config", False):
            print(json.dumps(config.as_dict(), indent=2))
            return 0
        return _COMMANDS[args.command](args, config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (EventAgentsError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
