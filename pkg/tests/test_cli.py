"""Command-line behavior: configuration precedence, subcommands, exit codes."""

import json

import pytest

from conftest import script
from eventagents import EventSchema, RoleSpec
from eventagents.cli import main
from eventagents.prompts import coding_prompt, planning_prompt, retrieval_prompt

SCHEMA = EventSchema(
    "PatchVulnerability",
    tuple(RoleSpec(n) for n in ("patch", "cve", "time", "vulnerable_system")),
)

ONTOLOGY = [
    {
        "event_type": "PatchVulnerability",
        "roles": [{"name": n} for n in ("patch", "cve", "time", "vulnerable_system")],
    }
]

TEXT_1 = "On Tuesday the company patched a vulnerability in its web server."
TEXT_2 = "The vendor patched its mail gateway overnight."
EXEMPLAR = "Last month the vendor patched a flaw in its mail server."

PLANNING_1 = '[{"trigger": "patched", "event_type": "PatchVulnerability"}]'
CODING_1 = 'PatchVulnerability(mention="patched", time=["Tuesday"])'
PLANNING_2 = '[{"trigger": "patched", "event_type": "PatchVulnerability"}]'
CODING_2 = 'PatchVulnerability(mention="patched")'


def write_ontology(tmp_path):
    path = tmp_path / "ontology.json"
    path.write_text(json.dumps(ONTOLOGY), encoding="utf-8")
    return str(path)


def write_corpus(tmp_path, texts):
    path = tmp_path / "corpus.jsonl"
    lines = [json.dumps({"id": f"d{i + 1}", "text": text}) for i, text in enumerate(texts)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return str(path)


def write_fixture(tmp_path, docs):
    """docs: list of (text, planning_reply, [(trigger, coding_reply)])."""
    pairs = [(retrieval_prompt(SCHEMA), EXEMPLAR)]
    for text, planning_reply, codings in docs:
        pairs.append((planning_prompt(text, [SCHEMA], (EXEMPLAR,)), planning_reply))
        for trigger, reply in codings:
            pairs.append((coding_prompt(SCHEMA, trigger, text), reply))
    path = tmp_path / "fixture.json"
    path.write_text(json.dumps(script(*pairs)), encoding="utf-8")
    return str(path)


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestParsing:
    def test_missing_subcommand_is_usage_error(self, capsys):
        code, _, err = run_cli(capsys, )
        assert code == 2

    def test_unknown_flag(self, capsys):
        code, _, _ = run_cli(capsys, "extract", "--frobnicate")
        assert code == 2

    def test_bad_mode_choice(self, capsys):
        code, _, _ = run_cli(capsys, "extract", "--mode", "creative")
        assert code == 2

    def test_help_exits_zero(self, capsys):
        code, out, _ = run_cli(capsys, "--help")
        assert code == 0
        assert "extract" in out and "eval" in out


class TestConfigResolution:
    def print_config(self, capsys, *argv):
        code, out, err = run_cli(capsys, "extract", "--print-config", *argv)
        assert code == 0, err
        return json.loads(out)

    def test_defaults(self, capsys):
        data = self.print_config(capsys)
        assert data["exemplar_k"] == 3
        assert data["hypothesis_k"] == 3
        assert data["patch_attempts"] == 3
        assert data["runs"] == 3
        assert data["mode"] == "strict"
        assert data["workers"] == 1
        assert data["seed"] == 0
        assert data["sample"] is None
        assert data["multi_event"] is False
        assert data["event_cap"] == 5
        assert data["backend"] == {
            "endpoint": "http://localhost:8000/v1",
            "model": "llama3-8b-instruct",
            "temperature": 0.7,
            "max_tokens": 1024,
            "api_key_env": None,
            "timeout": 30.0,
            "retries": 2,
        }

    def test_environment_overrides_defaults(self, capsys, monkeypatch):
        monkeypatch.setenv("EVENTAGENTS_HYPOTHESIS_K", "5")
        monkeypatch.setenv("EVENTAGENTS_MODEL", "other-model")
        monkeypatch.setenv("EVENTAGENTS_TEMPERATURE", "0.2")
        data = self.print_config(capsys)
        assert data["hypothesis_k"] == 5
        assert data["backend"]["model"] == "other-model"
        assert data["backend"]["temperature"] == 0.2

    def test_file_overrides_environment_flags_override_file(self, capsys, monkeypatch, tmp_path):
        monkeypatch.setenv("EVENTAGENTS_HYPOTHESIS_K", "5")
        monkeypatch.setenv("EVENTAGENTS_PATCH_ATTEMPTS", "5")
        config_path = tmp_path / "run.json"
        config_path.write_text(
            json.dumps(
                {
                    "hypothesis_k": 4,
                    "patch_attempts": 4,
                    "backend": {"model": "from-file"},
                }
            )
        )
        data = self.print_config(
            capsys, "--config", str(config_path), "--hypothesis-k", "2"
        )
        assert data["hypothesis_k"] == 2  # flag wins
        assert data["patch_attempts"] == 4  # file beats environment
        assert data["backend"]["model"] == "from-file"

    def test_multi_event_knobs_are_config_file_only(self, capsys, monkeypatch, tmp_path):
        monkeypatch.setenv("EVENTAGENTS_EVENT_CAP", "9")
        config_path = tmp_path / "run.json"
        config_path.write_text(json.dumps({"multi_event": True, "event_cap": 2}))
        data = self.print_config(capsys, "--config", str(config_path))
        assert data["multi_event"] is True
        assert data["event_cap"] == 2
        plain = self.print_config(capsys)
        assert plain["event_cap"] == 5  # the environment variable is not consulted

    def test_invalid_environment_value(self, capsys, monkeypatch):
        monkeypatch.setenv("EVENTAGENTS_RUNS", "three")
        code, _, err = run_cli(capsys, "extract", "--print-config")
        assert code == 2
        assert "EVENTAGENTS_RUNS" in err and "invalid value" in err

    @pytest.mark.parametrize(
        "payload, fragment",
        [
            ({"unknown_key": 1}, "unknown config file key 'unknown_key'"),
            ({"backend": {"port": 1}}, "unknown config file key 'backend.port'"),
            ({"backend": []}, "'backend' must be an object"),
            ({"runs": "three"}, "config file key 'runs' must be an integer"),
            ({"runs": True}, "config file key 'runs' must be an integer"),
            ({"multi_event": "yes"}, "config file key 'multi_event' must be a boolean"),
            ({"mode": 3}, "config file key 'mode' must be a string"),
        ],
    )
    def test_config_file_validation(self, capsys, tmp_path, payload, fragment):
        config_path = tmp_path / "run.json"
        config_path.write_text(json.dumps(payload))
        code, _, err = run_cli(capsys, "extract", "--print-config", "--config", str(config_path))
        assert code == 2
        assert fragment in err

    def test_missing_config_file(self, capsys, tmp_path):
        code, _, err = run_cli(
            capsys, "extract", "--print-config", "--config", str(tmp_path / "nope.json")
        )
        assert code == 2
        assert "cannot read config file" in err

    def test_value_range_errors_are_usage_errors(self, capsys):
        code, _, err = run_cli(capsys, "extract", "--print-config", "--runs", "0")
        assert code == 2
        assert "runs must be >= 1" in err

    def test_print_config_skips_required_path_validation(self, capsys):
        code, out, _ = run_cli(capsys, "extract", "--print-config")
        assert code == 0
        assert json.loads(out)["ontology"] is None


class TestStats:
    def corpus(self, tmp_path):
        text = "They demanded and struck down"
        record = {
            "id": "d1",
            "text": text,
            "events": [
                {"event_type": "E", "trigger": {"text": "demanded", "start": 5, "end": 13}},
                {"event_type": "E", "trigger": {"text": "struck down", "start": 18, "end": 29}},
            ],
        }
        path = tmp_path / "gold.jsonl"
        path.write_text(json.dumps(record) + "\n", encoding="utf-8")
        return str(path)

    def test_prints_aligned_summary(self, capsys, tmp_path):
        code, out, _ = run_cli(capsys, "stats", "--corpus", self.corpus(tmp_path))
        assert code == 0
        lines = out.splitlines()
        assert lines[0] == f"{'Documents':<24}1"
        assert lines[1] == f"{'Event mentions':<24}2"
        assert lines[2] == f"{'Avg doc length (tokens)':<24}5.00"
        assert lines[3] == f"{'Multi-word triggers':<24}50.0%"

    def test_writes_json_when_out_given(self, capsys, tmp_path):
        out_path = tmp_path / "stats.json"
        code, _, _ = run_cli(
            capsys, "stats", "--corpus", self.corpus(tmp_path), "--out", str(out_path)
        )
        assert code == 0
        data = json.loads(out_path.read_text())
        assert data == {
            "documents": 1,
            "event_mentions": 2,
            "avg_doc_length_tokens": 5.0,
            "multiword_trigger_pct": 50.0,
        }

    def test_empty_corpus_note(self, capsys, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("", encoding="utf-8")
        code, out, _ = run_cli(capsys, "stats", "--corpus", str(path))
        assert code == 0
        assert "note: empty corpus" in out

    def test_missing_corpus_flag(self, capsys):
        code, _, err = run_cli(capsys, "stats")
        assert code == 2
        assert "missing required option --corpus for command 'stats'" in err

    def test_unreadable_corpus_is_operational_error(self, capsys, tmp_path):
        code, _, err = run_cli(capsys, "stats", "--corpus", str(tmp_path / "missing.jsonl"))
        assert code == 1
        assert err.startswith("error:")

    def test_malformed_corpus_is_operational_error(self, capsys, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text("{nope", encoding="utf-8")
        code, _, err = run_cli(capsys, "stats", "--corpus", str(path))
        assert code == 1
        assert "malformed record" in err


class TestSchema:
    def test_list(self, capsys, tmp_path):
        code, out, _ = run_cli(capsys, "schema", "list", "--ontology", write_ontology(tmp_path))
        assert code == 0
        assert out == "PatchVulnerability: 4 roles\n"

    def test_render(self, capsys, tmp_path):
        code, out, _ = run_cli(capsys, "schema", "render", "--ontology", write_ontology(tmp_path))
        assert code == 0
        assert out.startswith("@dataclass\nclass PatchVulnerability:\n    mention: str\n")
        assert "    vulnerable_system: List\n" in out

    def test_requires_ontology(self, capsys):
        code, _, err = run_cli(capsys, "schema", "list")
        assert code == 2
        assert "missing required option --ontology" in err

    def test_action_is_validated(self, capsys, tmp_path):
        code, _, _ = run_cli(capsys, "schema", "dump", "--ontology", write_ontology(tmp_path))
        assert code == 2


def gold_eval_corpus(tmp_path):
    start = TEXT_1.index("patched")
    record = {
        "id": "d1",
        "text": TEXT_1,
        "events": [
            {
                "event_type": "PatchVulnerability",
                "trigger": {"text": "patched", "start": start, "end": start + len("patched")},
                "arguments": [
                    {
                        "role": "time",
                        "text": "Tuesday",
                        "start": TEXT_1.index("Tuesday"),
                        "end": TEXT_1.index("Tuesday") + len("Tuesday"),
                    }
                ],
            }
        ],
    }
    path = tmp_path / "gold.jsonl"
    path.write_text(json.dumps(record) + "\n", encoding="utf-8")
    return str(path)


def write_predictions(tmp_path, name, events_by_doc):
    path = tmp_path / name
    lines = [
        json.dumps({"doc_id": doc_id, "events": events})
        for doc_id, events in events_by_doc.items()
    ]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return str(path)


PERFECT_EVENT = {
    "event_type": "PatchVulnerability",
    "trigger": "patched",
    "arguments": {"time": ["Tuesday"]},
}


class TestEval:
    def test_single_run_table_and_json(self, capsys, tmp_path):
        gold = gold_eval_corpus(tmp_path)
        preds = write_predictions(tmp_path, "preds.jsonl", {"d1": [PERFECT_EVENT]})
        out_path = tmp_path / "report.json"
        code, out, _ = run_cli(
            capsys, "eval", preds, "--corpus", gold, "--out", str(out_path)
        )
        assert code == 0
        assert out.splitlines()[0].split() == [
            "Metric", "Precision", "Recall", "F1", "Pred", "Gold", "Correct",
        ]
        assert "TI" in out and "AC" in out
        report = json.loads(out_path.read_text())
        assert report["TI"]["f1"] == 1.0
        assert report["AC"]["num_correct"] == 1

    def test_json_to_stdout_without_out(self, capsys, tmp_path):
        gold = gold_eval_corpus(tmp_path)
        preds = write_predictions(tmp_path, "preds.jsonl", {"d1": [PERFECT_EVENT]})
        code, out, _ = run_cli(capsys, "eval", preds, "--corpus", gold)
        assert code == 0
        json_start = out.index("{")
        report = json.loads(out[json_start:])
        assert report["TI"]["precision"] == 1.0

    def test_multiple_runs_print_headers_and_mean(self, capsys, tmp_path):
        gold = gold_eval_corpus(tmp_path)
        run1 = write_predictions(tmp_path, "run1.jsonl", {"d1": [PERFECT_EVENT]})
        run2 = write_predictions(tmp_path, "run2.jsonl", {"d1": []})
        out_path = tmp_path / "report.json"
        code, out, _ = run_cli(
            capsys, "eval", run1, run2, "--corpus", gold, "--out", str(out_path)
        )
        assert code == 0
        assert f"# {run1}" in out
        assert f"# {run2}" in out
        assert "# mean over 2 runs" in out
        report = json.loads(out_path.read_text())
        assert len(report["runs"]) == 2
        assert report["mean"]["TI"]["f1"] == 0.5

    def test_empty_predictions_for_missing_docs(self, capsys, tmp_path):
        gold = gold_eval_corpus(tmp_path)
        preds = write_predictions(tmp_path, "preds.jsonl", {})
        code, out, _ = run_cli(capsys, "eval", preds, "--corpus", gold)
        assert code == 0
        json_start = out.index("{")
        assert json.loads(out[json_start:])["TI"]["recall"] == 0.0

    @pytest.mark.parametrize(
        "events, fragment",
        [
            ([{"trigger": "patched", "arguments": {}}], "missing required field 'event_type'"),
            (
                [dict(PERFECT_EVENT, confidence=0.9)],
                "unexpected field 'confidence'",
            ),
        ],
    )
    def test_bad_prediction_events(self, capsys, tmp_path, events, fragment):
        gold = gold_eval_corpus(tmp_path)
        preds = write_predictions(tmp_path, "preds.jsonl", {"d1": events})
        code, _, err = run_cli(capsys, "eval", preds, "--corpus", gold)
        assert code == 1
        assert fragment in err

    def test_unknown_doc_id(self, capsys, tmp_path):
        gold = gold_eval_corpus(tmp_path)
        preds = write_predictions(tmp_path, "preds.jsonl", {"ghost": []})
        code, _, err = run_cli(capsys, "eval", preds, "--corpus", gold)
        assert code == 1
        assert "unknown document id 'ghost'" in err

    def test_duplicate_doc_id_in_predictions(self, capsys, tmp_path):
        gold = gold_eval_corpus(tmp_path)
        path = tmp_path / "preds.jsonl"
        line = json.dumps({"doc_id": "d1", "events": []})
        path.write_text(line + "\n" + line + "\n", encoding="utf-8")
        code, _, err = run_cli(capsys, "eval", str(path), "--corpus", gold)
        assert code == 1
        assert "duplicate doc_id 'd1'" in err

    def test_missing_predictions_file(self, capsys, tmp_path):
        gold = gold_eval_corpus(tmp_path)
        code, _, err = run_cli(capsys, "eval", str(tmp_path / "none.jsonl"), "--corpus", gold)
        assert code == 1
        assert "cannot read predictions file" in err


class TestExtract:
    def setup_run(self, tmp_path, texts=(TEXT_1,), docs=None):
        ontology = write_ontology(tmp_path)
        corpus = write_corpus(tmp_path, list(texts))
        if docs is None:
            docs = [(TEXT_1, PLANNING_1, [("patched", CODING_1)])]
        fixture = write_fixture(tmp_path, docs)
        out = tmp_path / "preds.jsonl"
        return ontology, corpus, fixture, out

    def extract_args(self, ontology, corpus, fixture, out, *extra):
        return (
            "extract",
            "--ontology", ontology,
            "--corpus", corpus,
            "--scripted-fixture", fixture,
            "--out", str(out),
            *extra,
        )

    def test_single_run_writes_predictions_and_trace(self, capsys, tmp_path):
        ontology, corpus, fixture, out = self.setup_run(tmp_path)
        code, stdout, _ = run_cli(
            capsys, *self.extract_args(ontology, corpus, fixture, out, "--runs", "1")
        )
        assert code == 0
        assert stdout.strip() == f"run 1: 1 documents, 1 events -> {out}"
        lines = out.read_text().splitlines()
        assert len(lines) == 1
        record = json.loads(lines[0])
        assert record["doc_id"] == "d1"
        assert record["events"] == [
            {
                "event_type": "PatchVulnerability",
                "trigger": "patched",
                "arguments": {"time": ["Tuesday"]},
            }
        ]
        trace_lines = (tmp_path / "preds.trace.jsonl").read_text().splitlines()
        outcomes = [json.loads(line) for line in trace_lines]
        assert outcomes[-1] == {"doc_id": "d1", "outcome": "accepted"}
        assert any(record.get("verdict") is True for record in outcomes)

    def test_multiple_runs_write_numbered_files(self, capsys, tmp_path):
        ontology, corpus, fixture, out = self.setup_run(tmp_path)
        code, stdout, _ = run_cli(
            capsys, *self.extract_args(ontology, corpus, fixture, out, "--runs", "2")
        )
        assert code == 0
        run1 = tmp_path / "preds.run1.jsonl"
        run2 = tmp_path / "preds.run2.jsonl"
        assert run1.exists() and run2.exists()
        assert not out.exists()
        assert (tmp_path / "preds.run1.trace.jsonl").exists()
        assert run1.read_bytes() == run2.read_bytes()
        assert "run 1:" in stdout and "run 2:" in stdout

    def test_two_invocations_are_byte_identical(self, capsys, tmp_path):
        ontology, corpus, fixture, out = self.setup_run(tmp_path)
        args = self.extract_args(ontology, corpus, fixture, out, "--runs", "1")
        assert run_cli(capsys, *args)[0] == 0
        first = out.read_bytes()
        assert run_cli(capsys, *args)[0] == 0
        assert out.read_bytes() == first

    def test_failed_document_is_skipped_not_fatal(self, capsys, tmp_path):
        # The fixture only covers the first document; planning for the
        # second hits a missing fingerprint and the document is skipped.
        ontology, corpus, fixture, out = self.setup_run(tmp_path, texts=(TEXT_1, TEXT_2))
        code, stdout, stderr = run_cli(
            capsys, *self.extract_args(ontology, corpus, fixture, out, "--runs", "1")
        )
        assert code == 0
        assert "document d2 skipped" in stderr
        lines = out.read_text().splitlines()
        assert [json.loads(l)["doc_id"] for l in lines] == ["d1"]
        trace_text = (tmp_path / "preds.trace.jsonl").read_text()
        assert "document skipped: no scripted reply for template 'planning'" in trace_text

    def test_workers_preserve_document_order(self, capsys, tmp_path):
        docs = [
            (TEXT_1, PLANNING_1, [("patched", CODING_1)]),
            (TEXT_2, PLANNING_2, [("patched", CODING_2)]),
        ]
        ontology, corpus, fixture, out = self.setup_run(tmp_path, texts=(TEXT_1, TEXT_2), docs=docs)
        args = self.extract_args(ontology, corpus, fixture, out, "--runs", "1")
        assert run_cli(capsys, *args)[0] == 0
        sequential = out.read_bytes()
        assert run_cli(capsys, *args, "--workers", "2")[0] == 0
        assert out.read_bytes() == sequential

    def test_sample_reduces_corpus(self, capsys, tmp_path):
        docs = [
            (TEXT_1, PLANNING_1, [("patched", CODING_1)]),
            (TEXT_2, PLANNING_2, [("patched", CODING_2)]),
        ]
        ontology, corpus, fixture, out = self.setup_run(tmp_path, texts=(TEXT_1, TEXT_2), docs=docs)
        code, stdout, _ = run_cli(
            capsys,
            *self.extract_args(ontology, corpus, fixture, out, "--runs", "1", "--sample", "1"),
        )
        assert code == 0
        assert "1 documents" in stdout
        assert len(out.read_text().splitlines()) == 1

    def test_missing_required_options(self, capsys, tmp_path):
        code, _, err = run_cli(capsys, "extract", "--corpus", "x", "--out", "y")
        assert code == 2
        assert "missing required option --ontology for command 'extract'" in err

    def test_empty_ontology_is_operational_error(self, capsys, tmp_path):
        ontology = tmp_path / "empty.json"
        ontology.write_text("[]")
        _, corpus, fixture, out = self.setup_run(tmp_path)
        code, _, err = run_cli(
            capsys,
            *self.extract_args(str(ontology), corpus, fixture, out, "--runs", "1"),
        )
        assert code == 1
        assert "declares no event types" in err
