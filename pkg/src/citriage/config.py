"""File-driven configuration for the CLI.

One JSON document wires every module together: the build-store fixture, the
knowledge documents, the history database, marker grammar and preprocessing
settings, the gateway backend, and the notification sink. All referenced
paths must exist when a command starts; the first missing one is named in
the error.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .chain import MarkerGrammar, ResolveLimits
from .engine import EngineSettings, FileSink, StdoutSink, WebhookSink
from .errors import MalformedFixture
from .gateway import GatewayConfig, HttpBackend, ScriptedBackend
from .knowledge import KnowledgeBase, load_knowledge_base
from .preprocess import (
    DEFAULT_FAILURE_KEYWORDS,
    DEFAULT_REDACTION_RULES,
    DEFAULT_STATUS_KEYWORDS,
    PreprocessConfig,
)

CONFIG_SCHEMA_VERSION = 1


@dataclass
class AppConfig:
    store_path: Path
    pi_path: Path
    fmi_path: Path
    finder_path: Path
    history_path: Path
    grammar: MarkerGrammar
    preprocess: PreprocessConfig
    gateway_kind: str  # "scripted" | "http"
    gateway_config: GatewayConfig
    replay_path: Path | None
    sink_spec: dict
    limits: ResolveLimits = field(default_factory=ResolveLimits)
    history_similarity_threshold: float = 0.8
    reports_dir: Path | None = None
    outbox_dir: Path = Path("outbox")

    def engine_settings(self) -> EngineSettings:
        return EngineSettings(
            grammar=self.grammar,
            preprocess=self.preprocess,
            limits=self.limits,
            history_similarity_threshold=self.history_similarity_threshold,
            reports_dir=self.reports_dir,
        )

    def knowledge_base(self) -> KnowledgeBase:
        return load_knowledge_base(
            self.pi_path, self.fmi_path, self.finder_path, self.history_path
        )

    def backend(self):
        if self.gateway_kind == "scripted":
            return ScriptedBackend.from_replay_file(self.replay_path)
        return HttpBackend()

    def sink(self):
        kind = self.sink_spec.get("kind", "stdout")
        if kind == "stdout":
            return StdoutSink()
        if kind == "file":
            return FileSink(self.sink_spec["directory"])
        if kind == "webhook":
            return WebhookSink(
                self.sink_spec["url"], float(self.sink_spec.get("timeout", 10.0))
            )
        raise MalformedFixture(f"unknown sink kind {kind!r}")

    def required_paths(self) -> list[Path]:
        # The history db is a writable store created on first use, so it is
        # not part of the must-exist read inputs.
        paths = [self.store_path, self.pi_path, self.fmi_path, self.finder_path]
        if self.gateway_kind == "scripted" and self.replay_path is not None:
            paths.append(self.replay_path)
        return paths

    def validate_paths(self) -> None:
        for path in self.required_paths():
            if not path.exists():
                raise FileNotFoundError(f"configured path does not exist: {path}")


def _preprocess_from_json(obj: dict) -> PreprocessConfig:
    rules = obj.get("redaction_rules")
    return PreprocessConfig(
        status_keywords=tuple(obj.get("status_keywords", DEFAULT_STATUS_KEYWORDS)),
        failure_keywords=tuple(obj.get("failure_keywords", DEFAULT_FAILURE_KEYWORDS)),
        context_radius=int(obj.get("context_radius", 5)),
        diff_word_threshold=int(obj.get("diff_word_threshold", 2)),
        redaction_rules=tuple((p, t) for p, t in rules)
        if rules is not None
        else DEFAULT_REDACTION_RULES,
    )


def load_app_config(path) -> AppConfig:
    base = Path(path).parent
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise MalformedFixture(f"config is not valid JSON: {exc}") from None
    if doc.get("schema_version") != CONFIG_SCHEMA_VERSION:
        raise MalformedFixture("missing or unsupported config schema_version")

    def resolve(p) -> Path:
        candidate = Path(p)
        return candidate if candidate.is_absolute() else base / candidate

    knowledge = doc.get("knowledge", {})
    grammar_obj = doc.get("grammar", {})
    gateway_obj = doc.get("gateway", {})
    limits_obj = doc.get("limits", {})

    gateway_config = GatewayConfig(
        model_name=gateway_obj.get("model_name", "gpt-4o"),
        temperature=float(gateway_obj.get("temperature", 0.0)),
        endpoint=gateway_obj.get("endpoint", GatewayConfig.endpoint),
        api_key_env=gateway_obj.get("api_key_env", "OPENAI_API_KEY"),
        timeout=float(gateway_obj.get("timeout", 30.0)),
        max_retries=int(gateway_obj.get("max_retries", 3)),
        backoff_base=float(gateway_obj.get("backoff_base", 0.5)),
    )

    grammar = MarkerGrammar(
        downstream_pattern=grammar_obj.get(
            "downstream_pattern", MarkerGrammar.downstream_pattern
        ),
        failure_indicator_pattern=grammar_obj.get(
            "failure_indicator_pattern", MarkerGrammar.failure_indicator_pattern
        ),
    )

    try:
        return AppConfig(
            store_path=resolve(doc["store"]),
            pi_path=resolve(knowledge["pipeline_information"]),
            fmi_path=resolve(knowledge["failure_management_instructions"]),
            finder_path=resolve(knowledge["finder_knowledge"]),
            history_path=resolve(doc["history"]),
            grammar=grammar,
            preprocess=_preprocess_from_json(doc.get("preprocess", {})),
            gateway_kind=gateway_obj.get("backend", "http"),
            gateway_config=gateway_config,
            replay_path=resolve(gateway_obj["replay"]) if "replay" in gateway_obj else None,
            sink_spec=doc.get("sink", {"kind": "stdout"}),
            limits=ResolveLimits(
                max_depth=int(limits_obj.get("max_depth", 8)),
                max_rounds=int(limits_obj.get("max_rounds", 8)),
            ),
            history_similarity_threshold=float(
                doc.get("history_similarity_threshold", 0.8)
            ),
            reports_dir=resolve(doc["reports_dir"]) if doc.get("reports_dir") else None,
            outbox_dir=resolve(doc.get("outbox_dir", "outbox")),
        )
    except KeyError as exc:
        raise MalformedFixture(f"config missing required key: {exc}") from None
