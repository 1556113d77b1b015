"""End-to-end failure triage.

On a failed build the engine resolves the downstream chain, preprocesses the
most downstream job's log, assembles the requested domain knowledge, issues
exactly one triage completion, parses the reply into causes and solutions,
and hands the report to a notification sink. A history-first policy can
short-circuit the LLM entirely when a stored failure matches closely enough.
"""

from __future__ import annotations

import json
import re
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Callable

import httpx

from .builds import BuildRef, BuildStore
from .chain import (
    ChainMethod,
    DownstreamChain,
    MarkerGrammar,
    ResolveLimits,
    resolve_chain_agentic,
    resolve_chain_deterministic,
    resolve_chain_hybrid,
)
from .errors import MissingSections, TriageStageError
from .gateway import ChatGateway, build_triage_prompt, parse_triage_reply
from .knowledge import (
    AblationCondition,
    KnowledgeBase,
    compose_knowledge,
    rank_top_k,
)
from .preprocess import PreprocessConfig, preprocess, redact_lines

REPORT_SCHEMA_VERSION = 1


class ResolverMode(Enum):
    DETERMINISTIC = "deterministic"
    AGENTIC = "agentic"
    HYBRID = "hybrid"


class TriagePolicy(Enum):
    ALWAYS_LLM = "always-llm"
    HISTORY_FIRST = "history-first"


@dataclass(frozen=True)
class TriageRequest:
    entry: BuildRef
    condition: AblationCondition = AblationCondition()
    resolver_mode: ResolverMode = ResolverMode.HYBRID
    policy: TriagePolicy = TriagePolicy.ALWAYS_LLM
    request_id: str | None = None

    def effective_id(self) -> str:
        if self.request_id:
            return self.request_id
        safe = re.sub(r"[^\w.-]", "_", self.entry.pipeline_name)
        return f"{safe}-{self.entry.build_number}-{self.condition.label}"


@dataclass
class EngineSettings:
    grammar: MarkerGrammar = field(default_factory=MarkerGrammar)
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    limits: ResolveLimits = field(default_factory=ResolveLimits)
    history_k: int = 3
    history_similarity_threshold: float = 0.8
    reports_dir: Path | None = None


@dataclass
class TriageReport:
    request: TriageRequest
    chain: DownstreamChain | None
    causes: str = ""
    solutions: str = ""
    knowledge_used: AblationCondition = AblationCondition()
    matched_history: tuple[str, ...] = ()
    elapsed: float = 0.0
    parse_ok: bool = False
    raw_reply: str = ""
    source: str = "llm"
    error: str | None = None
    failed_stage: str | None = None
    stage_timings: dict[str, float] = field(default_factory=dict)

    def to_json(self, include_timing: bool = True) -> dict:
        doc: dict = {
            "schema_version": REPORT_SCHEMA_VERSION,
            "request_id": self.request.effective_id(),
            "entry": str(self.request.entry),
            "condition": self.knowledge_used.label,
            "resolver_mode": self.request.resolver_mode.value,
            "policy": self.request.policy.value,
            "chain": [str(ref) for ref in self.chain.links] if self.chain else [],
            "chain_method": self.chain.method.value if self.chain else None,
            "causes": self.causes,
            "solutions": self.solutions,
            "matched_history": list(self.matched_history),
            "parse_ok": self.parse_ok,
            "raw_reply": self.raw_reply,
            "source": self.source,
            "error": self.error,
            "failed_stage": self.failed_stage,
        }
        if include_timing:
            doc["elapsed"] = self.elapsed
            doc["stage_timings"] = dict(self.stage_timings)
        return doc


def _persist_report(report: TriageReport, settings: EngineSettings) -> None:
    if settings.reports_dir is None:
        return
    settings.reports_dir.mkdir(parents=True, exist_ok=True)
    path = settings.reports_dir / f"{report.request.effective_id()}.json"
    path.write_text(
        json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


class _StageClock:
    def __init__(self):
        self.timings: dict[str, float] = {}
        self._start = time.perf_counter()

    def run(self, stage: str, fn, *args, **kwargs):
        begin = time.perf_counter()
        try:
            return fn(*args, **kwargs)
        finally:
            self.timings[stage] = time.perf_counter() - begin

    def total(self) -> float:
        return max(time.perf_counter() - self._start, 1e-9)


def _resolve(
    store: BuildStore,
    kb: KnowledgeBase,
    gateway: ChatGateway,
    request: TriageRequest,
    settings: EngineSettings,
) -> DownstreamChain:
    finder_knowledge = kb.finder_knowledge or None
    if request.resolver_mode is ResolverMode.DETERMINISTIC:
        return resolve_chain_deterministic(
            store, request.entry, settings.grammar, settings.limits.max_depth
        )
    if request.resolver_mode is ResolverMode.AGENTIC:
        return resolve_chain_agentic(
            store, request.entry, gateway, finder_knowledge, settings.limits.max_rounds
        )
    return resolve_chain_hybrid(
        store, request.entry, settings.grammar, gateway, finder_knowledge, settings.limits
    )


def triage(
    store: BuildStore,
    kb: KnowledgeBase,
    gateway: ChatGateway,
    request: TriageRequest,
    settings: EngineSettings | None = None,
) -> TriageReport:
    """Run the full triage pipeline with exactly one triage completion.

    Any stage failure is persisted as a failed-report artifact naming the
    stage, then re-raised as TriageStageError. A reply that lacks the two
    required sections is not an error: the report keeps the raw text and
    carries parse_ok=False.
    """
    settings = settings or EngineSettings()
    clock = _StageClock()
    report = TriageReport(request=request, chain=None, knowledge_used=request.condition)

    def fail(stage: str, exc: BaseException) -> TriageStageError:
        report.error = f"{type(exc).__name__}: {exc}"
        report.failed_stage = stage
        report.elapsed = clock.total()
        report.stage_timings = clock.timings
        _persist_report(report, settings)
        return TriageStageError(stage, exc)

    try:
        chain = clock.run("chain-resolution", _resolve, store, kb, gateway, request, settings)
        report.chain = chain
    except Exception as exc:
        raise fail("chain-resolution", exc) from exc

    most_downstream = chain.most_downstream
    try:
        log = clock.run("fetch-log", store.get_console_log, most_downstream)
    except Exception as exc:
        raise fail("fetch-log", exc) from exc

    try:
        def _preprocess():
            latest_ok = store.get_latest_successful_build(most_downstream.pipeline_name)
            return preprocess(
                log, latest_ok.console_log if latest_ok else None, settings.preprocess
            )

        processed = clock.run("preprocess", _preprocess)
    except Exception as exc:
        raise fail("preprocess", exc) from exc

    try:
        def _knowledge():
            if request.condition.include_hr:
                candidates = kb.history.query_by_job(most_downstream.pipeline_name)
                ranked = rank_top_k(candidates, processed, settings.history_k) if candidates else []
                records = [kb.history.get(s.record_id) for s in ranked]
                # Record log lines may carry raw sensitive strings; scrub them
                # with the same rules as the log block before prompting.
                scrubbed = [
                    replace(
                        rec,
                        indicative_lines=redact_lines(
                            rec.indicative_lines, settings.preprocess.redaction_rules
                        ),
                    )
                    for rec in records
                ]
                return records, compose_knowledge(kb, request.condition, scrubbed)
            return [], compose_knowledge(kb, request.condition, None)

        matched, knowledge_text = clock.run("knowledge", _knowledge)
        report.matched_history = tuple(rec.id for rec in matched)
    except Exception as exc:
        raise fail("knowledge", exc) from exc

    try:
        messages = clock.run(
            "prompt",
            build_triage_prompt,
            chain,
            processed,
            knowledge_text,
            settings.preprocess.redaction_rules,
        )
    except Exception as exc:
        raise fail("prompt", exc) from exc

    try:
        reply = clock.run("llm", gateway.complete, messages)
        report.raw_reply = reply.content
    except Exception as exc:
        raise fail("llm", exc) from exc

    try:
        sections = parse_triage_reply(reply)
        report.causes = sections.causes
        report.solutions = sections.solutions
        report.parse_ok = True
    except MissingSections:
        report.parse_ok = False

    report.elapsed = clock.total()
    report.stage_timings = clock.timings
    _persist_report(report, settings)
    return report


def triage_history_first(
    store: BuildStore,
    kb: KnowledgeBase,
    gateway: ChatGateway,
    request: TriageRequest,
    settings: EngineSettings | None = None,
    rebuild_hook: Callable[[TriageReport], bool] | None = None,
) -> TriageReport:
    """Reuse a stored solution when a close historical match exists.

    The top-ranked record for the most downstream job short-circuits the LLM
    when its similarity reaches the configured threshold; the report then
    carries the record's solution verbatim with source="history". The rebuild
    observation is a caller-supplied hook: when it reports failure, the LLM
    path runs after all and its report is returned.
    """
    settings = settings or EngineSettings()
    clock = _StageClock()
    try:
        chain = resolve_chain_hybrid(
            store,
            request.entry,
            settings.grammar,
            gateway,
            kb.finder_knowledge or None,
            settings.limits,
        )
        log = store.get_console_log(chain.most_downstream)
        latest_ok = store.get_latest_successful_build(chain.most_downstream.pipeline_name)
        processed = preprocess(
            log, latest_ok.console_log if latest_ok else None, settings.preprocess
        )
        candidates = kb.history.query_by_job(chain.most_downstream.pipeline_name)
        top = rank_top_k(candidates, processed, 1) if candidates else []
    except Exception as exc:
        raise TriageStageError("history-match", exc) from exc

    if top and top[0].score >= settings.history_similarity_threshold:
        record = kb.history.get(top[0].record_id)
        report = TriageReport(
            request=request,
            chain=chain,
            causes=record.root_cause,
            solutions=record.solution,
            knowledge_used=request.condition,
            matched_history=(record.id,),
            elapsed=clock.total(),
            parse_ok=True,
            source="history",
        )
        _persist_report(report, settings)
        if rebuild_hook is None or rebuild_hook(report):
            return report
    return triage(store, kb, gateway, request, settings)


# ---------------------------------------------------------------------------
# Delivery
# ---------------------------------------------------------------------------


class DeliveryStatus(Enum):
    DELIVERED = "delivered"
    DEFERRED = "deferred"


class StdoutSink:
    def deliver(self, document: dict) -> None:
        print(json.dumps(document, indent=2, sort_keys=True))


class FileSink:
    def __init__(self, directory):
        self.directory = Path(directory)

    def deliver(self, document: dict) -> None:
        self.directory.mkdir(parents=True, exist_ok=True)
        path = self.directory / f"{document['request_id']}.json"
        path.write_text(json.dumps(document, indent=2, sort_keys=True) + "\n", "utf-8")


class WebhookSink:
    def __init__(self, url: str, timeout: float = 10.0):
        self.url = url
        self.timeout = timeout

    def deliver(self, document: dict) -> None:
        response = httpx.post(self.url, json=document, timeout=self.timeout)
        if response.status_code >= 400:
            raise RuntimeError(f"webhook rejected report: {response.status_code}")


def _outbox_path(outbox_dir: Path, request_id: str) -> Path:
    outbox_dir.mkdir(parents=True, exist_ok=True)
    for attempt in range(1000):
        suffix = "" if attempt == 0 else f".{attempt}"
        candidate = outbox_dir / f"{request_id}{suffix}.json"
        try:
            candidate.touch(exist_ok=False)
            return candidate
        except FileExistsError:
            continue
    raise RuntimeError("outbox exhausted for request id " + request_id)


def deliver(sink, report: TriageReport, outbox_dir) -> DeliveryStatus:
    """At-least-once delivery: failures park the report in the outbox."""
    document = report.to_json()
    try:
        sink.deliver(document)
        return DeliveryStatus.DELIVERED
    except Exception:
        path = _outbox_path(Path(outbox_dir), report.request.effective_id())
        path.write_text(json.dumps(document, indent=2, sort_keys=True) + "\n", "utf-8")
        return DeliveryStatus.DEFERRED


def redeliver_outbox(sink, outbox_dir) -> list[tuple[Path, DeliveryStatus]]:
    """Retry every parked report; delivered ones leave the outbox."""
    results = []
    outbox = Path(outbox_dir)
    if not outbox.is_dir():
        return results
    for path in sorted(outbox.glob("*.json")):
        document = json.loads(path.read_text(encoding="utf-8"))
        try:
            sink.deliver(document)
        except Exception:
            results.append((path, DeliveryStatus.DEFERRED))
            continue
        path.unlink()
        results.append((path, DeliveryStatus.DELIVERED))
    return results
