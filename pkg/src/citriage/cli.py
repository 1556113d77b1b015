"""Operator-facing command line.

Subcommands: triage, resolve, preprocess, ablate, corpus, history. Exit
codes are a stable contract: 0 success, 1 runtime error (the failing stage
is named on stderr), 2 degraded report (sections missing from the reply),
64 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .builds import BuildRef, load_fixture
from .chain import resolve_chain_agentic, resolve_chain_deterministic, resolve_chain_hybrid
from .config import AppConfig, load_app_config
from .engine import (
    DeliveryStatus,
    EngineSettings,
    ResolverMode,
    StdoutSink,
    TriagePolicy,
    TriageRequest,
    deliver,
    triage,
    triage_history_first,
)
from .errors import IncompleteResults, TriageError, TriageStageError
from .gateway import ChatGateway, ScriptedBackend
from .harness.ablation import (
    CONDITION_ORDER,
    ReportFormat,
    document_for_results,
    emit_report,
    run_ablation,
)
from .harness.corpus import DEFAULT_PROFILE, DistributionProfile, generate_corpus, write_corpus
from .harness.scoring import load_truths
from .knowledge import AblationCondition, HistoryRecord, load_knowledge_base
from .preprocess import diff_filter, keyword_window, redact, strip_status_lines

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_DEGRADED = 2
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    """argparse with the usage exit code pinned to 64."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _parse_ref(text: str) -> BuildRef:
    name, _, number = text.rpartition("#")
    if not name or not number.isdigit():
        raise ValueError(f"expected NAME#NUMBER, got {text!r}")
    return BuildRef(name, int(number))


def _build_parser() -> _Parser:
    parser = _Parser(prog="citriage", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_triage = sub.add_parser("triage", help="triage a failed build end to end")
    p_triage.add_argument("--config", required=True)
    p_triage.add_argument("--entry", required=True, help="entry build as NAME#NUMBER")
    p_triage.add_argument("--knowledge", default="none", help="none|pi|fmi|hr|pi+fmi|...")
    p_triage.add_argument(
        "--resolver",
        choices=[m.value for m in ResolverMode],
        default=ResolverMode.HYBRID.value,
    )
    p_triage.add_argument(
        "--policy",
        choices=[p.value for p in TriagePolicy],
        default=TriagePolicy.ALWAYS_LLM.value,
    )
    p_triage.add_argument("--no-timing", action="store_true")

    p_resolve = sub.add_parser("resolve", help="print the downstream chain")
    p_resolve.add_argument("--config", required=True)
    p_resolve.add_argument("--entry", required=True)
    p_resolve.add_argument(
        "--mode",
        choices=[m.value for m in ResolverMode],
        default=ResolverMode.DETERMINISTIC.value,
    )

    p_pre = sub.add_parser("preprocess", help="run the log preprocessing stages")
    p_pre.add_argument("--config", required=True)
    p_pre.add_argument("--build", required=True, help="build as NAME#NUMBER")
    p_pre.add_argument(
        "--until", choices=["strip", "diff", "window", "redact"], default="redact"
    )

    p_ablate = sub.add_parser("ablate", help="replay the ablation study")
    p_ablate.add_argument("--corpus", required=True, help="corpus directory")
    p_ablate.add_argument("--scripts", required=True, help="replay scripts directory")
    p_ablate.add_argument("--out", required=True, help="output document path")
    p_ablate.add_argument("--conditions", default=None, help="comma-separated subset")

    p_corpus = sub.add_parser("corpus", help="generate the synthetic corpus")
    p_corpus.add_argument("--seed", required=True, type=int)
    p_corpus.add_argument("--profile", default=None, help="profile JSON path")
    p_corpus.add_argument("--out", required=True, help="output directory")

    p_history = sub.add_parser("history", help="import or export history records")
    p_history.add_argument("--config", required=True)
    group = p_history.add_mutually_exclusive_group(required=True)
    group.add_argument("--export", dest="export_path")
    group.add_argument("--import", dest="import_path")

    return parser


def _load_config(path: str) -> AppConfig:
    config = load_app_config(path)
    config.validate_paths()
    return config


def _gateway(config: AppConfig) -> ChatGateway:
    return ChatGateway(backend=config.backend(), config=config.gateway_config)


def _cmd_triage(args) -> int:
    config = _load_config(args.config)
    store = load_fixture(config.store_path)
    kb = config.knowledge_base()
    gateway = _gateway(config)
    request = TriageRequest(
        entry=_parse_ref(args.entry),
        condition=AblationCondition.from_label(args.knowledge),
        resolver_mode=ResolverMode(args.resolver),
        policy=TriagePolicy(args.policy),
    )
    settings = config.engine_settings()
    if request.policy is TriagePolicy.HISTORY_FIRST:
        report = triage_history_first(store, kb, gateway, request, settings)
    else:
        report = triage(store, kb, gateway, request, settings)
    document = report.to_json(include_timing=not args.no_timing)
    print(json.dumps(document, indent=2, sort_keys=True))
    sink = config.sink()
    if not isinstance(sink, StdoutSink):
        status = deliver(sink, report, config.outbox_dir)
        if status is DeliveryStatus.DEFERRED:
            print("delivery deferred to outbox", file=sys.stderr)
    return EXIT_OK if report.parse_ok else EXIT_DEGRADED


def _cmd_resolve(args) -> int:
    config = _load_config(args.config)
    store = load_fixture(config.store_path)
    mode = ResolverMode(args.mode)
    entry = _parse_ref(args.entry)
    if mode is ResolverMode.DETERMINISTIC:
        chain = resolve_chain_deterministic(
            store, entry, config.grammar, config.limits.max_depth
        )
    else:
        kb = config.knowledge_base()
        gateway = _gateway(config)
        knowledge = kb.finder_knowledge or None
        if mode is ResolverMode.AGENTIC:
            chain = resolve_chain_agentic(
                store, entry, gateway, knowledge, config.limits.max_rounds
            )
        else:
            chain = resolve_chain_hybrid(
                store, entry, config.grammar, gateway, knowledge, config.limits
            )
    print(" -> ".join(str(ref) for ref in chain.links))
    return EXIT_OK


def _cmd_preprocess(args) -> int:
    config = _load_config(args.config)
    store = load_fixture(config.store_path)
    ref = _parse_ref(args.build)
    log = store.get_console_log(ref)
    pre_config = config.preprocess

    counts = {"input": len(log.lines)}
    current = strip_status_lines(log, pre_config)
    counts["strip"] = len(current.lines)
    if args.until != "strip":
        latest_ok = store.get_latest_successful_build(ref.pipeline_name)
        if latest_ok is not None:
            current = diff_filter(
                current, strip_status_lines(latest_ok.console_log, pre_config), pre_config
            )
        counts["diff"] = len(current.lines)
    if args.until in ("window", "redact"):
        current = keyword_window(current, pre_config)
        counts["window"] = len(current.lines)
    if args.until == "redact":
        current = redact(current, pre_config)
        counts["redact"] = len(current.lines)

    for line in current.lines:
        print(line)
    print("# " + " ".join(f"{stage}={count}" for stage, count in counts.items()))
    return EXIT_OK


def _cmd_ablate(args) -> int:
    corpus_dir = Path(args.corpus)
    scripts_dir = Path(args.scripts)
    store = load_fixture(corpus_dir / "builds.json")
    truths = load_truths(corpus_dir / "truths.json")
    kb = load_knowledge_base(
        corpus_dir / "knowledge" / "pipeline_information.txt",
        corpus_dir / "knowledge" / "failure_management.txt",
        corpus_dir / "knowledge" / "finder_knowledge.txt",
        corpus_dir / "history.jsonl",
    )
    labels = (
        [label.strip() for label in args.conditions.split(",")]
        if args.conditions
        else list(CONDITION_ORDER)
    )
    backend = ScriptedBackend()
    for label in labels:
        script = scripts_dir / f"{label}.json"
        if script.exists():
            backend.extend_from_replay_file(script)
    gateway = ChatGateway(backend=backend)
    conditions = [AblationCondition.from_label(label) for label in labels]
    results = run_ablation(store, truths, kb, gateway, conditions)

    # The document artifact is written even for partial runs; the table
    # rendering then rejects incomplete condition sets.
    document = document_for_results(results)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(document, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    table = emit_report(results, ReportFormat.TABLE)
    print(table)
    return EXIT_OK


def _cmd_corpus(args) -> int:
    profile = DEFAULT_PROFILE
    if args.profile:
        profile = DistributionProfile.from_json(
            json.loads(Path(args.profile).read_text(encoding="utf-8"))
        )
    bundle = generate_corpus(args.seed, profile)
    write_corpus(bundle, args.out)
    print(
        f"wrote {len(bundle.truths)} cases, "
        f"{sum(1 for _ in bundle.store.iter_builds())} builds, "
        f"{len(bundle.history_records)} history records to {args.out}"
    )
    return EXIT_OK


def _cmd_history(args) -> int:
    config = _load_config(args.config)
    kb = config.knowledge_base()
    if args.export_path:
        records = [rec.to_json() for rec in kb.history.records()]
        Path(args.export_path).write_text(
            json.dumps(records, indent=1) + "\n", encoding="utf-8"
        )
        print(f"exported {len(records)} records")
        return EXIT_OK
    payload = json.loads(Path(args.import_path).read_text(encoding="utf-8"))
    added = duplicate = 0
    for obj in payload:
        record = HistoryRecord.from_json(obj)
        status = kb.history.add_record(record)
        if status.value == "added":
            added += 1
        else:
            duplicate += 1
    print(f"imported {added} records ({duplicate} duplicates skipped)")
    return EXIT_OK


_COMMANDS = {
    "triage": _cmd_triage,
    "resolve": _cmd_resolve,
    "preprocess": _cmd_preprocess,
    "ablate": _cmd_ablate,
    "corpus": _cmd_corpus,
    "history": _cmd_history,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except TriageStageError as exc:
        print(f"error in stage '{exc.stage}': {exc.cause}", file=sys.stderr)
        return EXIT_RUNTIME
    except IncompleteResults as exc:
        print(f"error in stage 'emit-report': {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (TriageError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    raise SystemExit(main())
