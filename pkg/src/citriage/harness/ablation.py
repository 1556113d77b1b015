"""Ablation runs over a corpus and their rendered result tables.

For each knowledge condition every case is triaged once (always-LLM policy,
deterministic chain resolution) and scored against its ground truth. A case
whose triage raises is counted Red with an error flag; a run never aborts
mid-condition. Results aggregate verdict counts, per-cause accuracy rates,
and summary statistics over those rates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

from ..engine import (
    EngineSettings,
    ResolverMode,
    TriagePolicy,
    TriageRequest,
    triage,
)
from ..errors import IncompleteResults
from ..gateway import ChatGateway
from ..knowledge import ALL_CONDITIONS, AblationCondition, KnowledgeBase
from .scoring import Color, GroundTruth, ScoredVerdict, score_solution
from .stats import StatsSummary, compute_stats

REPORT_DOC_SCHEMA_VERSION = 1

CONDITION_ORDER = ("none", "pi", "fmi", "hr", "pi+fmi", "pi+hr", "fmi+hr", "pi+fmi+hr")

_LABEL_TITLES = {
    "none": "None",
    "pi": "PI",
    "fmi": "FMI",
    "hr": "HR",
    "pi+fmi": "PI+FMI",
    "pi+hr": "PI+HR",
    "fmi+hr": "FMI+HR",
    "pi+fmi+hr": "PI+FMI+HR",
}


class ReportFormat(Enum):
    TABLE = "table"
    DOCUMENT = "document"


@dataclass
class AblationResult:
    condition: AblationCondition
    counts: tuple[int, int, int]  # green, yellow, red
    per_cause_accuracy: dict[str, float]
    stats: StatsSummary
    verdicts: list[ScoredVerdict] = field(default_factory=list)

    @property
    def weighted_accuracy(self) -> float:
        green, yellow, red = self.counts
        total = green + yellow + red
        return (green * 1.0 + yellow * 0.5) / total if total else 0.0


def run_ablation(
    store,
    truths: Sequence[GroundTruth],
    kb: KnowledgeBase,
    gateway: ChatGateway,
    conditions: Sequence[AblationCondition] = ALL_CONDITIONS,
    settings: EngineSettings | None = None,
) -> list[AblationResult]:
    settings = settings or EngineSettings()
    results = []
    for condition in conditions:
        verdicts: list[ScoredVerdict] = []
        for truth in truths:
            request = TriageRequest(
                entry=truth.entry,
                condition=condition,
                resolver_mode=ResolverMode.DETERMINISTIC,
                policy=TriagePolicy.ALWAYS_LLM,
                request_id=f"{truth.case_id}-{condition.label}",
            )
            try:
                report = triage(store, kb, gateway, request, settings)
            except Exception as exc:
                verdicts.append(
                    ScoredVerdict(
                        case_id=truth.case_id,
                        color=Color.RED,
                        score=0.0,
                        error=f"{type(exc).__name__}: {exc}",
                    )
                )
                continue
            verdicts.append(score_solution(report, truth))
        results.append(_aggregate(condition, truths, verdicts))
    return results


def _aggregate(
    condition: AblationCondition,
    truths: Sequence[GroundTruth],
    verdicts: list[ScoredVerdict],
) -> AblationResult:
    counts = [0, 0, 0]
    for verdict in verdicts:
        if verdict.color is Color.GREEN:
            counts[0] += 1
        elif verdict.color is Color.YELLOW:
            counts[1] += 1
        else:
            counts[2] += 1

    score_by_case = {v.case_id: v.score for v in verdicts}
    cause_totals: dict[str, list[float]] = {}
    for truth in truths:
        cause_totals.setdefault(truth.cause_id, []).append(score_by_case[truth.case_id])
    per_cause = {
        cause: sum(scores) / len(scores)
        for cause, scores in sorted(cause_totals.items())
    }
    if per_cause:
        stats = compute_stats(list(per_cause.values()))
    else:  # empty corpus: zero counts, degenerate statistics
        stats = StatsSummary(0.0, 0.0, 0.0, 0.0)
    return AblationResult(
        condition=condition,
        counts=(counts[0], counts[1], counts[2]),
        per_cause_accuracy=per_cause,
        stats=stats,
        verdicts=verdicts,
    )


def _ordered(results: Sequence[AblationResult]) -> list[AblationResult]:
    by_label = {r.condition.label: r for r in results}
    missing = [label for label in CONDITION_ORDER if label not in by_label]
    if missing:
        raise IncompleteResults(f"missing conditions: {', '.join(missing)}")
    return [by_label[label] for label in CONDITION_ORDER]


def _counts_table(results: list[AblationResult]) -> str:
    titles = [_LABEL_TITLES[r.condition.label] for r in results]
    width = max(len(t) for t in titles) + 2
    header = "Verdict".ljust(12) + "".join(t.rjust(width) for t in titles)
    rows = []
    for name, idx in (("Green", 0), ("Yellow", 1), ("Red", 2)):
        rows.append(
            name.ljust(12) + "".join(str(r.counts[idx]).rjust(width) for r in results)
        )
    rows.append(
        "Accuracy".ljust(12)
        + "".join(f"{r.weighted_accuracy:.4f}".rjust(width) for r in results)
    )
    return "\n".join([header, *rows])


def _stats_table(results: list[AblationResult]) -> str:
    titles = [_LABEL_TITLES[r.condition.label] for r in results]
    width = max(len(t) for t in titles) + 2
    header = "Metric".ljust(12) + "".join(t.rjust(width) for t in titles)
    rows = []
    for name, getter in (
        ("Mean", lambda s: s.mean),
        ("Median", lambda s: s.median),
        ("IQR", lambda s: s.iqr),
        ("SD", lambda s: s.sd),
    ):
        rows.append(
            name.ljust(12)
            + "".join(f"{getter(r.stats):.2f}".rjust(width) for r in results)
        )
    return "\n".join([header, *rows])


def document_for_results(results: Sequence[AblationResult]) -> dict:
    """Structured document for any subset of conditions, given order kept.

    Used for the on-disk artifact, which stays inspectable even when a
    partial run is later rejected by emit_report's completeness check.
    """
    return {
        "schema_version": REPORT_DOC_SCHEMA_VERSION,
        "conditions": [
            {
                "condition": r.condition.label,
                "counts": {
                    "green": r.counts[0],
                    "yellow": r.counts[1],
                    "red": r.counts[2],
                },
                "weighted_accuracy": r.weighted_accuracy,
                "per_cause_accuracy": r.per_cause_accuracy,
                "stats": r.stats.to_json(),
                "cases": [
                    {
                        "case_id": v.case_id,
                        "color": v.color.value,
                        "score": v.score,
                        "error": v.error,
                    }
                    for v in r.verdicts
                ],
            }
            for r in results
        ],
    }


def emit_report(results: Sequence[AblationResult], format: ReportFormat):
    """Render results for all eight conditions, in the fixed column order.

    TABLE yields the two text tables (verdict counts, per-cause statistics);
    DOCUMENT yields a structured dict suitable for regression diffing.
    """
    ordered = _ordered(results)
    if format is ReportFormat.TABLE:
        return (
            "Verdict counts per knowledge condition\n"
            + _counts_table(ordered)
            + "\n\nPer-cause accuracy statistics\n"
            + _stats_table(ordered)
        )
    return document_for_results(ordered)
