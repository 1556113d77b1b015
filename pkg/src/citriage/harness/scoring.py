"""Verdict scoring for proposed solutions.

The human judgment of the evaluation is mechanized through per-case marker
lists authored with the ground truth: markers for the correct actions,
markers for harmless extra actions, and markers for actions with tangible
negative effects. A decision tree over three predicates maps a report to
Green, Yellow, or Red.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from ..builds import BuildRef
from ..engine import TriageReport
from ..errors import MalformedFixture

TRUTHS_SCHEMA_VERSION = 1


class Rounds(Enum):
    ONE_ROUND = "one-round"
    TWO_ROUND = "two-round"


class Color(Enum):
    GREEN = "green"
    YELLOW = "yellow"
    RED = "red"


SCORE_BY_COLOR = {Color.GREEN: 1.0, Color.YELLOW: 0.5, Color.RED: 0.0}


@dataclass(frozen=True)
class GroundTruth:
    case_id: str
    entry: BuildRef
    expected_most_downstream: BuildRef
    cause_id: str
    required_markers: tuple[str, ...]
    benign_extra_markers: tuple[str, ...] = ()
    harmful_markers: tuple[str, ...] = ()
    rounds: Rounds = Rounds.ONE_ROUND

    def __post_init__(self):
        if not self.required_markers:
            raise ValueError("required_markers must be non-empty")

    def to_json(self) -> dict:
        return {
            "case_id": self.case_id,
            "entry": {
                "pipeline_name": self.entry.pipeline_name,
                "build_number": self.entry.build_number,
            },
            "expected_most_downstream": {
                "pipeline_name": self.expected_most_downstream.pipeline_name,
                "build_number": self.expected_most_downstream.build_number,
            },
            "cause_id": self.cause_id,
            "required_markers": list(self.required_markers),
            "benign_extra_markers": list(self.benign_extra_markers),
            "harmful_markers": list(self.harmful_markers),
            "rounds": self.rounds.value,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "GroundTruth":
        try:
            return cls(
                case_id=obj["case_id"],
                entry=BuildRef(
                    obj["entry"]["pipeline_name"], obj["entry"]["build_number"]
                ),
                expected_most_downstream=BuildRef(
                    obj["expected_most_downstream"]["pipeline_name"],
                    obj["expected_most_downstream"]["build_number"],
                ),
                cause_id=obj["cause_id"],
                required_markers=tuple(obj["required_markers"]),
                benign_extra_markers=tuple(obj.get("benign_extra_markers", ())),
                harmful_markers=tuple(obj.get("harmful_markers", ())),
                rounds=Rounds(obj.get("rounds", "one-round")),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedFixture(f"bad ground-truth entry: {exc}") from None


def load_truths(path) -> list[GroundTruth]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("schema_version") != TRUTHS_SCHEMA_VERSION:
        raise MalformedFixture("unsupported truths schema_version")
    return [GroundTruth.from_json(obj) for obj in doc.get("cases", [])]


def save_truths(truths, path) -> None:
    doc = {
        "schema_version": TRUTHS_SCHEMA_VERSION,
        "cases": [t.to_json() for t in truths],
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class TreePath:
    contains_correct: bool
    has_extra: bool
    harmful: bool


@dataclass(frozen=True)
class ScoredVerdict:
    case_id: str
    color: Color
    score: float
    tree_path: TreePath | None = None
    error: str | None = None


def _contains(text: str, marker: str) -> bool:
    return marker.lower() in text


def score_solution(report: TriageReport, truth: GroundTruth) -> ScoredVerdict:
    """Walk the decision tree over the report's solutions section.

    Missing any required marker is Red outright. Otherwise extra actions
    decide between Green (none), Yellow (harmless extras), and Red (an extra
    with tangible negative effects).
    """
    text = report.solutions.lower()
    contains_correct = all(_contains(text, m) for m in truth.required_markers)
    extra_pool = tuple(truth.benign_extra_markers) + tuple(truth.harmful_markers)
    has_extra = any(_contains(text, m) for m in extra_pool)
    harmful = any(_contains(text, m) for m in truth.harmful_markers)
    path = TreePath(contains_correct, has_extra, harmful)

    if not contains_correct:
        color = Color.RED
    elif not has_extra:
        color = Color.GREEN
    elif harmful:
        color = Color.RED
    else:
        color = Color.YELLOW
    return ScoredVerdict(
        case_id=truth.case_id,
        color=color,
        score=SCORE_BY_COLOR[color],
        tree_path=path,
    )
