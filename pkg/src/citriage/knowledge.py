"""Domain knowledge for triage prompts.

Three knowledge types are supported: a pipeline-information document, a
failure-management-instructions document, and historical records of previous
failures. Records live in an append-only JSONL database and are ranked for a
new failure by TF-IDF cosine similarity between the record's indicative log
lines and the preprocessed failed log.
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .errors import InconsistentCondition, MalformedFixture
from .preprocess import PreprocessedLog

HISTORY_SCHEMA_VERSION = 1

NO_KNOWLEDGE_TEXT = "No additional domain knowledge is available."

PI_HEADER = "## Pipeline Information"
FMI_HEADER = "## Failure-Management Instructions"
HR_HEADER = "## Historical Records of Related Failed Builds"


@dataclass(frozen=True)
class AblationCondition:
    """One subset of the three knowledge types supplied to a triage prompt."""

    include_pi: bool = False
    include_fmi: bool = False
    include_hr: bool = False

    @property
    def label(self) -> str:
        parts = []
        if self.include_pi:
            parts.append("pi")
        if self.include_fmi:
            parts.append("fmi")
        if self.include_hr:
            parts.append("hr")
        return "+".join(parts) if parts else "none"

    @classmethod
    def from_label(cls, label: str) -> "AblationCondition":
        cleaned = label.strip().lower()
        if cleaned == "none":
            return cls()
        parts = set(cleaned.replace(",", "+").split("+"))
        unknown = parts - {"pi", "fmi", "hr"}
        if unknown or not parts:
            raise ValueError(f"unknown knowledge condition {label!r}")
        return cls("pi" in parts, "fmi" in parts, "hr" in parts)


ALL_CONDITIONS: tuple[AblationCondition, ...] = tuple(
    AblationCondition.from_label(label)
    for label in ("none", "pi", "fmi", "hr", "pi+fmi", "pi+hr", "fmi+hr", "pi+fmi+hr")
)


@dataclass(frozen=True)
class HistoryRecord:
    """One recorded failure: where it surfaced, why, and how it was fixed."""

    id: str
    most_downstream_job: str
    root_cause: str
    indicative_lines: tuple[str, ...]
    solution: str
    recorded_at: datetime

    def __post_init__(self):
        if not self.most_downstream_job:
            raise ValueError("most_downstream_job must be non-empty")
        if not self.indicative_lines:
            raise ValueError("indicative_lines must be non-empty")

    def dedup_key(self) -> tuple:
        return (
            self.most_downstream_job,
            self.root_cause,
            self.solution,
            self.indicative_lines,
        )

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "most_downstream_job": self.most_downstream_job,
            "root_cause": self.root_cause,
            "indicative_lines": list(self.indicative_lines),
            "solution": self.solution,
            "recorded_at": self.recorded_at.isoformat(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "HistoryRecord":
        try:
            return cls(
                id=obj["id"],
                most_downstream_job=obj["most_downstream_job"],
                root_cause=obj["root_cause"],
                indicative_lines=tuple(obj["indicative_lines"]),
                solution=obj["solution"],
                recorded_at=datetime.fromisoformat(obj["recorded_at"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedFixture(f"bad history record: {exc}") from None


class AddStatus(Enum):
    ADDED = "added"
    DUPLICATE = "duplicate"


class HistoryDb:
    """Append-only store of HistoryRecords backed by a JSONL file.

    The first line is a schema header; each following line is one record.
    Reads are lock-free over the in-memory index; writes take an exclusive
    lock (single-writer, multi-reader contract within one process).
    """

    def __init__(self, path):
        self._path = Path(path)
        self._lock = threading.Lock()
        self._records: list[HistoryRecord] = []
        self._keys: set[tuple] = set()
        if self._path.exists():
            self._load()
        else:
            self._path.write_text(
                json.dumps({"schema_version": HISTORY_SCHEMA_VERSION}) + "\n",
                encoding="utf-8",
            )

    def _load(self) -> None:
        lines = self._path.read_text(encoding="utf-8").splitlines()
        if not lines:  # empty file counts as a fresh db
            self._path.write_text(
                json.dumps({"schema_version": HISTORY_SCHEMA_VERSION}) + "\n",
                encoding="utf-8",
            )
            return
        try:
            header = json.loads(lines[0])
        except json.JSONDecodeError as exc:
            raise MalformedFixture(f"bad history header: {exc}") from None
        if header.get("schema_version") != HISTORY_SCHEMA_VERSION:
            raise MalformedFixture("unsupported history schema_version")
        for line in lines[1:]:
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedFixture(f"bad history line: {exc}") from None
            record = HistoryRecord.from_json(obj)
            self._records.append(record)
            self._keys.add(record.dedup_key())

    @property
    def path(self) -> Path:
        return self._path

    def __len__(self) -> int:
        return len(self._records)

    def records(self) -> tuple[HistoryRecord, ...]:
        return tuple(self._records)

    def add_record(self, record: HistoryRecord) -> AddStatus:
        """Persist a record unless an equal one is already stored."""
        with self._lock:
            if record.dedup_key() in self._keys:
                return AddStatus.DUPLICATE
            with self._path.open("a", encoding="utf-8") as handle:
                handle.write(json.dumps(record.to_json()) + "\n")
            self._records.append(record)
            self._keys.add(record.dedup_key())
            return AddStatus.ADDED

    def query_by_job(self, job_name: str) -> list[HistoryRecord]:
        """All records for one most-downstream job, newest first."""
        if not job_name:
            raise ValueError("job_name must be non-empty")
        hits = [
            (idx, rec)
            for idx, rec in enumerate(self._records)
            if rec.most_downstream_job == job_name
        ]
        hits.sort(key=lambda pair: (pair[1].recorded_at, pair[0]), reverse=True)
        return [rec for _, rec in hits]

    def get(self, record_id: str) -> HistoryRecord:
        for rec in self._records:
            if rec.id == record_id:
                return rec
        raise KeyError(record_id)


@dataclass(frozen=True)
class KnowledgeBase:
    pipeline_information: str
    failure_management_instructions: str
    finder_knowledge: str
    history: HistoryDb


@dataclass(frozen=True)
class SimilarityScore:
    record_id: str
    score: float


def _tokenize(text: str) -> list[str]:
    return text.lower().split()


class TfIdfEmbedder:
    """Term-frequency vectors with smoothed IDF fit over a document batch.

    Deterministic and dependency-free; a remote embedding service can be
    plugged in behind the same fit/embed surface.
    """

    def __init__(self):
        self._idf: dict[str, float] = {}
        self._n_docs = 0

    def fit(self, documents: Sequence[str]) -> None:
        df: dict[str, int] = {}
        for doc in documents:
            for term in set(_tokenize(doc)):
                df[term] = df.get(term, 0) + 1
        self._n_docs = len(documents)
        self._idf = {
            term: math.log((1 + self._n_docs) / (1 + count)) + 1.0
            for term, count in df.items()
        }

    def _idf_of(self, term: str) -> float:
        idf = self._idf.get(term)
        if idf is None:
            idf = math.log(float(1 + self._n_docs)) + 1.0
        return idf

    def embed(self, text: str) -> dict[str, float]:
        counts: dict[str, int] = {}
        for term in _tokenize(text):
            counts[term] = counts.get(term, 0) + 1
        return {term: count * self._idf_of(term) for term, count in counts.items()}


def cosine_similarity(u: dict[str, float], v: dict[str, float]) -> float:
    if u == v:
        return 1.0 if u else 0.0
    dot = sum(weight * v[term] for term, weight in u.items() if term in v)
    norm_u = math.sqrt(sum(w * w for w in u.values()))
    norm_v = math.sqrt(sum(w * w for w in v.values()))
    if norm_u == 0.0 or norm_v == 0.0:
        return 0.0
    return max(0.0, min(1.0, dot / (norm_u * norm_v)))


def rank_top_k(
    candidates: Sequence[HistoryRecord],
    query_log: PreprocessedLog | str,
    k: int,
    embedder: TfIdfEmbedder | None = None,
) -> list[SimilarityScore]:
    """Score candidates against the query log and return the best ``k``.

    Scores come from cosine similarity between the embedder's vectors for the
    query text and each record's joined indicative lines. Ties are broken by
    recency (newer record first), then by candidate order.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not candidates:
        return []
    if embedder is None:
        embedder = TfIdfEmbedder()
    query_text = query_log.text() if isinstance(query_log, PreprocessedLog) else query_log
    docs = ["\n".join(rec.indicative_lines) for rec in candidates]
    embedder.fit(docs)
    query_vec = embedder.embed(query_text)
    scored = []
    for idx, (rec, doc) in enumerate(zip(candidates, docs)):
        score = cosine_similarity(query_vec, embedder.embed(doc))
        scored.append((score, rec, idx))
    scored.sort(key=lambda item: (-item[0], -item[1].recorded_at.timestamp(), item[2]))
    return [SimilarityScore(rec.id, score) for score, rec, _ in scored[:k]]


def _format_record(index: int, record: HistoryRecord) -> str:
    lines = [
        f"### Record {index}: {record.most_downstream_job}",
        f"Root cause: {record.root_cause}",
        "Indicative log lines:",
    ]
    lines.extend(f"  {line}" for line in record.indicative_lines)
    lines.append(f"Solution: {record.solution}")
    return "\n".join(lines)


def compose_knowledge(
    kb: KnowledgeBase,
    condition: AblationCondition,
    ranked_records: Sequence[HistoryRecord] | None = None,
) -> str:
    """Assemble the prompt's domain-knowledge block for one condition.

    Sections always appear in PI, FMI, HR order. ``ranked_records`` must be
    supplied exactly when the condition includes historical records (an empty
    sequence is legal: it means no history exists for the job).
    """
    if condition.include_hr and ranked_records is None:
        raise InconsistentCondition("condition includes HR but no records were supplied")
    if not condition.include_hr and ranked_records is not None:
        raise InconsistentCondition("records supplied but condition excludes HR")

    sections: list[str] = []
    if condition.include_pi:
        sections.append(f"{PI_HEADER}\n{kb.pipeline_information}")
    if condition.include_fmi:
        sections.append(f"{FMI_HEADER}\n{kb.failure_management_instructions}")
    if condition.include_hr:
        assert ranked_records is not None
        if ranked_records:
            blocks = "\n\n".join(
                _format_record(i, rec) for i, rec in enumerate(ranked_records, start=1)
            )
        else:
            blocks = "No historical records are available for this job."
        sections.append(f"{HR_HEADER}\n{blocks}")
    if not sections:
        return NO_KNOWLEDGE_TEXT
    return "\n\n".join(sections)


def load_knowledge_base(
    pi_path, fmi_path, finder_path, history_path
) -> KnowledgeBase:
    return KnowledgeBase(
        pipeline_information=Path(pi_path).read_text(encoding="utf-8").strip(),
        failure_management_instructions=Path(fmi_path).read_text(encoding="utf-8").strip(),
        finder_knowledge=Path(finder_path).read_text(encoding="utf-8").strip(),
        history=HistoryDb(history_path),
    )


def import_records(db: HistoryDb, records: Iterable[HistoryRecord]) -> dict[str, int]:
    """Bulk add; returns counts of added vs duplicate records."""
    counts = {"added": 0, "duplicate": 0}
    for record in records:
        status = db.add_record(record)
        counts[status.value] += 1
    return counts


def utcnow() -> datetime:
    return datetime.now(timezone.utc)
