"""Domain types for hierarchical CI builds and the file-backed build store.

A store holds one build per (pipeline name, build number) pair, each with its
raw console log and an optional link to the parent build that triggered it.
Stores are loaded from a single JSON fixture document and are read-only
afterwards, so concurrent reads need no locking.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterator, Mapping

from .errors import MalformedFixture, NotFound

FIXTURE_SCHEMA_VERSION = 1


class BuildStatus(Enum):
    SUCCESS = "success"
    FAILURE = "failure"
    RUNNING = "running"
    ABORTED = "aborted"


class BuildKind(Enum):
    MAIN_PIPELINE = "main_pipeline"
    SUB_PIPELINE = "sub_pipeline"
    REMOTE_PIPELINE = "remote_pipeline"
    FREESTYLE_JOB = "freestyle_job"


@dataclass(frozen=True, order=True)
class BuildRef:
    """Address of one build: pipeline name (case-sensitive) plus build number."""

    pipeline_name: str
    build_number: int

    def __post_init__(self):
        if not self.pipeline_name:
            raise ValueError("pipeline_name must be non-empty")
        if self.build_number < 1:
            raise ValueError("build_number must be >= 1")

    def __str__(self) -> str:
        return f"{self.pipeline_name} #{self.build_number}"


@dataclass(frozen=True)
class ConsoleLog:
    """Raw console output, original line order preserved."""

    lines: tuple[str, ...] = ()

    @classmethod
    def of(cls, lines) -> "ConsoleLog":
        return cls(tuple(lines))

    def __len__(self) -> int:
        return len(self.lines)

    def __iter__(self):
        return iter(self.lines)

    def text(self) -> str:
        return "\n".join(self.lines)


@dataclass(frozen=True)
class RecoveryState:
    """Resume data persisted when a pipeline aborts: the failed step and the
    parameters a restarted run needs to skip already succeeded steps."""

    failed_step_index: int
    resume_parameters: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.failed_step_index < 0:
            raise ValueError("failed_step_index must be >= 0")


@dataclass(frozen=True)
class PipelineBuild:
    ref: BuildRef
    status: BuildStatus
    kind: BuildKind
    console_log: ConsoleLog
    parent: BuildRef | None = None
    recovery: RecoveryState | None = None
    step_count: int | None = None

    def __post_init__(self):
        if self.kind is BuildKind.MAIN_PIPELINE and self.parent is not None:
            raise ValueError("a main pipeline build cannot have a parent")
        if (
            self.recovery is not None
            and self.step_count is not None
            and self.recovery.failed_step_index >= self.step_count
        ):
            raise ValueError("recovery step index beyond declared step count")


class BuildStore:
    """Read-only store of builds, indexed by BuildRef.

    The file-backed implementation below is the test double for a CI server
    API; a production adapter only needs to honor the same lookups.
    """

    def get_build(self, ref: BuildRef) -> PipelineBuild:
        raise NotImplementedError

    def get_console_log(self, ref: BuildRef) -> ConsoleLog:
        raise NotImplementedError

    def get_latest_successful_build(self, pipeline_name: str) -> PipelineBuild | None:
        raise NotImplementedError

    def iter_builds(self) -> Iterator[PipelineBuild]:
        raise NotImplementedError

    def failed_children(self, ref: BuildRef) -> list[PipelineBuild]:
        """Builds with Failure status whose parent link points at ``ref``."""
        raise NotImplementedError


class FixtureBuildStore(BuildStore):
    def __init__(self, builds: Mapping[BuildRef, PipelineBuild]):
        self._builds = dict(builds)
        self._children: dict[BuildRef, list[BuildRef]] = {}
        for build in self._builds.values():
            if build.parent is not None:
                self._children.setdefault(build.parent, []).append(build.ref)

    def get_build(self, ref: BuildRef) -> PipelineBuild:
        try:
            return self._builds[ref]
        except KeyError:
            raise NotFound(f"no build {ref}") from None

    def get_console_log(self, ref: BuildRef) -> ConsoleLog:
        return self.get_build(ref).console_log

    def get_latest_successful_build(self, pipeline_name: str) -> PipelineBuild | None:
        best: PipelineBuild | None = None
        for build in self._builds.values():
            if build.ref.pipeline_name != pipeline_name:
                continue
            if build.status is not BuildStatus.SUCCESS:
                continue
            if best is None or build.ref.build_number > best.ref.build_number:
                best = build
        return best

    def iter_builds(self) -> Iterator[PipelineBuild]:
        return iter(self._builds.values())

    def failed_children(self, ref: BuildRef) -> list[PipelineBuild]:
        out = []
        for child_ref in self._children.get(ref, ()):
            child = self._builds[child_ref]
            if child.status is BuildStatus.FAILURE:
                out.append(child)
        return out

    def __len__(self) -> int:
        return len(self._builds)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FixtureBuildStore):
            return NotImplemented
        return self._builds == other._builds


def _ref_from_json(obj, context: str) -> BuildRef:
    if not isinstance(obj, dict):
        raise MalformedFixture(f"{context}: ref must be an object")
    try:
        name = obj["pipeline_name"]
        number = obj["build_number"]
    except KeyError as exc:
        raise MalformedFixture(f"{context}: ref missing {exc}") from None
    if not isinstance(name, str) or not isinstance(number, int) or isinstance(number, bool):
        raise MalformedFixture(f"{context}: ref fields have wrong types")
    try:
        return BuildRef(name, number)
    except ValueError as exc:
        raise MalformedFixture(f"{context}: {exc}") from None


def _build_from_json(obj) -> PipelineBuild:
    if not isinstance(obj, dict):
        raise MalformedFixture("build entry must be an object")
    ref = _ref_from_json(
        {"pipeline_name": obj.get("pipeline_name"), "build_number": obj.get("build_number")},
        "build entry",
    )
    context = str(ref)
    try:
        status = BuildStatus(obj.get("status"))
        kind = BuildKind(obj.get("kind"))
    except ValueError as exc:
        raise MalformedFixture(f"{context}: {exc}") from None
    log = obj.get("log", [])
    if not isinstance(log, list) or any(not isinstance(line, str) for line in log):
        raise MalformedFixture(f"{context}: log must be a list of strings")
    parent = None
    if obj.get("parent") is not None:
        parent = _ref_from_json(obj["parent"], context)
    recovery = None
    if obj.get("recovery") is not None:
        rec = obj["recovery"]
        if not isinstance(rec, dict) or not isinstance(rec.get("failed_step_index"), int):
            raise MalformedFixture(f"{context}: malformed recovery block")
        params = rec.get("resume_parameters", {})
        if not isinstance(params, dict):
            raise MalformedFixture(f"{context}: resume_parameters must be a map")
        try:
            recovery = RecoveryState(rec["failed_step_index"], dict(params))
        except ValueError as exc:
            raise MalformedFixture(f"{context}: {exc}") from None
    step_count = obj.get("step_count")
    if step_count is not None and (not isinstance(step_count, int) or step_count < 1):
        raise MalformedFixture(f"{context}: step_count must be a positive integer")
    try:
        return PipelineBuild(
            ref=ref,
            status=status,
            kind=kind,
            console_log=ConsoleLog.of(log),
            parent=parent,
            recovery=recovery,
            step_count=step_count,
        )
    except ValueError as exc:
        raise MalformedFixture(f"{context}: {exc}") from None


def load_fixture(path) -> FixtureBuildStore:
    """Load a build store from a fixture document, validating hierarchy links.

    Raises MalformedFixture on schema violations, duplicate refs, or a parent
    reference that is absent from the file. Unreadable paths raise OSError.
    """
    raw = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise MalformedFixture(f"not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("schema_version") != FIXTURE_SCHEMA_VERSION:
        raise MalformedFixture("missing or unsupported schema_version")
    entries = doc.get("builds")
    if not isinstance(entries, list):
        raise MalformedFixture("top-level 'builds' must be a list")

    builds: dict[BuildRef, PipelineBuild] = {}
    for entry in entries:
        build = _build_from_json(entry)
        if build.ref in builds:
            raise MalformedFixture(f"duplicate build {build.ref}")
        builds[build.ref] = build
    for build in builds.values():
        if build.parent is not None and build.parent not in builds:
            raise MalformedFixture(f"{build.ref}: dangling parent {build.parent}")
    return FixtureBuildStore(builds)


def build_to_json(build: PipelineBuild) -> dict:
    obj: dict = {
        "pipeline_name": build.ref.pipeline_name,
        "build_number": build.ref.build_number,
        "kind": build.kind.value,
        "status": build.status.value,
        "parent": None,
        "log": list(build.console_log.lines),
    }
    if build.parent is not None:
        obj["parent"] = {
            "pipeline_name": build.parent.pipeline_name,
            "build_number": build.parent.build_number,
        }
    if build.recovery is not None:
        obj["recovery"] = {
            "failed_step_index": build.recovery.failed_step_index,
            "resume_parameters": dict(build.recovery.resume_parameters),
        }
    if build.step_count is not None:
        obj["step_count"] = build.step_count
    return obj


def store_to_document(store: BuildStore) -> dict:
    builds = sorted(store.iter_builds(), key=lambda b: b.ref)
    return {
        "schema_version": FIXTURE_SCHEMA_VERSION,
        "builds": [build_to_json(b) for b in builds],
    }


def save_fixture(store: BuildStore, path) -> None:
    """Serialize a store back to the fixture format (round-trips with load)."""
    doc = store_to_document(store)
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
