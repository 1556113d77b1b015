"""Locating the most downstream failed job.

Two routes exist: a deterministic walk over marker lines parsed from console
logs, and an agentic loop that asks an LLM finder to name the failed child at
each level, validating every claim against the build store. A hybrid policy
prefers the deterministic route and falls back to the agentic one when the
marker grammar misses.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

from .builds import BuildRef, BuildStatus, BuildStore, ConsoleLog
from .errors import (
    AmbiguousChain,
    DepthExceeded,
    EntryNotFailed,
    HallucinatedChild,
    InvalidGrammar,
    NotFound,
    RoundsExceeded,
    UnparseableReply,
)
from .gateway import (
    FINDER_INSTRUCTION,
    FINDER_TERMINAL_SENTINEL,
    ChatGateway,
    ChatMessage,
    Role,
)

DEFAULT_DOWNSTREAM_PATTERN = r"^Starting building: (?P<name>\S+) #(?P<number>\d+)"
DEFAULT_FAILURE_INDICATOR_PATTERN = (
    r"^(?P<name>\S+) #(?P<number>\d+) completed with result FAILURE"
)

CORRECTIVE_SENTENCE = "The job you named does not exist; re-read the log."

DEFAULT_MAX_DEPTH = 8
DEFAULT_MAX_ROUNDS = 8


class ChainMethod(Enum):
    DETERMINISTIC = "deterministic"
    AGENTIC = "agentic"
    HYBRID = "hybrid"


@dataclass(frozen=True)
class DownstreamChain:
    """Ordered path from the triage entry build down to the most downstream
    failed job."""

    links: tuple[BuildRef, ...]
    method: ChainMethod

    def __post_init__(self):
        if not self.links:
            raise ValueError("a chain has at least its entry build")

    @property
    def most_downstream(self) -> BuildRef:
        return self.links[-1]

    def __len__(self) -> int:
        return len(self.links)


@dataclass(frozen=True)
class DownstreamMarker:
    child: BuildRef
    raw_line: str
    line_index: int


@dataclass(frozen=True)
class MarkerGrammar:
    """The configurable line patterns identifying downstream-job references
    and their failure status. Both patterns must expose ``name`` and
    ``number`` named captures; the downstream pattern exactly those two."""

    downstream_pattern: str = DEFAULT_DOWNSTREAM_PATTERN
    failure_indicator_pattern: str = DEFAULT_FAILURE_INDICATOR_PATTERN

    def compile(self) -> tuple[re.Pattern, re.Pattern]:
        try:
            downstream = re.compile(self.downstream_pattern)
            indicator = re.compile(self.failure_indicator_pattern)
        except re.error as exc:
            raise InvalidGrammar(f"pattern does not compile: {exc}") from None
        if set(downstream.groupindex) != {"name", "number"}:
            raise InvalidGrammar(
                "downstream_pattern must capture exactly the named groups 'name' and 'number'"
            )
        if not {"name", "number"} <= set(indicator.groupindex):
            raise InvalidGrammar(
                "failure_indicator_pattern must capture the named groups 'name' and 'number'"
            )
        return downstream, indicator


def parse_downstream_markers(
    log: ConsoleLog, grammar: MarkerGrammar
) -> list[DownstreamMarker]:
    """Extract, in log order, every downstream-job line whose referenced child
    is flagged failed somewhere in the same log."""
    downstream, indicator = grammar.compile()
    failed: set[BuildRef] = set()
    for line in log.lines:
        match = indicator.search(line)
        if match:
            failed.add(BuildRef(match.group("name"), int(match.group("number"))))
    markers = []
    for index, line in enumerate(log.lines):
        match = downstream.search(line)
        if not match:
            continue
        child = BuildRef(match.group("name"), int(match.group("number")))
        if child in failed:
            markers.append(DownstreamMarker(child=child, raw_line=line, line_index=index))
    return markers


def resolve_chain_deterministic(
    store: BuildStore,
    entry: BuildRef,
    grammar: MarkerGrammar,
    max_depth: int = DEFAULT_MAX_DEPTH,
) -> DownstreamChain:
    """Follow the unique failed marker per level until a log without one.

    Raises AmbiguousChain when a level carries more than one failed marker
    (pipelines abort on first failure, so multiplicity means fixture
    corruption rather than a tie to break).
    """
    entry_build = store.get_build(entry)
    if entry_build.status is not BuildStatus.FAILURE:
        raise EntryNotFailed(f"{entry} has status {entry_build.status.value}")
    links = [entry]
    current = entry_build
    while True:
        markers = parse_downstream_markers(current.console_log, grammar)
        if not markers:
            break
        if len(markers) > 1:
            raise AmbiguousChain(
                f"{current.ref}: {len(markers)} failed downstream markers at one level"
            )
        child_ref = markers[0].child
        if len(links) + 1 > max_depth:
            raise DepthExceeded(f"chain exceeds max depth {max_depth}")
        current = store.get_build(child_ref)  # NotFound on dangling marker
        links.append(child_ref)
    return DownstreamChain(links=tuple(links), method=ChainMethod.DETERMINISTIC)


# ---------------------------------------------------------------------------
# Agentic route
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FinderReport:
    """Finder outcome: the failed child at this level, or terminal."""

    child: BuildRef | None = None

    @property
    def is_terminal(self) -> bool:
        return self.child is None


_NAME_NUMBER_RE = re.compile(r"(?P<name>[\w./-]+)\s*#(?P<number>\d+)")
_VERBOSE_REPORT_RE = re.compile(
    r"name\W+(?P<name>[\w./-]+).*?build\s*(?:number)?\D{0,12}(?P<number>\d+)",
    re.IGNORECASE | re.DOTALL,
)


def _finder_prompt(log: ConsoleLog, knowledge: str | None, corrective: bool) -> str:
    parts = [FINDER_INSTRUCTION, "", "Console log:", log.text(), ""]
    if knowledge:
        parts.extend(["Domain knowledge:", knowledge, ""])
    if corrective:
        parts.append(CORRECTIVE_SENTENCE)
    return "\n".join(parts).rstrip("\n")


def parse_finder_reply(content: str) -> FinderReport:
    """Turn a finder reply into a report; raises UnparseableReply when the
    text carries neither the terminal sentinel nor a name+number."""
    if FINDER_TERMINAL_SENTINEL.lower() in content.lower():
        return FinderReport(child=None)
    match = _NAME_NUMBER_RE.search(content) or _VERBOSE_REPORT_RE.search(content)
    if match is None:
        raise UnparseableReply(f"finder reply names no job: {content[:120]!r}")
    return FinderReport(child=BuildRef(match.group("name"), int(match.group("number"))))


def finder_step(
    store: BuildStore,
    target: BuildRef,
    gateway: ChatGateway,
    knowledge: str | None = None,
    corrective: bool = False,
) -> FinderReport:
    """One finder call: send the target's raw log with the finder instruction
    (plus the optional domain-knowledge block) and parse the reply."""
    build = store.get_build(target)
    prompt = _finder_prompt(build.console_log, knowledge, corrective)
    reply = gateway.complete([ChatMessage(role=Role.USER, content=prompt)])
    return parse_finder_reply(reply.content)


def resolve_chain_agentic(
    store: BuildStore,
    entry: BuildRef,
    gateway: ChatGateway,
    knowledge: str | None = None,
    max_rounds: int = DEFAULT_MAX_ROUNDS,
) -> DownstreamChain:
    """Coordinator loop over finder calls, one level per round.

    Every child the finder names is validated against the store before the
    walk continues; a nonexistent claim gets one corrective retry and then
    fails hard. The returned chain therefore never contains a ref the store
    does not know.
    """
    entry_build = store.get_build(entry)
    if entry_build.status is not BuildStatus.FAILURE:
        raise EntryNotFailed(f"{entry} has status {entry_build.status.value}")
    links = [entry]
    current = entry
    for _ in range(max_rounds):
        report = finder_step(store, current, gateway, knowledge)
        if report.is_terminal:
            return DownstreamChain(links=tuple(links), method=ChainMethod.AGENTIC)
        child = report.child
        if not _known(store, child):
            report = finder_step(store, current, gateway, knowledge, corrective=True)
            if report.is_terminal:
                return DownstreamChain(links=tuple(links), method=ChainMethod.AGENTIC)
            child = report.child
            if not _known(store, child):
                raise HallucinatedChild(f"finder twice named unknown build {child}")
        links.append(child)
        current = child
    raise RoundsExceeded(f"no terminal report within {max_rounds} rounds")


def _known(store: BuildStore, ref: BuildRef) -> bool:
    try:
        store.get_build(ref)
        return True
    except NotFound:
        return False


# ---------------------------------------------------------------------------
# Hybrid policy
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ResolveLimits:
    max_depth: int = DEFAULT_MAX_DEPTH
    max_rounds: int = DEFAULT_MAX_ROUNDS


def resolve_chain_hybrid(
    store: BuildStore,
    entry: BuildRef,
    grammar: MarkerGrammar,
    gateway: ChatGateway,
    knowledge: str | None = None,
    limits: ResolveLimits = ResolveLimits(),
) -> DownstreamChain:
    """Deterministic first; agentic fallback when marker parsing misses.

    Fallback triggers: a dangling marker, an ambiguous level, or a chain that
    stops at a build the store says has a failed child (the grammar missed a
    drifted marker format). The LLM is never called on the clean path.
    """
    try:
        chain = resolve_chain_deterministic(store, entry, grammar, limits.max_depth)
    except (NotFound, AmbiguousChain):
        chain = None
    if chain is not None and not store.failed_children(chain.most_downstream):
        return chain
    agentic = resolve_chain_agentic(store, entry, gateway, knowledge, limits.max_rounds)
    return DownstreamChain(links=agentic.links, method=ChainMethod.HYBRID)
