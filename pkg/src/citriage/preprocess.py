"""Console-log preprocessing ahead of any LLM call.

Four stages, applied in order: strip status-update lines, drop lines that
near-duplicate the latest successful build's log, keep only context windows
around failure keywords, and redact sensitive strings. Every stage is a pure
function over an immutable ConsoleLog.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Sequence

from .builds import ConsoleLog
from .errors import InvalidPattern

DEFAULT_STATUS_KEYWORDS = (
    r"^\[?\d{4}-\d{2}-\d{2}",  # timestamp prefixes
    r"^\[Pipeline\]",
    r"\[echo\]",
)

DEFAULT_FAILURE_KEYWORDS = ("failure", "error", "exception")

DEFAULT_REDACTION_RULES = (
    (r"[A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,}", "EMAIL"),
    (r"\b[iIdD]\d{6,}\b", "ID"),
    (r"\b[A-Za-z][\w-]*(?:\.[\w-]+)*\.(?:com|net|org|io|corp|local|internal)\b", "HOST"),
)


@dataclass(frozen=True)
class PreprocessConfig:
    status_keywords: Sequence[str] = DEFAULT_STATUS_KEYWORDS
    failure_keywords: Sequence[str] = DEFAULT_FAILURE_KEYWORDS
    context_radius: int = 5
    diff_word_threshold: int = 2
    redaction_rules: Sequence[tuple[str, str]] = DEFAULT_REDACTION_RULES

    def __post_init__(self):
        if self.context_radius < 0:
            raise ValueError("context_radius must be >= 0")
        if self.diff_word_threshold < 1:
            raise ValueError("diff_word_threshold must be >= 1")
        if not self.failure_keywords:
            raise ValueError("failure_keywords must be non-empty")


@dataclass(frozen=True)
class PreprocessedLog:
    """Output of the full pipeline plus per-stage line counts."""

    lines: tuple[str, ...]
    stage_counts: dict[str, int] = field(default_factory=dict)

    def text(self) -> str:
        return "\n".join(self.lines)


def _compile_all(patterns: Sequence[str]) -> list[re.Pattern]:
    compiled = []
    for pattern in patterns:
        try:
            compiled.append(re.compile(pattern))
        except re.error as exc:
            raise InvalidPattern(f"cannot compile {pattern!r}: {exc}") from None
    return compiled


def strip_status_lines(log: ConsoleLog, config: PreprocessConfig) -> ConsoleLog:
    """Drop every line matching any configured status-update pattern."""
    patterns = _compile_all(config.status_keywords)
    kept = [
        line
        for line in log.lines
        if not any(p.search(line) for p in patterns)
    ]
    return ConsoleLog.of(kept)


def _token_edit_distance(a: Sequence[str], b: Sequence[str], cap: int) -> int:
    """Levenshtein distance over word tokens, capped at ``cap``."""
    if abs(len(a) - len(b)) >= cap:
        return cap
    if a == b:
        return 0
    prev = list(range(len(b) + 1))
    for i, tok_a in enumerate(a, start=1):
        cur = [i] + [0] * len(b)
        best = cur[0]
        for j, tok_b in enumerate(b, start=1):
            cost = 0 if tok_a == tok_b else 1
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost)
            if cur[j] < best:
                best = cur[j]
        if best >= cap:
            return cap
        prev = cur
    return min(prev[-1], cap)


def diff_filter(
    failed: ConsoleLog, successful: ConsoleLog, config: PreprocessConfig
) -> ConsoleLog:
    """Remove failed-log lines within ``diff_word_threshold`` words of any
    successful-log line. Both logs are expected to be status-stripped already;
    the composed pipeline enforces that order."""
    if not successful.lines:
        return failed
    threshold = config.diff_word_threshold
    exact = set(successful.lines)
    success_tokens = [line.split() for line in successful.lines]
    kept = []
    for line in failed.lines:
        if line in exact:
            continue
        tokens = line.split()
        near = any(
            _token_edit_distance(tokens, ref, threshold) < threshold
            for ref in success_tokens
        )
        if not near:
            kept.append(line)
    return ConsoleLog.of(kept)


def keyword_window(log: ConsoleLog, config: PreprocessConfig) -> ConsoleLog:
    """Keep the union of [i - r, i + r] windows around every line containing a
    failure keyword (case-insensitive substring). Overlaps merge; lines are
    emitted once, in order."""
    keywords = [k.lower() for k in config.failure_keywords]
    radius = config.context_radius
    keep: set[int] = set()
    for i, line in enumerate(log.lines):
        lowered = line.lower()
        if any(k in lowered for k in keywords):
            lo = max(0, i - radius)
            hi = min(len(log.lines) - 1, i + radius)
            keep.update(range(lo, hi + 1))
    return ConsoleLog.of(log.lines[i] for i in sorted(keep))


def redact_lines(
    lines: Sequence[str], rules: Sequence[tuple[str, str]]
) -> tuple[str, ...]:
    """Replace every rule match with its angle-bracket tag, line by line."""
    compiled_rules = []
    for pattern, tag in rules:
        try:
            compiled_rules.append((re.compile(pattern), f"<{tag}>"))
        except re.error as exc:
            raise InvalidPattern(f"cannot compile {pattern!r}: {exc}") from None
    out = []
    for line in lines:
        for compiled, replacement in compiled_rules:
            line = compiled.sub(replacement, line)
        out.append(line)
    return tuple(out)


def redact(log: ConsoleLog, config: PreprocessConfig) -> ConsoleLog:
    """Replace every redaction-rule match with its angle-bracket tag."""
    return ConsoleLog(redact_lines(log.lines, config.redaction_rules))


def scan_for_sensitive(lines: Sequence[str], rules: Sequence[tuple[str, str]]) -> list[str]:
    """Return the lines still matching any redaction rule (empty when clean)."""
    compiled = _compile_all([pattern for pattern, _ in rules])
    return [line for line in lines if any(p.search(line) for p in compiled)]


def preprocess(
    failed: ConsoleLog,
    successful: ConsoleLog | None,
    config: PreprocessConfig,
) -> PreprocessedLog:
    """Run the full pipeline. The diff stage is skipped (recorded as a
    pass-through count) when no successful build exists."""
    counts = {"input": len(failed.lines)}
    stripped = strip_status_lines(failed, config)
    counts["strip"] = len(stripped.lines)
    if successful is not None:
        stripped_ok = strip_status_lines(successful, config)
        diffed = diff_filter(stripped, stripped_ok, config)
    else:
        diffed = stripped
    counts["diff"] = len(diffed.lines)
    windowed = keyword_window(diffed, config)
    counts["window"] = len(windowed.lines)
    redacted = redact(windowed, config)
    counts["redact"] = len(redacted.lines)
    return PreprocessedLog(lines=redacted.lines, stage_counts=counts)
